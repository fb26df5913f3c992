#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varvol/autodiff/tensor.hpp"

namespace varvol::autodiff {

/// Named trainable tensors, kept in insertion order.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(std::string name, Tensor tensor) {
        if (index_.contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
        tensor.set_requires_grad(true);
        index_.emplace(name, entries_.size());
        entries_.push_back(Entry{std::move(name), std::move(tensor)});
    }

    bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

    const Tensor& at(std::string_view name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
        return entries_[it->second].tensor;
    }

    Tensor& at(std::string_view name) {
        return const_cast<Tensor&>(std::as_const(*this).at(name));
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    /// Adds every entry of `other` under `prefix`; storage is shared, not copied.
    void merge(const ParamStore& other, std::string_view prefix) {
        for (const auto& e : other.entries_) add(std::string(prefix) + e.name, e.tensor);
    }

    /// Deep copy of values (gradients are not copied).
    ParamStore clone() const {
        ParamStore out;
        for (const auto& e : entries_) out.add(e.name, e.tensor.detach());
        return out;
    }

    /// Overwrites values in place from a store with the same names and shapes.
    void assign_values(const ParamStore& other) {
        if (other.size() != size()) throw std::invalid_argument("parameter stores differ in size");
        for (auto& e : entries_) {
            const Tensor& src = other.at(e.name);
            if (src.shape() != e.tensor.shape()) {
                throw ShapeError("assign_values", {e.tensor.shape(), src.shape()}, e.name);
            }
            std::copy(src.data().begin(), src.data().end(), e.tensor.mutable_data().begin());
        }
    }

    bool values_equal(const ParamStore& other) const {
        if (other.size() != size()) return false;
        for (const auto& e : entries_) {
            if (!other.contains(e.name)) return false;
            const auto a = e.tensor.data();
            const auto b = other.at(e.name).data();
            if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& e : params.entries()) {
        for (double g : e.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
        const double factor = max_norm / norm;
        for (const auto& e : params.entries()) {
            if (!e.tensor.has_grad()) continue;
            Tensor handle = e.tensor;
            for (double& g : handle.mutable_grad()) g *= factor;
        }
    }
    return norm;
}

}  // namespace varvol::autodiff
