#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "varvol/errors.hpp"

namespace varvol::autodiff {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

namespace detail {

/// Storage shared between a Tensor handle and the tape records that reference it.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the first gradient is accumulated
    bool requires_grad = false;
    bool leaf = true;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

/// Dense row-major tensor of doubles (rank 0, 1 or 2) with an optional gradient slot.
///
/// Copies are shallow: two Tensor handles copied from each other refer to the
/// same storage, which is what lets the tape write gradients into parameters.
class Tensor {
public:
    Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
        : node_(std::make_shared<detail::Node>()) {
        if (shape.size() > 2) {
            throw ShapeError("tensor", {shape}, "rank above 2 is not supported");
        }
        if (shape_size(shape) != data.size()) {
            throw ShapeError("tensor", {shape}, "data length " + std::to_string(data.size()) +
                                                    " does not match shape");
        }
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor(Shape{}, {value}, requires_grad);
    }
    static Tensor vector(std::vector<double> values, bool requires_grad = false) {
        const std::size_t n = values.size();
        return Tensor(Shape{n}, std::move(values), requires_grad);
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false) {
        return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
    }
    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const std::size_t n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    const Shape& shape() const noexcept { return node_->shape; }
    std::size_t rank() const noexcept { return node_->shape.size(); }
    std::size_t size() const noexcept { return node_->data.size(); }
    std::size_t rows() const { return rank() == 2 ? shape()[0] : 1; }
    std::size_t cols() const { return rank() == 0 ? 1 : shape().back(); }

    std::span<const double> data() const noexcept { return node_->data; }
    /// Writable view of the values; intended for leaves (parameters, inputs).
    std::span<double> mutable_data() noexcept { return node_->data; }
    double operator[](std::size_t i) const { return node_->data[i]; }

    double item() const {
        if (size() != 1) throw ShapeError("item", {shape()}, "tensor is not a scalar");
        return node_->data[0];
    }

    bool requires_grad() const noexcept { return node_->requires_grad; }
    void set_requires_grad(bool flag) noexcept { node_->requires_grad = flag; }
    bool is_leaf() const noexcept { return node_->leaf; }

    bool has_grad() const noexcept { return !node_->grad.empty(); }
    std::span<const double> grad() const noexcept { return node_->grad; }
    std::span<double> mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() noexcept { node_->grad.clear(); }

    /// Copy of the values with no gradient history.
    Tensor detach() const { return Tensor(shape(), node_->data, false); }

    bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

private:
    explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

    detail::NodePtr node_;

    friend class Tape;
    friend Tensor make_result(Shape, std::vector<double>, bool);
    friend const detail::NodePtr& node_of(const Tensor&);
};

inline const detail::NodePtr& node_of(const Tensor& t) { return t.node_; }

/// Non-leaf tensor produced by an operation.
inline Tensor make_result(Shape shape, std::vector<double> data, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    node->leaf = false;
    return Tensor(std::move(node));
}

}  // namespace varvol::autodiff
