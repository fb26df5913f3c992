#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "varvol/autodiff.hpp"
#include "varvol/random.hpp"

namespace varvol::nn {

using autodiff::ParamStore;
using autodiff::Tensor;

enum class Activation { identity, tanh, relu };

inline Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + std::string(name));
}

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    return "identity";
}

struct MlpSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 1;
    Activation hidden_activation = Activation::tanh;
    Activation output_activation = Activation::identity;

    void validate() const {
        if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("MlpSpec: dims must be >= 1");
        for (auto h : hidden_dims) {
            if (h == 0) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
        }
    }

    /// Layer i maps layer_dims()[i] -> layer_dims()[i+1].
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims{input_dim};
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(output_dim);
        return dims;
    }
};

struct GruSpec {
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 1;

    void validate() const {
        if (input_dim == 0 || hidden_dim == 0) throw std::invalid_argument("GruSpec: dims must be >= 1");
    }
};

struct GruState {
    Tensor h;

    static GruState zeros(std::size_t hidden_dim) {
        return GruState{Tensor::zeros({hidden_dim})};
    }
};

namespace detail {

inline Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_out * fan_in);
    for (double& v : w) v = rng.uniform(-bound, bound);
    return Tensor::matrix(fan_out, fan_in, std::move(w));
}

inline Tensor activate(const Tensor& x, Activation a) {
    switch (a) {
        case Activation::tanh: return autodiff::tanh(x);
        case Activation::relu: return autodiff::relu(x);
        case Activation::identity: return x;
    }
    return x;
}

inline const Tensor& param(const ParamStore& params, std::string_view prefix, std::string_view name) {
    std::string key;
    key.reserve(prefix.size() + name.size());
    key.append(prefix).append(name);
    return params.at(key);
}

inline void check_vector(const char* op, const Tensor& x, std::size_t expected) {
    if (x.rank() != 1 || x.size() != expected) {
        throw ShapeError(op, {x.shape(), {expected}}, "expected a vector of length " +
                                                          std::to_string(expected));
    }
}

}  // namespace detail

/// Xavier-uniform weights ("layer{i}.weight", shape [out, in]) and zero biases
/// ("layer{i}.bias").
inline ParamStore init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamStore store;
    const auto dims = spec.layer_dims();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::string base = "layer" + std::to_string(i);
        store.add(base + ".weight", detail::xavier_uniform(dims[i + 1], dims[i], rng));
        store.add(base + ".bias", Tensor::zeros({dims[i + 1]}));
    }
    return store;
}

/// Gate weights W_* [hidden, input], U_* [hidden, hidden] and biases b_* for
/// the update (z), reset (r) and candidate (h) paths.
inline ParamStore init_params(const GruSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamStore store;
    for (const char* gate : {"z", "r", "h"}) {
        store.add(std::string("W_") + gate, detail::xavier_uniform(spec.hidden_dim, spec.input_dim, rng));
        store.add(std::string("U_") + gate, detail::xavier_uniform(spec.hidden_dim, spec.hidden_dim, rng));
        store.add(std::string("b_") + gate, Tensor::zeros({spec.hidden_dim}));
    }
    return store;
}

inline Tensor mlp_forward(const MlpSpec& spec, const ParamStore& params, const Tensor& x,
                          std::string_view prefix = {}) {
    detail::check_vector("mlp_forward", x, spec.input_dim);
    const std::size_t layers = spec.hidden_dims.size() + 1;
    Tensor out = x;
    for (std::size_t i = 0; i < layers; ++i) {
        const std::string base = "layer" + std::to_string(i);
        out = autodiff::matmul(detail::param(params, prefix, base + ".weight"), out) +
              detail::param(params, prefix, base + ".bias");
        out = detail::activate(out, i + 1 < layers ? spec.hidden_activation : spec.output_activation);
    }
    return out;
}

/// h' = (1 - z) * h + z * h~ with
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + U_h (r * h) + b_h)
inline GruState gru_step(const GruSpec& spec, const ParamStore& params, const Tensor& x,
                         const GruState& state, std::string_view prefix = {}) {
    using autodiff::matmul;
    detail::check_vector("gru_step", x, spec.input_dim);
    detail::check_vector("gru_step", state.h, spec.hidden_dim);
    const auto& p = [&](std::string_view name) -> const Tensor& {
        return detail::param(params, prefix, name);
    };
    const Tensor& h = state.h;
    const Tensor z = autodiff::sigmoid(matmul(p("W_z"), x) + matmul(p("U_z"), h) + p("b_z"));
    const Tensor r = autodiff::sigmoid(matmul(p("W_r"), x) + matmul(p("U_r"), h) + p("b_r"));
    const Tensor candidate = autodiff::tanh(matmul(p("W_h"), x) + matmul(p("U_h"), r * h) + p("b_h"));
    return GruState{h + z * (candidate - h)};
}

}  // namespace varvol::nn
