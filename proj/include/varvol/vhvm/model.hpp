#pragma once

// Sequential variational covariance model.
//
// A single GRU summarises the return history. MLP_Gen maps h_{t-1} to the
// prior over the latent z_t, MLP_Inf maps h_t (which has seen r_t) to the
// approximate posterior. z_t is the packed lower-triangular factor of the
// precision matrix (see covparam).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "varvol/autodiff.hpp"
#include "varvol/covparam/covparam.hpp"
#include "varvol/errors.hpp"
#include "varvol/nn/layers.hpp"
#include "varvol/random.hpp"

namespace varvol::vhvm {

using autodiff::ParamStore;
using autodiff::Tensor;
using Matrix = Eigen::MatrixXd;

/// Diagonal Gaussian over the latent vector; std > 0 elementwise.
struct DiagGaussian {
    Tensor mean;
    Tensor std;

    std::size_t dim() const { return mean.size(); }
};

struct VhvmConfig {
    std::size_t assets = 1;
    std::size_t gru_hidden = 64;
    std::vector<std::size_t> mlp_hidden{64};
    nn::Activation activation = nn::Activation::tanh;
    std::uint64_t seed = 0;
};

class VhvmModel {
public:
    explicit VhvmModel(VhvmConfig config) : config_(std::move(config)) {
        if (config_.assets == 0) throw std::invalid_argument("VhvmModel: asset count must be >= 1");
        const std::size_t d = covparam::latent_dim(config_.assets);
        gru_ = nn::GruSpec{.input_dim = config_.assets, .hidden_dim = config_.gru_hidden};
        gen_ = nn::MlpSpec{.input_dim = config_.gru_hidden,
                           .hidden_dims = config_.mlp_hidden,
                           .output_dim = 2 * d,
                           .hidden_activation = config_.activation};
        inf_ = gen_;
        params_.merge(nn::init_params(gru_, mix_seed(config_.seed, 0)), "gru.");
        params_.merge(nn::init_params(gen_, mix_seed(config_.seed, 1)), "gen.");
        params_.merge(nn::init_params(inf_, mix_seed(config_.seed, 2)), "inf.");
        scale_.assign(config_.assets, 1.0);
    }

    const VhvmConfig& config() const noexcept { return config_; }
    std::size_t assets() const noexcept { return config_.assets; }
    std::size_t latent_dim() const noexcept { return covparam::latent_dim(config_.assets); }
    const nn::GruSpec& gru_spec() const noexcept { return gru_; }
    const nn::MlpSpec& gen_spec() const noexcept { return gen_; }
    const nn::MlpSpec& inf_spec() const noexcept { return inf_; }

    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }

    /// Per-asset return scale; the networks see r / scale.
    const std::vector<double>& scale() const noexcept { return scale_; }
    void set_scale(std::vector<double> scale) {
        if (scale.size() != assets()) throw std::invalid_argument("VhvmModel: scale length must equal asset count");
        for (double s : scale) {
            if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("VhvmModel: scale must be positive");
        }
        scale_ = std::move(scale);
    }

    double log_scale_sum() const {
        double s = 0.0;
        for (double v : scale_) s += std::log(v);
        return s;
    }

    /// Standardised return row as a vector tensor.
    Tensor input(const Matrix& returns, Eigen::Index row) const {
        std::vector<double> r(assets());
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = returns(row, static_cast<Eigen::Index>(i)) / scale_[i];
        }
        return Tensor::vector(std::move(r));
    }

    nn::GruState initial_state() const { return nn::GruState::zeros(config_.gru_hidden); }

    nn::GruState advance(const nn::GruState& h, const Tensor& r_std) const {
        return nn::gru_step(gru_, params_, r_std, h, "gru.");
    }

private:
    VhvmConfig config_;
    nn::GruSpec gru_;
    nn::MlpSpec gen_;
    nn::MlpSpec inf_;
    ParamStore params_;
    std::vector<double> scale_;
};

namespace detail {

inline DiagGaussian split_head(const Tensor& out, std::size_t d) {
    return DiagGaussian{autodiff::slice(out, 0, d), autodiff::softplus(autodiff::slice(out, d, 2 * d))};
}

}  // namespace detail

/// Learned prior p(z_t | r_{1:t-1}) from the state before r_t is consumed.
inline DiagGaussian prior_step(const VhvmModel& model, const nn::GruState& h_prev) {
    return detail::split_head(nn::mlp_forward(model.gen_spec(), model.params(), h_prev.h, "gen."),
                              model.latent_dim());
}

/// Approximate filtering posterior q(z_t | r_{1:t}) from the state after r_t.
inline DiagGaussian posterior_step(const VhvmModel& model, const nn::GruState& h_curr) {
    return detail::split_head(nn::mlp_forward(model.inf_spec(), model.params(), h_curr.h, "inf."),
                              model.latent_dim());
}

/// KL(q || p) = Σ log(σp/σq) + (σq² + (μq - μp)²) / (2σp²) - ½.
inline Tensor kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p) {
    using namespace autodiff;
    if (q.mean.shape() != p.mean.shape() || q.std.shape() != p.std.shape() ||
        q.mean.shape() != q.std.shape()) {
        throw ShapeError("kl_diag_gaussians", {q.mean.shape(), p.mean.shape()});
    }
    const Tensor ratio = log(p.std) - log(q.std);
    const Tensor spread = (square(q.std) + square(q.mean - p.mean)) / scale(square(p.std), 2.0);
    return sum(ratio + spread - Tensor::scalar(0.5));
}

struct ElboOptions {
    double kl_weight = 1.0;
    /// Draw ε ~ N(0, I) for the reparameterised sample; when false ε = 0 and
    /// z_t is the posterior mean.
    bool sample = true;
    bool include_2pi = false;
};

struct UnrollResult {
    Tensor loss;          // -(Σ loglik - kl_weight Σ KL)
    double loglik = 0.0;  // Σ E_q log p(r_t | z_t) (single-sample estimate)
    double kl = 0.0;      // Σ KL
    nn::GruState last;    // h after the final row
};

/// Unrolls rows [begin, end) starting from state `h`, accumulating the
/// negative ELBO. `noise` supplies ε when options.sample is set.
inline UnrollResult unroll_elbo(const VhvmModel& model, const Matrix& returns, Eigen::Index begin,
                                Eigen::Index end, nn::GruState h, Rng& noise, const ElboOptions& options) {
    using namespace autodiff;
    const std::size_t d = model.latent_dim();
    const double log_scale = model.log_scale_sum();
    UnrollResult out;
    Tensor total = Tensor::scalar(0.0);
    for (Eigen::Index t = begin; t < end; ++t) {
        const Tensor r_std = model.input(returns, t);
        const DiagGaussian prior = prior_step(model, h);
        h = model.advance(h, r_std);
        const DiagGaussian post = posterior_step(model, h);

        Tensor z = post.mean;
        if (options.sample) {
            std::vector<double> eps(d);
            for (double& e : eps) e = noise.normal();
            z = z + post.std * Tensor::vector(std::move(eps));
        }
        const Tensor ll = covparam::latent_loglik(z, r_std.data(), options.include_2pi);
        const Tensor kl = kl_diag_gaussians(post, prior);
        const double ll_value = ll.item() - log_scale;
        const double kl_value = kl.item();
        if (!std::isfinite(ll_value) || !std::isfinite(kl_value)) {
            throw NonFiniteError("non-finite ELBO term", static_cast<std::size_t>(t));
        }
#ifndef NDEBUG
        if (kl_value < -1e-10) throw ModelError("negative KL divergence");
#endif
        out.loglik += ll_value;
        out.kl += kl_value;
        total = total + scale(kl, options.kl_weight) - ll;
    }
    // The Jacobian of the scaling is constant in the parameters.
    out.loss = total + Tensor::scalar(static_cast<double>(end - begin) * log_scale);
    out.last = std::move(h);
    return out;
}

/// Negative ELBO over the whole sequence, for minimisation.
inline Tensor elbo_sequence(const VhvmModel& model, const Matrix& returns, std::uint64_t seed,
                            const ElboOptions& options = {}) {
    if (returns.rows() < 2) throw std::invalid_argument("elbo_sequence: need at least 2 time steps");
    if (static_cast<std::size_t>(returns.cols()) != model.assets()) {
        throw ShapeError("elbo_sequence", {{static_cast<std::size_t>(returns.rows()),
                                            static_cast<std::size_t>(returns.cols())}},
                         "column count must equal the model's asset count");
    }
    Rng noise(seed);
    return unroll_elbo(model, returns, 0, returns.rows(), model.initial_state(), noise, options).loss;
}

}  // namespace varvol::vhvm
