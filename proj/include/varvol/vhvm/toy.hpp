#pragma once

// Linear-Gaussian toy with a closed-form evidence: z ~ N(0, 1),
// r | z ~ N(z, s²). An amortised posterior q(z | r) = N(a r + b, softplus(c)²)
// is trained on the reparameterised single-sample ELBO; the exact ELBO of the
// current q is available in closed form and can never exceed log p(r).

#include <cmath>
#include <numbers>
#include <vector>

#include "varvol/autodiff/adam.hpp"
#include "varvol/autodiff/ops.hpp"
#include "varvol/autodiff/param_store.hpp"
#include "varvol/errors.hpp"
#include "varvol/random.hpp"
#include "varvol/vhvm/model.hpp"

namespace varvol::vhvm {

struct LinearGaussianToy {
    std::vector<double> observations;
    double noise_std = 1.0;

    void validate() const {
        if (observations.empty()) throw ConfigError("toy: no observations");
        if (!(noise_std > 0.0)) throw ConfigError("toy: noise_std must be positive");
    }

    /// Σ log N(r_i; 0, 1 + s²).
    double log_evidence() const {
        const double v = 1.0 + noise_std * noise_std;
        double total = 0.0;
        for (double r : observations) total += -0.5 * (std::log(2.0 * std::numbers::pi * v) + r * r / v);
        return total;
    }

    static LinearGaussianToy sample(std::size_t count, double noise_std, std::uint64_t seed) {
        Rng rng(seed);
        LinearGaussianToy toy{{}, noise_std};
        for (std::size_t i = 0; i < count; ++i) toy.observations.push_back(rng.normal() + noise_std * rng.normal());
        return toy;
    }
};

struct ToyPosterior {
    autodiff::ParamStore params;

    explicit ToyPosterior(double a = 0.0, double b = 0.0, double c = 0.0) {
        params.add("a", autodiff::Tensor::scalar(a));
        params.add("b", autodiff::Tensor::scalar(b));
        params.add("c", autodiff::Tensor::scalar(c));
    }

    DiagGaussian posterior(const autodiff::Tensor& r) const {
        using namespace autodiff;
        const Tensor mean = params.at("a") * r + params.at("b");
        const Tensor ones = Tensor::vector(std::vector<double>(r.size(), 1.0));
        return DiagGaussian{mean, softplus(params.at("c")) * ones};
    }
};

namespace detail {

inline autodiff::Tensor toy_prior_mean(std::size_t n) { return autodiff::Tensor::vector(std::vector<double>(n, 0.0)); }
inline autodiff::Tensor toy_prior_std(std::size_t n) { return autodiff::Tensor::vector(std::vector<double>(n, 1.0)); }

}  // namespace detail

/// Closed-form ELBO: Σ_i E_q log N(r_i; z, s²) - KL(q_i || N(0, 1)).
inline double toy_exact_elbo(const LinearGaussianToy& toy, const ToyPosterior& q) {
    using namespace autodiff;
    NoGradGuard guard;
    const std::size_t n = toy.observations.size();
    const Tensor r = Tensor::vector(toy.observations);
    const DiagGaussian post = q.posterior(r);
    const double kl = kl_diag_gaussians(post, {detail::toy_prior_mean(n), detail::toy_prior_std(n)}).item();
    const double s2 = toy.noise_std * toy.noise_std;
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = post.mean.data()[i];
        const double v = post.std.data()[i] * post.std.data()[i];
        const double d = toy.observations[i] - m;
        expected += -0.5 * (std::log(2.0 * std::numbers::pi * s2) + (d * d + v) / s2);
    }
    return expected - kl;
}

/// Reparameterised single-sample negative ELBO, the training objective.
inline autodiff::Tensor toy_negative_elbo(const LinearGaussianToy& toy, const ToyPosterior& q, Rng& noise) {
    using namespace autodiff;
    const std::size_t n = toy.observations.size();
    const Tensor r = Tensor::vector(toy.observations);
    const DiagGaussian post = q.posterior(r);
    std::vector<double> eps(n);
    for (double& e : eps) e = noise.normal();
    const Tensor z = post.mean + post.std * Tensor::vector(eps);
    const double s2 = toy.noise_std * toy.noise_std;
    const Tensor recon = scale(sum(square(r - z)), -0.5 / s2) -
                         Tensor::scalar(0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * s2));
    const Tensor kl = kl_diag_gaussians(post, {detail::toy_prior_mean(n), detail::toy_prior_std(n)});
    return kl - recon;
}

struct ToyTrace {
    double log_evidence = 0.0;
    std::vector<double> exact_elbo;  // index 0 is the initial posterior
    ToyPosterior posterior;
};

inline ToyTrace train_toy(const LinearGaussianToy& toy, int epochs, double lr, std::uint64_t seed) {
    toy.validate();
    if (epochs < 1) throw ConfigError("toy: epochs must be >= 1");
    ToyTrace trace{toy.log_evidence(), {}, ToyPosterior{}};
    autodiff::Adam adam(autodiff::AdamConfig{.lr = lr});
    Rng noise(seed);
    trace.exact_elbo.push_back(toy_exact_elbo(toy, trace.posterior));
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        autodiff::Tape::current().clear();
        const autodiff::Tensor loss =
            autodiff::scale(toy_negative_elbo(toy, trace.posterior, noise), 1.0 / static_cast<double>(toy.observations.size()));
        autodiff::backward(loss);
        adam.step(trace.posterior.params);
        trace.exact_elbo.push_back(toy_exact_elbo(toy, trace.posterior));
    }
    return trace;
}

}  // namespace varvol::vhvm
