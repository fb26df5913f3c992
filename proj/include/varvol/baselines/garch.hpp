#pragma once

// Univariate GARCH(1,1) with Gaussian quasi-likelihood.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "varvol/baselines/optimize.hpp"
#include "varvol/errors.hpp"

namespace varvol::baselines {

struct GarchParams {
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;

    bool stationary() const { return omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0; }
    double unconditional_variance() const { return omega / (1.0 - alpha - beta); }
};

/// σ²_t = ω + α r²_{t-1} + β σ²_{t-1} for t = 1..T. The unobserved r²_0 is
/// replaced by its conditional expectation σ0², so σ²_1 = ω + (α+β) σ0².
inline std::vector<double> garch_filter(const GarchParams& p, std::span<const double> r, double sigma0_sq) {
    if (!(sigma0_sq > 0.0)) throw std::invalid_argument("garch_filter: sigma0_sq must be positive");
    std::vector<double> var(r.size());
    double prev_var = sigma0_sq, prev_sq = sigma0_sq;
    for (std::size_t t = 0; t < r.size(); ++t) {
        var[t] = p.omega + p.alpha * prev_sq + p.beta * prev_var;
        prev_var = var[t];
        prev_sq = r[t] * r[t];
    }
    return var;
}

/// Variance for the step after r_t given σ²_t.
inline double garch_next(const GarchParams& p, double r_t, double var_t) {
    return p.omega + p.alpha * r_t * r_t + p.beta * var_t;
}

/// Σ_t -½ (log σ²_t + r²_t / σ²_t).
inline double garch_loglik(const GarchParams& p, std::span<const double> r, double sigma0_sq) {
    double ll = 0.0;
    double prev_var = sigma0_sq, prev_sq = sigma0_sq;
    for (double x : r) {
        const double v = p.omega + p.alpha * prev_sq + p.beta * prev_var;
        if (!(v > 0.0)) return -HUGE_VAL;
        ll -= 0.5 * (std::log(v) + x * x / v);
        prev_var = v;
        prev_sq = x * x;
    }
    return ll;
}

/// Mean-adjusted sample variance (divisor T).
inline double sample_variance(std::span<const double> r) {
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(r.size());
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(r.size());
}

namespace detail {

inline double logistic(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace detail

/// Unconstrained (u, v, w) -> (ω, α, β): ω = e^u, α + β = logistic(v), α = (α + β) logistic(w).
inline GarchParams garch_from_unconstrained(std::span<const double> x) {
    const double persistence = detail::logistic(x[1]);
    const double alpha = persistence * detail::logistic(x[2]);
    return GarchParams{std::exp(x[0]), alpha, persistence - alpha};
}

inline std::vector<double> garch_to_unconstrained(const GarchParams& p) {
    const double s = p.alpha + p.beta;
    return {std::log(p.omega), detail::logit(s), detail::logit(p.alpha / s)};
}

struct GarchFit {
    GarchParams params;
    double loglik = 0.0;
    double sigma0_sq = 1.0;
    bool converged = false;
    /// Set when the optimizer stopped without meeting its tolerance.
    bool warning = false;
    int iterations = 0;
};

/// Gaussian MLE of GARCH(1,1) by multi-start Nelder-Mead over the
/// unconstrained parameterisation, so every fit is stationary.
inline GarchFit garch_fit(std::span<const double> r) {
    if (r.size() < 100) throw DataError("garch_fit: need at least 100 observations, got " + std::to_string(r.size()));
    for (double x : r) {
        if (!std::isfinite(x)) throw DataError("garch_fit: non-finite return");
    }
    const double var0 = sample_variance(r);
    if (!(var0 > 0.0)) throw ModelError("garch_fit: series has zero variance");

    auto objective = [&](const std::vector<double>& x) { return -garch_loglik(garch_from_unconstrained(x), r, var0); };
    std::vector<std::vector<double>> starts;
    for (auto [a, b] : {std::pair{0.05, 0.90}, {0.10, 0.80}, {0.03, 0.96}, {0.20, 0.50}, {0.01, 0.10}}) {
        starts.push_back(garch_to_unconstrained(GarchParams{var0 * (1.0 - a - b), a, b}));
    }
    const MinimizeResult best = multi_start_minimize(objective, starts, NelderMeadOptions{.initial_step = 0.5, .size_tol = 1e-10});

    GarchFit fit;
    fit.params = garch_from_unconstrained(best.x);
    fit.loglik = -best.value;
    fit.sigma0_sq = var0;
    fit.converged = best.converged;
    fit.warning = !best.converged;
    fit.iterations = best.iterations;
    return fit;
}

inline nlohmann::ordered_json to_json(const GarchParams& p) {
    return {{"omega", p.omega}, {"alpha", p.alpha}, {"beta", p.beta}};
}

inline GarchParams garch_params_from_json(const nlohmann::ordered_json& j) {
    return GarchParams{j.at("omega").get<double>(), j.at("alpha").get<double>(), j.at("beta").get<double>()};
}

}  // namespace varvol::baselines
