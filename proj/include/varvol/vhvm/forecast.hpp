#pragma once

#include <vector>

#include "varvol/covparam/covparam.hpp"
#include "varvol/vhvm/model.hpp"

namespace varvol::vhvm {

/// Runs the GRU over every row of `returns` without recording gradients.
inline nn::GruState roll(const VhvmModel& model, const Matrix& returns, nn::GruState h) {
    autodiff::NoGradGuard guard;
    for (Eigen::Index t = 0; t < returns.rows(); ++t) h = model.advance(h, model.input(returns, t));
    return h;
}

inline nn::GruState roll(const VhvmModel& model, const Matrix& returns) {
    return roll(model, returns, model.initial_state());
}

/// Precision factor of the standardised returns implied by the prior mean.
inline covparam::LowerCholesky forecast_factor(const VhvmModel& model, const nn::GruState& h) {
    autodiff::NoGradGuard guard;
    const DiagGaussian prior = prior_step(model, h);
    return covparam::vector_to_cholesky(prior.mean.data());
}

/// Undoes the per-asset scaling: Σ = S Σ_std S.
inline Matrix unscale(const VhvmModel& model, Matrix sigma) {
    const auto& s = model.scale();
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) sigma(i, j) *= s[i] * s[j];
    return sigma;
}

/// Covariance forecast for the step after `history`.
inline Matrix forecast_one_step(const VhvmModel& model, const Matrix& history) {
    if (history.rows() < 1) throw std::invalid_argument("forecast_one_step: history must have at least one row");
    if (static_cast<std::size_t>(history.cols()) != model.assets()) {
        throw ShapeError("forecast_one_step", {{static_cast<std::size_t>(history.rows()),
                                                static_cast<std::size_t>(history.cols())}});
    }
    return unscale(model, covparam::covariance(forecast_factor(model, roll(model, history))));
}

struct SequenceScore {
    double total = 0.0;
    std::vector<double> per_step;
    std::vector<Matrix> forecasts;  // filled when requested
};

/// One-step-ahead scoring of `test` after conditioning on `warmup`.
/// Each step forecasts from h_{t-1}, scores r_t, then feeds r_t to the GRU.
inline SequenceScore evaluate_sequence(const VhvmModel& model, const Matrix& test, const Matrix& warmup,
                                       bool include_2pi = false, bool keep_forecasts = false) {
    if (test.cols() != warmup.cols() && warmup.rows() > 0) {
        throw ShapeError("evaluate_sequence", {{static_cast<std::size_t>(warmup.rows()),
                                                static_cast<std::size_t>(warmup.cols())},
                                               {static_cast<std::size_t>(test.rows()),
                                                static_cast<std::size_t>(test.cols())}});
    }
    if (static_cast<std::size_t>(test.cols()) != model.assets()) {
        throw ShapeError("evaluate_sequence", {{static_cast<std::size_t>(test.rows()),
                                                static_cast<std::size_t>(test.cols())}});
    }
    autodiff::NoGradGuard guard;
    nn::GruState h = roll(model, warmup);
    const double log_scale = model.log_scale_sum();
    SequenceScore out;
    out.per_step.reserve(static_cast<std::size_t>(test.rows()));
    for (Eigen::Index t = 0; t < test.rows(); ++t) {
        const covparam::LowerCholesky l = forecast_factor(model, h);
        const autodiff::Tensor r_std = model.input(test, t);
        const double ll = covparam::gaussian_loglik(r_std.data(), l, include_2pi) - log_scale;
        if (!std::isfinite(ll)) throw NonFiniteError("non-finite forecast log likelihood", static_cast<std::size_t>(t));
        out.per_step.push_back(ll);
        out.total += ll;
        if (keep_forecasts) out.forecasts.push_back(unscale(model, covparam::covariance(l)));
        h = model.advance(h, r_std);
    }
    return out;
}

}  // namespace varvol::vhvm
