#pragma once

// Two-stage DCC-GARCH(1,1): per-asset GARCH, then correlation dynamics
//   Q_t = (1-a-b) q̄ + a ε_{t-1} ε_{t-1}ᵀ + b Q_{t-1},  R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}.

#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "varvol/baselines/garch.hpp"
#include "varvol/baselines/optimize.hpp"
#include "varvol/errors.hpp"

namespace varvol::baselines {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DccParams {
    double a = 0.0;
    double b = 0.0;
    Matrix qbar;
};

struct DccModel {
    std::vector<GarchFit> garch;
    DccParams params;
    double correlation_loglik = 0.0;
    bool warning = false;

    std::size_t assets() const { return garch.size(); }
};

/// Pearson correlation of the columns.
inline Matrix sample_correlation(const Matrix& x) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows());
    const Vector inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    Matrix corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    corr = (0.5 * (corr + corr.transpose())).eval();
    corr.diagonal().setOnes();
    return corr;
}

inline Matrix normalize_correlation(const Matrix& q) {
    const Vector inv_sd = q.diagonal().cwiseSqrt().cwiseInverse();
    Matrix r = inv_sd.asDiagonal() * q * inv_sd.asDiagonal();
    r = (0.5 * (r + r.transpose())).eval();
    r.diagonal().setOnes();
    return r;
}

/// Correlation path R_1..R_T for standardised residuals `eps` (rows = time),
/// starting from Q_1 = q̄. Throws SingularityError if some Q_t is not PD.
inline std::vector<Matrix> dcc_correlations(const DccParams& p, const Matrix& eps) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(eps.rows()));
    Matrix q = p.qbar;
    for (Eigen::Index t = 0; t < eps.rows(); ++t) {
        if (t > 0) {
            const Vector e = eps.row(t - 1).transpose();
            q = (1.0 - p.a - p.b) * p.qbar + p.a * (e * e.transpose()) + p.b * q;
        }
        if (Eigen::LLT<Matrix>(q).info() != Eigen::Success) {
            throw SingularityError("dcc: Q_t lost positive definiteness at t=" + std::to_string(t));
        }
        out.push_back(normalize_correlation(q));
    }
    return out;
}

/// Σ_t -½ (log|R_t| + ε_tᵀ R_t⁻¹ ε_t).
inline double dcc_correlation_loglik(double a, double b, const Matrix& qbar, const Matrix& eps) {
    Matrix q = qbar;
    double ll = 0.0;
    for (Eigen::Index t = 0; t < eps.rows(); ++t) {
        if (t > 0) {
            const Vector e = eps.row(t - 1).transpose();
            q = (1.0 - a - b) * qbar + a * (e * e.transpose()) + b * q;
        }
        const Matrix r = normalize_correlation(q);
        Eigen::LLT<Matrix> llt(r);
        if (llt.info() != Eigen::Success) return -HUGE_VAL;
        const Vector e = eps.row(t).transpose();
        const Vector u = llt.matrixL().solve(e);
        ll -= 0.5 * (2.0 * llt.matrixLLT().diagonal().array().log().sum() + u.squaredNorm());
    }
    return ll;
}

/// Standardised residuals of each column under its GARCH fit.
inline Matrix standardized_residuals(const std::vector<GarchFit>& fits, const Matrix& returns) {
    Matrix eps(returns.rows(), returns.cols());
    for (Eigen::Index j = 0; j < returns.cols(); ++j) {
        const Vector col = returns.col(j);
        const auto& f = fits[static_cast<std::size_t>(j)];
        const auto var = garch_filter(f.params, std::span<const double>(col.data(), col.size()), f.sigma0_sq);
        for (Eigen::Index t = 0; t < returns.rows(); ++t) eps(t, j) = col(t) / std::sqrt(var[static_cast<std::size_t>(t)]);
    }
    return eps;
}

inline DccModel dcc_fit(const Matrix& returns, const std::vector<std::string>& names = {}) {
    const auto n = returns.cols();
    if (n < 2) throw DataError("dcc_fit: need at least 2 assets");
    DccModel model;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Vector col = returns.col(j);
        const std::string name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                                            : "asset " + std::to_string(j);
        try {
            model.garch.push_back(garch_fit(std::span<const double>(col.data(), col.size())));
        } catch (const std::exception& e) {
            throw ModelError("dcc_fit: GARCH stage failed for " + name + ": " + e.what());
        }
        model.warning = model.warning || model.garch.back().warning;
    }
    const Matrix eps = standardized_residuals(model.garch, returns);
    model.params.qbar = sample_correlation(eps);
    if (Eigen::LLT<Matrix>(model.params.qbar).info() != Eigen::Success) {
        throw SingularityError("dcc_fit: residual correlation matrix is not positive definite");
    }

    auto unpack = [](const std::vector<double>& x) {
        const double s = detail::logistic(x[0]);
        const double a = s * detail::logistic(x[1]);
        return std::pair{a, s - a};
    };
    auto objective = [&](const std::vector<double>& x) {
        const auto [a, b] = unpack(x);
        return -dcc_correlation_loglik(a, b, model.params.qbar, eps);
    };
    std::vector<std::vector<double>> starts;
    for (auto [a, b] : {std::pair{0.05, 0.90}, {0.02, 0.97}, {0.10, 0.80}, {0.01, 0.50}}) {
        starts.push_back({detail::logit(a + b), detail::logit(a / (a + b))});
    }
    const MinimizeResult best = multi_start_minimize(objective, starts, NelderMeadOptions{.initial_step = 0.5, .size_tol = 1e-8});
    std::tie(model.params.a, model.params.b) = unpack(best.x);
    model.correlation_loglik = -best.value;
    model.warning = model.warning || !best.converged;
    return model;
}

/// One-step covariance forecasts Σ_t = D_t R_t D_t for rows [begin, end) of
/// `returns`, filtering both stages from row 0 so row t only uses rows < t.
inline std::vector<Matrix> dcc_forecast(const DccModel& model, const Matrix& returns, Eigen::Index begin,
                                        Eigen::Index end) {
    if (static_cast<std::size_t>(returns.cols()) != model.assets()) {
        throw ShapeError("dcc_forecast", {{static_cast<std::size_t>(returns.rows()),
                                           static_cast<std::size_t>(returns.cols())}});
    }
    if (begin < 0 || end > returns.rows() || begin > end) throw std::out_of_range("dcc_forecast: bad row range");
    Matrix sd(end, returns.cols());
    for (Eigen::Index j = 0; j < returns.cols(); ++j) {
        const Vector col = returns.col(j).head(end);
        const auto& f = model.garch[static_cast<std::size_t>(j)];
        const auto var = garch_filter(f.params, std::span<const double>(col.data(), col.size()), f.sigma0_sq);
        for (Eigen::Index t = 0; t < end; ++t) sd(t, j) = std::sqrt(var[static_cast<std::size_t>(t)]);
    }
    const Matrix eps = returns.topRows(end).cwiseQuotient(sd);
    const auto corr = dcc_correlations(model.params, eps);
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(end - begin));
    for (Eigen::Index t = begin; t < end; ++t) {
        const Vector d = sd.row(t).transpose();
        Matrix sigma = d.asDiagonal() * corr[static_cast<std::size_t>(t)] * d.asDiagonal();
        out.push_back(0.5 * (sigma + sigma.transpose()));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const DccModel& m) {
    nlohmann::ordered_json j;
    auto& g = j["garch"] = nlohmann::ordered_json::array();
    for (const auto& f : m.garch) g.push_back(to_json(f.params));
    j["a"] = m.params.a;
    j["b"] = m.params.b;
    auto& q = j["qbar"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.params.qbar.rows(); ++i) {
        std::vector<double> row(m.params.qbar.cols());
        for (Eigen::Index k = 0; k < m.params.qbar.cols(); ++k) row[static_cast<std::size_t>(k)] = m.params.qbar(i, k);
        q.push_back(row);
    }
    return j;
}

}  // namespace varvol::baselines
