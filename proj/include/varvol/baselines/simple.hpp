#pragma once

// Covariance baselines without a fitting step: EWMA and constant.

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "varvol/errors.hpp"

namespace varvol::baselines {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Mean-adjusted sample covariance with divisor T - 1.
inline Matrix sample_covariance(const Matrix& x) {
    if (x.rows() < 2) throw DataError("sample_covariance: need at least 2 rows");
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    return 0.5 * (cov + cov.transpose());
}

/// Sample covariance of the training window, with 1e-8·I added when the
/// estimate is not positive definite.
inline Matrix constant_forecast(const Matrix& train) {
    if (train.rows() < train.cols() + 1) {
        throw DataError("constant_forecast: need at least n+1 = " + std::to_string(train.cols() + 1) +
                        " training rows, got " + std::to_string(train.rows()));
    }
    Matrix cov = sample_covariance(train);
    if (Eigen::LLT<Matrix>(cov).info() == Eigen::Success) return cov;
    cov += 1e-8 * Matrix::Identity(cov.rows(), cov.cols());
    if (Eigen::LLT<Matrix>(cov).info() != Eigen::Success) {
        throw SingularityError("constant_forecast: covariance is singular even after jitter");
    }
    return cov;
}

/// Σ_t = λ Σ_{t-1} + (1-λ) r_{t-1} r_{t-1}ᵀ with Σ_0 = `seed` at row 0 of
/// `returns`; returns the forecasts for rows [begin, end).
inline std::vector<Matrix> ewma_forecast(const Matrix& returns, const Matrix& seed, Eigen::Index begin,
                                         Eigen::Index end, double lambda = 0.94) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("ewma_forecast: lambda must lie in (0, 1)");
    if (seed.rows() != returns.cols() || seed.cols() != returns.cols()) {
        throw ShapeError("ewma_forecast", {{static_cast<std::size_t>(seed.rows()), static_cast<std::size_t>(seed.cols())},
                                           {static_cast<std::size_t>(returns.rows()),
                                            static_cast<std::size_t>(returns.cols())}});
    }
    if (begin < 0 || end > returns.rows() || begin > end) throw std::out_of_range("ewma_forecast: bad row range");
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(end - begin));
    Matrix sigma = seed;
    for (Eigen::Index t = 0; t < end; ++t) {
        if (t > 0) {
            const Vector r = returns.row(t - 1).transpose();
            sigma = lambda * sigma + (1.0 - lambda) * (r * r.transpose());
            sigma = (0.5 * (sigma + sigma.transpose())).eval();
        }
        if (t >= begin) out.push_back(sigma);
    }
    return out;
}

}  // namespace varvol::baselines
