#pragma once

// Generators with known conditional covariances.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "varvol/baselines/dcc.hpp"
#include "varvol/baselines/garch.hpp"
#include "varvol/errors.hpp"
#include "varvol/random.hpp"

namespace varvol::simlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SimOutput {
    Matrix returns;                 // T × n
    std::vector<Matrix> true_cov;   // Σ_t, conditional on rows < t
    Matrix log_variance;            // factor SV only: T × (n + m), columns h̄ then ȟ
};

/// AR(1) log-variance law h_{t+1} = μ + φ h_t + σ η_{t+1}.
struct ArLogVariance {
    double mu = 0.0;
    double phi = 0.0;
    double sigma = 0.0;

    double stationary_mean() const { return mu / (1.0 - phi); }
    void validate(const std::string& what) const {
        if (!(std::abs(phi) < 1.0)) throw ConfigError(what + ": AR coefficient must satisfy |phi| < 1");
        if (!(sigma >= 0.0)) throw ConfigError(what + ": AR noise scale must be non-negative");
    }
};

/// r_t = σ_t ε_t with σ²_t from the GARCH(1,1) recursion, σ²_1 = ω/(1-α-β).
inline SimOutput simulate_garch(const baselines::GarchParams& p, std::size_t T, std::uint64_t seed) {
    if (!p.stationary()) throw ConfigError("simulate_garch: parameters must be stationary with omega > 0");
    Rng rng(seed);
    SimOutput out;
    out.returns.resize(static_cast<Eigen::Index>(T), 1);
    out.true_cov.reserve(T);
    double var = p.unconditional_variance();
    for (std::size_t t = 0; t < T; ++t) {
        const double r = std::sqrt(var) * rng.normal();
        out.returns(static_cast<Eigen::Index>(t), 0) = r;
        out.true_cov.push_back(Matrix::Constant(1, 1, var));
        var = baselines::garch_next(p, r, var);
    }
    return out;
}

struct FactorSvConfig {
    std::size_t n = 2;
    std::size_t m = 1;
    Matrix loadings;                       // n × m
    std::vector<ArLogVariance> idiosyncratic;  // n laws for h̄
    std::vector<ArLogVariance> factor;         // m laws for ȟ
    std::size_t T = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n == 0) throw ConfigError("factor SV: n must be >= 1");
        if (m >= n) throw ConfigError("factor SV: need m < n");
        if (loadings.rows() != static_cast<Eigen::Index>(n) || loadings.cols() != static_cast<Eigen::Index>(m)) {
            throw ConfigError("factor SV: loadings must be n x m");
        }
        if (idiosyncratic.size() != n || factor.size() != m) throw ConfigError("factor SV: need n idiosyncratic and m factor laws");
        for (const auto& a : idiosyncratic) a.validate("factor SV idiosyncratic");
        for (const auto& a : factor) a.validate("factor SV factor");
    }
};

/// Σ = Λ diag(e^ȟ) Λᵀ + diag(e^h̄).
inline Matrix factor_sv_covariance(const Matrix& loadings, const Vector& h_idio, const Vector& h_factor) {
    Matrix sigma = loadings * h_factor.array().exp().matrix().asDiagonal() * loadings.transpose();
    sigma.diagonal() += h_idio.array().exp().matrix();
    return 0.5 * (sigma + sigma.transpose());
}

/// One return draw r = Λ f + e with f ~ N(0, diag(e^ȟ)), e ~ N(0, diag(e^h̄)).
inline Vector factor_sv_draw(const Matrix& loadings, const Vector& h_idio, const Vector& h_factor, Rng& rng) {
    Vector f(h_factor.size());
    for (Eigen::Index j = 0; j < f.size(); ++j) f(j) = std::exp(0.5 * h_factor(j)) * rng.normal();
    Vector r = loadings * f;
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) += std::exp(0.5 * h_idio(i)) * rng.normal();
    return r;
}

/// Log variances start at their stationary means and evolve after each draw.
inline SimOutput simulate_factor_sv(const FactorSvConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(cfg.n), m = static_cast<Eigen::Index>(cfg.m);
    Rng rng(cfg.seed);
    Vector h_idio(n), h_factor(m);
    for (Eigen::Index i = 0; i < n; ++i) h_idio(i) = cfg.idiosyncratic[static_cast<std::size_t>(i)].stationary_mean();
    for (Eigen::Index j = 0; j < m; ++j) h_factor(j) = cfg.factor[static_cast<std::size_t>(j)].stationary_mean();

    SimOutput out;
    out.returns.resize(static_cast<Eigen::Index>(cfg.T), n);
    out.log_variance.resize(static_cast<Eigen::Index>(cfg.T), n + m);
    out.true_cov.reserve(cfg.T);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(cfg.T); ++t) {
        out.log_variance.row(t).head(n) = h_idio.transpose();
        out.log_variance.row(t).tail(m) = h_factor.transpose();
        out.true_cov.push_back(factor_sv_covariance(cfg.loadings, h_idio, h_factor));
        out.returns.row(t) = factor_sv_draw(cfg.loadings, h_idio, h_factor, rng).transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& a = cfg.idiosyncratic[static_cast<std::size_t>(i)];
            h_idio(i) = a.mu + a.phi * h_idio(i) + a.sigma * rng.normal();
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto& a = cfg.factor[static_cast<std::size_t>(j)];
            h_factor(j) = a.mu + a.phi * h_factor(j) + a.sigma * rng.normal();
        }
    }
    return out;
}

struct DccSimConfig {
    std::vector<baselines::GarchParams> garch;
    double a = 0.05;
    double b = 0.90;
    Matrix qbar;
    std::size_t T = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        const auto n = static_cast<Eigen::Index>(garch.size());
        if (n == 0) throw ConfigError("DCC simulation: need at least one asset");
        for (const auto& g : garch) {
            if (!g.stationary()) throw ConfigError("DCC simulation: GARCH parameters must be stationary");
        }
        if (!(a >= 0.0 && b >= 0.0 && a + b < 1.0)) throw ConfigError("DCC simulation: need a, b >= 0 and a + b < 1");
        if (qbar.rows() != n || qbar.cols() != n) throw ConfigError("DCC simulation: qbar must be n x n");
        if (Eigen::LLT<Matrix>(qbar).info() != Eigen::Success) throw ConfigError("DCC simulation: qbar must be positive definite");
    }
};

/// r_t ~ N(0, D_t R_t D_t); univariate variances start at their
/// unconditional levels and Q_1 = q̄.
inline SimOutput simulate_dcc(const DccSimConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(cfg.garch.size());
    Rng rng(cfg.seed);
    Vector var(n);
    for (Eigen::Index i = 0; i < n; ++i) var(i) = cfg.garch[static_cast<std::size_t>(i)].unconditional_variance();
    Matrix q = cfg.qbar;

    SimOutput out;
    out.returns.resize(static_cast<Eigen::Index>(cfg.T), n);
    out.true_cov.reserve(cfg.T);
    Vector z(n);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(cfg.T); ++t) {
        const Matrix r = baselines::normalize_correlation(q);
        Eigen::LLT<Matrix> llt(r);
        if (llt.info() != Eigen::Success) throw SingularityError("simulate_dcc: R_t not positive definite");
        const Vector d = var.cwiseSqrt();
        Matrix sigma = d.asDiagonal() * r * d.asDiagonal();
        out.true_cov.push_back(0.5 * (sigma + sigma.transpose()));
        for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
        const Vector eps = llt.matrixL() * z;
        const Vector ret = d.cwiseProduct(eps);
        out.returns.row(t) = ret.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            var(i) = baselines::garch_next(cfg.garch[static_cast<std::size_t>(i)], ret(i), var(i));
        }
        q = (1.0 - cfg.a - cfg.b) * cfg.qbar + cfg.a * (eps * eps.transpose()) + cfg.b * q;
    }
    return out;
}

}  // namespace varvol::simlab
