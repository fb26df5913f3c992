#pragma once

// Latent vector <-> precision Cholesky factor <-> covariance, and the
// zero-mean Gaussian log likelihood in precision form.
//
// Fill order: z is laid out row-major over the lower triangle,
//   (0,0), (1,0), (1,1), (2,0), (2,1), (2,2), ...
// so for n = 2, z = [a, b, c] gives [[softplus(a), 0], [b, softplus(c)]].

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "varvol/autodiff.hpp"
#include "varvol/errors.hpp"

namespace varvol::covparam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t latent_dim(std::size_t n) { return n * (n + 1) / 2; }

/// Asset count n with n(n+1)/2 == len; throws for non-triangular lengths.
inline std::size_t asset_count(std::size_t len) {
    const auto n = static_cast<std::size_t>(
        std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (len == 0 || latent_dim(n) != len) {
        throw ShapeError("asset_count", {{len}}, "length is not a triangular number n(n+1)/2");
    }
    return n;
}

/// Lower-triangular factor with strictly positive diagonal; L Lᵀ is the precision.
class LowerCholesky {
public:
    static LowerCholesky from_matrix(Matrix m) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw ShapeError("LowerCholesky", {{static_cast<std::size_t>(m.rows()),
                                                static_cast<std::size_t>(m.cols())}},
                             "must be square and non-empty");
        }
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (!(m(i, i) > 0.0) || !std::isfinite(m(i, i))) {
                throw std::invalid_argument("LowerCholesky: diagonal entry " + std::to_string(i) +
                                            " is not strictly positive");
            }
            for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
                if (m(i, j) != 0.0) throw std::invalid_argument("LowerCholesky: matrix is not lower triangular");
            }
        }
        return LowerCholesky(std::move(m));
    }

    const Matrix& matrix() const noexcept { return l_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(l_.rows()); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return l_(i, j); }

private:
    explicit LowerCholesky(Matrix m) : l_(std::move(m)) {}
    Matrix l_;
};

inline LowerCholesky vector_to_cholesky(std::span<const double> z) {
    const std::size_t n = asset_count(z.size());
    Matrix l = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++k) {
            l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                i == j ? autodiff::stable_softplus(z[k]) : z[k];
        }
    }
    return LowerCholesky::from_matrix(std::move(l));
}

inline Matrix precision(const LowerCholesky& l) {
    const Matrix& m = l.matrix();
    Matrix p = m * m.transpose();
    // The product is symmetric mathematically; copy the lower half so it is exactly so.
    p.triangularView<Eigen::StrictlyUpper>() = p.transpose();
    return p;
}

/// log|Σ| = -2 Σ log l_ii.
inline double log_det_sigma(const LowerCholesky& l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.matrix().rows(); ++i) s += std::log(l(i, i));
    return -2.0 * s;
}

/// -½ (log|Σ| + rᵀ Σ⁻¹ r) with the Mahalanobis term evaluated as ‖Lᵀ r‖².
/// `include_2pi` additionally subtracts (n/2) log 2π.
inline double gaussian_loglik(const Vector& r, const LowerCholesky& l, bool include_2pi = false) {
    if (static_cast<std::size_t>(r.size()) != l.dim()) {
        throw ShapeError("gaussian_loglik", {{static_cast<std::size_t>(r.size())}, {l.dim(), l.dim()}});
    }
    const Vector u = l.matrix().transpose() * r;
    double ll = -0.5 * (log_det_sigma(l) + u.squaredNorm());
    if (include_2pi) ll -= 0.5 * static_cast<double>(l.dim()) * std::log(2.0 * std::numbers::pi);
    return ll;
}

inline double gaussian_loglik(std::span<const double> r, const LowerCholesky& l, bool include_2pi = false) {
    return gaussian_loglik(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())), l,
                           include_2pi);
}

/// Σ = (L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹ by triangular solves, symmetrised.
inline Matrix covariance(const LowerCholesky& l) {
    const Matrix& m = l.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (m(i, i) < 1e-300) {
            throw SingularityError("covariance: Cholesky diagonal entry " + std::to_string(i) +
                                   " below 1e-300");
        }
    }
    const Matrix l_inv = m.triangularView<Eigen::Lower>().solve(Matrix::Identity(m.rows(), m.cols()));
    Matrix sigma = l_inv.transpose() * l_inv;
    return 0.5 * (sigma + sigma.transpose());
}

inline bool is_spd(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
    Eigen::LLT<Matrix> llt(m);
    return llt.info() == Eigen::Success;
}

/// Lower Cholesky factor of Σ⁻¹ for a covariance forecast Σ.
inline LowerCholesky precision_factor(const Matrix& sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    if (sigma.rows() != sigma.cols() || llt.info() != Eigen::Success || !sigma.allFinite()) {
        throw SingularityError("precision_factor: covariance is not positive definite");
    }
    Matrix p = llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
    p = (0.5 * (p + p.transpose())).eval();
    Eigen::LLT<Matrix> pl(p);
    if (pl.info() != Eigen::Success) {
        throw SingularityError("precision_factor: precision is not positive definite");
    }
    Matrix l = pl.matrixL();
    return LowerCholesky::from_matrix(std::move(l));
}

/// Metric used to score every model's one-step covariance forecast.
inline double score_forecast(const Vector& r, const Matrix& sigma, bool include_2pi = false) {
    return gaussian_loglik(r, precision_factor(sigma), include_2pi);
}

/// Differentiable gaussian_loglik(r, vector_to_cholesky(z)) as a single tape op.
///
/// With u = Lᵀ r the value is Σ log l_ii - ½‖u‖²; the gradient is
///   d/dz_k (off-diagonal l_ij) = -u_j r_i
///   d/dz_k (diagonal l_ii)     = (1/l_ii - u_i r_i) · sigmoid(z_k)
inline autodiff::Tensor latent_loglik(const autodiff::Tensor& z, std::span<const double> r,
                                      bool include_2pi = false) {
    if (z.rank() != 1) throw ShapeError("latent_loglik", {z.shape()}, "latent must be a vector");
    const std::size_t n = asset_count(z.size());
    if (r.size() != n) throw ShapeError("latent_loglik", {z.shape(), {r.size()}});

    const auto zd = z.data();
    // Dense lower factor, row-major packed like z.
    std::vector<double> packed(zd.size());
    std::vector<double> u(n, 0.0);
    double log_diag = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++k) {
            const double lij = i == j ? autodiff::stable_softplus(zd[k]) : zd[k];
            packed[k] = lij;
            u[j] += lij * r[i];
            if (i == j) log_diag += std::log(lij);
        }
    }
    double sq = 0.0;
    for (double v : u) sq += v * v;
    double ll = log_diag - 0.5 * sq;
    if (include_2pi) ll -= 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    const bool rec = autodiff::detail::should_record({&z});
    autodiff::Tensor out = autodiff::make_result({}, {ll}, rec);
    if (rec) {
        autodiff::Tape::current().record(
            out, [zn = autodiff::node_of(z), packed = std::move(packed), u = std::move(u),
                  rv = std::vector<double>(r.begin(), r.end()), n](std::span<const double> g) {
                double* gz = autodiff::detail::grad_of(zn);
                std::size_t k = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j <= i; ++j, ++k) {
                        if (i == j) {
                            const double dl = 1.0 / packed[k] - u[i] * rv[i];
                            gz[k] += g[0] * dl * autodiff::stable_sigmoid(zn->data[k]);
                        } else {
                            gz[k] += g[0] * (-u[j] * rv[i]);
                        }
                    }
                }
            });
    }
    return out;
}

}  // namespace varvol::covparam
