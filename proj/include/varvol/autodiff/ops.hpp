#pragma once

// Differentiable primitives.
//
// Shape rules:
//   matmul      [m,k] x [k,n] -> [m,n];  [m,k] x [k] -> [m]
//   add/sub/mul/div
//               equal shapes; tensor with scalar (rank 0) on either side;
//               matrix [m,n] with vector [n] on the right (added to every row)
//   unary ops   elementwise, shape preserved
//   sum         any shape -> scalar
//   concat      list of rank-1 tensors -> rank-1 tensor
//   slice       rank-1 tensor, half-open range [begin, end)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varvol/autodiff/tape.hpp"
#include "varvol/autodiff/tensor.hpp"

namespace varvol::autodiff {

/// log(1 + e^x) without overflow for large |x|.
inline double stable_softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::current().recording()) return false;
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor* t) { return t->requires_grad(); });
}

inline double* grad_of(const NodePtr& node) {
    node->ensure_grad();
    return node->grad.data();
}

enum class Broadcast { same, a_scalar, b_scalar, row_vector };

inline Broadcast broadcast_mode(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (b.rank() == 0) return Broadcast::b_scalar;
    if (a.rank() == 0) return Broadcast::a_scalar;
    if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) {
        return Broadcast::row_vector;
    }
    throw ShapeError(op, {a.shape(), b.shape()});
}

/// Elementwise binary op with the restricted broadcasting above.
/// `partials(a, b, out)` returns {d out/d a, d out/d b}.
template <class Fwd, class Partials>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Partials partials) {
    const Broadcast mode = broadcast_mode(op, a, b);
    const Shape out_shape = mode == Broadcast::a_scalar ? b.shape() : a.shape();
    const std::size_t n = shape_size(out_shape);
    const std::size_t row = mode == Broadcast::row_vector ? b.size() : 1;
    auto ia = [mode](std::size_t i) { return mode == Broadcast::a_scalar ? 0 : i; };
    auto ib = [mode, row](std::size_t i) -> std::size_t {
        switch (mode) {
            case Broadcast::same: return i;
            case Broadcast::b_scalar: return 0;
            case Broadcast::a_scalar: return i;
            case Broadcast::row_vector: return i % row;
        }
        return i;
    };

    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[ia(i)], bd[ib(i)]);

    const bool rec = should_record({&a, &b});
    Tensor result = make_result(out_shape, std::move(out), rec);
    if (rec) {
        Tape::current().record(
            result, [an = node_of(a), bn = node_of(b), on = node_of(result), ia, ib, partials,
                     n](std::span<const double> g) {
                double* ga = an->requires_grad ? grad_of(an) : nullptr;
                double* gb = bn->requires_grad ? grad_of(bn) : nullptr;
                for (std::size_t i = 0; i < n; ++i) {
                    const auto [da, db] = partials(an->data[ia(i)], bn->data[ib(i)], on->data[i]);
                    if (ga) ga[ia(i)] += g[i] * da;
                    if (gb) gb[ib(i)] += g[i] * db;
                }
            });
    }
    return result;
}

/// Elementwise unary op; `deriv(x, y)` returns dy/dx.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto xd = x.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
    const bool rec = should_record({&x});
    Tensor result = make_result(x.shape(), std::move(out), rec);
    if (rec) {
        Tape::current().record(result, [xn = node_of(x), on = node_of(result),
                                        deriv](std::span<const double> g) {
            double* gx = grad_of(xn);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xn->data[i], on->data[i]);
        });
    }
    return result;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return std::pair{1.0, 1.0}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return std::pair{1.0, -1.0}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double) { return std::pair{y, x}; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double out) { return std::pair{1.0 / y, -out / y}; });
}

inline Tensor negate(const Tensor& x) {
    return detail::unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

inline Tensor scale(const Tensor& x, double c) {
    return detail::unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor square(const Tensor& x) {
    return detail::unary(x, [](double v) { return v * v; },
                         [](double v, double) { return 2.0 * v; });
}

inline Tensor exp(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::exp(v); },
                         [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::log(v); },
                         [](double v, double) { return 1.0 / v; });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::tanh(v); },
                         [](double, double y) { return 1.0 - y * y; });
}

inline Tensor softplus(const Tensor& x) {
    return detail::unary(x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                         [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    const bool rec = detail::should_record({&x});
    Tensor result = make_result(Shape{}, {total}, rec);
    if (rec) {
        Tape::current().record(result, [xn = node_of(x)](std::span<const double> g) {
            double* gx = detail::grad_of(xn);
            for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += g[0];
        });
    }
    return result;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const RowMat>;
    using Map = Eigen::Map<RowMat>;

    if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul", {a.shape(), b.shape()});
    }
    const auto m = static_cast<Eigen::Index>(a.shape()[0]);
    const auto k = static_cast<Eigen::Index>(a.shape()[1]);
    const auto n = static_cast<Eigen::Index>(b.rank() == 2 ? b.shape()[1] : 1);

    std::vector<double> out(static_cast<std::size_t>(m * n));
    Map(out.data(), m, n).noalias() = CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);

    Shape out_shape = b.rank() == 2 ? Shape{a.shape()[0], b.shape()[1]} : Shape{a.shape()[0]};
    const bool rec = detail::should_record({&a, &b});
    Tensor result = make_result(std::move(out_shape), std::move(out), rec);
    if (rec) {
        Tape::current().record(result, [an = node_of(a), bn = node_of(b), m, k,
                                        n](std::span<const double> g) {
            CMap gm(g.data(), m, n);
            if (an->requires_grad) {
                Map(detail::grad_of(an), m, k).noalias() += gm * CMap(bn->data.data(), k, n).transpose();
            }
            if (bn->requires_grad) {
                Map(detail::grad_of(bn), k, n).noalias() += CMap(an->data.data(), m, k).transpose() * gm;
            }
        });
    }
    return result;
}

inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat", {}, "no inputs");
    std::vector<double> out;
    bool any_grad = false;
    std::vector<Shape> shapes;
    for (const auto& p : parts) shapes.push_back(p.shape());
    for (const auto& p : parts) {
        if (p.rank() != 1) throw ShapeError("concat", shapes, "inputs must be rank 1");
        out.insert(out.end(), p.data().begin(), p.data().end());
        any_grad = any_grad || p.requires_grad();
    }
    const bool rec = any_grad && Tape::current().recording();
    const std::size_t total = out.size();
    Tensor result = make_result(Shape{total}, std::move(out), rec);
    if (rec) {
        std::vector<detail::NodePtr> nodes;
        for (const auto& p : parts) nodes.push_back(node_of(p));
        Tape::current().record(result, [nodes = std::move(nodes)](std::span<const double> g) {
            std::size_t offset = 0;
            for (const auto& node : nodes) {
                const std::size_t len = node->data.size();
                if (node->requires_grad) {
                    double* gp = detail::grad_of(node);
                    for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
                }
                offset += len;
            }
        });
    }
    return result;
}

inline Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() != 1 || begin > end || end > x.size()) {
        throw ShapeError("slice", {x.shape()},
                         "range [" + std::to_string(begin) + "," + std::to_string(end) + ")");
    }
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end));
    const bool rec = detail::should_record({&x});
    Tensor result = make_result(Shape{end - begin}, std::move(out), rec);
    if (rec) {
        Tape::current().record(result, [xn = node_of(x), begin](std::span<const double> g) {
            double* gx = detail::grad_of(xn);
            for (std::size_t i = 0; i < g.size(); ++i) gx[begin + i] += g[i];
        });
    }
    return result;
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return negate(x); }

}  // namespace varvol::autodiff
