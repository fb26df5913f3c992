#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace varvol::baselines {

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct NelderMeadOptions {
    double initial_step = 0.5;
    /// Stop when the simplex characteristic size falls below this.
    double size_tol = 1e-9;
    int max_iterations = 20000;
};

/// Minimises `f` with GSL's nmsimplex2. Non-finite objective values are
/// replaced by a large finite penalty so the simplex can back away.
inline MinimizeResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<double>& x0, const NelderMeadOptions& opt = {}) {
    const std::size_t dim = x0.size();
    if (dim == 0) throw std::invalid_argument("nelder_mead: empty start point");

    struct Ctx {
        const std::function<double(const std::vector<double>&)>* f;
        std::vector<double> buf;
    } ctx{&f, std::vector<double>(dim)};

    gsl_multimin_function fn;
    fn.n = dim;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) -> double {
        auto* c = static_cast<Ctx*>(p);
        for (std::size_t i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, i);
        const double y = (*c->f)(c->buf);
        return std::isfinite(y) ? y : 1e100;
    };

    using VecPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
    VecPtr x(gsl_vector_alloc(dim), &gsl_vector_free);
    VecPtr step(gsl_vector_alloc(dim), &gsl_vector_free);
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x.get(), i, x0[i]);
    gsl_vector_set_all(step.get(), opt.initial_step);

    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), step.get());

    MinimizeResult out;
    int status = GSL_CONTINUE;
    while (status == GSL_CONTINUE && out.iterations < opt.max_iterations) {
        ++out.iterations;
        if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
        status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), opt.size_tol);
    }
    out.converged = status == GSL_SUCCESS;
    out.value = gsl_multimin_fminimizer_minimum(s.get());
    out.x.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) out.x[i] = gsl_vector_get(s->x, i);
    return out;
}

/// Runs Nelder-Mead from each start, then restarts from the best point
/// until a restart no longer improves the objective.
inline MinimizeResult multi_start_minimize(const std::function<double(const std::vector<double>&)>& f,
                                           const std::vector<std::vector<double>>& starts,
                                           const NelderMeadOptions& opt = {}, int max_restarts = 5) {
    if (starts.empty()) throw std::invalid_argument("multi_start_minimize: no start points");
    MinimizeResult best;
    bool have = false;
    for (const auto& x0 : starts) {
        MinimizeResult r = nelder_mead(f, x0, opt);
        if (!have || r.value < best.value) best = std::move(r), have = true;
    }
    NelderMeadOptions polish = opt;
    polish.initial_step = 0.1;
    for (int k = 0; k < max_restarts; ++k) {
        MinimizeResult r = nelder_mead(f, best.x, polish);
        const bool improved = r.value < best.value - 1e-12 * (1.0 + std::abs(best.value));
        if (r.value <= best.value) {
            r.iterations += best.iterations;
            best = std::move(r);
        }
        if (!improved) break;
    }
    return best;
}

}  // namespace varvol::baselines
