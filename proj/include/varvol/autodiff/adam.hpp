#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "varvol/autodiff/param_store.hpp"

namespace varvol::autodiff {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments, keyed by parameter name.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    /// Applies one update from the populated gradients, then zeroes them.
    /// Any non-finite gradient skips the whole step (counted in skipped_steps()).
    bool step(ParamStore& params) {
        bool finite = true;
        for (const auto& e : params.entries()) {
            for (double g : e.tensor.grad()) {
                if (!std::isfinite(g)) {
                    finite = false;
                    break;
                }
            }
        }
        if (!finite) {
            ++skipped_;
            params.zero_grad();
            return false;
        }

        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        for (const auto& e : params.entries()) {
            if (!e.tensor.has_grad()) continue;
            auto& m = moments_[e.name];
            if (m.first.empty()) {
                m.first.assign(e.tensor.size(), 0.0);
                m.second.assign(e.tensor.size(), 0.0);
            }
            Tensor handle = e.tensor;
            auto w = handle.mutable_data();
            const auto g = e.tensor.grad();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g[i];
                m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g[i] * g[i];
                const double mhat = m.first[i] / c1;
                const double vhat = m.second[i] / c2;
                w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
            }
        }
        params.zero_grad();
        return true;
    }

    const AdamConfig& config() const noexcept { return config_; }
    std::size_t steps() const noexcept { return t_; }
    std::size_t skipped_steps() const noexcept { return skipped_; }

private:
    AdamConfig config_;
    std::size_t t_ = 0;
    std::size_t skipped_ = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace varvol::autodiff
