#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "varvol/autodiff.hpp"
#include "varvol/errors.hpp"
#include "varvol/vhvm/forecast.hpp"
#include "varvol/vhvm/model.hpp"

namespace varvol::vhvm {

struct TrainConfig {
    int epochs = 50;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    int tbptt_window = 64;
    double kl_weight = 1.0;
    /// Global gradient-norm clip per window; <= 0 disables clipping.
    double grad_clip = 5.0;
    /// Divide each asset by its training-sample standard deviation.
    bool standardize = true;

    void validate() const {
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (tbptt_window < 1) throw ConfigError("TrainConfig: tbptt_window must be >= 1");
        if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be positive");
        if (!(kl_weight >= 0.0)) throw ConfigError("TrainConfig: kl_weight must be non-negative");
    }
};

struct TrainLogEntry {
    int epoch = 0;
    double train_elbo = 0.0;
    double valid_ll = 0.0;

    bool operator==(const TrainLogEntry&) const = default;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    int best_epoch = 0;
    std::size_t skipped_steps = 0;
};

/// Training produced a non-finite loss; carries the log up to that point.
class TrainingDiverged : public ModelError {
public:
    TrainingDiverged(const std::string& what, std::vector<TrainLogEntry> log)
        : ModelError(what), log_(std::move(log)) {}

    const std::vector<TrainLogEntry>& log() const noexcept { return log_; }

private:
    std::vector<TrainLogEntry> log_;
};

/// Sample standard deviation of each column; columns with zero spread get 1.
inline std::vector<double> column_scales(const Matrix& returns) {
    std::vector<double> s(static_cast<std::size_t>(returns.cols()), 1.0);
    if (returns.rows() < 2) return s;
    for (Eigen::Index j = 0; j < returns.cols(); ++j) {
        const double mean = returns.col(j).mean();
        const double var = (returns.col(j).array() - mean).square().sum() / static_cast<double>(returns.rows() - 1);
        if (var > 0.0 && std::isfinite(var)) s[static_cast<std::size_t>(j)] = std::sqrt(var);
    }
    return s;
}

/// Training ELBO reported in the log: whole sequence, fixed noise stream.
inline double monitor_elbo(const VhvmModel& model, const Matrix& train, std::uint64_t seed, double kl_weight) {
    autodiff::NoGradGuard guard;
    Rng noise(mix_seed(seed, 0x5EED));
    const ElboOptions options{.kl_weight = kl_weight};
    return -unroll_elbo(model, train, 0, train.rows(), model.initial_state(), noise, options).loss.item();
}

/// Fits the model by truncated BPTT and Adam and leaves it holding the
/// parameters of the epoch with the best validation log likelihood.
/// The log starts with an epoch-0 entry for the initial parameters.
inline TrainResult train(VhvmModel& model, const Matrix& train_returns, const Matrix& valid_returns,
                         const TrainConfig& cfg,
                         const std::function<void(const TrainLogEntry&)>& on_epoch = {}) {
    cfg.validate();
    if (train_returns.rows() < 2) throw DataError("train: need at least 2 training rows");
    if (valid_returns.rows() < 1) throw DataError("train: validation window is empty");
    if (static_cast<std::size_t>(train_returns.cols()) != model.assets() ||
        valid_returns.cols() != train_returns.cols()) {
        throw ShapeError("train", {{static_cast<std::size_t>(train_returns.rows()),
                                    static_cast<std::size_t>(train_returns.cols())},
                                   {static_cast<std::size_t>(valid_returns.rows()),
                                    static_cast<std::size_t>(valid_returns.cols())}});
    }
    if (cfg.standardize) model.set_scale(column_scales(train_returns));

    TrainResult result;
    auto record = [&](int epoch) {
        TrainLogEntry e{epoch, monitor_elbo(model, train_returns, cfg.seed, cfg.kl_weight),
                        evaluate_sequence(model, valid_returns, train_returns).total};
        result.log.push_back(e);
        if (on_epoch) on_epoch(e);
        return e;
    };
    auto diverged = [&](const std::string& why) { return TrainingDiverged("training diverged: " + why, result.log); };

    try {
        record(0);
    } catch (const NonFiniteError& e) {
        throw diverged(e.what());
    }

    autodiff::Adam adam(autodiff::AdamConfig{.lr = cfg.lr});
    autodiff::ParamStore best;
    double best_valid = -std::numeric_limits<double>::infinity();
    const ElboOptions options{.kl_weight = cfg.kl_weight};
    const Eigen::Index total_rows = train_returns.rows();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng noise(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        nn::GruState h = model.initial_state();
        try {
            for (Eigen::Index begin = 0; begin < total_rows; begin += cfg.tbptt_window) {
                const Eigen::Index end = std::min<Eigen::Index>(begin + cfg.tbptt_window, total_rows);
                autodiff::Tape::current().clear();
                UnrollResult window = unroll_elbo(model, train_returns, begin, end, h, noise, options);
                const autodiff::Tensor loss =
                    autodiff::scale(window.loss, 1.0 / static_cast<double>(end - begin));
                if (!std::isfinite(loss.item())) throw NonFiniteError("non-finite window loss", static_cast<std::size_t>(begin));
                autodiff::backward(loss);
                if (cfg.grad_clip > 0.0) autodiff::clip_grad_norm(model.params(), cfg.grad_clip);
                adam.step(model.params());
                h = nn::GruState{window.last.h.detach()};
            }
            const TrainLogEntry e = record(epoch);
            if (!std::isfinite(e.train_elbo)) throw NonFiniteError("non-finite training ELBO", 0);
            if (e.valid_ll > best_valid || best.empty()) {
                best_valid = e.valid_ll;
                best = model.params().clone();
                result.best_epoch = epoch;
            }
        } catch (const NonFiniteError& e) {
            autodiff::Tape::current().clear();
            throw diverged("epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }
    autodiff::Tape::current().clear();
    model.params().assign_values(best);
    result.skipped_steps = adam.skipped_steps();
    return result;
}

inline nlohmann::ordered_json to_json(const TrainLogEntry& e) {
    return {{"epoch", e.epoch}, {"train_elbo", e.train_elbo}, {"valid_ll", e.valid_ll}};
}

/// One JSON object per line: {"epoch", "train_elbo", "valid_ll"}.
inline void write_training_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log: " + path);
    for (const auto& e : log) out << to_json(e).dump() << '\n';
}

}  // namespace varvol::vhvm
