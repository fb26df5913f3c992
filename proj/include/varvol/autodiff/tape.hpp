#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "varvol/autodiff/tensor.hpp"

namespace varvol::autodiff {

/// Define-by-run record of differentiable operations.
///
/// Each thread owns one tape (Tape::current()). Operations append a record when
/// any input requires a gradient and recording is enabled. backward() replays
/// the records in reverse order and then clears the tape, so a second
/// backward() through the same graph is rejected.
class Tape {
public:
    /// Receives the gradient of the loss w.r.t. the op output and accumulates
    /// into the inputs it captured.
    using BackwardFn = std::function<void(std::span<const double> out_grad)>;

    static Tape& current() {
        thread_local Tape tape;
        return tape;
    }

    bool recording() const noexcept { return enabled_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    void record(const Tensor& output, BackwardFn fn) {
        records_.push_back(Record{node_of(output), std::move(fn)});
    }

    void backward(const Tensor& loss) {
        if (loss.size() != 1) {
            throw ShapeError("backward", {loss.shape()}, "loss must be a scalar");
        }
        if (records_.empty()) {
            throw std::logic_error(
                "backward: tape is empty (graph already consumed or loss does not require grad)");
        }
        const auto& loss_node = node_of(loss);
        std::size_t end = records_.size();
        while (end > 0 && records_[end - 1].output != loss_node) --end;
        if (end == 0) {
            throw std::logic_error("backward: loss was not produced on the current tape");
        }
        loss_node->ensure_grad();
        loss_node->grad[0] += 1.0;
        for (std::size_t i = end; i-- > 0;) {
            const auto& rec = records_[i];
            if (rec.output->grad.empty()) continue;
            rec.backward(rec.output->grad);
        }
        clear();
    }

    void clear() noexcept { records_.clear(); }

private:
    struct Record {
        detail::NodePtr output;
        BackwardFn backward;
    };

    std::vector<Record> records_;
    bool enabled_ = true;

    friend class NoGradGuard;
};

/// Disables recording on the current thread's tape for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(Tape::current().enabled_) { Tape::current().enabled_ = false; }
    ~NoGradGuard() { Tape::current().enabled_ = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline void backward(const Tensor& loss) { Tape::current().backward(loss); }

}  // namespace varvol::autodiff
