#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace varvol {

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

/// Operand shapes do not satisfy an operation's shape rule.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, const std::vector<std::vector<std::size_t>>& shapes,
               const std::string& detail = {})
        : std::invalid_argument(format(op, shapes, detail)), op_(op), shapes_(shapes) {}

    const std::string& op() const noexcept { return op_; }
    const std::vector<std::vector<std::size_t>>& shapes() const noexcept { return shapes_; }

private:
    static std::string format(const std::string& op,
                              const std::vector<std::vector<std::size_t>>& shapes,
                              const std::string& detail) {
        std::string msg = op + ": incompatible shapes";
        for (const auto& s : shapes) msg += " " + shape_string(s);
        if (!detail.empty()) msg += " (" + detail + ")";
        return msg;
    }

    std::string op_;
    std::vector<std::vector<std::size_t>> shapes_;
};

/// Bad or missing input data (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments (CLI exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A model failed to fit, train or forecast (CLI exit code 3).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularityError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Loss became NaN/inf while evaluating a sequence.
class NonFiniteError : public ModelError {
public:
    NonFiniteError(const std::string& what, std::size_t time_index)
        : ModelError(what + " at time index " + std::to_string(time_index)),
          time_index_(time_index) {}

    std::size_t time_index() const noexcept { return time_index_; }

private:
    std::size_t time_index_;
};

}  // namespace varvol
