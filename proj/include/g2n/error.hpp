#pragma once

#include <stdexcept>
#include <string>

namespace g2n {

/// Invalid user-supplied configuration (bad sizes, probabilities out of range, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated internal contract: shape mismatch, out-of-range index.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values surfaced by numeric code (losses, distribution parameters).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InternalError(message);
}

}  // namespace g2n
