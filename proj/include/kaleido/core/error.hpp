#pragma once

#include <stdexcept>
#include <string>

namespace kaleido {

/// A caller broke a documented precondition (bad shape, out-of-range value,
/// malformed token stream). Maps to CLI exit code 1.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up in parameters, gradients or sampler state.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or parse failure on an external artifact. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

}  // namespace kaleido
