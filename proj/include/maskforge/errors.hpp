#pragma once

#include <stdexcept>
#include <string>

namespace maskforge {

// Violated precondition or shape contract on a public operation.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed, unsupported or truncated external data (NIfTI, checkpoints, config).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite arithmetic is required (losses, gradients).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void contract(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

}  // namespace maskforge
