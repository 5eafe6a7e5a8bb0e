#pragma once

#include <stdexcept>
#include <string>

namespace spray {

/// Base for every error raised by the library.
class SprayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or contract failure on an operation's inputs.
class ContractError : public SprayError {
public:
    using SprayError::SprayError;
};

/// Iterative procedure ran out of budget (Picard, fixed point, series).
class ConvergenceError : public SprayError {
public:
    ConvergenceError(const std::string& what, double last_ratio)
        : SprayError(what), last_ratio_(last_ratio) {}
    double last_ratio() const noexcept { return last_ratio_; }

private:
    double last_ratio_;
};

/// A state invariant (positivity, divergence, cutoff, ...) failed at runtime.
/// `invariant()` is the short label reported by the CLI.
class InvariantViolation : public SprayError {
public:
    InvariantViolation(std::string invariant, const std::string& detail)
        : SprayError("invariant violated [" + invariant + "]: " + detail),
          invariant_(std::move(invariant)) {}
    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

class ConfigError : public SprayError {
public:
    ConfigError(int line, const std::string& msg)
        : SprayError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace spray
