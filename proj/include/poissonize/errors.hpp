#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poissonize {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A field or derived quantity evaluated to NaN or Inf.
class NonFiniteResult : public Error {
public:
    using Error::Error;
};

/// Expression evaluated outside the domain of one of its operations.
class DomainError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, std::string expected)
        : Error("syntax error at offset " + std::to_string(offset) + ": expected " + expected),
          offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

class UnknownIdentifier : public Error {
public:
    UnknownIdentifier(std::size_t offset, const std::string& name)
        : Error("unknown identifier '" + name + "' at offset " + std::to_string(offset)),
          offset_(offset), name_(name) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& name() const noexcept { return name_; }

private:
    std::size_t offset_;
    std::string name_;
};

class UnknownSystem : public Error {
public:
    using Error::Error;
};

/// |B| fell below the probe threshold, so w = B/B^2 is undefined.
class ZeroFieldError : public Error {
public:
    using Error::Error;
};

/// The supplied D is not divergence free on the probe set.
class NotClosedError : public Error {
public:
    using Error::Error;
};

/// |w.D + s h| dropped below the configured floor.
class ConformalFactorVanished : public Error {
public:
    using Error::Error;
};

/// Adaptive step size underflowed dt_min.
class StepFailure : public Error {
public:
    using Error::Error;
};

/// q_x = q_y = 0: the canonical chart of the plasma example is undefined.
class ChartSingularity : public Error {
public:
    using Error::Error;
};

/// z left the principal arcsin branch (-pi/2, pi/2), or s + 1/2 <= 0.
class BranchViolation : public Error {
public:
    using Error::Error;
};

/// w.D + s h < 0 somewhere in the s window of an equilibrium grid.
class NegativeDensity : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration (bad parameters, missing keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace poissonize
