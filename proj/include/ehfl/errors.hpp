#pragma once

#include <stdexcept>
#include <string>

namespace ehfl {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A participating client had no stored energy at the start of the round.
class CausalityViolation : public Error {
public:
    using Error::Error;
};

class InvalidStepsize : public Error {
public:
    using Error::Error;
};

/// The chosen base stepsize exceeds the admissible maximum for the mode.
class FeasibilityViolation : public Error {
public:
    FeasibilityViolation(const std::string& what, double max_eta)
        : Error(what), max_eta_(max_eta) {}
    double max_eta() const noexcept { return max_eta_; }

private:
    double max_eta_;
};

class EmptyCohort : public Error {
public:
    using Error::Error;
};

class NonFiniteModel : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidShape : public Error {
public:
    using Error::Error;
};

class InfeasibleEta : public Error {
public:
    using Error::Error;
};

class DegenerateDenominator : public Error {
public:
    using Error::Error;
};

/// A trace or sequence contains a round with zero participants.
class EmptyRound : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Configuration problem; the message names the offending field.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace ehfl
