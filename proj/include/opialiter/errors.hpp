#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opialiter {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A parameter or input document violates a documented constraint.
/// `field()` names the offending field.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed input document. `field()` is empty when the failure is syntactic.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NotImplemented : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Diagnostics were asked for a tail longer than the sequence.
class InsufficientData : public Error {
public:
    using Error::Error;
};

class NotInLambda : public Error {
public:
    using Error::Error;
};

/// Errors raised while an engine is iterating.
class EngineError : public Error {
public:
    using Error::Error;
};

class DomainEscape : public EngineError {
public:
    DomainEscape(std::size_t step, double distance)
        : EngineError("iterate " + std::to_string(step) + " left the domain (distance " +
                      std::to_string(distance) + ")"),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class NonConvergence : public EngineError {
public:
    using EngineError::EngineError;
};

}  // namespace opialiter
