#pragma once

#include <stdexcept>
#include <string>

namespace mte {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates a type invariant (mass sums, pattern lengths, grid order).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The conditioning event of a treatment parameter has (numerically) zero mass.
class UndefinedParameterError : public Error {
public:
    using Error::Error;
};

/// The instrument cannot be relabeled so that p(z) = z.
class NormalizationError : public Error {
public:
    using Error::Error;
};

/// A generator configuration that cannot be satisfied.
class InfeasibleConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed JSON / CSV input. The message names the offending field.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace mte
