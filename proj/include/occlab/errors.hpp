#pragma once

#include <stdexcept>
#include <string>

namespace occlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation (e.g. x outside [0,1]^n).
class DomainError : public Error
{
public:
    using Error::Error;
};

/// A rule produced a value outside [0,1]; the model is malformed.
class RangeError : public Error
{
public:
    using Error::Error;
};

/// The operation needs a survival/colonization split the rule does not provide.
class SplitRequired : public Error
{
public:
    using Error::Error;
};

/// Problem size exceeds an enumeration cap.
class TooLarge : public Error
{
public:
    using Error::Error;
};

/// A one-step standard deviation required by a bound vanishes.
class DegenerateSigma : public Error
{
public:
    using Error::Error;
};

/// A linear system is numerically singular.
class Singular : public Error
{
public:
    using Error::Error;
};

/// An iterative method exhausted its budget.
class NotConverged : public Error
{
public:
    using Error::Error;
};

/// Malformed configuration or descriptor.
class SchemaError : public Error
{
public:
    using Error::Error;
};

} // namespace occlab
