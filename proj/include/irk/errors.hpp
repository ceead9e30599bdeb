#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace irk {

/// Base class for every error raised by the solver kit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// QR iteration failed to reduce a matrix to real Schur form.
class DecompositionError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Invalid scheme, problem or solver configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. eta <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// An eigenvalue of the inverse coefficient matrix has non-positive real part.
class EigenvalueAssumptionError : public Error {
public:
    using Error::Error;
};

/// Index-1 structure violated (constraint Jacobian could not be factored)
/// or the reordered DAE solve was requested for an incompatible system.
class IndexError : public Error {
public:
    using Error::Error;
};

}  // namespace irk
