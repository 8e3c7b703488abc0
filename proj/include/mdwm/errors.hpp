#pragma once

#include <stdexcept>
#include <string>

namespace mdwm {

// Base class for all library errors. The category maps onto CLI exit codes:
// validation 1, numerical 2, I/O 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: shape mismatch, out-of-range parameter, inconsistent labels.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A computation could not produce a valid result (non-SPD input,
// non-convergence, undefined statistic).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Covariance estimate is singular; the caller should raise the shrinkage.
class RegularizationNeededError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Statistic is undefined for the given data (all differences zero,
// zero variance).
class UndefinedStatisticError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Filesystem or format problem.
class IoError : public Error {
public:
    using Error::Error;
};

// File contents do not follow the documented format.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

// Sizes recorded in a header disagree with each other or with the payload.
class DimensionMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace mdwm
