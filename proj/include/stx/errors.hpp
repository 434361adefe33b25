#pragma once

#include <stdexcept>
#include <string>

namespace stx {

// Error hierarchy. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError -> 3, FitError -> 4.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
    using DataError::DataError;
};

struct IncompleteGrid : DataError {
    using DataError::DataError;
};

struct CovariateGap : DataError {
    using DataError::DataError;
};

struct AlignmentError : DataError {
    using DataError::DataError;
};

struct WindowTooShort : DataError {
    using DataError::DataError;
};

struct DegenerateYear : DataError {
    using DataError::DataError;
};

struct NoJointExceedances : DataError {
    using DataError::DataError;
};

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitFailure : FitError {
    using FitError::FitError;
};

struct DegenerateSample : FitError {
    using FitError::FitError;
};

struct InsufficientExceedances : FitError {
    using FitError::FitError;
};

struct SelectionFailure : FitError {
    using FitError::FitError;
};

struct BasisError : FitError {
    using FitError::FitError;
};

struct CovarianceError : FitError {
    using FitError::FitError;
};

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace stx
