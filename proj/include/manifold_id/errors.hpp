#pragma once

#include <stdexcept>
#include <string>

namespace manifold_id {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file: bad magic, truncated payload, ragged CSV, junk labels.
// Messages name the byte offset (binary) or line number (text).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError : Error {
    using Error::Error;
};

// Caller passed an invalid parameter, spec, or configuration.
struct InvalidArgument : Error {
    using Error::Error;
};

// Numeric input violates a data invariant (non-finite values, empty class, ...).
struct DataError : Error {
    using Error::Error;
};

// An estimator could not produce a value.
struct EstimationError : Error {
    using Error::Error;
};

// Local neighborhood carries no usable distance information (all estimate
// terms skipped, or a non-negative log-sum).
struct DegenerateNeighborhoodError : EstimationError {
    using EstimationError::EstimationError;
};

// Duplicate points collapsed the neighborhood: fewer than two distinct
// neighbors remain, or the k-th neighbor distance is zero.
struct DuplicateCollapseError : EstimationError {
    using EstimationError::EstimationError;
};

// Covariance queue consumed before every class FIFO holds at least one entry.
struct NotWarmedUpError : Error {
    using Error::Error;
};

// Training run aborted (diverged loss, impossible split).
struct TrainingError : Error {
    using Error::Error;
};

} // namespace manifold_id
