#pragma once

#include <stdexcept>
#include <string>

namespace debm {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad row, unknown diagnosis label, non-numeric cell).
struct LoadError : Error {
    using Error::Error;
};

/// Structurally valid input that violates a dataset or model invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// Mixture initialization or optimization failure (degenerate fit,
/// non-finite likelihood), tagged with group/biomarker by the callers.
struct FitError : Error {
    using Error::Error;
};

/// Subject cannot be placed on a timeline.
struct StagingError : Error {
    using Error::Error;
};

/// Invalid run configuration (unrealizable simulation parameters, bad grid).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace debm
