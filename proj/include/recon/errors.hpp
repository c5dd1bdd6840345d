#pragma once

#include <stdexcept>
#include <string>

namespace recon {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error { using Error::Error; };
struct DegenerateRange : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct EmptySplit : Error { using Error::Error; };
struct NumericFailure : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct BadParams : Error { using Error::Error; };
struct BadLabel : Error { using Error::Error; };
struct UnknownSample : Error { using Error::Error; };

} // namespace recon
