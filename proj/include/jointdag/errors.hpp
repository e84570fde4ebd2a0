#pragma once

#include <stdexcept>

namespace jointdag {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CycleError : Error { using Error::Error; };
struct NoExtensionError : Error { using Error::Error; };
struct SizeMismatchError : Error { using Error::Error; };
struct NotPositiveDefiniteError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct BadTargetError : Error { using Error::Error; };
struct TooManyParentsError : Error { using Error::Error; };
struct DegreeExceededError : Error { using Error::Error; };
struct TooLargeError : Error { using Error::Error; };
struct GridEmptyError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace jointdag
