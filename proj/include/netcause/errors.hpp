#pragma once

#include <stdexcept>
#include <string>

namespace netcause {

// Error taxonomy shared by all modules; everything derives from Error so
// callers can catch the library as a whole.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexOutOfRangeError : Error { using Error::Error; };
struct SelfLoopError : Error { using Error::Error; };
struct IsolatedEndpointError : Error { using Error::Error; };
struct TooFewUnitsError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct NonFiniteError : Error { using Error::Error; };
struct NonScalarRootError : Error { using Error::Error; };
struct BadDimensionsError : Error { using Error::Error; };
struct IsolatedUnitError : Error { using Error::Error; };
struct ActivationOutOfRangeError : Error { using Error::Error; };
struct TooLargeError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct MissingOracleError : Error { using Error::Error; };
struct OutOfRangeExposureError : Error { using Error::Error; };
struct InfeasibleLPError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace netcause
