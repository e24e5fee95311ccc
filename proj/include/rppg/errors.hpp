#pragma once

#include <stdexcept>
#include <string>

namespace rppg {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// signal
struct ConstantSignal final : Error { using Error::Error; };
struct InvalidRate final : Error { using Error::Error; };
struct LengthMismatch final : Error { using Error::Error; };
struct WindowTooLong final : Error { using Error::Error; };

// filtering
struct InvalidBand final : Error { using Error::Error; };
struct DesignFailure final : Error { using Error::Error; };
struct SignalTooShort final : Error { using Error::Error; };
struct InvalidFrequency final : Error { using Error::Error; };

// unsupervised pulse extraction
struct EmptyMask final : Error { using Error::Error; };
struct TraceTooShort final : Error { using Error::Error; };
struct DegenerateWindow final : Error { using Error::Error; };
struct SingularCovariance final : Error { using Error::Error; };
struct DegenerateTrace final : Error { using Error::Error; };

// model
struct ShapeMismatch final : Error { using Error::Error; };
struct InputTooShort final : Error { using Error::Error; };
struct NonFiniteLoss final : Error { using Error::Error; };
struct InsufficientData final : Error { using Error::Error; };

// sync
struct NoTransitions final : Error { using Error::Error; };
struct InsufficientOverlap final : Error { using Error::Error; };
struct InvalidBandwidth final : Error { using Error::Error; };

// evaluation
struct NoSegments final : Error { using Error::Error; };

// io / config
struct SchemaError final : Error { using Error::Error; };
struct NonMonotoneTimestamps final : Error { using Error::Error; };
struct InvalidConfig final : Error { using Error::Error; };
struct BiomarkerOutOfRange final : Error { using Error::Error; };
struct InvalidRepetitions final : Error { using Error::Error; };

}  // namespace rppg
