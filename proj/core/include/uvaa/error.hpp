#pragma once

#include <stdexcept>
#include <string>

namespace uvaa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define UVAA_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// physics
UVAA_DEFINE_ERROR(DegenerateArray);
UVAA_DEFINE_ERROR(ZeroDistance);
UVAA_DEFINE_ERROR(CoincidentPoints);
// env
UVAA_DEFINE_ERROR(PlacementFailure);
UVAA_DEFINE_ERROR(EpisodeFinished);
// neural / moppo
UVAA_DEFINE_ERROR(ShapeMismatch);
UVAA_DEFINE_ERROR(NonFiniteGradient);
UVAA_DEFINE_ERROR(NonFiniteLoss);
UVAA_DEFINE_ERROR(CheckpointError);
// metrics
UVAA_DEFINE_ERROR(DimensionMismatch);
UVAA_DEFINE_ERROR(EmptyFront);
UVAA_DEFINE_ERROR(PointBelowReference);
// harness
UVAA_DEFINE_ERROR(ConfigError);
UVAA_DEFINE_ERROR(ParseError);
UVAA_DEFINE_ERROR(EmptyDirectory);

#undef UVAA_DEFINE_ERROR

}  // namespace uvaa
