#pragma once

#include <stdexcept>
#include <string>

namespace cts {

/// Root of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CTS_DEFINE_ERROR(Name)          \
  class Name : public ::cts::Error {    \
   public:                              \
    using ::cts::Error::Error;          \
  }

CTS_DEFINE_ERROR(ParseError);
CTS_DEFINE_ERROR(ValidationError);
CTS_DEFINE_ERROR(UnknownNode);
CTS_DEFINE_ERROR(MissingVariable);
CTS_DEFINE_ERROR(Unreachable);
CTS_DEFINE_ERROR(InvalidParams);
CTS_DEFINE_ERROR(LookupMiss);
CTS_DEFINE_ERROR(DimensionMismatch);
CTS_DEFINE_ERROR(NoEligibleGoal);
CTS_DEFINE_ERROR(SessionClosed);
CTS_DEFINE_ERROR(IndexOutOfRange);
CTS_DEFINE_ERROR(NonFiniteGradient);
CTS_DEFINE_ERROR(BufferTooSmall);
CTS_DEFINE_ERROR(EmptyPath);
CTS_DEFINE_ERROR(NoAnswers);
CTS_DEFINE_ERROR(Untrained);
CTS_DEFINE_ERROR(ConfigError);
CTS_DEFINE_ERROR(CheckpointError);

}  // namespace cts
