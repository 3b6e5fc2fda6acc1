#pragma once

#include <stdexcept>
#include <string>

namespace streamo {

// Base for all domain errors. The CLI maps these to exit code 1;
// configuration and I/O problems (ConfigError, IoError) map to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define STREAMO_DEFINE_ERROR(Name)                                \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// dialogue
STREAMO_DEFINE_ERROR(MalformedMarker);
STREAMO_DEFINE_ERROR(NonRepresentable);
STREAMO_DEFINE_ERROR(OverlappingEvents);
STREAMO_DEFINE_ERROR(EventOutOfRange);
STREAMO_DEFINE_ERROR(QuestionAfterEvent);
STREAMO_DEFINE_ERROR(SchemaViolation);

// loss
STREAMO_DEFINE_ERROR(DomainError);
STREAMO_DEFINE_ERROR(AllZeroCounts);
STREAMO_DEFINE_ERROR(ShapeMismatch);

// synth
STREAMO_DEFINE_ERROR(InfeasibleRatio);

// model
STREAMO_DEFINE_ERROR(IdOutOfRange);
STREAMO_DEFINE_ERROR(DivergenceDetected);
STREAMO_DEFINE_ERROR(EmptyEvaluationSet);

// engine
STREAMO_DEFINE_ERROR(VocabularyMismatch);
STREAMO_DEFINE_ERROR(SessionClosed);
STREAMO_DEFINE_ERROR(ContextOverflow);

// metrics
STREAMO_DEFINE_ERROR(DegenerateInterval);
STREAMO_DEFINE_ERROR(EmptySet);
STREAMO_DEFINE_ERROR(EmptyGold);

// judge
STREAMO_DEFINE_ERROR(JudgeUnavailable);
STREAMO_DEFINE_ERROR(JudgeProtocolError);

// cli
STREAMO_DEFINE_ERROR(MissingRuns);
STREAMO_DEFINE_ERROR(ConfigError);
STREAMO_DEFINE_ERROR(IoError);

#undef STREAMO_DEFINE_ERROR

}  // namespace streamo
