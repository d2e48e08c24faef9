#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace delaymoc {

enum class ErrorKind {
  MissingKey,
  UnknownKey,
  NonFiniteValue,
  NegativeVolume,
  NegativeDelay,
  InvalidValue,
  NoConvergence,
  NoEquilibrium,
  InvalidStep,
  HorizonTooShort,
  NonFiniteState,
  QueryOutOfWindow,
  EventEncountered,
  TooFewSamples,
  EigensolveFailure,
  NoCrossingInBracket,
  RealRootCrossing,
  HopfNotVerified,
  StartNotOnCurve,
  CorrectorDivergence,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace delaymoc
