#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eigenet {

/// Every domain failure the library reports. The CLI maps these to exit code 1.
enum class ErrorKind {
  ZeroEnergy,
  LateEnergyZero,
  InsufficientDecayRange,
  ConfigInvalid,
  LengthMismatch,
  ShapeMismatch,
  CoincidentEndpoints,
  OrderTooLargeForBudget,
  ZeroAbsorption,
  SamplingExhausted,
  FormatVersionMismatch,
  EmptyInput,
  TooFewSources,
  AllKeysMasked,
  OddDimension,
  IndivisibleShape,
  LengthNotDivisible,
  QualityGateNotMet,
  ConventionMismatch,
  VariantDisabled,
  HeterogeneousShapes,
  MissingSpectrumTarget,
  NonFiniteLoss,
  EmptyPool,
  HashChainBroken,
  MissingArtifact,
  Io,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::ZeroEnergy: return "ZeroEnergy";
    case ErrorKind::LateEnergyZero: return "LateEnergyZero";
    case ErrorKind::InsufficientDecayRange: return "InsufficientDecayRange";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::CoincidentEndpoints: return "CoincidentEndpoints";
    case ErrorKind::OrderTooLargeForBudget: return "OrderTooLargeForBudget";
    case ErrorKind::ZeroAbsorption: return "ZeroAbsorption";
    case ErrorKind::SamplingExhausted: return "SamplingExhausted";
    case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewSources: return "TooFewSources";
    case ErrorKind::AllKeysMasked: return "AllKeysMasked";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::IndivisibleShape: return "IndivisibleShape";
    case ErrorKind::LengthNotDivisible: return "LengthNotDivisible";
    case ErrorKind::QualityGateNotMet: return "QualityGateNotMet";
    case ErrorKind::ConventionMismatch: return "ConventionMismatch";
    case ErrorKind::VariantDisabled: return "VariantDisabled";
    case ErrorKind::HeterogeneousShapes: return "HeterogeneousShapes";
    case ErrorKind::MissingSpectrumTarget: return "MissingSpectrumTarget";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::HashChainBroken: return "HashChainBroken";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace eigenet
