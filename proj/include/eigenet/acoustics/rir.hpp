#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "eigenet/core/error.hpp"

namespace eigenet::acoustics {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr int kDefaultRirLength = 8000;

/// Linear floor applied before every log: -100 dB in power terms.
inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kFloorDb = -100.0;

/// A mono room impulse response.
struct Rir {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  Rir() = default;
  Rir(std::vector<double> s, int fs) : samples(std::move(s)), sample_rate(fs) {}

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  std::span<const double> view() const { return samples; }

  double energy() const {
    double e = 0.0;
    for (double v : samples) e += v * v;
    return e;
  }

  void validate() const {
    require(!samples.empty(), ErrorKind::ShapeMismatch, "empty RIR");
    require(sample_rate > 0, ErrorKind::ConfigInvalid, "sample rate must be positive");
    for (double v : samples) require(std::isfinite(v), ErrorKind::ConfigInvalid, "non-finite RIR sample");
  }

  bool operator==(const Rir&) const = default;
};

}  // namespace eigenet::acoustics
