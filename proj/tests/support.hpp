#pragma once

#include <cmath>
#include <vector>

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/core/rng.hpp"

namespace eigenet::testing {

/// White noise under an amplitude envelope e^(−t/τ).
inline acoustics::Rir exponential_rir(double tau, std::uint64_t seed, std::size_t length = 8000, int fs = 16000) {
  Rng rng(seed);
  std::vector<double> s(length);
  for (std::size_t i = 0; i < length; ++i)
    s[i] = rng.normal() * std::exp(-static_cast<double>(i) / fs / tau);
  return acoustics::Rir(std::move(s), fs);
}

/// Sparse random RIR: a direct path plus exponentially decaying reflections.
inline acoustics::Rir random_rir(std::uint64_t seed, std::size_t length = 8000, int fs = 16000) {
  Rng rng(seed);
  const double tau = rng.uniform(0.03, 0.15);
  std::vector<double> s(length, 0.0);
  const auto onset = static_cast<std::size_t>(rng.below(200));
  s[onset] = 1.0;
  for (std::size_t i = onset + 1; i < length; ++i)
    if (rng.uniform() < 0.3) s[i] = rng.normal() * 0.3 * std::exp(-static_cast<double>(i - onset) / fs / tau);
  return acoustics::Rir(std::move(s), fs);
}

inline acoustics::Rir sinusoid(double hz, std::size_t length = 8000, int fs = 16000) {
  std::vector<double> s(length);
  for (std::size_t i = 0; i < length; ++i) s[i] = std::sin(2.0 * M_PI * hz * static_cast<double>(i) / fs);
  return acoustics::Rir(std::move(s), fs);
}

}  // namespace eigenet::testing
