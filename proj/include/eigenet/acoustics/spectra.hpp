#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/ad/spectral.hpp"

namespace eigenet::acoustics {

using RowMatrix = ad::Mat<double>;

struct StftConfig {
  int fft_size = 1024;
  int hop = 256;
  /// Sample index of the first frame center; frames are reflect-padded.
  int center_offset = 0;

  int bins() const { return fft_size / 2 + 1; }

  void validate(std::size_t length) const {
    require(fft_size > 0 && (fft_size & (fft_size - 1)) == 0, ErrorKind::ConfigInvalid,
            "fft_size must be a power of two");
    require(hop > 0 && hop <= fft_size, ErrorKind::ConfigInvalid, "hop must be in (0, fft_size]");
    require(static_cast<std::size_t>(fft_size) <= length, ErrorKind::ConfigInvalid,
            "fft_size exceeds signal length");
    require(center_offset >= 0 && static_cast<std::size_t>(center_offset) < length,
            ErrorKind::ConfigInvalid, "center_offset outside signal");
  }

  /// Frames whose centers fall inside the signal.
  Eigen::Index frames(std::size_t length) const {
    return (static_cast<Eigen::Index>(length) - 1 - center_offset) / hop + 1;
  }

  ad::FrameLayout layout(std::size_t length) const {
    return {fft_size, hop, frames(length), center_offset};
  }
};

/// Squared-magnitude STFT, frames × (fft/2+1).
inline RowMatrix stft_power(const Rir& h, const StftConfig& cfg) {
  cfg.validate(h.size());
  const auto window = ad::detail::periodic_hann<double>(cfg.fft_size);
  auto spec = ad::detail::stft_complex(h.samples.data(), static_cast<Eigen::Index>(h.size()),
                                       cfg.layout(h.size()), window);
  return spec.cwiseAbs2();
}

/// ISO octave bands 63 Hz .. 4 kHz with edges fc/√2 .. fc·√2.
struct OctaveBank {
  static constexpr int kBands = 7;
  std::array<double, kBands> center_frequencies{63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0};

  double lower_edge(int j) const { return center_frequencies[j] / std::numbers::sqrt2; }
  double upper_edge(int j) const { return center_frequencies[j] * std::numbers::sqrt2; }

  void validate(int sample_rate) const {
    for (int j = 0; j < kBands; ++j) {
      require(lower_edge(j) > 0.0, ErrorKind::ConfigInvalid, "band edges must be positive");
      if (j > 0)
        require(center_frequencies[j] > center_frequencies[j - 1], ErrorKind::ConfigInvalid,
                "bands must be ordered");
    }
    require(upper_edge(kBands - 1) <= sample_rate / 2.0, ErrorKind::ConfigInvalid,
            "top band edge above Nyquist");
  }

  /// Band containing a frequency, or -1. Intervals are half-open [lo, hi).
  int band_of(double hz) const {
    for (int j = 0; j < kBands; ++j)
      if (hz >= lower_edge(j) && hz < upper_edge(j)) return j;
    return -1;
  }
};

inline constexpr int kOctaveFftSize = 1024;

/// Frame layout shared by the octave and full-STFT spectrum targets: one frame
/// per codec token, centered in the middle of that token's span.
inline StftConfig token_aligned_stft(int sample_rate, int frame_rate, int fft_size = kOctaveFftSize) {
  require(frame_rate > 0 && sample_rate % frame_rate == 0, ErrorKind::ConfigInvalid,
          "frame_rate must divide sample_rate");
  const int hop = sample_rate / frame_rate;
  return StftConfig{fft_size, hop, hop / 2};
}

/// Linear band energies, n × 7, from rectangular summation of power bins.
inline RowMatrix octave_band_power(const Rir& h, const OctaveBank& bank, int frame_rate) {
  bank.validate(h.sample_rate);
  const StftConfig cfg = token_aligned_stft(h.sample_rate, frame_rate);
  const RowMatrix p = stft_power(h, cfg);
  RowMatrix out = RowMatrix::Zero(p.rows(), OctaveBank::kBands);
  for (int k = 0; k < cfg.bins(); ++k) {
    const int band = bank.band_of(static_cast<double>(k) * h.sample_rate / cfg.fft_size);
    if (band >= 0) out.col(band) += p.col(k);
  }
  return out;
}

inline RowMatrix log10_floored(const RowMatrix& linear) {
  return linear.cwiseMax(kPowerFloor).array().log10();
}

/// Log10-compressed multi-octave power spectrum, n × 7 (25 × 7 by default).
inline RowMatrix octave_power_spectrum(const Rir& h, const OctaveBank& bank = {}, int frame_rate = 50) {
  return log10_floored(octave_band_power(h, bank, frame_rate));
}

/// Log10-compressed full STFT power on the token-aligned layout, n × (fft/2+1).
inline RowMatrix full_stft_spectrum(const Rir& h, int frame_rate = 50, int fft_size = kOctaveFftSize) {
  return log10_floored(stft_power(h, token_aligned_stft(h.sample_rate, frame_rate, fft_size)));
}

}  // namespace eigenet::acoustics
