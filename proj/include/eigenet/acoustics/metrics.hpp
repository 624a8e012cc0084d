#pragma once

#include <cmath>
#include <vector>

#include "json.hpp"

#include "eigenet/acoustics/rir.hpp"

namespace eigenet::acoustics {

/// Normalized Schroeder curve in dB, floored at -100 dB.
struct EnergyDecayCurve {
  std::vector<double> values_db;
  int sample_rate = kDefaultSampleRate;
};

inline double power_db(double ratio) { return 10.0 * std::log10(std::max(ratio, kPowerFloor)); }

inline EnergyDecayCurve schroeder_edc(const Rir& h) {
  h.validate();
  const std::size_t n = h.size();
  std::vector<double> tail(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += h.samples[i] * h.samples[i];
    tail[i] = acc;
  }
  const double total = acc;
  require(total > 0.0, ErrorKind::ZeroEnergy, "RIR has zero energy");
  EnergyDecayCurve edc{std::vector<double>(n), h.sample_rate};
  for (std::size_t i = 0; i < n; ++i) edc.values_db[i] = power_db(tail[i] / total);
  edc.values_db[0] = 0.0;
  return edc;
}

inline constexpr double kClarityBoundarySeconds = 0.050;

/// C50 in dB: early (< 50 ms) over late (>= 50 ms) energy.
inline double clarity_c50(const Rir& h) {
  h.validate();
  const auto boundary = static_cast<std::size_t>(std::lround(kClarityBoundarySeconds * h.sample_rate));
  require(h.size() > boundary, ErrorKind::ConfigInvalid, "RIR shorter than the 50 ms boundary");
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) (i < boundary ? early : late) += h.samples[i] * h.samples[i];
  require(late > 0.0, ErrorKind::LateEnergyZero, "no energy after 50 ms");
  return power_db(early / late);
}

enum class DecayKind { EDT5, T60_via_T20 };

namespace detail {

/// First index whose EDC is at or below `level`, requiring the crossing to
/// land above the floor (a jump straight into the floor is not a decay).
inline std::size_t first_crossing(const EnergyDecayCurve& edc, double level) {
  const auto& v = edc.values_db;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] <= level) {
      require(v[i] > kFloorDb, ErrorKind::InsufficientDecayRange,
              "EDC reaches the floor before the required level");
      return i;
    }
  }
  fail(ErrorKind::InsufficientDecayRange, "EDC never reaches the required level");
}

}  // namespace detail

/// EDT5: time at which the EDC first falls 5 dB, linearly interpolated
/// between samples. T60_via_T20: 3 × T20 from a least-squares line over the
/// samples whose EDC lies in [-25, -5] dB.
inline double decay_time(const EnergyDecayCurve& edc, DecayKind kind) {
  const auto& v = edc.values_db;
  const double fs = edc.sample_rate;
  if (kind == DecayKind::EDT5) {
    const std::size_t i = detail::first_crossing(edc, -5.0);
    if (i == 0) return 0.0;
    const double frac = (v[i - 1] - (-5.0)) / (v[i - 1] - v[i]);
    return (static_cast<double>(i - 1) + frac) / fs;
  }
  const std::size_t a = detail::first_crossing(edc, -5.0);
  const std::size_t b = detail::first_crossing(edc, -25.0);
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = a; i <= b; ++i) {
    if (v[i] > -5.0 || v[i] < -25.0) continue;
    const double t = static_cast<double>(i) / fs;
    n += 1;
    st += t;
    sy += v[i];
    stt += t * t;
    sty += t * v[i];
  }
  require(n >= 2, ErrorKind::InsufficientDecayRange, "fewer than two samples in the fit range");
  const double denom = n * stt - st * st;
  require(denom > 0.0, ErrorKind::InsufficientDecayRange, "degenerate fit range");
  const double slope = (n * sty - st * sy) / denom;  // dB per second
  require(slope < 0.0, ErrorKind::InsufficientDecayRange, "non-decaying fit");
  return 3.0 * (-20.0 / slope);
}

inline double decay_time(const Rir& h, DecayKind kind) { return decay_time(schroeder_edc(h), kind); }

/// The three broadband room-acoustic parameters of one RIR.
struct RoomMetrics {
  double edt = 0.0;  // s
  double c50 = 0.0;  // dB
  double t60 = 0.0;  // s
};

inline RoomMetrics room_metrics(const Rir& h) {
  const auto edc = schroeder_edc(h);
  return {decay_time(edc, DecayKind::EDT5), clarity_c50(h), decay_time(edc, DecayKind::T60_via_T20)};
}

/// Absolute EDT (s) and C50 (dB) errors, T60 error in percent of the reference.
struct MetricErrors {
  double edt = 0.0;
  double c50 = 0.0;
  double t60 = 0.0;
};

inline void to_json(nlohmann::json& j, const MetricErrors& e) {
  j = {{"edt_error_s", e.edt}, {"c50_error_db", e.c50}, {"t60_error_pct", e.t60}};
}

inline MetricErrors metric_errors(const RoomMetrics& pred, const RoomMetrics& ref) {
  return {std::abs(pred.edt - ref.edt), std::abs(pred.c50 - ref.c50), std::abs(pred.t60 - ref.t60) / ref.t60 * 100.0};
}

}  // namespace eigenet::acoustics
