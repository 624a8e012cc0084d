#pragma once

// Reconstruction losses. Each is written once over autodiff Vars (so the
// trainer can differentiate it) and wrapped for plain Rir inputs.

#include <array>
#include <numbers>
#include <vector>

#include "eigenet/acoustics/rir.hpp"
#include "eigenet/acoustics/spectra.hpp"
#include "eigenet/ad/ops.hpp"
#include "eigenet/ad/spectral.hpp"

namespace eigenet::acoustics {

struct MrstftConfig {
  std::vector<int> fft_sizes{256, 512, 1024};
  double eps = 1e-7;
};

namespace detail {

template <typename T>
ad::Var<T> frobenius(const ad::Var<T>& a) {
  return ad::sqrt(ad::sum(ad::square(a)));
}

/// 10·log10(max(tail/total, floor)) of a row of non-negative energies.
template <typename T>
ad::Var<T> schroeder_db_row(const ad::Var<T>& energy) {
  auto tail = ad::reverse_cumsum(energy, 1);
  auto total = ad::slice_cols(tail, 0, 1);
  require(total.item() > T(0), ErrorKind::ZeroEnergy, "signal has zero energy");
  auto ratio = ad::div_scalar(tail, total);
  return ad::scale(ad::log_floor(ratio, T(kPowerFloor)), T(10) / std::numbers::ln10_v<T>);
}

}  // namespace detail

/// Σ over resolutions of spectral convergence + mean log-magnitude L1.
/// Both inputs are 1 × L rows; gradients flow into x only when it needs them.
template <typename T>
ad::Var<T> mrstft_loss(const ad::Var<T>& x, const ad::Var<T>& y, const MrstftConfig& cfg = {}) {
  require(x.rows() == 1 && y.rows() == 1 && x.cols() == y.cols(), ErrorKind::LengthMismatch,
          "mrstft_loss inputs differ in length");
  const T eps = static_cast<T>(cfg.eps);
  ad::Var<T> total;
  for (int n : cfg.fft_sizes) {
    StftConfig sc{n, n / 4, 0};
    sc.validate(static_cast<std::size_t>(x.cols()));
    const auto lay = sc.layout(static_cast<std::size_t>(x.cols()));
    auto X = ad::stft_magnitude(x, lay);
    auto Y = ad::stft_magnitude(y, lay);
    auto diff_norm = detail::frobenius(ad::sub(Y, X));
    const T ref_norm = std::max(std::sqrt(Y.value().squaredNorm()), T(1e-12));
    auto convergence = ad::scale(diff_norm, T(1) / ref_norm);
    auto logmag = ad::mean(ad::abs(ad::sub(ad::log_floor(ad::add_const(X, eps), T(1e-30)),
                                           ad::log_floor(ad::add_const(Y, eps), T(1e-30)))));
    auto term = ad::add(convergence, logmag);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

/// Mean |EDC_x − EDC_y| in dB over all samples.
template <typename T>
ad::Var<T> edc_loss(const ad::Var<T>& x, const ad::Var<T>& y) {
  require(x.rows() == 1 && y.rows() == 1 && x.cols() == y.cols(), ErrorKind::LengthMismatch,
          "edc_loss inputs differ in length");
  auto ex = detail::schroeder_db_row(ad::square(x));
  auto ey = detail::schroeder_db_row(ad::square(y));
  return ad::mean(ad::abs(ad::sub(ex, ey)));
}

/// Loss between log10 band-energy matrices (n × b): spectral convergence and
/// log-L1 applied directly to the matrices, plus a per-band EDC term built
/// from backward time integration of the band energies.
template <typename T>
ad::Var<T> spectrum_loss(const ad::Var<T>& s_hat, const ad::Var<T>& s_ref) {
  require(s_hat.rows() == s_ref.rows() && s_hat.cols() == s_ref.cols(), ErrorKind::ShapeMismatch,
          "spectrum_loss shapes differ");
  const T lo = std::log10(T(kPowerFloor));
  const T hi = T(12);
  auto e_hat = ad::pow10_clamped(s_hat, lo, hi);
  auto e_ref = ad::pow10_clamped(s_ref, lo, hi);

  const T ref_norm = std::max(std::sqrt(e_ref.value().squaredNorm()), T(1e-12));
  auto convergence = ad::scale(detail::frobenius(ad::sub(e_ref, e_hat)), T(1) / ref_norm);
  auto log_l1 = ad::mean(ad::abs(ad::sub(s_hat, s_ref)));

  auto band_edc = [&](const ad::Var<T>& e) {
    auto tail = ad::reverse_cumsum(e, 0);
    auto total = ad::slice_rows(tail, 0, 1);
    return ad::scale(ad::log_floor(ad::div_row(tail, total), T(kPowerFloor)),
                     T(10) / std::numbers::ln10_v<T>);
  };
  auto edc_term = ad::mean(ad::abs(ad::sub(band_edc(e_hat), band_edc(e_ref))));
  return ad::add(ad::add(convergence, log_l1), edc_term);
}

// ---------------------------------------------------------------- plain wrappers

inline ad::Var<double> as_row(const Rir& h) {
  return ad::constant<double>(Eigen::Map<const ad::Mat<double>>(h.samples.data(), 1,
                                                                static_cast<Eigen::Index>(h.size())));
}

inline double mrstft_loss(const Rir& x, const Rir& y, const MrstftConfig& cfg = {}) {
  require(x.size() == y.size() && x.sample_rate == y.sample_rate, ErrorKind::LengthMismatch,
          "mrstft_loss inputs differ");
  return mrstft_loss<double>(as_row(x), as_row(y), cfg).item();
}

inline double edc_loss(const Rir& x, const Rir& y) {
  require(x.size() == y.size(), ErrorKind::LengthMismatch, "edc_loss inputs differ");
  return edc_loss<double>(as_row(x), as_row(y)).item();
}

inline double spectrum_loss(const RowMatrix& s_hat, const RowMatrix& s_ref) {
  return spectrum_loss<double>(ad::constant<double>(s_hat), ad::constant<double>(s_ref)).item();
}

}  // namespace eigenet::acoustics
