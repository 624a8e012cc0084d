#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "eigenet/ad/var.hpp"

namespace eigenet::ad {

/// Frame layout of a center-padded STFT: frame t is centered on sample
/// first_center + t·hop, out-of-range samples are reflected (numpy "reflect").
struct FrameLayout {
  int fft_size = 1024;
  int hop = 256;
  Eigen::Index n_frames = 0;
  Eigen::Index first_center = 0;
};

namespace detail {

inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index len) {
  // Valid while the overhang is shorter than the signal.
  if (i < 0) return -i;
  if (i >= len) return 2 * (len - 1) - i;
  return i;
}

template <typename T>
std::vector<T> periodic_hann(int n) {
  std::vector<T> w(n);
  for (int j = 0; j < n; ++j)
    w[j] = T(0.5) - T(0.5) * std::cos(T(2) * std::numbers::pi_v<T> * T(j) / T(n));
  return w;
}

/// Complex one-sided spectra, n_frames × (fft/2+1).
template <typename T>
Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> stft_complex(
    const T* x, Eigen::Index len, const FrameLayout& lay, const std::vector<T>& window) {
  const int N = lay.fft_size;
  const int bins = N / 2 + 1;
  Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(lay.n_frames, bins);
  Eigen::FFT<T> fft;
  std::vector<std::complex<T>> in(N), spec(N);
  for (Eigen::Index t = 0; t < lay.n_frames; ++t) {
    const Eigen::Index start = lay.first_center + t * lay.hop - N / 2;
    for (int j = 0; j < N; ++j) in[j] = std::complex<T>(x[reflect_index(start + j, len)] * window[j], T(0));
    fft.fwd(spec, in);
    for (int k = 0; k < bins; ++k) out(t, k) = spec[k];
  }
  return out;
}

}  // namespace detail

/// Magnitude STFT of a 1 × L signal with a periodic Hann window; returns
/// n_frames × (fft/2+1). The gradient is taken as 0 at exactly-zero bins.
template <typename T>
Var<T> stft_magnitude(const Var<T>& x, const FrameLayout& lay) {
  require(x.rows() == 1, ErrorKind::ShapeMismatch, "stft input must be a row vector");
  const Eigen::Index len = x.cols();
  require(lay.fft_size / 2 < len, ErrorKind::ConfigInvalid, "signal shorter than half a frame");
  const auto window = detail::periodic_hann<T>(lay.fft_size);
  auto spec = std::make_shared<
      Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      detail::stft_complex(x.value().data(), len, lay, window));
  Mat<T> mag = spec->cwiseAbs();
  auto* nx = x.node().get();
  return make_op<T>(mag, {&x}, [nx, spec, mag, lay, window, len](const Mat<T>& g) {
    if (!nx->requires_grad) return;
    const int N = lay.fft_size;
    const int bins = N / 2 + 1;
    Eigen::FFT<T> fft;
    std::vector<std::complex<T>> G(N), back(N);
    auto& gx = nx->grad_buffer();
    for (Eigen::Index t = 0; t < lay.n_frames; ++t) {
      std::fill(G.begin(), G.end(), std::complex<T>(0));
      for (int k = 0; k < bins; ++k) {
        const T m = mag(t, k);
        if (m > T(0)) G[k] = std::conj((*spec)(t, k) * (g(t, k) / m));
      }
      // dL/dframe_j = Re( Σ_k conj(G_k) e^{-2πi kj/N} )
      fft.fwd(back, G);
      const Eigen::Index start = lay.first_center + t * lay.hop - N / 2;
      for (int j = 0; j < N; ++j)
        gx(0, detail::reflect_index(start + j, len)) += back[j].real() * window[j];
    }
  });
}

}  // namespace eigenet::ad
