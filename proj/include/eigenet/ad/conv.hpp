#pragma once

#include "eigenet/ad/var.hpp"

namespace eigenet::ad {

struct Conv1dGeometry {
  int kernel = 1;
  int stride = 1;
  int pad_left = 0;
  int pad_right = 0;

  Eigen::Index conv_out(Eigen::Index len) const {
    return (len + pad_left + pad_right - kernel) / stride + 1;
  }
  Eigen::Index transposed_out(Eigen::Index len) const {
    return (len - 1) * stride + kernel - pad_left - pad_right;
  }
};

namespace detail {

/// cols[(c·k + j), t] = x[c, t·s + j − pad_left], zero outside.
template <typename T>
Mat<T> im2col(const Mat<T>& x, const Conv1dGeometry& geo, Eigen::Index out_len) {
  const Eigen::Index C = x.rows(), L = x.cols();
  Mat<T> cols = Mat<T>::Zero(C * geo.kernel, out_len);
  for (Eigen::Index c = 0; c < C; ++c)
    for (int j = 0; j < geo.kernel; ++j) {
      T* dst = cols.row(c * geo.kernel + j).data();
      const T* src = x.row(c).data();
      for (Eigen::Index t = 0; t < out_len; ++t) {
        const Eigen::Index i = t * geo.stride + j - geo.pad_left;
        if (i >= 0 && i < L) dst[t] = src[i];
      }
    }
  return cols;
}

/// Adjoint of im2col: scatter-add cols back into a C × L signal.
template <typename T>
void col2im_add(const Mat<T>& cols, const Conv1dGeometry& geo, Mat<T>& x) {
  const Eigen::Index C = x.rows(), L = x.cols(), out_len = cols.cols();
  for (Eigen::Index c = 0; c < C; ++c)
    for (int j = 0; j < geo.kernel; ++j) {
      const T* src = cols.row(c * geo.kernel + j).data();
      T* dst = x.row(c).data();
      for (Eigen::Index t = 0; t < out_len; ++t) {
        const Eigen::Index i = t * geo.stride + j - geo.pad_left;
        if (i >= 0 && i < L) dst[i] += src[t];
      }
    }
}

}  // namespace detail

/// Strided 1-D convolution. x: C_in × L, w: C_out × (C_in·k), b: 1 × C_out.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Conv1dGeometry geo) {
  const Eigen::Index cin = x.rows();
  require(w.cols() == cin * geo.kernel && b.rows() == 1 && b.cols() == w.rows(),
          ErrorKind::ShapeMismatch, "conv1d weight shape");
  const Eigen::Index out_len = geo.conv_out(x.cols());
  require(out_len > 0, ErrorKind::ShapeMismatch, "conv1d input too short");
  Mat<T> cols = detail::im2col(x.value(), geo, out_len);
  Mat<T> y = w.value() * cols;
  y.colwise() += b.value().row(0).transpose();
  auto* nx = x.node().get();
  auto* nw = w.node().get();
  auto* nb = b.node().get();
  const bool keep_cols = w.requires_grad();
  return make_op<T>(std::move(y), {&x, &w, &b},
                    [nx, nw, nb, geo, cols = keep_cols ? std::move(cols) : Mat<T>()](const Mat<T>& g) {
    if (nw->requires_grad) nw->grad_buffer().noalias() += g * cols.transpose();
    if (nb->requires_grad) nb->grad_buffer() += g.rowwise().sum().transpose();
    if (nx->requires_grad) {
      Mat<T> dcols = nw->value.transpose() * g;
      detail::col2im_add(dcols, geo, nx->grad_buffer());
    }
  });
}

/// Transposed 1-D convolution, the adjoint of conv1d with the same geometry.
/// x: C_in × L, w: C_in × (C_out·k), b: 1 × C_out.
template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Conv1dGeometry geo) {
  const Eigen::Index cin = x.rows();
  require(w.rows() == cin && w.cols() % geo.kernel == 0, ErrorKind::ShapeMismatch,
          "conv_transpose1d weight shape");
  const Eigen::Index cout = w.cols() / geo.kernel;
  require(b.rows() == 1 && b.cols() == cout, ErrorKind::ShapeMismatch, "conv_transpose1d bias");
  const Eigen::Index out_len = geo.transposed_out(x.cols());
  require(out_len > 0, ErrorKind::ShapeMismatch, "conv_transpose1d output empty");
  Mat<T> cols = w.value().transpose() * x.value();  // (C_out·k) × L_in
  Mat<T> y = Mat<T>::Zero(cout, out_len);
  detail::col2im_add(cols, geo, y);
  y.colwise() += b.value().row(0).transpose();
  auto* nx = x.node().get();
  auto* nw = w.node().get();
  auto* nb = b.node().get();
  const Eigen::Index in_len = x.cols();
  return make_op<T>(std::move(y), {&x, &w, &b}, [nx, nw, nb, geo, in_len](const Mat<T>& g) {
    if (nb->requires_grad) nb->grad_buffer() += g.rowwise().sum().transpose();
    if (!nx->requires_grad && !nw->requires_grad) return;
    Mat<T> dcols = detail::im2col(g, geo, in_len);
    if (nw->requires_grad) nw->grad_buffer().noalias() += nx->value * dcols.transpose();
    if (nx->requires_grad) nx->grad_buffer().noalias() += nw->value * dcols;
  });
}

}  // namespace eigenet::ad
