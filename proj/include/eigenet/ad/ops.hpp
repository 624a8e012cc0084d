#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "eigenet/ad/var.hpp"

namespace eigenet::ad {

template <typename T>
Var<T> constant(Mat<T> value) {
  return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> leaf(Mat<T> value) {
  return Var<T>(std::move(value), true);
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require(a.cols() == b.rows(), ErrorKind::ShapeMismatch, "matmul inner dimensions differ");
  Mat<T> out = a.value() * b.value();
  auto* na = a.node().get();
  auto* nb = b.node().get();
  return make_op<T>(std::move(out), {&a, &b}, [na, nb](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer().noalias() += g * nb->value.transpose();
    if (nb->requires_grad) nb->grad_buffer().noalias() += na->value.transpose() * g;
  });
}

/// x·W + b with W stored (in × out) and b a 1 × out row.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require(x.cols() == w.rows() && b.cols() == w.cols() && b.rows() == 1,
          ErrorKind::ShapeMismatch, "linear shapes disagree");
  Mat<T> out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  auto* nx = x.node().get();
  auto* nw = w.node().get();
  auto* nb = b.node().get();
  return make_op<T>(std::move(out), {&x, &w, &b}, [nx, nw, nb](const Mat<T>& g) {
    if (nx->requires_grad) nx->grad_buffer().noalias() += g * nw->value.transpose();
    if (nw->requires_grad) nw->grad_buffer().noalias() += nx->value.transpose() * g;
    if (nb->requires_grad) nb->grad_buffer() += g.colwise().sum();
  });
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch, "add shapes");
  auto* na = a.node().get();
  auto* nb = b.node().get();
  return make_op<T>(a.value() + b.value(), {&a, &b}, [na, nb](const Mat<T>& g) {
    accumulate(na, g);
    accumulate(nb, g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch, "sub shapes");
  auto* na = a.node().get();
  auto* nb = b.node().get();
  return make_op<T>(a.value() - b.value(), {&a, &b}, [na, nb](const Mat<T>& g) {
    accumulate(na, g);
    if (nb->requires_grad) nb->grad_buffer() -= g;
  });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) {
  return add(a, b);
}
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) {
  return sub(a, b);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch, "mul shapes");
  auto* na = a.node().get();
  auto* nb = b.node().get();
  return make_op<T>(a.value().cwiseProduct(b.value()), {&a, &b}, [na, nb](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g.cwiseProduct(nb->value);
    if (nb->requires_grad) nb->grad_buffer() += g.cwiseProduct(na->value);
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  auto* na = a.node().get();
  return make_op<T>(a.value() * s, {&a}, [na, s](const Mat<T>& g) { accumulate(na, g * s); });
}

template <typename T>
Var<T> add_const(const Var<T>& a, T c) {
  auto* na = a.node().get();
  Mat<T> out = a.value().array() + c;
  return make_op<T>(std::move(out), {&a}, [na](const Mat<T>& g) { accumulate(na, g); });
}

/// a + row, with a 1 × cols row broadcast over every row of a.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::ShapeMismatch, "add_row shapes");
  Mat<T> out = a.value();
  out.rowwise() += row.value().row(0);
  auto* na = a.node().get();
  auto* nr = row.node().get();
  return make_op<T>(std::move(out), {&a, &row}, [na, nr](const Mat<T>& g) {
    accumulate(na, g);
    if (nr->requires_grad) nr->grad_buffer() += g.colwise().sum();
  });
}

/// a ⊙ row, with a 1 × cols row broadcast over every row of a.
template <typename T>
Var<T> mul_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::ShapeMismatch, "mul_row shapes");
  Mat<T> out = a.value().array().rowwise() * row.value().row(0).array();
  auto* na = a.node().get();
  auto* nr = row.node().get();
  return make_op<T>(std::move(out), {&a, &row}, [na, nr](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer().array() += g.array().rowwise() * nr->value.row(0).array();
    if (nr->requires_grad) nr->grad_buffer() += g.cwiseProduct(na->value).colwise().sum();
  });
}

/// a ⊘ row, with a 1 × cols row broadcast over every row of a.
template <typename T>
Var<T> div_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::ShapeMismatch, "div_row shapes");
  Mat<T> out = a.value().array().rowwise() / row.value().row(0).array();
  auto* na = a.node().get();
  auto* nr = row.node().get();
  return make_op<T>(std::move(out), {&a, &row}, [na, nr](const Mat<T>& g) {
    const auto inv = nr->value.row(0).array().inverse();
    if (na->requires_grad) na->grad_buffer().array() += g.array().rowwise() * inv;
    if (nr->requires_grad) {
      // d(a/r)/dr = -a / r^2
      Mat<T> t = g.cwiseProduct(na->value);
      nr->grad_buffer().array() -= t.colwise().sum().array() * inv.square();
    }
  });
}

/// a / s with s a 1 × 1 var.
template <typename T>
Var<T> div_scalar(const Var<T>& a, const Var<T>& s) {
  require(s.rows() == 1 && s.cols() == 1, ErrorKind::ShapeMismatch, "div_scalar needs 1x1");
  const T d = s.item();
  auto* na = a.node().get();
  auto* ns = s.node().get();
  return make_op<T>(a.value() / d, {&a, &s}, [na, ns, d](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g / d;
    if (ns->requires_grad) ns->grad_buffer()(0, 0) -= g.cwiseProduct(na->value).sum() / (d * d);
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  auto* na = a.node().get();
  return make_op<T>(a.value().cwiseAbs2(), {&a}, [na](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer() += T(2) * g.cwiseProduct(na->value);
  });
}

/// Elementwise sqrt; gradient taken as 0 where the input is 0.
template <typename T>
Var<T> sqrt(const Var<T>& a) {
  Mat<T> out = a.value().cwiseMax(T(0)).cwiseSqrt();
  auto* na = a.node().get();
  return make_op<T>(out, {&a}, [na, out](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (out.data()[i] > T(0)) gb.data()[i] += g.data()[i] / (T(2) * out.data()[i]);
  });
}

/// Natural log of max(a, floor); zero gradient where the floor is active.
template <typename T>
Var<T> log_floor(const Var<T>& a, T floor) {
  Mat<T> out = a.value().cwiseMax(floor).array().log();
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, floor](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    const auto& x = na->value;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.data()[i] > floor) gb.data()[i] += g.data()[i] / x.data()[i];
  });
}

/// 10^a with a clamped to [lo, hi]; zero gradient outside.
template <typename T>
Var<T> pow10_clamped(const Var<T>& a, T lo, T hi) {
  const T ln10 = std::numbers::ln10_v<T>;
  Mat<T> out = (a.value().cwiseMax(lo).cwiseMin(hi).array() * ln10).exp();
  auto* na = a.node().get();
  return make_op<T>(out, {&a}, [na, out, lo, hi, ln10](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    const auto& x = na->value;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T v = x.data()[i];
      if (v > lo && v < hi) gb.data()[i] += g.data()[i] * out.data()[i] * ln10;
    }
  });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  auto* na = a.node().get();
  return make_op<T>(a.value().cwiseAbs(), {&a}, [na](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    const auto& x = na->value;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T v = x.data()[i];
      gb.data()[i] += v > T(0) ? g.data()[i] : (v < T(0) ? -g.data()[i] : T(0));
    }
  });
}

/// Exact (erf-based) GELU.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  Mat<T> out = a.value().unaryExpr(
      [inv_sqrt2](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); });
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, inv_sqrt2](const Mat<T>& g) {
    if (!na->requires_grad) return;
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    Mat<T> d = na->value.unaryExpr([&](T x) {
      return T(0.5) * (T(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
    });
    na->grad_buffer() += g.cwiseProduct(d);
  });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  Mat<T> sig = a.value().unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
  Mat<T> out = a.value().cwiseProduct(sig);
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, sig](const Mat<T>& g) {
    if (!na->requires_grad) return;
    Mat<T> d = sig.array() * (T(1) + na->value.array() * (T(1) - sig.array()));
    na->grad_buffer() += g.cwiseProduct(d);
  });
}

/// ELU with alpha = 1.
template <typename T>
Var<T> elu(const Var<T>& a) {
  Mat<T> out = a.value().unaryExpr([](T x) { return x > T(0) ? x : std::expm1(x); });
  auto* na = a.node().get();
  return make_op<T>(out, {&a}, [na, out](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    const auto& x = na->value;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      gb.data()[i] += g.data()[i] * (x.data()[i] > T(0) ? T(1) : out.data()[i] + T(1));
  });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> sum(const Var<T>& a) {
  Mat<T> out(1, 1);
  out(0, 0) = a.value().sum();
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer().array() += g(0, 0);
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// Reverse cumulative sum: axis 1 sums columns j..end per row, axis 0 sums rows i..end per column.
template <typename T>
Var<T> reverse_cumsum(const Var<T>& a, int axis) {
  Mat<T> out = a.value();
  if (axis == 1) {
    for (Eigen::Index j = out.cols() - 2; j >= 0; --j) out.col(j) += out.col(j + 1);
  } else {
    for (Eigen::Index i = out.rows() - 2; i >= 0; --i) out.row(i) += out.row(i + 1);
  }
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, axis](const Mat<T>& g) {
    if (!na->requires_grad) return;
    // Adjoint of a reverse cumsum is a forward cumsum.
    Mat<T> d = g;
    if (axis == 1) {
      for (Eigen::Index j = 1; j < d.cols(); ++j) d.col(j) += d.col(j - 1);
    } else {
      for (Eigen::Index i = 1; i < d.rows(); ++i) d.row(i) += d.row(i - 1);
    }
    na->grad_buffer() += d;
  });
}

// ---------------------------------------------------------------- shape

template <typename T>
Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorKind::ShapeMismatch,
          "slice_rows out of range");
  Mat<T> out = a.value().middleRows(start, count);
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, start, count](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer().middleRows(start, count) += g;
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::ShapeMismatch,
          "slice_cols out of range");
  Mat<T> out = a.value().middleCols(start, count);
  auto* na = a.node().get();
  return make_op<T>(std::move(out), {&a}, [na, start, count](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer().middleCols(start, count) += g;
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, ErrorKind::ShapeMismatch, "concat_rows column mismatch");
    rows += p.rows();
  }
  Mat<T> out(rows, cols);
  std::vector<Node<T>*> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    nodes.push_back(p.node().get());
    offsets.push_back(r);
    r += p.rows();
  }
  return make_op_list<T>(std::move(out), parts, [nodes, offsets](const Mat<T>& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i]->requires_grad)
        nodes[i]->grad_buffer() += g.middleRows(offsets[i], nodes[i]->value.rows());
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_cols of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, ErrorKind::ShapeMismatch, "concat_cols row mismatch");
    cols += p.cols();
  }
  Mat<T> out(rows, cols);
  std::vector<Node<T>*> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    nodes.push_back(p.node().get());
    offsets.push_back(c);
    c += p.cols();
  }
  return make_op_list<T>(std::move(out), parts, [nodes, offsets](const Mat<T>& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i]->requires_grad)
        nodes[i]->grad_buffer() += g.middleCols(offsets[i], nodes[i]->value.cols());
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  auto* na = a.node().get();
  return make_op<T>(a.value().transpose(), {&a}, [na](const Mat<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g.transpose();
  });
}

// ---------------------------------------------------------------- normalization

/// Row-wise layer normalization without affine parameters.
template <typename T>
Var<T> layer_norm(const Var<T>& a, T eps = T(1e-6)) {
  const Eigen::Index n = a.cols();
  Mat<T> y(a.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto row = a.value().row(i);
    const T mu = row.mean();
    const T var = (row.array() - mu).square().mean();
    inv_std(i) = T(1) / std::sqrt(var + eps);
    y.row(i) = (row.array() - mu) * inv_std(i);
  }
  auto* na = a.node().get();
  return make_op<T>(y, {&a}, [na, y, inv_std, n](const Mat<T>& g) {
    if (!na->requires_grad) return;
    auto& gb = na->grad_buffer();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const auto gy = g.row(i).array();
      const auto yy = y.row(i).array();
      const T mg = gy.sum() / static_cast<T>(n);
      const T mgy = (gy * yy).sum() / static_cast<T>(n);
      gb.row(i).array() += inv_std(i) * (gy - mg - yy * mgy);
    }
  });
}

}  // namespace eigenet::ad
