#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "eigenet/ad/var.hpp"

namespace eigenet::ad {

/// Query rows [q0, q0+qn) attend to key rows [k0, k0+kn).
struct AttentionGroup {
  Eigen::Index q0 = 0, qn = 0, k0 = 0, kn = 0;
};

/// Scaled dot-product attention over pre-projected queries, keys and values,
/// split into `heads` column blocks. `key_visible` (empty = all visible)
/// removes keys from every group; a group with no visible key is an error.
/// Query rows outside every group produce zeros.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads,
                 const std::vector<AttentionGroup>& groups,
                 const std::vector<char>& key_visible = {}) {
  const Eigen::Index f = q.cols();
  require(k.cols() == f && v.cols() == f && k.rows() == v.rows(), ErrorKind::ShapeMismatch,
          "attention q/k/v shapes");
  require(heads > 0 && f % heads == 0, ErrorKind::ConfigInvalid, "heads must divide model dim");
  require(key_visible.empty() || static_cast<Eigen::Index>(key_visible.size()) == k.rows(),
          ErrorKind::ShapeMismatch, "key mask length");
  const Eigen::Index d = f / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));

  struct Saved {
    std::vector<Eigen::Index> keys;  // visible key rows, absolute
    std::vector<Mat<T>> probs;       // per head, qn × |keys|
  };
  auto saved = std::make_shared<std::vector<Saved>>(groups.size());

  Mat<T> out = Mat<T>::Zero(q.rows(), f);
  const Mat<T>& Q = q.value();
  const Mat<T>& K = k.value();
  const Mat<T>& V = v.value();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    require(grp.q0 >= 0 && grp.q0 + grp.qn <= q.rows() && grp.k0 >= 0 && grp.k0 + grp.kn <= k.rows(),
            ErrorKind::ShapeMismatch, "attention group out of range");
    auto& s = (*saved)[gi];
    for (Eigen::Index r = grp.k0; r < grp.k0 + grp.kn; ++r)
      if (key_visible.empty() || key_visible[r]) s.keys.push_back(r);
    require(!s.keys.empty(), ErrorKind::AllKeysMasked, "every key of an attention group is masked");
    const auto nk = static_cast<Eigen::Index>(s.keys.size());
    Mat<T> Kg(nk, f), Vg(nk, f);
    for (Eigen::Index j = 0; j < nk; ++j) {
      Kg.row(j) = K.row(s.keys[j]);
      Vg.row(j) = V.row(s.keys[j]);
    }
    s.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      Mat<T> S = (Q.block(grp.q0, h * d, grp.qn, d) * Kg.middleCols(h * d, d).transpose()) * scale;
      for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const T mx = S.row(i).maxCoeff();
        S.row(i) = (S.row(i).array() - mx).exp();
        S.row(i) /= S.row(i).sum();
      }
      out.block(grp.q0, h * d, grp.qn, d).noalias() = S * Vg.middleCols(h * d, d);
      s.probs[h] = std::move(S);
    }
  }

  auto* nq = q.node().get();
  auto* nk = k.node().get();
  auto* nv = v.node().get();
  return make_op<T>(std::move(out), {&q, &k, &v},
                    [nq, nk, nv, saved, groups, heads, d, scale, f](const Mat<T>& g) {
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& grp = groups[gi];
      const auto& s = (*saved)[gi];
      const auto n = static_cast<Eigen::Index>(s.keys.size());
      Mat<T> Kg(n, f), Vg(n, f);
      for (Eigen::Index j = 0; j < n; ++j) {
        Kg.row(j) = nk->value.row(s.keys[j]);
        Vg.row(j) = nv->value.row(s.keys[j]);
      }
      Mat<T> dK = Mat<T>::Zero(n, f), dV = Mat<T>::Zero(n, f);
      for (int h = 0; h < heads; ++h) {
        const Mat<T>& P = s.probs[h];
        const auto gO = g.block(grp.q0, h * d, grp.qn, d);
        if (nv->requires_grad) dV.middleCols(h * d, d).noalias() += P.transpose() * gO;
        Mat<T> dP = gO * Vg.middleCols(h * d, d).transpose();
        Eigen::Matrix<T, Eigen::Dynamic, 1> rs = (dP.cwiseProduct(P)).rowwise().sum();
        Mat<T> dS = P.cwiseProduct(dP.colwise() - rs) * scale;
        if (nq->requires_grad)
          nq->grad_buffer().block(grp.q0, h * d, grp.qn, d).noalias() += dS * Kg.middleCols(h * d, d);
        if (nk->requires_grad)
          dK.middleCols(h * d, d).noalias() +=
              dS.transpose() * nq->value.block(grp.q0, h * d, grp.qn, d);
      }
      if (nk->requires_grad) {
        auto& gb = nk->grad_buffer();
        for (Eigen::Index j = 0; j < n; ++j) gb.row(s.keys[j]) += dK.row(j);
      }
      if (nv->requires_grad) {
        auto& gb = nv->grad_buffer();
        for (Eigen::Index j = 0; j < n; ++j) gb.row(s.keys[j]) += dV.row(j);
      }
    }
  });
}

}  // namespace eigenet::ad
