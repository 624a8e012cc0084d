#pragma once

#include <cmath>
#include <vector>

#include "json.hpp"

#include "eigenet/nn/params.hpp"

namespace eigenet::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 1.0;
};

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}, {"clip_norm", c.clip_norm}};
}
inline void from_json(const nlohmann::json& j, AdamConfig& c) {
  const AdamConfig d;
  c.lr = j.value("lr", d.lr);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.eps = j.value("eps", d.eps);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
}

/// Adam without weight decay. Gradients accumulated in the store are divided
/// by `batch` before use and cleared after the step.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Returns the pre-clip global gradient norm.
  double step(ParamStore<T>& ps, double batch = 1.0) {
    if (m_.size() != ps.size()) {
      m_.assign(ps.size(), Mat<T>());
      v_.assign(ps.size(), Mat<T>());
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps.trainable(i) && ps.has_grad(i)) sq += (ps.grad(i).template cast<double>() / batch).squaredNorm();
    const double norm = std::sqrt(sq);
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!ps.trainable(i) || !ps.has_grad(i)) continue;
      const Mat<T> g = ps.grad(i) * static_cast<T>(clip / batch);
      auto& w = ps.value(i);
      if (m_[i].size() == 0) {
        m_[i] = Mat<T>::Zero(w.rows(), w.cols());
        v_[i] = Mat<T>::Zero(w.rows(), w.cols());
      }
      m_[i] = static_cast<T>(cfg_.beta1) * m_[i] + static_cast<T>(1.0 - cfg_.beta1) * g;
      v_[i] = static_cast<T>(cfg_.beta2) * v_[i] + static_cast<T>(1.0 - cfg_.beta2) * g.cwiseAbs2();
      const T step = static_cast<T>(cfg_.lr / bc1);
      const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
      w.array() -= step * m_[i].array() / (v_[i].array().sqrt() * denom_scale + static_cast<T>(cfg_.eps));
    }
    ps.zero_grad();
    return norm;
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Mat<T>> m_, v_;
  long t_ = 0;
};

}  // namespace eigenet::nn
