#pragma once

#include <algorithm>

#include "json.hpp"

#include "eigenet/acoustics/losses.hpp"

namespace eigenet::trainer {

using ad::Var;

struct LossConfig {
  double lambda_edc = 1.0;
  double lambda_spectrum = 0.01;
  int warmup_steps = 200;

  void validate() const {
    require(lambda_edc >= 0.0 && lambda_spectrum >= 0.0 && warmup_steps >= 0, ErrorKind::ConfigInvalid,
            "loss weights and warmup must be nonnegative");
  }
};

inline void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"lambda_edc", c.lambda_edc}, {"lambda_spectrum", c.lambda_spectrum}, {"warmup_steps", c.warmup_steps}};
}
inline void from_json(const nlohmann::json& j, LossConfig& c) {
  const LossConfig d;
  c.lambda_edc = j.value("lambda_edc", d.lambda_edc);
  c.lambda_spectrum = j.value("lambda_spectrum", d.lambda_spectrum);
  c.warmup_steps = j.value("warmup_steps", d.warmup_steps);
}

/// w(step) = min(1, step / warmup); no warmup means full weight from step 0.
inline double warmup_weight(long step, int warmup_steps) {
  if (warmup_steps <= 0) return 1.0;
  return std::clamp(static_cast<double>(step) / warmup_steps, 0.0, 1.0);
}

struct LossTerms {
  double mrstft = 0.0;
  double edc = 0.0;
  double spectrum = 0.0;
  double weight = 0.0;
};

/// L = mrstft + w·λ_edc·edc + w·λ_spec·spectrum. The spectrum pair must be
/// both present or both absent.
template <typename T>
Var<T> total_loss(const Var<T>& h_hat, const Var<T>& h, const Var<T>& s_hat, const Var<T>& s, long step,
                  const LossConfig& cfg, LossTerms* terms = nullptr) {
  require(s_hat.defined() == s.defined(), ErrorKind::MissingSpectrumTarget,
          "spectrum prediction and target must be supplied together");
  const double w = warmup_weight(step, cfg.warmup_steps);
  auto mr = acoustics::mrstft_loss<T>(h_hat, h);
  Var<T> loss = mr;
  LossTerms t{mr.item(), 0.0, 0.0, w};
  if (w > 0.0 && cfg.lambda_edc > 0.0) {
    auto e = acoustics::edc_loss<T>(h_hat, h);
    t.edc = e.item();
    loss = ad::add(loss, ad::scale(e, static_cast<T>(w * cfg.lambda_edc)));
  }
  if (s_hat.defined() && w > 0.0 && cfg.lambda_spectrum > 0.0) {
    auto sp = acoustics::spectrum_loss<T>(s_hat, s);
    t.spectrum = sp.item();
    loss = ad::add(loss, ad::scale(sp, static_cast<T>(w * cfg.lambda_spectrum)));
  }
  if (terms) *terms = t;
  return loss;
}

}  // namespace eigenet::trainer
