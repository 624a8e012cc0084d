#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eigenet/nn/params.hpp"

namespace eigenet::nn {

struct GradBlockReport {
  std::string name;
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  double scale = 0.0;     // largest |gradient| seen in the block
  double rel_error = 0.0; // max_abs_error / scale (absolute when scale is below finite-difference noise)
};

struct GradCheckReport {
  std::vector<GradBlockReport> blocks;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.rel_error);
    return m;
  }
  bool passed(double tolerance) const { return max_rel_error() <= tolerance; }
  /// True if some block in the report received a nonzero analytic gradient.
  bool any_nonzero(const std::string& prefix) const {
    for (const auto& b : blocks)
      if (b.name.starts_with(prefix) && b.scale > 0.0) return true;
    return false;
  }
};

/// Gradient magnitudes below this are indistinguishable from central-difference roundoff.
inline constexpr double kNoiseFloor = 1e-7;

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every entry; otherwise a seeded subset of this size per block.
  std::size_t max_entries_per_block = 0;
  std::uint64_t seed = 0;
};

/// Compares backward() against central finite differences for every
/// trainable block. Error per block is the largest entrywise discrepancy
/// divided by the largest gradient magnitude in that block.
inline GradCheckReport check_gradients(const std::function<Var<double>(const ParamStore<double>&)>& f,
                                       ParamStore<double>& ps, const GradCheckOptions& opt = {}) {
  ps.set_training(true);
  ps.zero_grad();
  auto loss = f(ps);
  ad::backward(loss);
  std::vector<Mat<double>> analytic;
  for (std::size_t i = 0; i < ps.size(); ++i) analytic.push_back(ps.grad(i));
  ps.zero_grad();

  ps.set_training(false);
  Rng rng(opt.seed);
  GradCheckReport report;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps.trainable(i)) continue;
    auto& value = ps.value(i);
    const auto n = static_cast<std::size_t>(value.size());
    std::vector<std::size_t> entries(n);
    for (std::size_t k = 0; k < n; ++k) entries[k] = k;
    if (opt.max_entries_per_block > 0 && n > opt.max_entries_per_block) {
      Rng r = rng.split(ps.name(i));
      for (std::size_t k = 0; k < opt.max_entries_per_block; ++k)
        std::swap(entries[k], entries[k + r.below(n - k)]);
      entries.resize(opt.max_entries_per_block);
    }
    GradBlockReport b{ps.name(i), entries.size(), 0.0, 0.0, 0.0};
    for (std::size_t k : entries) {
      double& x = value.data()[k];
      const double saved = x;
      x = saved + opt.step;
      const double fp = f(ps).item();
      x = saved - opt.step;
      const double fm = f(ps).item();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[i].data()[k];
      b.max_abs_error = std::max(b.max_abs_error, std::abs(a - numeric));
      b.scale = std::max({b.scale, std::abs(a), std::abs(numeric)});
    }
    // Blocks whose true gradient vanishes (e.g. key biases under softmax shift
    // invariance) only see finite-difference noise; judge those absolutely.
    b.rel_error = b.scale > kNoiseFloor ? b.max_abs_error / b.scale : b.max_abs_error;
    report.blocks.push_back(b);
  }
  ps.set_training(true);
  return report;
}

}  // namespace eigenet::nn
