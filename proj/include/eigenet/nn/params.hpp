#pragma once

// Named parameter blocks. Each block is a persistent autodiff leaf, so
// gradients from successive backward passes accumulate into it until
// zero_grad(); optimizers update the leaf values in place.

#include <bit>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "eigenet/ad/ops.hpp"
#include "eigenet/core/rng.hpp"

namespace eigenet::nn {

using ad::Mat;
using ad::Var;

struct ParamRef {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

template <typename T>
class ParamStore {
 public:
  ParamRef add(const std::string& name, Mat<T> init, bool trainable = true) {
    require(!index_.contains(name), ErrorKind::ConfigInvalid, "duplicate parameter " + name);
    ParamRef ref{vars_.size()};
    vars_.push_back(ad::leaf<T>(std::move(init)));
    vars_.back().node()->requires_grad = trainable && training_;
    names_.push_back(name);
    trainable_.push_back(trainable);
    index_.emplace(name, ref.id);
    return ref;
  }

  const Var<T>& operator[](ParamRef r) const { return vars_[r.id]; }
  Mat<T>& value(ParamRef r) { return vars_[r.id].node()->value; }
  const Mat<T>& value(ParamRef r) const { return vars_[r.id].node()->value; }
  Mat<T>& value(std::size_t i) { return vars_[i].node()->value; }
  const Mat<T>& value(std::size_t i) const { return vars_[i].node()->value; }
  Mat<T> grad(std::size_t i) const { return vars_[i].grad(); }
  bool has_grad(std::size_t i) const { return vars_[i].node()->grad.size() != 0; }

  std::size_t size() const { return vars_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  bool trainable(std::size_t i) const { return trainable_[i]; }

  ParamRef find(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::MissingArtifact, "no parameter named " + name);
    return ParamRef{it->second};
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  /// Training mode makes trainable blocks require gradients; inference mode
  /// builds no graph at all.
  void set_training(bool on) {
    training_ = on;
    for (std::size_t i = 0; i < vars_.size(); ++i) vars_[i].node()->requires_grad = on && trainable_[i];
  }
  bool training() const { return training_; }

  /// Marks every block whose name starts with `prefix` as frozen (or not).
  void set_trainable(const std::string& prefix, bool trainable) {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (names_[i].starts_with(prefix)) {
        trainable_[i] = trainable;
        vars_[i].node()->requires_grad = training_ && trainable;
      }
  }

  void zero_grad() {
    for (auto& v : vars_) v.node()->grad.resize(0, 0);
  }

  std::size_t numel(bool trainable_only = false) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (!trainable_only || trainable_[i]) n += static_cast<std::size_t>(vars_[i].value().size());
    return n;
  }

  /// Copy into another scalar type (used for 64-bit gradient checks).
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.set_training(training_);
    for (std::size_t i = 0; i < vars_.size(); ++i)
      out.add(names_[i], vars_[i].value().template cast<U>(), trainable_[i]);
    return out;
  }

  /// Copies values from a store with identical block names and shapes.
  template <typename U>
  void assign_from(const ParamStore<U>& other) {
    require(other.size() == size(), ErrorKind::ShapeMismatch, "parameter stores differ in size");
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      require(other.name(i) == names_[i] && other.value(i).rows() == value(i).rows() &&
                  other.value(i).cols() == value(i).cols(),
              ErrorKind::ShapeMismatch, "parameter block mismatch at " + names_[i]);
      value(i) = other.value(i).template cast<T>();
    }
  }

  /// FNV-1a over names, shapes and float32 bytes of blocks matching `prefix`.
  std::uint64_t hash(const std::string& prefix = "") const {
    std::uint64_t h = fnv1a("");
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (!names_[i].starts_with(prefix)) continue;
      h = fnv1a(names_[i], h);
      const auto& m = vars_[i].value();
      h = fnv1a(std::to_string(m.rows()) + "x" + std::to_string(m.cols()), h);
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[k]));
        for (int b = 0; b < 4; ++b) {
          h ^= (u >> (8 * b)) & 0xFFu;
          h *= 0x100000001b3ULL;
        }
      }
    }
    return h;
  }

 private:
  std::vector<Var<T>> vars_;
  std::vector<std::string> names_;
  std::vector<bool> trainable_;
  std::unordered_map<std::string, std::size_t> index_;
  bool training_ = true;
};

/// Registers parameters under a dotted prefix. Each block draws from its own
/// stream keyed by its full name, so initialization does not depend on
/// construction order.
template <typename T>
class Scope {
 public:
  Scope(ParamStore<T>& store, const Rng& rng, std::string prefix = "")
      : store_(&store), rng_(rng), prefix_(std::move(prefix)) {}

  Scope child(const std::string& name) const { return Scope(*store_, rng_, full(name)); }
  ParamStore<T>& store() const { return *store_; }
  const std::string& prefix() const { return prefix_; }

  ParamRef normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double sigma = 0.02) const {
    Rng r = rng_.split(full(name));
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(r.truncated_normal(sigma));
    return store_->add(full(name), std::move(m));
  }
  ParamRef zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    return store_->add(full(name), Mat<T>::Zero(rows, cols));
  }
  ParamRef ones(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    return store_->add(full(name), Mat<T>::Ones(rows, cols));
  }
  ParamRef add(const std::string& name, Mat<T> init) const { return store_->add(full(name), std::move(init)); }

 private:
  std::string full(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  ParamStore<T>* store_;
  Rng rng_;
  std::string prefix_;
};

}  // namespace eigenet::nn
