#pragma once

// Bias-corrected Adam over a fixed parameter list, plus global-norm clipping.

#include <cstdint>
#include <vector>

#include "kgf/tensor.hpp"

namespace kgf {

template <typename T>
struct AdamConfig {
  T lr = T(2e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig<T> cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    slots_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i]->v.size(), T(0));
      slots_[i].v.assign(params_[i]->v.size(), T(0));
    }
  }

  int64_t step_count() const { return t_; }
  const AdamConfig<T>& config() const { return cfg_; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  // One update from the gradients currently held by the parameters.
  void step() {
    ++t_;
    T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      p.ensure_grad();
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      for (size_t j = 0; j < p.v.size(); ++j) {
        T g = p.g[j];
        m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * g * g;
        T mhat = m[j] / bc1;
        T vhat = v[j] / bc2;
        p.v[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    if (checked_mode()) {
      for (auto& p : params_) throw_if_nonfinite(p->v, "adam step");
    }
  }

  // Moment arrays in parameter order, for checkpointing.
  std::vector<std::pair<std::vector<T>, std::vector<T>>> moments() const {
    std::vector<std::pair<std::vector<T>, std::vector<T>>> out;
    out.reserve(slots_.size());
    for (const auto& s : slots_) out.emplace_back(s.m, s.v);
    return out;
  }
  void restore(const std::vector<std::pair<std::vector<T>, std::vector<T>>>& moments, int64_t t) {
    if (moments.size() != slots_.size()) throw ShapeError("Adam::restore: slot count mismatch");
    for (size_t i = 0; i < slots_.size(); ++i) {
      if (moments[i].first.size() != slots_[i].m.size()) throw ShapeError("Adam::restore: moment shape mismatch");
      slots_[i].m = moments[i].first;
      slots_[i].v = moments[i].second;
    }
    t_ = t;
  }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<Var<T>> params_;
  std::vector<Slot> slots_;
  AdamConfig<T> cfg_;
  int64_t t_ = 0;
};

template <typename T>
double global_grad_norm(const std::vector<Var<T>>& params) {
  double acc = 0.0;
  for (const auto& p : params) {
    if (p->g.size() != p->v.size()) continue;
    for (T g : p->g) acc += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(acc);
}

// Scales gradients so the global norm does not exceed max_norm.
template <typename T>
double clip_global_norm(const std::vector<Var<T>>& params, double max_norm) {
  double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    T f = static_cast<T>(max_norm / norm);
    for (const auto& p : params) {
      if (p->g.size() != p->v.size()) continue;
      for (T& g : p->g) g *= f;
    }
  }
  return norm;
}

}  // namespace kgf
