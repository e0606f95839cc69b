#pragma once

// Small helpers shared by the test suites.

#include <vector>

#include "kgf/common.hpp"
#include "kgf/tensor.hpp"

namespace testutil {

inline kgf::Var<double> random_var(kgf::Rng& rng, std::vector<int64_t> shape, bool requires_grad = false,
                                   double scale = 1.0) {
  std::vector<double> v(static_cast<size_t>(kgf::shape_product(shape)));
  for (auto& x : v) x = scale * rng.normal();
  return kgf::make_var<double>(std::move(shape), std::move(v), requires_grad);
}

inline kgf::DenseMat to_mat(const kgf::Tensor<double>& t) {
  kgf::DenseMat m(t.shape[0], t.shape.size() > 1 ? t.shape[1] : 1);
  for (size_t i = 0; i < t.v.size(); ++i) m.v[i] = t.v[i];
  return m;
}

inline kgf::DenseMat random_mat(kgf::Rng& rng, int64_t r, int64_t c, double scale = 1.0) {
  kgf::DenseMat m(r, c);
  for (auto& x : m.v) x = scale * rng.normal();
  return m;
}

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace testutil
