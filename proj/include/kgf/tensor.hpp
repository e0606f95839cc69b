#pragma once

// Dense tensors plus the gradient tape. Tensors are immutable after creation
// except for gradient accumulation during backward; each tape owns the
// backward closures of the ops recorded on it and may run backward once.

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "kgf/common.hpp"

namespace kgf {

inline int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t p = 1;
  for (int64_t e : shape) p *= e;
  return p;
}

inline std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> v;  // values, row-major
  std::vector<T> g;  // gradient, allocated on first use
  bool requires_grad = false;

  int64_t size() const { return static_cast<int64_t>(v.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  int64_t extent(int64_t i) const { return shape[static_cast<size_t>(i)]; }

  int64_t rows() const {
    if (rank() != 2) throw ShapeError("Tensor::rows: rank-2 expected, got " + shape_to_string(shape));
    return shape[0];
  }
  int64_t cols() const {
    if (rank() != 2) throw ShapeError("Tensor::cols: rank-2 expected, got " + shape_to_string(shape));
    return shape[1];
  }

  T at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols() + c)]; }
  T grad_at(int64_t r, int64_t c) const { return g[static_cast<size_t>(r * cols() + c)]; }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
  void zero_grad() { g.assign(v.size(), T(0)); }
};

template <typename T>
using Var = std::shared_ptr<Tensor<T>>;

template <typename T>
void throw_if_nonfinite(const std::vector<T>& values, const char* where) {
  for (T x : values) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw NumericError(std::string(where) + ": non-finite value detected");
    }
  }
}

template <typename T>
Var<T> make_var(std::vector<int64_t> shape, std::vector<T> values, bool requires_grad = false) {
  for (int64_t e : shape) {
    if (e <= 0) throw ShapeError("make_var: nonpositive extent in " + shape_to_string(shape));
  }
  if (shape_product(shape) != static_cast<int64_t>(values.size())) {
    throw ShapeError("make_var: " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  if (checked_mode()) throw_if_nonfinite(values, "make_var");
  auto t = std::make_shared<Tensor<T>>();
  t->shape = std::move(shape);
  t->v = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
Var<T> zeros_var(std::vector<int64_t> shape, bool requires_grad = false) {
  std::vector<T> values(static_cast<size_t>(shape_product(shape)), T(0));
  return make_var<T>(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
Var<T> scalar_var(T value, bool requires_grad = false) {
  return make_var<T>({1}, {value}, requires_grad);
}

template <typename T>
Var<T> from_dense(const DenseMat& m, bool requires_grad = false) {
  std::vector<T> values(m.v.size());
  for (size_t i = 0; i < m.v.size(); ++i) values[i] = static_cast<T>(m.v[i]);
  return make_var<T>({m.rows, m.cols}, std::move(values), requires_grad);
}

template <typename T>
DenseMat to_dense(const Tensor<T>& t) {
  DenseMat m(t.rank() == 2 ? t.shape[0] : 1, t.rank() == 2 ? t.shape[1] : t.size());
  for (size_t i = 0; i < t.v.size(); ++i) m.v[i] = static_cast<double>(t.v[i]);
  return m;
}

// Ordered record of the primitive ops of one forward pass. Creation order is
// the topological order; backward walks it in reverse exactly once.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  size_t node_count() const { return nodes_.size(); }

  void record(std::function<void()> back) {
    if (recording_) nodes_.push_back(std::move(back));
  }

  void backward(const Var<T>& loss) {
    if (used_) throw NumericError("Tape::backward: tape already consumed by a previous backward");
    if (!recording_) throw NumericError("Tape::backward: tape was created without recording");
    if (!loss || loss->size() != 1) throw NumericError("Tape::backward: loss must be a scalar");
    used_ = true;
    loss->ensure_grad();
    loss->g[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  bool recording_ = true;
  bool used_ = false;
};

// Debug dump: row-major CSV at 17 significant digits. Rank >= 2 collapses
// leading axes into rows; rank 1 prints a single row.
template <typename T>
void dump_csv(const Tensor<T>& t, std::ostream& os) {
  int64_t cols = t.rank() >= 1 ? t.shape.back() : 1;
  if (cols <= 0) cols = 1;
  int64_t n = t.size();
  for (int64_t i = 0; i < n; ++i) {
    os << fmt_g17(static_cast<double>(t.v[static_cast<size_t>(i)]));
    os << (((i + 1) % cols == 0) ? '\n' : ',');
  }
}

}  // namespace kgf
