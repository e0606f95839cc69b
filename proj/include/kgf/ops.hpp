#pragma once

// Primitive tensor ops with hand-written backward rules. Every op records its
// backward closure on the tape when the result needs gradients. Summation is
// row-major and sequential, so results are bit-identical run to run.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kgf/tensor.hpp"

namespace kgf {

namespace detail {

// C(m x n) += A(m x k) * B(k x n). Per-element accumulation runs over k in
// ascending order, matching a plain ijk triple loop bit for bit.
template <typename T>
void mm_acc(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      T aval = arow[p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
template <typename T>
void mm_nt_acc(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
template <typename T>
void mm_tn_acc(T* c, const T* a, const T* b, int64_t k, int64_t m, int64_t n) {
  for (int64_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      T aval = arow[i];
      T* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

template <typename T>
Var<T> result_like(std::vector<int64_t> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor<T>>();
  t->shape = std::move(shape);
  t->v.assign(static_cast<size_t>(shape_product(t->shape)), T(0));
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a->shape != b->shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a->shape) + " vs " +
                     shape_to_string(b->shape));
  }
}

// Rows of a tensor viewed as (leading x last-extent).
template <typename T>
int64_t leading_rows(const Var<T>& a, const char* op) {
  if (a->rank() < 1) throw ShapeError(std::string(op) + ": rank >= 1 expected");
  int64_t last = a->shape.back();
  if (last <= 0) throw ShapeError(std::string(op) + ": empty last axis");
  return a->size() / last;
}

}  // namespace detail

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  auto out = detail::result_like<T>(a->shape, a->requires_grad || b->requires_grad);
  for (int64_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] + b->v[i];
  if (out->requires_grad) {
    tape.record([a, b, out]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) b->g[i] += out->g[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "sub");
  auto out = detail::result_like<T>(a->shape, a->requires_grad || b->requires_grad);
  for (int64_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] - b->v[i];
  if (out->requires_grad) {
    tape.record([a, b, out]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) b->g[i] -= out->g[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  auto out = detail::result_like<T>(a->shape, a->requires_grad || b->requires_grad);
  for (int64_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * b->v[i];
  if (out->requires_grad) {
    tape.record([a, b, out]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i] * b->v[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) b->g[i] += out->g[i] * a->v[i];
      }
    });
  }
  return out;
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T factor) {
  auto out = detail::result_like<T>(a->shape, a->requires_grad);
  for (int64_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * factor;
  if (out->requires_grad) {
    tape.record([a, out, factor]() {
      out->ensure_grad();
      a->ensure_grad();
      for (int64_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i] * factor;
    });
  }
  return out;
}

/// a[... x k] * b[k x n] -> [... x n]; leading axes of a are batch rows.
template <typename T>
Var<T> matmul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->rank() < 2 || b->rank() != 2) {
    throw ShapeError("matmul: need a rank>=2 and b rank 2, got " + shape_to_string(a->shape) + " x " +
                     shape_to_string(b->shape));
  }
  int64_t k = a->shape.back();
  if (k != b->shape[0]) {
    throw ShapeError("matmul: inner extents differ, " + shape_to_string(a->shape) + " x " +
                     shape_to_string(b->shape));
  }
  int64_t m = a->size() / k;
  int64_t n = b->shape[1];
  std::vector<int64_t> out_shape(a->shape.begin(), a->shape.end() - 1);
  out_shape.push_back(n);
  auto out = detail::result_like<T>(out_shape, a->requires_grad || b->requires_grad);
  detail::mm_acc(out->v.data(), a->v.data(), b->v.data(), m, k, n);
  if (out->requires_grad) {
    tape.record([a, b, out, m, k, n]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        detail::mm_nt_acc(a->g.data(), out->g.data(), b->v.data(), m, n, k);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        detail::mm_tn_acc(b->g.data(), a->v.data(), out->g.data(), m, k, n);
      }
    });
  }
  return out;
}

/// a[m x k] * b[n x k]^T -> [m x n]
template <typename T>
Var<T> matmul_nt(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[1]) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_to_string(a->shape) + " x " +
                     shape_to_string(b->shape) + "^T");
  }
  int64_t m = a->shape[0], k = a->shape[1], n = b->shape[0];
  auto out = detail::result_like<T>({m, n}, a->requires_grad || b->requires_grad);
  detail::mm_nt_acc(out->v.data(), a->v.data(), b->v.data(), m, k, n);
  if (out->requires_grad) {
    tape.record([a, b, out, m, k, n]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        detail::mm_acc(a->g.data(), out->g.data(), b->v.data(), m, n, k);
      }
      if (b->requires_grad) {
        b->ensure_grad();
        detail::mm_tn_acc(b->g.data(), out->g.data(), a->v.data(), m, n, k);
      }
    });
  }
  return out;
}

/// a[... x c] + v[c], broadcast over leading axes.
template <typename T>
Var<T> add_rowvec(Tape<T>& tape, const Var<T>& a, const Var<T>& vvec) {
  if (vvec->rank() != 1 || vvec->shape[0] != a->shape.back()) {
    throw ShapeError("add_rowvec: vector " + shape_to_string(vvec->shape) + " does not match " +
                     shape_to_string(a->shape));
  }
  int64_t c = a->shape.back();
  int64_t rows = detail::leading_rows(a, "add_rowvec");
  auto out = detail::result_like<T>(a->shape, a->requires_grad || vvec->requires_grad);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) out->v[r * c + j] = a->v[r * c + j] + vvec->v[j];
  if (out->requires_grad) {
    tape.record([a, vvec, out, rows, c]() {
      out->ensure_grad();
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < out->size(); ++i) a->g[i] += out->g[i];
      }
      if (vvec->requires_grad) {
        vvec->ensure_grad();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < c; ++j) vvec->g[j] += out->g[r * c + j];
      }
    });
  }
  return out;
}

/// x[... x in] * W[in x out] + b[out]
template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return add_rowvec(tape, matmul(tape, x, w), b);
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& a) {
  auto out = detail::result_like<T>(a->shape, a->requires_grad);
  for (int64_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] > T(0) ? a->v[i] : T(0);
  if (out->requires_grad) {
    tape.record([a, out]() {
      out->ensure_grad();
      a->ensure_grad();
      for (int64_t i = 0; i < out->size(); ++i)
        if (a->v[i] > T(0)) a->g[i] += out->g[i];
    });
  }
  return out;
}

/// Numerically stable softmax along `axis`; each slice sums to 1.
template <typename T>
Var<T> softmax(Tape<T>& tape, const Var<T>& a, int64_t axis) {
  if (axis < 0) axis += a->rank();
  if (axis < 0 || axis >= a->rank()) throw ShapeError("softmax: axis out of range for " + shape_to_string(a->shape));
  if (checked_mode()) throw_if_nonfinite(a->v, "softmax input");
  int64_t n = a->shape[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (int64_t i = axis + 1; i < a->rank(); ++i) inner *= a->shape[static_cast<size_t>(i)];
  int64_t outer = a->size() / (n * inner);
  auto out = detail::result_like<T>(a->shape, a->requires_grad);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * n * inner + in;
      T mx = a->v[base];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, a->v[base + j * inner]);
      T sum = T(0);
      for (int64_t j = 0; j < n; ++j) {
        T e = std::exp(a->v[base + j * inner] - mx);
        out->v[base + j * inner] = e;
        sum += e;
      }
      for (int64_t j = 0; j < n; ++j) out->v[base + j * inner] /= sum;
    }
  }
  if (out->requires_grad) {
    tape.record([a, out, n, inner, outer]() {
      out->ensure_grad();
      a->ensure_grad();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          int64_t base = o * n * inner + in;
          T dot = T(0);
          for (int64_t j = 0; j < n; ++j) dot += out->g[base + j * inner] * out->v[base + j * inner];
          for (int64_t j = 0; j < n; ++j) {
            int64_t idx = base + j * inner;
            a->g[idx] += out->v[idx] * (out->g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

/// Per-last-axis standardization followed by the affine map gain*x + bias.
template <typename T>
Var<T> layer_norm(Tape<T>& tape, const Var<T>& a, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5)) {
  int64_t d = a->shape.back();
  if (gain->rank() != 1 || gain->shape[0] != d || bias->rank() != 1 || bias->shape[0] != d) {
    throw ShapeError("layer_norm: gain/bias must be rank-1 of extent " + std::to_string(d));
  }
  int64_t rows = detail::leading_rows(a, "layer_norm");
  auto out = detail::result_like<T>(a->shape, a->requires_grad || gain->requires_grad || bias->requires_grad);
  std::vector<T> inv_std(static_cast<size_t>(rows));
  std::vector<T> mean(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const T* x = a->v.data() + r * d;
    T mu = T(0);
    for (int64_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (int64_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<T>(d);
    T inv = T(1) / std::sqrt(var + eps);
    mean[static_cast<size_t>(r)] = mu;
    inv_std[static_cast<size_t>(r)] = inv;
    T* y = out->v.data() + r * d;
    for (int64_t j = 0; j < d; ++j) y[j] = gain->v[j] * ((x[j] - mu) * inv) + bias->v[j];
  }
  if (out->requires_grad) {
    tape.record([a, gain, bias, out, rows, d, mean, inv_std]() {
      out->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const T* x = a->v.data() + r * d;
        const T* go = out->g.data() + r * d;
        T mu = mean[static_cast<size_t>(r)];
        T inv = inv_std[static_cast<size_t>(r)];
        if (gain->requires_grad || bias->requires_grad) {
          gain->ensure_grad();
          bias->ensure_grad();
          for (int64_t j = 0; j < d; ++j) {
            if (gain->requires_grad) gain->g[j] += go[j] * ((x[j] - mu) * inv);
            if (bias->requires_grad) bias->g[j] += go[j];
          }
        }
        if (a->requires_grad) {
          a->ensure_grad();
          // dL/dx via the usual three-term layer-norm gradient
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (int64_t j = 0; j < d; ++j) {
            T dxhat = go[j] * gain->v[j];
            T xhat = (x[j] - mu) * inv;
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          T* ga = a->g.data() + r * d;
          for (int64_t j = 0; j < d; ++j) {
            T dxhat = go[j] * gain->v[j];
            T xhat = (x[j] - mu) * inv;
            ga[j] += inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / static_cast<T>(d));
          }
        }
      }
    });
  }
  return out;
}

/// Column-wise concatenation of rank-2 tensors with equal row counts.
template <typename T>
Var<T> concat_cols(Tape<T>& tape, const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  int64_t rows = parts[0]->rows();
  int64_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    total += p->cols();
    rg = rg || p->requires_grad;
  }
  auto out = detail::result_like<T>({rows, total}, rg);
  int64_t off = 0;
  for (const auto& p : parts) {
    int64_t c = p->cols();
    for (int64_t r = 0; r < rows; ++r)
      std::memcpy(out->v.data() + r * total + off, p->v.data() + r * c, static_cast<size_t>(c) * sizeof(T));
    off += c;
  }
  if (rg) {
    tape.record([parts, out, rows, total]() {
      out->ensure_grad();
      int64_t off2 = 0;
      for (const auto& p : parts) {
        int64_t c = p->cols();
        if (p->requires_grad) {
          p->ensure_grad();
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < c; ++j) p->g[r * c + j] += out->g[r * total + off2 + j];
        }
        off2 += c;
      }
    });
  }
  return out;
}

/// Row gather: out[i] = a[idx[i]]. Backward scatter-adds, so repeated indices
/// accumulate (the embedding-lookup rule).
template <typename T>
Var<T> take_rows(Tape<T>& tape, const Var<T>& a, std::vector<int64_t> idx) {
  int64_t rows = a->rows(), c = a->cols();
  for (int64_t i : idx) {
    if (i < 0 || i >= rows)
      throw ShapeError("take_rows: index " + std::to_string(i) + " out of range [0," + std::to_string(rows) + ")");
  }
  int64_t n = static_cast<int64_t>(idx.size());
  if (n == 0) throw ShapeError("take_rows: empty index list");
  auto out = detail::result_like<T>({n, c}, a->requires_grad);
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(out->v.data() + i * c, a->v.data() + idx[static_cast<size_t>(i)] * c,
                static_cast<size_t>(c) * sizeof(T));
  if (out->requires_grad) {
    tape.record([a, out, idx = std::move(idx), n, c]() {
      out->ensure_grad();
      a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        int64_t src = idx[static_cast<size_t>(i)];
        for (int64_t j = 0; j < c; ++j) a->g[src * c + j] += out->g[i * c + j];
      }
    });
  }
  return out;
}

/// Rows flagged in `mask` are replaced by `token` (broadcast); others pass
/// through. No gradient flows into replaced rows of `a`.
template <typename T>
Var<T> substitute_rows(Tape<T>& tape, const Var<T>& a, const Var<T>& token, std::vector<uint8_t> mask) {
  int64_t rows = a->rows(), c = a->cols();
  if (token->rank() != 1 || token->shape[0] != c)
    throw ShapeError("substitute_rows: token must be rank-1 of extent " + std::to_string(c));
  if (static_cast<int64_t>(mask.size()) != rows)
    throw ShapeError("substitute_rows: mask length " + std::to_string(mask.size()) + " != rows " +
                     std::to_string(rows));
  auto out = detail::result_like<T>(a->shape, a->requires_grad || token->requires_grad);
  for (int64_t r = 0; r < rows; ++r) {
    const T* src = mask[static_cast<size_t>(r)] ? token->v.data() : a->v.data() + r * c;
    std::memcpy(out->v.data() + r * c, src, static_cast<size_t>(c) * sizeof(T));
  }
  if (out->requires_grad) {
    tape.record([a, token, out, mask = std::move(mask), rows, c]() {
      out->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        if (mask[static_cast<size_t>(r)]) {
          if (token->requires_grad) {
            token->ensure_grad();
            for (int64_t j = 0; j < c; ++j) token->g[j] += out->g[r * c + j];
          }
        } else if (a->requires_grad) {
          a->ensure_grad();
          for (int64_t j = 0; j < c; ++j) a->g[r * c + j] += out->g[r * c + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& a) {
  auto out = detail::result_like<T>({1}, a->requires_grad);
  T acc = T(0);
  for (int64_t i = 0; i < a->size(); ++i) acc += a->v[i];
  out->v[0] = acc;
  if (out->requires_grad) {
    tape.record([a, out]() {
      out->ensure_grad();
      a->ensure_grad();
      for (int64_t i = 0; i < a->size(); ++i) a->g[i] += out->g[0];
    });
  }
  return out;
}

/// Mean of squared differences over all elements.
template <typename T>
Var<T> mean_squared_error(Tape<T>& tape, const Var<T>& pred, const Var<T>& target) {
  detail::require_same_shape(pred, target, "mean_squared_error");
  if (checked_mode()) {
    throw_if_nonfinite(pred->v, "mean_squared_error pred");
    throw_if_nonfinite(target->v, "mean_squared_error target");
  }
  int64_t n = pred->size();
  auto out = detail::result_like<T>({1}, pred->requires_grad || target->requires_grad);
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    T d = pred->v[i] - target->v[i];
    acc += d * d;
  }
  out->v[0] = acc / static_cast<T>(n);
  if (out->requires_grad) {
    tape.record([pred, target, out, n]() {
      out->ensure_grad();
      T go = out->g[0];
      T two_over_n = T(2) / static_cast<T>(n);
      if (pred->requires_grad) {
        pred->ensure_grad();
        for (int64_t i = 0; i < n; ++i) pred->g[i] += go * two_over_n * (pred->v[i] - target->v[i]);
      }
      if (target->requires_grad) {
        target->ensure_grad();
        for (int64_t i = 0; i < n; ++i) target->g[i] -= go * two_over_n * (pred->v[i] - target->v[i]);
      }
    });
  }
  return out;
}

}  // namespace kgf
