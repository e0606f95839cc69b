#pragma once

// Shared plumbing: error categories, checked-mode switch, deterministic RNG,
// hashing, small matrix container, number formatting, job pool.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kgf {

// Error categories; the CLI maps them to exit codes (config 2, data 3, numeric 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : NumericError {
  using NumericError::NumericError;
};

// Checked mode turns on NaN/Inf scanning in the numeric kernels.
inline std::atomic<bool>& checked_mode_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline void set_checked_mode(bool on) { checked_mode_flag().store(on); }
inline bool checked_mode() { return checked_mode_flag().load(std::memory_order_relaxed); }

struct CheckedModeGuard {
  bool previous;
  explicit CheckedModeGuard(bool on) : previous(checked_mode()) { set_checked_mode(on); }
  ~CheckedModeGuard() { set_checked_mode(previous); }
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from (seed, stream, item).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t item = 0) {
  return splitmix64(seed ^ splitmix64(stream ^ splitmix64(item + 0x12fad5c9ull)));
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Shortest exact decimal for a double (17 significant digits round-trip).
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Deterministic random stream. mt19937_64 supplies the bits; the uniform and
// normal transforms are written out here so the value stream does not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends. Modulo bias is below detection for spans << 2^64.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw NumericError("Rng::uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1ull;
    return lo + static_cast<int64_t>(bits() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::string save_state() const {
    std::ostringstream os;
    os << eng_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << fmt_g17(spare_);
    return os.str();
  }
  void load_state(const std::string& s) {
    std::istringstream is(s);
    int flag = 0;
    is >> eng_ >> flag >> spare_;
    if (!is) throw DataError("Rng::load_state: malformed state string");
    has_spare_ = (flag != 0);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Plain value matrix for data and diagnostics (no gradients).
struct DenseMat {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> v;

  DenseMat() = default;
  DenseMat(int64_t r, int64_t c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r * c), fill) {}

  double& at(int64_t r, int64_t c) { return v[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return v[static_cast<size_t>(r * cols + c)]; }
  bool empty() const { return v.empty(); }
};

// Runs fn(0..n_jobs) on up to n_workers threads. Jobs must be independent;
// results indexed by job id stay deterministic regardless of scheduling.
inline void parallel_for_jobs(size_t n_jobs, int n_workers, const std::function<void(size_t)>& fn) {
  if (n_workers <= 1 || n_jobs <= 1) {
    for (size_t i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n_jobs) return;
      fn(i);
    }
  };
  size_t n = std::min(static_cast<size_t>(n_workers), n_jobs);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

// 99th-percentile chi-square critical value. Exact for the small dof used in
// the two-bucket test, Wilson-Hilferty elsewhere.
inline double chi2_critical_99(int64_t dof) {
  if (dof <= 0) throw NumericError("chi2_critical_99: dof must be positive");
  switch (dof) {
    case 1: return 6.6348966010212145;
    case 2: return 9.21034037197618;
    case 3: return 11.344866730144373;
    case 4: return 13.276704135987622;
    case 5: return 15.08627246938899;
    default: break;
  }
  const double z99 = 2.3263478740408408;
  double d = static_cast<double>(dof);
  double t = 1.0 - 2.0 / (9.0 * d) + z99 * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

// Pearson chi-square statistic against expected counts.
inline double chi2_statistic(const std::vector<int64_t>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw NumericError("chi2_statistic: size mismatch");
  double stat = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) throw NumericError("chi2_statistic: nonpositive expected count");
    double d = static_cast<double>(observed[i]) - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

}  // namespace kgf
