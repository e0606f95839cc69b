#pragma once

// Versioned binary checkpoints: magic bytes, a canonical JSON header (model
// config, schema hash, normalization stats), named tensors as little-endian
// 64-bit floats, optional optimizer moments and RNG state, and a trailing
// FNV-1a checksum over everything before it.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "kgf/adam.hpp"
#include "kgf/model.hpp"

namespace kgf {

inline constexpr char kCheckpointMagic[4] = {'K', 'G', 'F', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace detail {

struct ByteWriter {
  std::string buf;
  void raw(const void* p, size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct ByteReader {
  const std::string& buf;
  size_t at = 0;
  explicit ByteReader(const std::string& b) : buf(b) {}
  void raw(void* p, size_t n) {
    if (at + n > buf.size()) throw DataError("checkpoint: truncated file");
    std::memcpy(p, buf.data() + at, n);
    at += n;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, 4);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
};

}  // namespace detail

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path, const Adam<T>* optimizer = nullptr,
                     const std::string& rng_state = "") {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);

  nlohmann::json header{{"config", model.cfg.to_json()},
                        {"schema_hash", model.schema.hash()},
                        {"norm", model.norm.to_json()},
                        {"precision", sizeof(T) == 8 ? "f64" : "f32"},
                        {"has_optimizer", optimizer != nullptr},
                        {"rng_state", rng_state}};
  w.str(header.dump());

  auto named = model.named_params();
  w.u64(named.size());
  for (const auto& [name, p] : named) {
    w.str(name);
    w.u32(static_cast<uint32_t>(p->rank()));
    for (int64_t e : p->shape) w.u64(static_cast<uint64_t>(e));
    for (T x : p->v) w.f64(static_cast<double>(x));
  }
  if (optimizer != nullptr) {
    w.u64(static_cast<uint64_t>(optimizer->step_count()));
    for (const auto& [m, v] : optimizer->moments()) {
      for (T x : m) w.f64(static_cast<double>(x));
      for (T x : v) w.f64(static_cast<double>(x));
    }
  }
  w.u64(fnv1a64(w.buf.data(), w.buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

struct LoadedCheckpoint {
  uint32_t version = 0;
  ModelConfig config;
  std::string schema_hash;
  NormStats norm;
  std::string precision;
  std::string rng_state;
  // name -> (shape, values)
  std::map<std::string, std::pair<std::vector<int64_t>, std::vector<double>>> tensors;
  std::vector<std::string> tensor_order;
  bool has_optimizer = false;
  int64_t optimizer_step = 0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> optimizer_moments;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 4 + 8) throw DataError("checkpoint: truncated file");

  uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + buf.size() - 8, 8);
  uint64_t actual = fnv1a64(buf.data(), buf.size() - 8);
  if (stored_sum != actual) throw DataError("checkpoint: integrity check failed (corrupted file)");

  detail::ByteReader r(buf);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError("checkpoint: bad magic bytes");
  LoadedCheckpoint ck;
  ck.version = r.u32();
  if (ck.version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(ck.version));

  nlohmann::json header = nlohmann::json::parse(r.str(), nullptr, false);
  if (header.is_discarded()) throw DataError("checkpoint: malformed header");
  ck.config = ModelConfig::from_json(header.at("config"));
  ck.schema_hash = header.at("schema_hash").get<std::string>();
  ck.norm = NormStats::from_json(header.at("norm"));
  ck.precision = header.value("precision", "f64");
  ck.rng_state = header.value("rng_state", "");
  ck.has_optimizer = header.value("has_optimizer", false);

  uint64_t n_tensors = r.u64();
  for (uint64_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    uint32_t rank = r.u32();
    std::vector<int64_t> shape(rank);
    int64_t count = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(r.u64());
      count *= shape[d];
    }
    std::vector<double> values(static_cast<size_t>(count));
    for (auto& v : values) v = r.f64();
    ck.tensor_order.push_back(name);
    ck.tensors[name] = {std::move(shape), std::move(values)};
  }
  if (ck.has_optimizer) {
    ck.optimizer_step = static_cast<int64_t>(r.u64());
    for (const auto& name : ck.tensor_order) {
      size_t n = ck.tensors[name].second.size();
      std::vector<double> m(n), v(n);
      for (auto& x : m) x = r.f64();
      for (auto& x : v) x = r.f64();
      ck.optimizer_moments.emplace_back(std::move(m), std::move(v));
    }
  }
  return ck;
}

// Rebuilds a model from a checkpoint. The schema must hash to the stored
// value; every named tensor must exist with the stored shape.
template <typename T>
Model<T> model_from_checkpoint(const LoadedCheckpoint& ck, const FeatureSchema& schema) {
  if (schema.hash() != ck.schema_hash) {
    throw DataError("checkpoint: schema hash mismatch (checkpoint " + ck.schema_hash + ", provided " +
                    schema.hash() + "); refusing to load");
  }
  Model<T> model = Model<T>::init(ck.config, schema, 0);
  model.norm = ck.norm;
  auto named = model.named_params();
  if (named.size() != ck.tensors.size())
    throw DataError("checkpoint: tensor count mismatch (" + std::to_string(ck.tensors.size()) + " stored, " +
                    std::to_string(named.size()) + " expected)");
  for (auto& [name, p] : named) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    const auto& [shape, values] = it->second;
    if (shape != p->shape)
      throw DataError("checkpoint: tensor '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                      shape_to_string(p->shape));
    for (size_t i = 0; i < values.size(); ++i) p->v[i] = static_cast<T>(values[i]);
  }
  return model;
}

}  // namespace kgf
