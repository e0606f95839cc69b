#pragma once

// Feature schema: declares every input column (numeric/id, statistic vs
// knowledge, target flag, transform) together with the history length T and
// forecast horizon L. Loaded from JSON; hashed for checkpoint compatibility.

#include <string>
#include <vector>

#include <json.hpp>

#include "kgf/common.hpp"

namespace kgf {

enum class ColKind { numeric, id };
enum class ColGroup { statistic, knowledge };
enum class Transform { none, log1p };

struct Column {
  std::string name;
  ColKind kind = ColKind::numeric;
  ColGroup group = ColGroup::statistic;
  bool is_target = false;
  int64_t vocab_size = 0;  // id columns only
  Transform transform = Transform::none;
};

inline const char* to_string(ColKind k) { return k == ColKind::numeric ? "numeric" : "id"; }
inline const char* to_string(ColGroup g) { return g == ColGroup::statistic ? "statistic" : "knowledge"; }
inline const char* to_string(Transform t) { return t == Transform::none ? "none" : "log1p"; }

struct FeatureSchema {
  std::vector<Column> columns;
  int64_t history_len = 200;  // T
  int64_t horizon = 15;       // L

  void validate() const {
    if (horizon < 1 || history_len < horizon) {
      throw ConfigError("schema: requires T >= L >= 1, got T=" + std::to_string(history_len) +
                        " L=" + std::to_string(horizon));
    }
    if (columns.empty()) throw ConfigError("schema: no columns declared");
    bool any_target = false;
    for (const auto& c : columns) {
      if (c.name.empty()) throw ConfigError("schema: column with empty name");
      if (c.is_target) {
        any_target = true;
        if (c.kind != ColKind::numeric || c.group != ColGroup::statistic) {
          throw ConfigError("schema: target column '" + c.name + "' must be a numeric statistic");
        }
      }
      if (c.kind == ColKind::id) {
        if (c.vocab_size < 1) throw ConfigError("schema: id column '" + c.name + "' needs vocab_size >= 1");
        if (c.transform != Transform::none)
          throw ConfigError("schema: id column '" + c.name + "' cannot carry a transform");
      } else if (c.vocab_size != 0) {
        throw ConfigError("schema: numeric column '" + c.name + "' must not carry vocab_size");
      }
      for (const auto& other : columns) {
        if (&other != &c && other.name == c.name)
          throw ConfigError("schema: duplicate column name '" + c.name + "'");
      }
    }
    if (!any_target) throw ConfigError("schema: at least one target column required");
  }

  // -- index helpers (positions within the statistic / knowledge column lists)

  std::vector<int64_t> group_columns(ColGroup g) const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i].group == g) out.push_back(static_cast<int64_t>(i));
    return out;
  }
  std::vector<int64_t> stat_columns() const { return group_columns(ColGroup::statistic); }
  std::vector<int64_t> know_columns() const { return group_columns(ColGroup::knowledge); }

  std::vector<int64_t> numeric_of(ColGroup g) const {
    std::vector<int64_t> out;
    int64_t pos = 0;
    for (const auto& c : columns) {
      if (c.group != g) continue;
      if (c.kind == ColKind::numeric) out.push_back(pos);
      ++pos;
    }
    return out;
  }
  std::vector<int64_t> ids_of(ColGroup g) const {
    std::vector<int64_t> out;
    int64_t pos = 0;
    for (const auto& c : columns) {
      if (c.group != g) continue;
      if (c.kind == ColKind::id) out.push_back(pos);
      ++pos;
    }
    return out;
  }

  // Target positions within the statistic column list, in declaration order.
  std::vector<int64_t> target_positions() const {
    std::vector<int64_t> out;
    int64_t pos = 0;
    for (const auto& c : columns) {
      if (c.group != ColGroup::statistic) continue;
      if (c.is_target) out.push_back(pos);
      ++pos;
    }
    return out;
  }
  std::vector<std::string> target_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns)
      if (c.is_target) out.push_back(c.name);
    return out;
  }
  int64_t target_dim() const { return static_cast<int64_t>(target_names().size()); }

  const Column& column_in_group(ColGroup g, int64_t pos) const {
    int64_t p = 0;
    for (const auto& c : columns) {
      if (c.group != g) continue;
      if (p == pos) return c;
      ++p;
    }
    throw ConfigError("schema: group position out of range");
  }

  int64_t find_column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<int64_t>(i);
    return -1;
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) {
      nlohmann::json jc{{"name", c.name}, {"kind", to_string(c.kind)}, {"group", to_string(c.group)}};
      if (c.is_target) jc["target"] = true;
      if (c.kind == ColKind::id) jc["vocab_size"] = c.vocab_size;
      if (c.transform != Transform::none) jc["transform"] = to_string(c.transform);
      cols.push_back(jc);
    }
    return nlohmann::json{{"history_len", history_len}, {"horizon", horizon}, {"columns", cols}};
  }

  static FeatureSchema from_json(const nlohmann::json& j) {
    FeatureSchema s;
    try {
      s.history_len = j.at("history_len").get<int64_t>();
      s.horizon = j.at("horizon").get<int64_t>();
      for (const auto& jc : j.at("columns")) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        std::string kind = jc.at("kind").get<std::string>();
        if (kind == "numeric")
          c.kind = ColKind::numeric;
        else if (kind == "id")
          c.kind = ColKind::id;
        else
          throw ConfigError("schema: unknown kind '" + kind + "'");
        std::string group = jc.at("group").get<std::string>();
        if (group == "statistic")
          c.group = ColGroup::statistic;
        else if (group == "knowledge")
          c.group = ColGroup::knowledge;
        else
          throw ConfigError("schema: unknown group '" + group + "'");
        c.is_target = jc.value("target", false);
        c.vocab_size = jc.value("vocab_size", static_cast<int64_t>(0));
        std::string tr = jc.value("transform", "none");
        if (tr == "none")
          c.transform = Transform::none;
        else if (tr == "log1p")
          c.transform = Transform::log1p;
        else
          throw ConfigError("schema: unknown transform '" + tr + "'");
        s.columns.push_back(c);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("schema: malformed JSON: ") + e.what());
    }
    s.validate();
    return s;
  }

  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  std::string canonical_text() const { return to_json().dump(); }
  std::string hash() const { return hex64(fnv1a64(canonical_text())); }

  // Sales-style default: five targets plus rolling statistics, product and
  // platform id features, and numeric product knowledge. Column set is
  // data-driven; this is just a convenient starting point.
  static FeatureSchema sales_default() {
    FeatureSchema s;
    s.history_len = 200;
    s.horizon = 15;
    auto num = [](std::string name, ColGroup g, bool target, Transform t) {
      return Column{std::move(name), ColKind::numeric, g, target, 0, t};
    };
    auto id = [](std::string name, int64_t vocab) {
      return Column{std::move(name), ColKind::id, ColGroup::knowledge, false, vocab, Transform::none};
    };
    s.columns = {
        num("ipv", ColGroup::statistic, true, Transform::log1p),
        num("ipv_uv", ColGroup::statistic, true, Transform::log1p),
        num("gmv", ColGroup::statistic, true, Transform::log1p),
        num("ord", ColGroup::statistic, true, Transform::log1p),
        num("byr", ColGroup::statistic, true, Transform::log1p),
        num("ipv_1w", ColGroup::statistic, false, Transform::log1p),
        num("gmv_1w", ColGroup::statistic, false, Transform::log1p),
        num("ord_1w", ColGroup::statistic, false, Transform::log1p),
        id("seller_id", 1024),
        id("brand_id", 1024),
        id("cate_level1_id", 32),
        id("cate_level2_id", 64),
        id("cate_id", 256),
        id("week", 54),
        id("nday", 366),
        id("in_activity", 2),
        id("activity_level", 8),
        num("price", ColGroup::knowledge, false, Transform::none),
        num("online", ColGroup::knowledge, false, Transform::none),
        num("brand_score", ColGroup::knowledge, false, Transform::none),
    };
    s.validate();
    return s;
  }

  // Schema of the synthetic promotion generator.
  static FeatureSchema synthetic_default(int64_t T = 60, int64_t L = 10) {
    FeatureSchema s;
    s.history_len = T;
    s.horizon = L;
    s.columns = {
        Column{"sales", ColKind::numeric, ColGroup::statistic, true, 0, Transform::log1p},
        Column{"views", ColKind::numeric, ColGroup::statistic, false, 0, Transform::log1p},
        Column{"price", ColKind::numeric, ColGroup::knowledge, false, 0, Transform::none},
        Column{"in_activity", ColKind::id, ColGroup::knowledge, false, 2, Transform::none},
        Column{"dow", ColKind::id, ColGroup::knowledge, false, 7, Transform::none},
    };
    s.validate();
    return s;
  }
};

}  // namespace kgf
