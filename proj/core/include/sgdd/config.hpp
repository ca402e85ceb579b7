#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "sgdd/condenser.hpp"

namespace sgdd {

// Minimal TOML reader covering the experiment-config subset: [sections],
// key = value with string/integer/float/boolean values, and # comments.
// Keys flatten to "section.key". Typed take_* accessors mark keys consumed;
// expect_consumed() rejects anything left over, so configs with unknown keys
// fail before any computation starts.
class TomlDoc {
 public:
  static TomlDoc parse(const std::string& text, const std::string& origin);
  static TomlDoc parse_file(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  double take_double(const std::string& key, double fallback);
  int64_t take_int(const std::string& key, int64_t fallback);
  bool take_bool(const std::string& key, bool fallback);
  std::string take_string(const std::string& key, const std::string& fallback);

  // "key=value" or "section.key=value"; bare keys get `default_section`.
  void apply_override(const std::string& assignment, const std::string& default_section);

  void expect_consumed() const;  // InputError naming every unconsumed key

 private:
  struct Value {
    std::string text;
    bool quoted = false;
  };
  std::string origin_;
  std::map<std::string, Value> values_;
  std::set<std::string> consumed_;
};

// Full condense run configuration: the [condense] and [ot] tables plus the
// [io] input path.
struct CondenseRunConfig {
  CondenseConfig condense;
  std::string graph_path;
};

CondenseRunConfig parse_condense_config(TomlDoc& doc);
std::string render_condense_config(const CondenseRunConfig& rc);

}  // namespace sgdd
