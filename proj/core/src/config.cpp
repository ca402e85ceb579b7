#include "sgdd/config.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "jsonio.hpp"
#include "sgdd/errors.hpp"

namespace sgdd {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      return false;
  return true;
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool in_quote = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '#' && !in_quote) return line.substr(0, i);
  }
  return line;
}

}  // namespace

TomlDoc TomlDoc::parse(const std::string& text, const std::string& origin) {
  TomlDoc doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string at = origin + ":" + std::to_string(lineno);

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(at + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ParseError(at + ": bad section name '" + section + "'");
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(at + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ParseError(at + ": bad key '" + key + "'");
    if (value.empty()) throw ParseError(at + ": missing value for '" + key + "'");

    Value v;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"')
        throw ParseError(at + ": unterminated string for '" + key + "'");
      v.text = value.substr(1, value.size() - 2);
      v.quoted = true;
    } else {
      v.text = value;
    }
    const std::string flat = section.empty() ? key : section + "." + key;
    if (!doc.values_.emplace(flat, std::move(v)).second)
      throw ParseError(at + ": duplicate key '" + flat + "'");
  }
  return doc;
}

TomlDoc TomlDoc::parse_file(const std::string& path) {
  return parse(io::read_file(path), path);
}

double TomlDoc::take_double(const std::string& key, double fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  if (it->second.quoted) throw ParseError(origin_ + ": key '" + key + "': expected a number");
  char* end = nullptr;
  const double v = std::strtod(it->second.text.c_str(), &end);
  if (end == it->second.text.c_str() || *end != '\0')
    throw ParseError(origin_ + ": key '" + key + "': '" + it->second.text + "' is not a number");
  return v;
}

int64_t TomlDoc::take_int(const std::string& key, int64_t fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  if (it->second.quoted) throw ParseError(origin_ + ": key '" + key + "': expected an integer");
  char* end = nullptr;
  const long long v = std::strtoll(it->second.text.c_str(), &end, 10);
  if (end == it->second.text.c_str() || *end != '\0')
    throw ParseError(origin_ + ": key '" + key + "': '" + it->second.text +
                     "' is not an integer");
  return v;
}

bool TomlDoc::take_bool(const std::string& key, bool fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  if (it->second.text == "true") return true;
  if (it->second.text == "false") return false;
  throw ParseError(origin_ + ": key '" + key + "': expected true or false");
}

std::string TomlDoc::take_string(const std::string& key, const std::string& fallback) {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return it->second.text;
}

void TomlDoc::apply_override(const std::string& assignment, const std::string& default_section) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InputError("override '" + assignment + "': expected key=value");
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (!valid_key(key)) throw InputError("override '" + assignment + "': bad key");
  if (key.find('.') == std::string::npos && !default_section.empty())
    key = default_section + "." + key;
  Value v;
  if (!value.empty() && value.front() == '"' && value.size() >= 2 && value.back() == '"') {
    v.text = value.substr(1, value.size() - 2);
    v.quoted = true;
  } else {
    v.text = value;
  }
  values_[key] = std::move(v);
  consumed_.erase(key);
}

void TomlDoc::expect_consumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw InputError(origin_ + ": unknown config keys: " + unknown);
}

CondenseRunConfig parse_condense_config(TomlDoc& doc) {
  CondenseRunConfig rc;
  CondenseConfig& c = rc.condense;
  rc.graph_path = doc.take_string("io.graph", "");

  c.ratio = doc.take_double("condense.ratio", c.ratio);
  c.alpha = doc.take_double("condense.alpha", c.alpha);
  c.beta = doc.take_double("condense.beta", c.beta);
  c.lr_feature = doc.take_double("condense.lr_feature", c.lr_feature);
  c.lr_structure = doc.take_double("condense.lr_structure", c.lr_structure);
  c.lr_theta = doc.take_double("condense.lr_theta", c.lr_theta);
  c.tau1 = static_cast<int>(doc.take_int("condense.tau1", c.tau1));
  c.tau2 = static_cast<int>(doc.take_int("condense.tau2", c.tau2));
  c.tau_theta = static_cast<int>(doc.take_int("condense.tau_theta", c.tau_theta));
  c.restarts = static_cast<int>(doc.take_int("condense.restarts", c.restarts));
  c.epochs = static_cast<int>(doc.take_int("condense.epochs", c.epochs));
  c.arch = arch_from_string(doc.take_string("condense.arch", arch_name(c.arch)));
  c.hidden = static_cast<int>(doc.take_int("condense.hidden", c.hidden));
  c.gen_hidden = static_cast<int>(doc.take_int("condense.gen_hidden", c.gen_hidden));
  c.gen_layers = static_cast<int>(doc.take_int("condense.gen_layers", c.gen_layers));
  c.seed = static_cast<uint64_t>(doc.take_int("condense.seed", static_cast<int64_t>(c.seed)));
  c.debug_checks = doc.take_bool("condense.debug_checks", c.debug_checks);

  c.ot.gamma = doc.take_double("ot.gamma", c.ot.gamma);
  c.ot.sinkhorn_iters = static_cast<int>(doc.take_int("ot.sinkhorn_iters", c.ot.sinkhorn_iters));
  c.ot.sinkhorn_tol = doc.take_double("ot.sinkhorn_tol", c.ot.sinkhorn_tol);
  c.ot.plan_lr = doc.take_double("ot.plan_lr", c.ot.plan_lr);
  c.ot.plan_steps = static_cast<int>(doc.take_int("ot.plan_steps", c.ot.plan_steps));
  c.ot.sample_size = static_cast<int>(doc.take_int("ot.sample_size", c.ot.sample_size));

  doc.expect_consumed();
  return rc;
}

std::string render_condense_config(const CondenseRunConfig& rc) {
  const CondenseConfig& c = rc.condense;
  std::ostringstream out;
  out << "[io]\n";
  out << "graph = \"" << rc.graph_path << "\"\n\n";
  out << "[condense]\n";
  out << "ratio = " << io::fmt_double(c.ratio) << "\n";
  out << "alpha = " << io::fmt_double(c.alpha) << "\n";
  out << "beta = " << io::fmt_double(c.beta) << "\n";
  out << "lr_feature = " << io::fmt_double(c.lr_feature) << "\n";
  out << "lr_structure = " << io::fmt_double(c.lr_structure) << "\n";
  out << "lr_theta = " << io::fmt_double(c.lr_theta) << "\n";
  out << "tau1 = " << c.tau1 << "\n";
  out << "tau2 = " << c.tau2 << "\n";
  out << "tau_theta = " << c.tau_theta << "\n";
  out << "restarts = " << c.restarts << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "arch = \"" << arch_name(c.arch) << "\"\n";
  out << "hidden = " << c.hidden << "\n";
  out << "gen_hidden = " << c.gen_hidden << "\n";
  out << "gen_layers = " << c.gen_layers << "\n";
  out << "seed = " << c.seed << "\n";
  out << "debug_checks = " << (c.debug_checks ? "true" : "false") << "\n\n";
  out << "[ot]\n";
  out << "gamma = " << io::fmt_double(c.ot.gamma) << "\n";
  out << "sinkhorn_iters = " << c.ot.sinkhorn_iters << "\n";
  out << "sinkhorn_tol = " << io::fmt_double(c.ot.sinkhorn_tol) << "\n";
  out << "plan_lr = " << io::fmt_double(c.ot.plan_lr) << "\n";
  out << "plan_steps = " << c.ot.plan_steps << "\n";
  out << "sample_size = " << c.ot.sample_size << "\n";
  return out.str();
}

}  // namespace sgdd
