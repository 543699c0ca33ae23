#include "options.hpp"

#include "conpatch/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace conpatch::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Preset tables: only keys the subcommand knows are applied.
const std::map<std::string, std::map<std::string, std::string>>& presets() {
  static const std::map<std::string, std::map<std::string, std::string>> p{
      {"full", {}},
      {"desk", {{"count", "200000"}, {"k", "100"}, {"stride", "3"}}},
  };
  return p;
}

}  // namespace

std::string kebab(const std::string& key) {
  std::string out = key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec == std::errc() && p == end) return out;
  // 2e5 style counts
  const double d = parse_real(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e18) throw UsageError(kebab(key) + ": not an integer: " + v);
  return static_cast<long long>(d);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end || !std::isfinite(out))
    throw UsageError(kebab(key) + ": not a number: " + v);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw UsageError(kebab(key) + ": not a boolean: " + v);
}

ParamSet::ParamSet(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    index_[specs_[i].key] = i;
    values_[specs_[i].key] = specs_[i].fallback;
  }
}

const ParamSpec& ParamSet::spec(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw UsageError("unknown parameter: " + key);
  return specs_[it->second];
}

void ParamSet::assign(const std::string& key, const std::string& value) {
  const ParamSpec& s = spec(key);
  switch (s.kind) {
    case Kind::kInt: parse_integer(key, value); break;
    case Kind::kReal: parse_real(key, value); break;
    case Kind::kBool: parse_bool(key, value); break;
    case Kind::kString: break;
  }
  values_[key] = value;
}

void ParamSet::apply_preset(const std::string& preset) {
  auto it = presets().find(preset);
  if (it == presets().end()) throw UsageError("unknown preset: " + preset);
  for (const auto& [k, v] : it->second)
    if (has(k)) assign(k, v);
}

void ParamSet::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    if (!has(key)) throw UsageError(path.string() + ":" + std::to_string(n) + ": unknown key " + key);
    assign(key, trim(line.substr(eq + 1)));
  }
}

const std::string& ParamSet::str(const std::string& key) const {
  spec(key);
  return values_.at(key);
}

long long ParamSet::integer(const std::string& key) const { return parse_integer(key, str(key)); }
double ParamSet::real(const std::string& key) const { return parse_real(key, str(key)); }
bool ParamSet::flag(const std::string& key) const { return parse_bool(key, str(key)); }

RunConfig ParamSet::resolved(const std::string& command) const {
  RunConfig c;
  c.set("command", command);
  for (const auto& s : specs_) c.set(s.key, values_.at(s.key));
  return c;
}

RunConfig ParamSet::digest_config(const std::string& command) const {
  RunConfig c;
  c.set("command", command);
  for (const auto& s : specs_)
    if (!s.io) c.set(s.key, values_.at(s.key));
  return c;
}

}  // namespace conpatch::cli
