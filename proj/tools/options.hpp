#pragma once

#include "conpatch/report.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace conpatch::cli {

/// Bad flags, values or config keys (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { kString, kInt, kReal, kBool };

struct ParamSpec {
  std::string key;  ///< snake_case; the flag is the kebab-case form
  Kind kind = Kind::kString;
  std::string fallback;
  std::string help;
  bool io = false;  ///< paths and other keys left out of the digest
};

/// Layered key-value configuration: defaults < preset < config file < flags.
class ParamSet {
 public:
  explicit ParamSet(std::vector<ParamSpec> specs);

  const std::vector<ParamSpec>& specs() const { return specs_; }
  bool has(const std::string& key) const { return index_.count(key) != 0; }

  /// Overwrites one layer entry; unknown keys and malformed values throw.
  void assign(const std::string& key, const std::string& value);
  void apply_preset(const std::string& preset);
  /// "key = value" lines, '#' comments; dashes in keys read as underscores.
  void apply_file(const std::filesystem::path& path);

  const std::string& str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  bool empty(const std::string& key) const { return str(key).empty(); }

  /// Every key, for echoing.
  RunConfig resolved(const std::string& command) const;
  /// Keys that can change results only.
  RunConfig digest_config(const std::string& command) const;

 private:
  const ParamSpec& spec(const std::string& key) const;

  std::vector<ParamSpec> specs_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::string> values_;
};

std::string kebab(const std::string& key);

long long parse_integer(const std::string& key, const std::string& v);
double parse_real(const std::string& key, const std::string& v);
bool parse_bool(const std::string& key, const std::string& v);

}  // namespace conpatch::cli
