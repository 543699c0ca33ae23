#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace conpatch {

/// Locale-independent number formatting: shortest round-trip form, "inf"
/// for +infinity.
std::string format_number(double v);

/// Fully resolved run configuration, echoed into every report.
class RunConfig {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_number(value); }
  void set(const std::string& key, std::int64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// "key=value" lines, sorted by key.
  std::string to_text() const;
  /// FNV-1a of to_text(), 16 hex digits.
  std::string digest() const;

 private:
  std::map<std::string, std::string> values_;
};

/// One header row, then records; fields never need quoting in our reports
/// but are quoted when they contain a comma or quote.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  std::size_t columns() const { return columns_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace conpatch
