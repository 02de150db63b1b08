#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trapsim::config {

// Strict INI-like config: "key = value" lines grouped under [section]
// headers, '#' comments. Dimensioned values carry a unit suffix which must
// match the dimension the reader asks for — "oven.temperature = 530 K",
// "laser423.power = 50 uW". Unknown keys and re-definitions are errors.
// All errors in a file are collected and thrown together as one
// config_error whose message lists every offense with line numbers.

struct Quantity {
  double value = 0;   // SI
  std::string unit;   // canonical SI symbol it was converted to ("" = dimensionless)
};

class Config {
 public:
  static Config load(const std::string& path);
  static Config parse(const std::string& text, const std::string& origin = "<string>");

  // Typed getters; key = "section.name". Dimensioned getters state the
  // dimension they require and fail on mismatch (naming the field).
  double number(const std::string& key) const;                       // dimensionless
  double quantity(const std::string& key, const std::string& dim) const;  // dim: "m","s","K","V","W","Hz","A","Pa","kg","rad"
  std::string text(const std::string& key) const;
  bool flag(const std::string& key) const;

  std::optional<double> number_or(const std::string& key) const;
  std::optional<double> quantity_or(const std::string& key, const std::string& dim) const;
  std::optional<std::string> text_or(const std::string& key) const;

  bool has(const std::string& key) const;
  std::vector<std::string> keys_in(const std::string& section) const;
  std::vector<std::string> all_keys() const;  // every "section.key" present, sorted

  // Canonical text form; parse(serialize()) reproduces an equal config.
  std::string serialize() const;

  // Call after reading everything: any key never consumed is an error
  // (catches typos on the user's side).
  void assert_fully_consumed() const;

 private:
  struct Entry {
    std::string raw;
    int line = 0;
    mutable bool consumed = false;
  };
  std::map<std::string, Entry> entries_;
  std::string origin_;

  const Entry& fetch(const std::string& key) const;
};

// Parse "530 K", "50 uW", "2.5 deg" into SI + canonical dimension symbol.
// Dimensionless numbers have unit "".
Quantity parse_quantity(const std::string& token);

}  // namespace trapsim::config
