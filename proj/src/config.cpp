#include "trapsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "trapsim/constants.hpp"
#include "trapsim/errors.hpp"

namespace trapsim::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct UnitDef {
  const char* symbol;
  const char* dimension;
  double factor;
};

// Exact-match suffix table; factors convert to the canonical SI value.
constexpr UnitDef kUnits[] = {
    {"nm", "m", 1e-9},    {"um", "m", 1e-6},     {"mm", "m", 1e-3},  {"cm", "m", 1e-2},
    {"m", "m", 1.0},      {"ns", "s", 1e-9},     {"us", "s", 1e-6},  {"ms", "s", 1e-3},
    {"s", "s", 1.0},      {"uK/s", "K/s", 1e-6}, {"mK/s", "K/s", 1e-3},
    {"K/s", "K/s", 1.0},  {"uK", "K", 1e-6},     {"mK", "K", 1e-3},  {"K", "K", 1.0},
    {"uV", "V", 1e-6},    {"mV", "V", 1e-3},     {"kV", "V", 1e3},   {"V", "V", 1.0},
    {"nW", "W", 1e-9},    {"uW", "W", 1e-6},     {"mW", "W", 1e-3},  {"W", "W", 1.0},
    {"mHz", "Hz", 1e-3},  {"kHz", "Hz", 1e3},    {"MHz", "Hz", 1e6}, {"GHz", "Hz", 1e9},
    {"Hz", "Hz", 1.0},    {"1/s", "Hz", 1.0},    {"mA", "A", 1e-3},  {"A", "A", 1.0},
    {"Pa", "Pa", 1.0},    {"amu", "kg", 1.66053906660e-27},          {"kg", "kg", 1.0},
    {"mrad", "rad", 1e-3}, {"rad", "rad", 1.0},  {"deg", "rad", M_PI / 180.0},
};

}  // namespace

Quantity parse_quantity(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) throw config_error("empty value");
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw config_error("not a number: '" + t + "'");
  std::string unit = trim(std::string(end));
  if (unit.empty()) return {v, ""};
  for (const auto& u : kUnits)
    if (unit == u.symbol) return {v * u.factor, u.dimension};
  throw config_error("unknown unit '" + unit + "' in '" + t + "'");
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::vector<std::string> errs;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        errs.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        errs.push_back("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (name.empty() || value.empty()) {
      errs.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    const std::string key = section.empty() ? name : section + "." + name;
    if (cfg.entries_.count(key)) {
      errs.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    cfg.entries_[key] = Entry{value, lineno, false};
  }
  if (!errs.empty()) {
    std::ostringstream os;
    os << origin << ": " << errs.size() << " config error" << (errs.size() > 1 ? "s" : "") << ":";
    for (const auto& e : errs) os << "\n  - " << e;
    throw config_error(os.str());
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const Config::Entry& Config::fetch(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end())
    throw config_error(origin_ + ": missing required key '" + key + "'");
  it->second.consumed = true;
  return it->second;
}

double Config::number(const std::string& key) const {
  const Entry& e = fetch(key);
  Quantity q;
  try {
    q = parse_quantity(e.raw);
  } catch (const config_error& err) {
    throw config_error(origin_ + ": key '" + key + "': " + err.what());
  }
  if (!q.unit.empty())
    throw config_error(origin_ + ": key '" + key + "' must be dimensionless, got unit of " +
                       q.unit);
  return q.value;
}

double Config::quantity(const std::string& key, const std::string& dim) const {
  const Entry& e = fetch(key);
  Quantity q;
  try {
    q = parse_quantity(e.raw);
  } catch (const config_error& err) {
    throw config_error(origin_ + ": key '" + key + "': " + err.what());
  }
  if (q.unit.empty())
    throw config_error(origin_ + ": key '" + key + "' needs a unit of dimension " + dim +
                       " (value was '" + e.raw + "')");
  if (q.unit != dim)
    throw config_error(origin_ + ": key '" + key + "' needs dimension " + dim + ", got " +
                       q.unit);
  return q.value;
}

std::string Config::text(const std::string& key) const { return fetch(key).raw; }

bool Config::flag(const std::string& key) const {
  std::string v = fetch(key).raw;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw config_error(origin_ + ": key '" + key + "' is not a boolean (got '" + v + "')");
}

std::optional<double> Config::number_or(const std::string& key) const {
  if (!entries_.count(key)) return std::nullopt;
  return number(key);
}

std::optional<double> Config::quantity_or(const std::string& key, const std::string& dim) const {
  if (!entries_.count(key)) return std::nullopt;
  return quantity(key, dim);
}

std::optional<std::string> Config::text_or(const std::string& key) const {
  if (!entries_.count(key)) return std::nullopt;
  return text(key);
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::vector<std::string> Config::keys_in(const std::string& section) const {
  std::vector<std::string> out;
  const std::string prefix = section + ".";
  for (const auto& [k, e] : entries_) {
    (void)e;
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

std::vector<std::string> Config::all_keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, e] : entries_) {
    (void)e;
    out.push_back(k);
  }
  return out;
}

std::string Config::serialize() const {
  // entries_ is sorted by full key, so sections come out grouped; keys with
  // no section must lead, before any header takes effect.
  std::ostringstream os;
  for (const auto& [k, e] : entries_)
    if (k.find('.') == std::string::npos) os << k << " = " << e.raw << "\n";
  std::string section;
  for (const auto& [k, e] : entries_) {
    const size_t dot = k.rfind('.');
    if (dot == std::string::npos) continue;
    const std::string sect = k.substr(0, dot);
    if (sect != section) {
      section = sect;
      os << "[" << section << "]\n";
    }
    os << k.substr(dot + 1) << " = " << e.raw << "\n";
  }
  return os.str();
}

void Config::assert_fully_consumed() const {
  std::vector<std::string> stale;
  for (const auto& [k, e] : entries_)
    if (!e.consumed) stale.push_back(k + " (line " + std::to_string(e.line) + ")");
  if (!stale.empty()) {
    std::ostringstream os;
    os << origin_ << ": unrecognized key" << (stale.size() > 1 ? "s" : "") << ":";
    for (const auto& s : stale) os << "\n  - " << s;
    throw config_error(os.str());
  }
}

}  // namespace trapsim::config
