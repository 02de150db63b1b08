#include "trapsim/layout_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "trapsim/config.hpp"
#include "trapsim/errors.hpp"

namespace trapsim::layout_io {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

// Reads number-token [unit-token] pairs: "105 um" or a bare "105".
class TokenReader {
 public:
  explicit TokenReader(std::vector<std::string> tokens) : toks_(std::move(tokens)) {}

  bool done() const { return pos_ >= toks_.size(); }
  size_t remaining() const { return toks_.size() - pos_; }

  std::string word() {
    if (done()) throw config_error("unexpected end of record");
    return toks_[pos_++];
  }

  double quantity(const std::string& dim, const std::string& what) {
    if (done()) throw config_error("missing " + what);
    std::string joined = toks_[pos_++];
    if (!done() && !std::isdigit(static_cast<unsigned char>(toks_[pos_][0])) &&
        toks_[pos_][0] != '-' && toks_[pos_][0] != '+' && toks_[pos_][0] != '.')
      joined += " " + toks_[pos_++];
    const config::Quantity q = config::parse_quantity(joined);
    if (q.unit.empty())
      throw config_error(what + " needs a unit of dimension " + dim + " (got '" + joined + "')");
    if (q.unit != dim)
      throw config_error(what + " needs dimension " + dim + ", got " + q.unit + " ('" + joined +
                         "')");
    return q.value;
  }

 private:
  std::vector<std::string> toks_;
  size_t pos_ = 0;
};

}  // namespace

LoadedLayout parse_layout(const std::string& text, const std::string& origin) {
  LoadedLayout out;
  std::vector<std::string> errs;
  bool have_hole = false, have_rf = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;

    const std::string kind = tokens.front();
    TokenReader rd({tokens.begin() + 1, tokens.end()});
    try {
      if (kind == "patch" || kind == "cutout") {
        trapmodel::RectPatch p;
        p.label = rd.word();
        p.x1 = rd.quantity("m", "x1");
        p.x2 = rd.quantity("m", "x2");
        p.y1 = rd.quantity("m", "y1");
        p.y2 = rd.quantity("m", "y2");
        p.sign = (kind == "patch") ? +1 : -1;
        if (!rd.done()) throw config_error("trailing tokens after " + kind + " record");
        out.layout.patches.push_back(p);
      } else if (kind == "hole") {
        if (have_hole) throw config_error("duplicate hole record");
        out.layout.hole_x = rd.quantity("m", "hole x");
        out.layout.hole_y = rd.quantity("m", "hole y");
        if (!rd.done()) throw config_error("trailing tokens after hole record");
        have_hole = true;
      } else if (kind == "rf") {
        if (have_rf) throw config_error("duplicate rf record");
        out.drive.rf_voltage = rd.quantity("V", "rf voltage");
        // drive frequency is stated as an ordinary frequency; dynamics use angular
        out.drive.rf_omega = 2 * M_PI * rd.quantity("Hz", "rf frequency");
        if (!rd.done()) throw config_error("trailing tokens after rf record");
        have_rf = true;
      } else if (kind == "dc") {
        const std::string label = rd.word();
        const double v = rd.quantity("V", "dc voltage of " + label);
        if (!rd.done()) throw config_error("trailing tokens after dc record");
        if (out.drive.dc_voltages.count(label))
          throw config_error("duplicate dc record for '" + label + "'");
        out.drive.dc_voltages[label] = v;
      } else {
        throw config_error("unknown record type '" + kind + "'");
      }
    } catch (const config_error& e) {
      errs.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }

  if (!errs.empty()) {
    std::ostringstream os;
    os << origin << ": " << errs.size() << " layout error" << (errs.size() > 1 ? "s" : "") << ":";
    for (const auto& e : errs) os << "\n  - " << e;
    throw config_error(os.str());
  }

  out.layout.validate();             // geometric problems -> structural_error
  out.drive.validate_against(out.layout);
  return out;
}

LoadedLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open layout file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_layout(ss.str(), path);
}

}  // namespace trapsim::layout_io
