#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "trapsim/config.hpp"
#include "trapsim/csv.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/layout_io.hpp"
#include "trapsim/manifest.hpp"

using namespace trapsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("trapsim_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("quantity parsing: units, prefixes, and rejects") {
  using config::parse_quantity;
  CHECK(parse_quantity("530 K").value == doctest::Approx(530.0));
  CHECK(parse_quantity("530 K").unit == "K");
  CHECK(parse_quantity("50 uW").value == doctest::Approx(50e-6));
  CHECK(parse_quantity("50 uW").unit == "W");
  CHECK(parse_quantity("25 MHz").value == doctest::Approx(25e6));
  CHECK(parse_quantity("2.5 deg").value == doctest::Approx(2.5 * M_PI / 180));
  CHECK(parse_quantity("2.5 deg").unit == "rad");
  CHECK(parse_quantity("40 amu").unit == "kg");
  CHECK(parse_quantity("3e4 1/s").unit == "Hz");
  CHECK(parse_quantity("-1.5 mV").value == doctest::Approx(-1.5e-3));
  CHECK(parse_quantity("0.7").unit == "");
  CHECK(parse_quantity("1e-3 K/s").value == doctest::Approx(1e-3));
  CHECK(parse_quantity("5 uK/s").value == doctest::Approx(5e-6));
  CHECK(parse_quantity("5 uK/s").unit == "K/s");

  CHECK_THROWS_AS(parse_quantity(""), config_error);
  CHECK_THROWS_AS(parse_quantity("fast"), config_error);
  CHECK_THROWS_AS(parse_quantity("10 furlongs"), config_error);
}

TEST_CASE("config: sections, typed getters, and dimension checks") {
  const std::string text = R"(
# oven block
[oven]
temperature = 530 K
distance    = 3 mm

[laser423]
power    = 50 uW
diameter = 250 um
enabled  = true
label    = probe

[scan]
points = 400
)";
  auto cfg = config::Config::parse(text, "unit-test");
  CHECK(cfg.quantity("oven.temperature", "K") == doctest::Approx(530.0));
  CHECK(cfg.quantity("oven.distance", "m") == doctest::Approx(3e-3));
  CHECK(cfg.quantity("laser423.power", "W") == doctest::Approx(50e-6));
  CHECK(cfg.number("scan.points") == doctest::Approx(400));
  CHECK(cfg.flag("laser423.enabled"));
  CHECK(cfg.text("laser423.label") == "probe");
  CHECK(cfg.has("oven.temperature"));
  CHECK(!cfg.has("oven.pressure"));
  CHECK(cfg.quantity_or("oven.pressure", "Pa") == std::nullopt);
  CHECK(cfg.quantity("laser423.diameter", "m") == doctest::Approx(250e-6));

  const auto keys = cfg.keys_in("laser423");
  CHECK(keys.size() == 4);

  // Asking for the wrong dimension names the field.
  try {
    cfg.quantity("oven.temperature", "m");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("oven.temperature") != std::string::npos);
  }

  cfg.assert_fully_consumed();
}

TEST_CASE("config: serialize/parse round-trip preserves every key") {
  const std::string text = R"(
seedless = top-level value
[oven]
temperature = 530 K
distance    = 3 mm
[scan]
points  = 400
comment = keep spaces  intact
)";
  const auto cfg = config::Config::parse(text, "rt");
  const std::string spat = cfg.serialize();
  const auto back = config::Config::parse(spat, "rt2");
  CHECK(back.serialize() == spat);

  const auto keys = cfg.all_keys();
  REQUIRE(keys.size() == 5);
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  for (const auto& k : keys) {
    CHECK(back.has(k));
    CHECK(back.text(k) == cfg.text(k));
  }
  // Top-level keys must not be swallowed by a section on re-parse.
  CHECK(back.text("seedless") == "top-level value");
  CHECK(back.quantity("oven.temperature", "K") == doctest::Approx(530.0));
}

TEST_CASE("config: unconsumed keys are reported as typos") {
  auto cfg = config::Config::parse("[a]\nx = 1\nyy = 2\n");
  CHECK(cfg.number("a.x") == doctest::Approx(1));
  try {
    cfg.assert_fully_consumed();
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("a.yy") != std::string::npos);
  }
}

TEST_CASE("config: all errors in a file are collected with line numbers") {
  const std::string text =
      "[a]\n"
      "x = 1\n"
      "x = 2\n"          // line 3: redefinition
      "novalue\n"        // line 4: missing '='
      "[unterminated\n"  // line 5: bad section
      "y = 3\n";
  try {
    config::Config::parse(text, "bad.cfg");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.cfg") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("line 5") != std::string::npos);
  }
}

TEST_CASE("layout parsing: canonical file loads and validates") {
  const auto loaded = fixtures::canonical();
  CHECK(loaded.layout.patches.size() >= 10);
  CHECK(loaded.drive.rf_voltage == doctest::Approx(155.0));
  CHECK(loaded.drive.rf_omega == doctest::Approx(2 * M_PI * 25e6));
  CHECK(loaded.drive.dc_voltages.at("Center") == doctest::Approx(0.04));
  CHECK(loaded.drive.dc_voltages.at("End") == doctest::Approx(6.9249));
  CHECK(loaded.drive.dc_voltages.at("MidL2") == doctest::Approx(-1.1774));
  CHECK_NOTHROW(loaded.layout.validate());

  // Exactly one hole cutout in the center electrode, 40 um square.
  int cutouts = 0;
  for (const auto& p : loaded.layout.patches)
    if (p.sign < 0) {
      ++cutouts;
      CHECK(p.x2 - p.x1 == doctest::Approx(40e-6));
      CHECK(p.y2 - p.y1 == doctest::Approx(40e-6));
    }
  CHECK(cutouts == 1);
}

TEST_CASE("layout parsing: syntax errors are collected, geometry errors typed") {
  // Two syntax problems on separate lines -> one config_error naming both.
  const std::string bad_syntax =
      "patch A 0 um 10 um 0 um\n"       // line 1: missing a coordinate
      "rf 100 V\n";                      // line 2: missing frequency
  try {
    layout_io::parse_layout(bad_syntax, "bad.lay");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.lay") != std::string::npos);
    CHECK(msg.find("line 1") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }

  // Parse succeeds but the geometry is degenerate -> structural_error.
  const std::string degenerate =
      "patch A 10 um 10 um 0 um 5 um\n"
      "rf 100 V 25 MHz\n";
  CHECK_THROWS_AS(layout_io::parse_layout(degenerate, "degen.lay"), structural_error);

  // DC voltage on an unknown electrode.
  const std::string unknown_dc =
      "patch RF 0 um 10 um 0 um 5 um\n"
      "rf 100 V 25 MHz\n"
      "dc Nope 1 V\n";
  CHECK_THROWS_AS(layout_io::parse_layout(unknown_dc, "dc.lay"), config_error);
}

TEST_CASE("sha256: known answers") {
  using manifest::sha256_hex;
  CHECK(sha256_hex(std::string{}) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string{"abc"}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string{"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"}) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  // One million 'a' (streaming/block edge coverage).
  CHECK(sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("atomic writes and file hashing") {
  TempDir tmp;
  const std::string path = tmp.file("out.txt");
  const std::string digest = manifest::write_file_atomic(path, "hello\n");
  CHECK(slurp(path) == "hello\n");
  CHECK(digest == manifest::sha256_file(path));
  CHECK(digest == manifest::sha256_hex(std::string("hello\n")));

  // Overwrite is atomic and leaves no temp files behind.
  manifest::write_file_atomic(path, "second\n");
  CHECK(slurp(path) == "second\n");
  int entries = 0;
  for (auto& _ : fs::directory_iterator(tmp.path)) {
    (void)_;
    ++entries;
  }
  CHECK(entries == 1);

  CHECK_THROWS_AS(manifest::sha256_file(tmp.file("missing.txt")), io_error);
}

TEST_CASE("run manifest: append creates and extends a JSON array") {
  TempDir tmp;
  const std::string mpath = tmp.file("manifest.json");

  manifest::RunRecord r1;
  r1.command = "trap solve --layout canonical.lay";
  r1.seed = 7;
  r1.config_sha256 = manifest::sha256_hex(std::string("cfg"));
  r1.outputs.push_back({"a.csv", manifest::sha256_hex(std::string("data"))});
  r1.timestamp = "2000-01-01T00:00:00Z";
  manifest::append_run(mpath, r1);

  manifest::RunRecord r2;
  r2.command = "spectrum synth";
  r2.seed = 8;
  r2.timestamp = "2000-01-01T00:00:01Z";
  manifest::append_run(mpath, r2);

  const std::string text = slurp(mpath);
  CHECK(text.find("trap solve") != std::string::npos);
  CHECK(text.find("spectrum synth") != std::string::npos);
  CHECK(text.find("a.csv") != std::string::npos);
  // Well-formed JSON array of two objects.
  CHECK(text.front() == '[');
  size_t runs = 0, pos = 0;
  while ((pos = text.find("\"command\"", pos)) != std::string::npos) {
    ++runs;
    pos += 9;
  }
  CHECK(runs == 2);

  // Every record carries the writing tool's version.
  CHECK(text.find("tool_version") != std::string::npos);
  CHECK(text.find(std::string(manifest::kToolVersion)) != std::string::npos);

  // A corrupt manifest is an io_error, not silent data loss.
  manifest::write_file_atomic(mpath, "{not json");
  CHECK_THROWS_AS(manifest::append_run(mpath, r2), io_error);
}

TEST_CASE("run manifest: pinned clock makes appends reproducible") {
  TempDir tmp;
  manifest::RunRecord r;
  r.command = "spectrum synth";
  r.seed = 7;
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const std::string m1 = tmp.file("m1.json"), m2 = tmp.file("m2.json");
  manifest::append_run(m1, r);
  manifest::append_run(m2, r);
  unsetenv("SOURCE_DATE_EPOCH");
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(m1).find("2023-11-14T22:13:20Z") != std::string::npos);
}

TEST_CASE("csv: write/read roundtrip preserves doubles exactly") {
  TempDir tmp;
  csv::Table t;
  t.header = {"detuning_hz", "signal"};
  t.rows = {{-1.5e8, 0.123456789012345678}, {0.0, 1e-300}, {7.25e8, -42.0}};
  const std::string path = tmp.file("t.csv");
  csv::write(path, t);

  const csv::Table back = csv::read(path);
  REQUIRE(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i)
    for (size_t j = 0; j < t.rows[i].size(); ++j)
      CHECK(back.rows[i][j] == t.rows[i][j]);  // bit-exact via %.17g

  CHECK(back.column("signal") == 1);
  CHECK(back.column("nope") == -1);
  CHECK(back.col("detuning_hz").size() == 3);

  CHECK_THROWS_AS(csv::read(tmp.file("absent.csv")), io_error);
  CHECK_THROWS_AS(csv::parse("a,b\n1\n", "ragged.csv"), io_error);
  CHECK_THROWS_AS(csv::parse("a,b\n1,x\n", "nonnum.csv"), io_error);
}
