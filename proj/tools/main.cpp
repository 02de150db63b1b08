// trapsim: command-line front end. One subcommand per invocation; every run
// writes its outputs plus a manifest entry (command, seed, config hash,
// per-output sha256, constants snapshot) into the output directory.
//
// Exit codes, one class per error family:
//   0 ok   2 config   3 domain   4 convergence   5 structural   6 io
//   7 precondition   1 anything else

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trapsim/beamline.hpp"
#include "trapsim/config.hpp"
#include "trapsim/constants.hpp"
#include "trapsim/cooldyn.hpp"
#include "trapsim/crystal.hpp"
#include "trapsim/csv.hpp"
#include "trapsim/errors.hpp"
#include "trapsim/layout_io.hpp"
#include "trapsim/lmfit.hpp"
#include "trapsim/manifest.hpp"
#include "trapsim/rng.hpp"
#include "trapsim/spectra.hpp"
#include "trapsim/species.hpp"
#include "trapsim/trapmodel.hpp"
#include "trapsim/voigt.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trapsim;

constexpr double kTwoPi = 2.0 * M_PI;

// Independent RNG streams so subcommands never share a sequence.
constexpr unsigned kStreamSynth = 0;
constexpr unsigned kStreamLoad = 1;
constexpr unsigned kStreamSympathetic = 2;
constexpr unsigned kStreamInjection = 3;
constexpr unsigned kStreamCapture = 4;

struct Ctx {
  config::Config conf;
  std::string config_path;  // empty = built-in defaults only
  std::string config_sha;
  std::string config_dir;
  std::string out_dir = "out";
  unsigned long long seed = 1;
  bool strict = true;
  std::string command;
};

// Every key the config schema knows. Strict mode rejects anything else.
const std::set<std::string>& schema() {
  static const std::set<std::string> kSchema = {
      "run.schema_version", "run.scenario", "run.seed", "run.out_dir",
      "trap.layout", "trap.species", "trap.guess_height",
      "distortion.height", "distortion.size_min", "distortion.size_max", "distortion.size_step",
      "oven.temperature",
      "beam.source_diameter", "beam.aperture_side", "beam.distance",
      "laser423.power", "laser423.beam_diameter", "laser423.crossing_angle",
      "spectrum.f_min", "spectrum.f_max", "spectrum.points", "spectrum.noise_fraction",
      "spectrum.target", "spectrum.park_detuning",
      "modes.chain", "modes.fx", "modes.fy", "modes.fz",
      "coverage.coolant", "coverage.n_coolant", "coverage.target", "coverage.gamma0",
      "coverage.heating_rate", "coverage.scan_cap",
      "sim.coolant", "sim.target", "sim.saturation", "sim.detuning", "sim.steps",
      "sim.protocol_steps", "sim.record_every", "sim.initial_temperature",
      "sim.threshold_temperature", "sim.heating", "sim.samples", "sim.injection_depth_ratio",
  };
  return kSchema;
}

// Input paths resolve against the working directory first, then against the
// directory holding the config file, so shipped configs can reference
// repository files with relative paths.
std::string resolve_input(const Ctx& ctx, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || fs::exists(p)) return p;
  if (!ctx.config_dir.empty()) {
    const fs::path cand = fs::path(ctx.config_dir) / p;
    if (fs::exists(cand)) return cand.lexically_normal().string();
  }
  return p;
}

void validate_config(const Ctx& ctx) {
  std::vector<std::string> errs;
  if (ctx.strict)
    for (const auto& k : ctx.conf.all_keys())
      if (!schema().count(k)) errs.push_back("unknown key '" + k + "'");
  if (const auto v = ctx.conf.number_or("run.schema_version"); v && *v != 1.0)
    errs.push_back("unsupported schema_version " + std::to_string(*v));
  if (const auto lay = ctx.conf.text_or("trap.layout"))
    if (!fs::exists(resolve_input(ctx, *lay)))
      errs.push_back("trap.layout file not found: " + *lay);
  if (!errs.empty()) {
    std::string msg = ctx.config_path + ": " + std::to_string(errs.size()) + " config error" +
                      (errs.size() > 1 ? "s" : "") + ":";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw config_error(msg);
  }
}

double q_or(const Ctx& ctx, const std::string& key, const std::string& dim, double dflt) {
  return ctx.conf.quantity_or(key, dim).value_or(dflt);
}
double n_or(const Ctx& ctx, const std::string& key, double dflt) {
  return ctx.conf.number_or(key).value_or(dflt);
}
std::string t_or(const Ctx& ctx, const std::string& key, const std::string& dflt) {
  return ctx.conf.text_or(key).value_or(dflt);
}

Species species_from(const std::string& name) {
  if (name == "Ca40" || name == "40") return ca40();
  if (name == "Ca44" || name == "44") return ca44();
  throw config_error("unknown species '" + name + "' (supported: Ca40, Ca44)");
}

std::vector<Species> parse_chain_spec(const std::string& spec) {
  std::vector<Species> out;
  std::string tok;
  for (size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ',') {
      const size_t a = tok.find_first_not_of(" \t");
      if (a != std::string::npos) {
        const size_t b = tok.find_last_not_of(" \t");
        out.push_back(species_from(tok.substr(a, b - a + 1)));
      }
      tok.clear();
    } else {
      tok += spec[i];
    }
  }
  if (out.empty()) throw config_error("empty chain spec '" + spec + "'");
  return out;
}

std::string layout_path(const Ctx& ctx, const std::string& override_path) {
  const std::string p =
      override_path.empty() ? t_or(ctx, "trap.layout", "data/canonical.lay") : override_path;
  return resolve_input(ctx, p);
}

json constants_snapshot() {
  json arr = json::array();
  for (const auto& c : constants::registry())
    arr.push_back({{"name", std::string(c.name)},
                   {"value", c.value},
                   {"unit", std::string(c.unit)},
                   {"provenance", std::string(c.provenance)},
                   {"note", std::string(c.note)}});
  return arr;
}

// Write all outputs atomically into the output directory and append one
// manifest record covering them.
void emit(const Ctx& ctx, std::vector<std::pair<std::string, std::string>> files) {
  manifest::RunRecord rec;
  rec.command = ctx.command;
  rec.seed = ctx.seed;
  rec.config_path = ctx.config_path;
  rec.config_sha256 = ctx.config_sha;
  files.emplace_back("constants.json", constants_snapshot().dump(2) + "\n");
  for (const auto& [name, content] : files) {
    const std::string path = (fs::path(ctx.out_dir) / name).string();
    rec.outputs.emplace_back(path, manifest::write_file_atomic(path, content));
  }
  manifest::append_run((fs::path(ctx.out_dir) / "manifest.json").string(), rec);
  for (const auto& [path, sha] : rec.outputs) std::printf("  %s  %.12s…\n", path.c_str(), sha.c_str());
}

// Secular frequencies for the chain model: explicit [modes] fx/fy/fz if
// given, otherwise solved from the electrode layout. The weakest axis becomes
// the chain axis.
crystal::HarmonicTrap trap_frequencies(const Ctx& ctx, const Species& ref) {
  crystal::HarmonicTrap t;
  t.ref_mass = ref.mass;
  t.charge = ref.charge;
  const auto fx = ctx.conf.quantity_or("modes.fx", "Hz");
  const auto fy = ctx.conf.quantity_or("modes.fy", "Hz");
  const auto fz = ctx.conf.quantity_or("modes.fz", "Hz");
  if (fx && fy && fz) {
    t.omega_x = kTwoPi * *fx;
    t.omega_y = kTwoPi * *fy;
    t.omega_z = kTwoPi * *fz;
    return t;
  }
  if (fx || fy || fz)
    throw config_error("modes.fx/fy/fz must be given together (or none, to solve the layout)");
  const auto ll = layout_io::load_layout(layout_path(ctx, ""));
  const double zg = q_or(ctx, "trap.guess_height", "m", 200e-6);
  const auto sec = trapmodel::secular_analysis(ll.layout, ll.drive, ref, {0, 0, zg});
  t.omega_z = sec.omega(0);  // weakest: the chain axis
  t.omega_x = sec.omega(1);
  t.omega_y = sec.omega(2);
  return t;
}

spectra::LaserParams probe_laser(const Ctx& ctx) {
  spectra::LaserParams L;
  L.wavelength = constants::lambda_423;
  L.power = q_or(ctx, "laser423.power", "W", constants::probe_power_423);
  L.beam_diameter = q_or(ctx, "laser423.beam_diameter", "m", constants::probe_diameter_423);
  L.linewidth_hz = constants::linewidth_423;
  return L;
}

beamline::BeamGeometry beam_geometry(const Ctx& ctx) {
  beamline::BeamGeometry g;
  g.source_radius = 0.5 * q_or(ctx, "beam.source_diameter", "m", constants::beam_source_diameter);
  g.aperture_half = 0.5 * q_or(ctx, "beam.aperture_side", "m", constants::aperture_side);
  g.distance = q_or(ctx, "beam.distance", "m", constants::oven_distance);
  g.validate();
  return g;
}

spectra::BeamConditions beam_conditions(const Ctx& ctx) {
  const double T = q_or(ctx, "oven.temperature", "K", constants::oven_temperature);
  spectra::BeamConditions bc;
  bc.speed = beamline::beam_most_probable_speed(ca40().mass, T);
  bc.divergence_full = beam_geometry(ctx).full_divergence();
  bc.crossing_angle = q_or(ctx, "laser423.crossing_angle", "rad", constants::probe_crossing_423);
  return bc;
}

std::string placement_string(const std::vector<bool>& mask) {
  std::string s;
  for (bool b : mask) s += b ? 'C' : '.';
  return s;
}

// ---------------------------------------------------------------- trap solve

int run_trap_solve(Ctx& ctx, const std::string& layout_override) {
  const std::string path = layout_path(ctx, layout_override);
  const auto ll = layout_io::load_layout(path);
  const Species sp = species_from(t_or(ctx, "trap.species", "Ca40"));
  const double zg = q_or(ctx, "trap.guess_height", "m", 200e-6);
  const auto sec = trapmodel::secular_analysis(ll.layout, ll.drive, sp, {0, 0, zg});

  json j;
  j["layout"] = path;
  j["species"] = sp.name;
  j["rf_amplitude_v"] = ll.drive.rf_voltage;
  j["rf_frequency_mhz"] = ll.drive.rf_omega / (kTwoPi * 1e6);
  j["dc_voltages_v"] = ll.drive.dc_voltages;
  j["center_um"] = {sec.center.x() * 1e6, sec.center.y() * 1e6, sec.center.z() * 1e6};
  j["ion_height_um"] = sec.center.z() * 1e6;
  json freqs = json::array();
  for (int k = 0; k < 3; ++k) freqs.push_back(sec.omega(k) / (kTwoPi * 1e6));
  j["secular_frequencies_mhz"] = freqs;
  json axes = json::array();
  for (int k = 0; k < 3; ++k)
    axes.push_back({sec.axes(0, k), sec.axes(1, k), sec.axes(2, k)});
  j["principal_axes"] = axes;
  j["xz_rotation_deg"] = sec.xz_rotation_deg;

  std::printf("ion height   %.2f um\n", sec.center.z() * 1e6);
  std::printf("frequencies  %.4f / %.4f / %.4f MHz\n", sec.omega(0) / (kTwoPi * 1e6),
              sec.omega(1) / (kTwoPi * 1e6), sec.omega(2) / (kTwoPi * 1e6));
  std::printf("xz rotation  %.2f deg\n", sec.xz_rotation_deg);
  emit(ctx, {{"trap.json", j.dump(2) + "\n"}});
  return 0;
}

// ------------------------------------------------------- trap distortion-scan

int run_trap_scan(Ctx& ctx, const std::string& layout_override) {
  const std::string path = layout_path(ctx, layout_override);
  const auto ll = layout_io::load_layout(path);
  const double height = q_or(ctx, "distortion.height", "m", 200e-6);
  const double s_min = q_or(ctx, "distortion.size_min", "m", 20e-6);
  const double s_max = q_or(ctx, "distortion.size_max", "m", 100e-6);
  const double s_step = q_or(ctx, "distortion.size_step", "m", 20e-6);
  if (!(s_step > 0) || s_max < s_min)
    throw config_error("distortion scan needs size_step > 0 and size_max >= size_min");

  std::vector<double> sizes;
  for (double s = s_min; s <= s_max * (1 + 1e-12); s += s_step) sizes.push_back(s);
  const auto scan = trapmodel::hole_distortion_scan(ll.layout, ll.drive, sizes, height);

  csv::Table t;
  t.header = {"hole_um", "distortion_v"};
  std::printf("hole [um]   distortion [V]   (at %.0f um height)\n", height * 1e6);
  for (const auto& [side, dv] : scan) {
    t.rows.push_back({side * 1e6, dv});
    std::printf("%8.1f    %.6e\n", side * 1e6, dv);
  }
  emit(ctx, {{"distortion.csv", t.to_string()}});
  return 0;
}

// ------------------------------------------------------------ beam divergence

int run_beam_divergence(Ctx& ctx) {
  const auto g = beam_geometry(ctx);
  const double T = q_or(ctx, "oven.temperature", "K", constants::oven_temperature);
  const double deg = 180.0 / M_PI;

  const double theta_point = beamline::divergence_angle(0.0, g.aperture_half, g.distance);
  const double theta_full = g.full_divergence();
  const double r_back = beamline::source_radius_for_divergence(theta_full, g.aperture_half,
                                                               g.distance);

  json j;
  j["aperture_side_um"] = 2 * g.aperture_half * 1e6;
  j["distance_mm"] = g.distance * 1e3;
  j["source_diameter_um"] = 2 * g.source_radius * 1e6;
  j["point_source_divergence_deg"] = theta_point * deg;
  j["full_divergence_deg"] = theta_full * deg;
  j["inverted_source_diameter_um"] = 2 * r_back * 1e6;
  j["oven"] = {{"temperature_k", T}, {"vapor_pressure_pa", beamline::vapor_pressure(T)}};
  for (const Species& sp : {ca40(), ca44()})
    j["speeds_mps"][sp.name] = {
        {"most_probable", beamline::beam_most_probable_speed(sp.mass, T)},
        {"mean", beamline::beam_mean_speed(sp.mass, T)}};

  std::printf("aperture-only divergence  %.4f deg\n", theta_point * deg);
  std::printf("full divergence           %.4f deg (source %.0f um)\n", theta_full * deg,
              2 * g.source_radius * 1e6);
  std::printf("inverted source diameter  %.2f um\n", 2 * r_back * 1e6);
  std::printf("most probable speed Ca40  %.1f m/s at %.0f K\n",
              beamline::beam_most_probable_speed(ca40().mass, T), T);
  emit(ctx, {{"beam.json", j.dump(2) + "\n"}});
  return 0;
}

// -------------------------------------------------------------- spectrum synth

int run_spectrum_synth(Ctx& ctx) {
  const auto L = probe_laser(ctx);
  const auto bc = beam_conditions(ctx);
  const auto table = IsotopeTable::natural_ca();
  const auto model = spectra::natural_spectrum(table, L, bc);

  const double f_min = q_or(ctx, "spectrum.f_min", "Hz", -400e6);
  const double f_max = q_or(ctx, "spectrum.f_max", "Hz", 1200e6);
  const int n = static_cast<int>(n_or(ctx, "spectrum.points", 321));
  const double frac = n_or(ctx, "spectrum.noise_fraction", 0.02);

  double peak = 0;
  for (int i = 0; i < n; ++i) {
    const double f = f_min + (f_max - f_min) * i / (n - 1);
    peak = std::max(peak, model.evaluate(f));
  }
  const double noise = frac * peak;

  Philox rng(ctx.seed, kStreamSynth);
  const auto s = spectra::synthesize(model, f_min, f_max, n, noise, rng);

  csv::Table t;
  t.header = {"detuning_hz", "signal"};
  for (size_t i = 0; i < s.detuning.size(); ++i) t.rows.push_back({s.detuning[i], s.signal[i]});

  json truth;
  truth["gaussian_fwhm_mhz"] = model.gaussian_fwhm / 1e6;
  truth["lorentzian_fwhm_mhz"] = model.lorentzian_fwhm / 1e6;
  truth["baseline"] = model.baseline;
  truth["noise_rms"] = noise;
  truth["seed"] = ctx.seed;
  truth["lines"] = json::array();
  for (const auto& ln : model.lines)
    truth["lines"].push_back(
        {{"isotope", ln.isotope}, {"center_mhz", ln.center / 1e6}, {"amplitude", ln.amplitude}});

  std::printf("synthesized %d points, G %.2f MHz, L %.2f MHz, noise rms %.3g\n", n,
              model.gaussian_fwhm / 1e6, model.lorentzian_fwhm / 1e6, noise);
  emit(ctx, {{"spectrum.csv", t.to_string()}, {"spectrum_model.json", truth.dump(2) + "\n"}});
  return 0;
}

// ---------------------------------------------------------------- spectrum fit

int run_spectrum_fit(Ctx& ctx, const std::string& data_path, bool fix_g, bool fix_l) {
  const std::string path =
      resolve_input(ctx, data_path.empty() ? "data/sample_scan.csv" : data_path);
  const auto table = csv::read(path);
  const auto x = table.col("detuning_hz");
  const auto y = table.col("signal");

  lmfit::VoigtFitOptions opts;
  opts.fix_gaussian = fix_g;
  opts.fix_lorentzian = fix_l;
  const auto fit = lmfit::fit_voigt(x, y, opts);
  if (!fit.converged) throw convergence_error("voigt fit did not converge on " + path);

  json j;
  j["data"] = path;
  j["center_mhz"] = fit.center / 1e6;
  j["center_err_mhz"] = fit.center_err / 1e6;
  j["lorentzian_fwhm_mhz"] = fit.lorentzian_fwhm / 1e6;
  j["lorentzian_err_mhz"] = fit.lorentzian_err / 1e6;
  j["gaussian_fwhm_mhz"] = fit.gaussian_fwhm / 1e6;
  j["gaussian_err_mhz"] = fit.gaussian_err / 1e6;
  j["voigt_fwhm_mhz"] = voigt::voigt_fwhm(fit.gaussian_fwhm, fit.lorentzian_fwhm) / 1e6;
  j["amplitude"] = fit.amplitude;
  j["baseline"] = fit.baseline;
  j["chi2"] = fit.chi2;

  std::printf("center  %.2f +- %.2f MHz\n", fit.center / 1e6, fit.center_err / 1e6);
  std::printf("L fwhm  %.2f +- %.2f MHz\n", fit.lorentzian_fwhm / 1e6, fit.lorentzian_err / 1e6);
  std::printf("G fwhm  %.2f +- %.2f MHz\n", fit.gaussian_fwhm / 1e6, fit.gaussian_err / 1e6);
  emit(ctx, {{"fit.json", j.dump(2) + "\n"}});
  return 0;
}

// ----------------------------------------------------------------------- modes

int run_modes(Ctx& ctx, const std::string& chain_override) {
  const Species ref = species_from(t_or(ctx, "trap.species", "Ca40"));
  const auto trap = trap_frequencies(ctx, ref);
  const std::string spec =
      chain_override.empty() ? t_or(ctx, "modes.chain", "44,40,40,40,40,44") : chain_override;

  crystal::Chain chain;
  chain.trap = trap;
  chain.ions = parse_chain_spec(spec);
  const auto pos = crystal::equilibrium_positions(chain);

  json j;
  j["chain"] = spec;
  j["trap_frequencies_mhz"] = {trap.omega_x / (kTwoPi * 1e6), trap.omega_y / (kTwoPi * 1e6),
                               trap.omega_z / (kTwoPi * 1e6)};
  json pos_um = json::array();
  for (double z : pos) pos_um.push_back(z * 1e6);
  j["positions_um"] = pos_um;

  static const char* axis_name[] = {"x", "y", "z"};
  const crystal::Axis axes[] = {crystal::Axis::X, crystal::Axis::Y, crystal::Axis::Z};
  for (int a = 0; a < 3; ++a) {
    const auto ms = crystal::normal_modes(chain, axes[a]);
    json jb;
    json fr = json::array();
    for (long m = 0; m < ms.frequencies.size(); ++m)
      fr.push_back(ms.frequencies(m) / (kTwoPi * 1e6));
    jb["frequencies_mhz"] = fr;
    json vecs = json::array();  // rows = modes (ascending), entries = ions
    for (long m = 0; m < ms.vectors.cols(); ++m) {
      json row = json::array();
      for (long i = 0; i < ms.vectors.rows(); ++i) row.push_back(ms.vectors(i, m));
      vecs.push_back(row);
    }
    jb["vectors"] = vecs;
    j["modes"][axis_name[a]] = jb;

    std::printf("axis %s:", axis_name[a]);
    for (long m = 0; m < ms.frequencies.size(); ++m)
      std::printf(" %.4f", ms.frequencies(m) / (kTwoPi * 1e6));
    std::printf(" MHz\n");
  }
  emit(ctx, {{"modes.json", j.dump(2) + "\n"}});
  return 0;
}

// -------------------------------------------------------------------- coverage

int run_coverage(Ctx& ctx) {
  const Species ref = species_from(t_or(ctx, "trap.species", "Ca40"));
  const auto trap = trap_frequencies(ctx, ref);
  const Species coolant = species_from(t_or(ctx, "coverage.coolant", "Ca44"));
  const Species target = species_from(t_or(ctx, "coverage.target", "Ca40"));
  const int k = static_cast<int>(n_or(ctx, "coverage.n_coolant", 2));
  const double gamma0 = q_or(ctx, "coverage.gamma0", "Hz", constants::coverage_gamma0);
  const double heating = q_or(ctx, "coverage.heating_rate", "Hz", constants::coverage_heating_rate);
  const int cap = static_cast<int>(n_or(ctx, "coverage.scan_cap", 12));

  const auto capacity = crystal::max_coolable_chain(trap, coolant, k, target, gamma0, heating, cap);

  json j;
  j["coolant"] = coolant.name;
  j["n_coolant"] = k;
  j["target"] = target.name;
  j["gamma0_per_s"] = gamma0;
  j["heating_rate_per_s"] = heating;
  j["n_max"] = capacity.n_max;
  j["limited_by"] = capacity.limited_by;
  j["per_n"] = json::array();
  std::printf("targets  chain  min damping [1/s]  coolable  placement\n");
  for (const auto& e : capacity.per_n) {
    j["per_n"].push_back({{"n_targets", e.n_targets},
                          {"chain_size", e.chain_size},
                          {"min_damping_per_s", e.min_damping},
                          {"coolable", e.coolable},
                          {"placement", placement_string(e.placement)}});
    std::printf("%5d   %5d   %14.1f      %s     %s\n", e.n_targets, e.chain_size, e.min_damping,
                e.coolable ? "yes" : " no", placement_string(e.placement).c_str());
  }
  std::printf("largest coolable chain: %d targets + %d coolants (limit: %s)\n", capacity.n_max, k,
              capacity.limited_by.c_str());

  // Per-mode table of the best coolable chain.
  for (const auto& e : capacity.per_n) {
    if (e.n_targets != capacity.n_max) continue;
    crystal::Chain chain;
    chain.trap = trap;
    for (bool b : e.placement) chain.ions.push_back(b ? coolant : target);
    static const char* axis_name[] = {"x", "y", "z"};
    const crystal::Axis axes[] = {crystal::Axis::X, crystal::Axis::Y, crystal::Axis::Z};
    std::printf("\nbest chain %s, per-mode damping [1/s]:\n", placement_string(e.placement).c_str());
    for (int a = 0; a < 3; ++a) {
      const auto ms = crystal::normal_modes(chain, axes[a]);
      const auto damping = crystal::per_mode_coverage(ms, e.placement, gamma0);
      json jm = json::array();
      for (size_t m = 0; m < damping.size(); ++m)
        jm.push_back({{"frequency_mhz", ms.frequencies(static_cast<long>(m)) / (kTwoPi * 1e6)},
                      {"damping_per_s", damping[m]},
                      {"coolable", damping[m] > heating}});
      j["best_chain"]["placement"] = placement_string(e.placement);
      j["best_chain"]["modes"][axis_name[a]] = jm;
      std::printf("  axis %s:", axis_name[a]);
      for (double d : damping) std::printf(" %8.1f", d);
      std::printf("\n");
    }
  }
  emit(ctx, {{"coverage.json", j.dump(2) + "\n"}});
  return 0;
}

// --------------------------------------------------------------- simulate load

int run_sim_load(Ctx& ctx) {
  const auto g = beam_geometry(ctx);
  const double T = q_or(ctx, "oven.temperature", "K", constants::oven_temperature);
  const int n = static_cast<int>(n_or(ctx, "sim.samples", 20000));
  if (n < 1) throw config_error("sim.samples must be >= 1");

  const beamline::BeamSampler sampler(g, ca40().mass, T);
  Philox rng(ctx.seed, kStreamLoad);
  csv::Table t;
  t.header = {"speed_mps"};
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = sampler.draw(rng).velocity.norm();
    t.rows.push_back({v});
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(0.0, sum2 / n - mean * mean));

  const auto L = probe_laser(ctx);
  const auto bc = beam_conditions(ctx);
  const auto table = IsotopeTable::natural_ca();
  const auto model = spectra::natural_spectrum(table, L, bc);
  const std::string target = t_or(ctx, "spectrum.target", "Ca44");
  const double park = q_or(ctx, "spectrum.park_detuning", "Hz", constants::shift423_ca44);
  const auto sel = spectra::loading_selectivity(table, model, park, target);
  const double ratio = spectra::loading_time_ratio(table, model, park, target, "Ca40");

  json j;
  j["samples"] = n;
  j["oven_temperature_k"] = T;
  j["speed_mps"] = {{"mean_sample", mean},
                    {"stddev_sample", sd},
                    {"mean_analytic", beamline::beam_mean_speed(ca40().mass, T)},
                    {"most_probable_analytic", beamline::beam_most_probable_speed(ca40().mass, T)}};
  j["selectivity"] = json::object();
  for (size_t i = 0; i < sel.isotope.size(); ++i) j["selectivity"][sel.isotope[i]] = sel.probability[i];
  j["park_detuning_mhz"] = park / 1e6;
  j["target"] = target;
  j["target_probability"] = sel.target_probability;
  j["loading_time_ratio_vs_ca40"] = ratio;

  std::printf("beam speed  mean %.1f m/s (analytic %.1f), sd %.1f, n=%d\n", mean,
              beamline::beam_mean_speed(ca40().mass, T), sd, n);
  std::printf("P(first ion is %s at %+.0f MHz) = %.4f\n", target.c_str(), park / 1e6,
              sel.target_probability);
  std::printf("loading-time ratio %s vs Ca40 = %.2f\n", target.c_str(), ratio);
  emit(ctx, {{"load.json", j.dump(2) + "\n"}, {"speeds.csv", t.to_string()}});
  return 0;
}

// -------------------------------------------------------- simulate sympathetic

cooldyn::CoolingLaser cooling_laser(const Ctx& ctx, const std::string& addressed) {
  cooldyn::CoolingLaser laser;
  laser.k_hat = Eigen::Vector3d(1, 1, 1).normalized();  // cools all three axes
  laser.wavelength = constants::lambda_397;
  laser.linewidth_hz = constants::linewidth_397;
  laser.saturation = n_or(ctx, "sim.saturation", 1.0);
  laser.detuning = q_or(ctx, "sim.detuning", "Hz", -0.5 * constants::linewidth_397);
  laser.addressed = addressed;
  return laser;
}

json protocol_json(const cooldyn::ProtocolResult& r) {
  return {{"cooled", r.cooled},
          {"time_to_threshold_us", r.cooled ? r.time_to_threshold * 1e6 : 0.0},
          {"final_temperature_mk", r.final_temperature * 1e3},
          {"total_scattered_photons", r.total_scattered},
          {"coolant_survived", r.coolant_survived},
          {"coolant_final_temperature_mk", r.coolant_final_temperature * 1e3}};
}

int run_sim_sympathetic(Ctx& ctx) {
  const Species coolant = species_from(t_or(ctx, "sim.coolant", "Ca40"));
  const Species target = species_from(t_or(ctx, "sim.target", "Ca44"));
  const auto trap = trap_frequencies(ctx, coolant);
  const auto laser = cooling_laser(ctx, coolant.name);
  const cooldyn::HeatingModel heating{q_or(ctx, "sim.heating", "K/s", 0.0)};
  const double T0 = q_or(ctx, "sim.initial_temperature", "K", 50e-3);
  const double thr = q_or(ctx, "sim.threshold_temperature", "K", 5e-3);

  cooldyn::SimOptions opts;
  opts.steps = static_cast<long>(n_or(ctx, "sim.steps", 400000));
  opts.record_every = static_cast<long>(n_or(ctx, "sim.record_every",
                                             std::max(1.0, opts.steps / 4096.0)));
  opts.seed = ctx.seed;
  opts.stream = kStreamSympathetic;

  const auto r = cooldyn::sympathetic_capture(trap, coolant, target, T0, laser, heating, thr, opts);

  json j = protocol_json(r);
  j["coolant"] = coolant.name;
  j["target"] = target.name;
  j["initial_temperature_mk"] = T0 * 1e3;
  j["threshold_temperature_mk"] = thr * 1e3;
  j["saturation"] = laser.saturation;
  j["detuning_mhz"] = laser.detuning / 1e6;
  j["steps"] = opts.steps;
  j["trap_frequencies_mhz"] = {trap.omega_x / (kTwoPi * 1e6), trap.omega_y / (kTwoPi * 1e6),
                               trap.omega_z / (kTwoPi * 1e6)};

  if (r.cooled)
    std::printf("cooled %.0f mK -> %.1f mK in %.1f us (final %.3f mK, %.0f photons)\n", T0 * 1e3,
                thr * 1e3, r.time_to_threshold * 1e6, r.final_temperature * 1e3,
                r.total_scattered);
  else
    std::printf("did not reach %.1f mK (final %.3f mK after %.0f photons)\n", thr * 1e3,
                r.final_temperature * 1e3, r.total_scattered);
  emit(ctx, {{"sympathetic.json", j.dump(2) + "\n"}});
  return 0;
}

// ----------------------------------------------------------- simulate protocol
// Three stages: load a coolant, inject and sympathetically capture the hot
// isotope with the beams still tuned to the coolant, then identify the dark
// ion by retuning the cooling beam by the isotope shift and comparing
// scattering rates. A failed stage aborts the protocol with its index.

int run_sim_protocol(Ctx& ctx) {
  const Species coolant = species_from(t_or(ctx, "sim.coolant", "Ca40"));
  const Species target = species_from(t_or(ctx, "sim.target", "Ca44"));
  const double T_oven = q_or(ctx, "oven.temperature", "K", constants::oven_temperature);
  const auto laser = cooling_laser(ctx, coolant.name);
  json j;

  // Stage 1: coolant loaded and Doppler-cooled (starts crystallized at the
  // trap center; the laser keeps it near the Doppler limit).
  const auto trap = trap_frequencies(ctx, coolant);
  j["stage1_load"] = {{"coolant", coolant.name},
                      {"doppler_limit_mk", cooldyn::doppler_limit(laser.linewidth_hz) * 1e3}};
  std::printf("stage 1  %s loaded, Doppler limit %.3f mK\n", coolant.name.c_str(),
              cooldyn::doppler_limit(laser.linewidth_hz) * 1e3);

  // Stage 2: a beam atom carries far more kinetic energy than the trap can
  // hold, so the injected energy is set as a fraction of the vertical trap
  // depth; the fraction is the swept knob of the capture study.
  const auto ll = layout_io::load_layout(layout_path(ctx, ""));
  const double zg = q_or(ctx, "trap.guess_height", "m", 200e-6);
  const auto sec = trapmodel::secular_analysis(ll.layout, ll.drive, target, {0, 0, zg});
  const double depth = trapmodel::vertical_trap_depth(ll.layout, ll.drive, target, sec.center);

  const auto g = beam_geometry(ctx);
  const beamline::BeamSampler sampler(g, target.mass, T_oven);
  Philox rng(ctx.seed, kStreamInjection);
  const double v_beam = sampler.draw(rng).velocity.norm();
  const double e_beam = 0.5 * target.mass * v_beam * v_beam;

  const double ratio = n_or(ctx, "sim.injection_depth_ratio", 5e-3);
  if (!(ratio > 0)) throw config_error("sim.injection_depth_ratio must be > 0");
  const double e_inject = ratio * depth;
  const double T_init = 2.0 * e_inject / (3.0 * constants::k_boltzmann);
  const double thr = q_or(ctx, "sim.threshold_temperature", "K", 5e-3);
  const cooldyn::HeatingModel heating{q_or(ctx, "sim.heating", "K/s", 0.0)};

  cooldyn::SimOptions opts;
  opts.steps = static_cast<long>(n_or(ctx, "sim.protocol_steps", 200000));
  opts.record_every = static_cast<long>(std::max(1.0, opts.steps / 4096.0));
  opts.seed = ctx.seed;
  opts.stream = kStreamCapture;

  const auto r = cooldyn::sympathetic_capture(trap, coolant, target, T_init, laser, heating, thr,
                                              opts);

  j["stage2_capture"] = protocol_json(r);
  j["stage2_capture"]["target"] = target.name;
  j["stage2_capture"]["trap_depth_mev"] = depth / constants::elementary_charge * 1e3;
  j["stage2_capture"]["beam_energy_over_depth"] = e_beam / depth;
  j["stage2_capture"]["injection_depth_ratio"] = ratio;
  j["stage2_capture"]["injected_temperature_mk"] = T_init * 1e3;
  j["stage2_capture"]["threshold_temperature_mk"] = thr * 1e3;
  j["stage2_capture"]["steps"] = opts.steps;

  std::printf("stage 2  depth %.1f meV; raw beam atom carries %.1fx that\n",
              depth / constants::elementary_charge * 1e3, e_beam / depth);
  std::printf("         injected %s at %.2f mK (ratio %.1e)\n", target.name.c_str(), T_init * 1e3,
              ratio);
  if (!r.cooled) {
    emit(ctx, {{"protocol.json", j.dump(2) + "\n"}});
    throw precondition_error("protocol aborted at stage 2: hot ion not captured (final " +
                             std::to_string(r.final_temperature * 1e3) + " mK, coolant " +
                             (r.coolant_survived ? "survived" : "overheated") + ")");
  }
  std::printf("         captured in %.1f us, coolant %s\n", r.time_to_threshold * 1e6,
              r.coolant_survived ? "survived" : "overheated");

  // Stage 3: identification. With the beam still tuned to the coolant the
  // captured ion is dark; retuned by the isotope shift it lights up.
  crystal::Chain chain;
  chain.trap = trap;
  chain.ions = {coolant, target};
  const auto table = IsotopeTable::natural_ca();
  const double shift = [&] {
    double s = 0;
    const auto& iso = table.find(target.name);
    const auto& ref = table.find(coolant.name);
    s = iso.shift_397 - ref.shift_397;
    return s;
  }();

  // Retuning by the isotope shift lands the beam at the same detuning from
  // the target's resonance, which is exactly what re-addressing expresses
  // (detunings are quoted against the addressed isotope).
  const cooldyn::Simulator probe_coolant(chain, laser, heating, table);
  auto retuned = laser;
  retuned.addressed = target.name;
  const cooldyn::Simulator probe_target(chain, retuned, heating, table);

  const Eigen::Vector3d at_rest = Eigen::Vector3d::Zero();
  const double dark = probe_coolant.scattering_rate(at_rest, target, target.name);
  const double bright = probe_target.scattering_rate(at_rest, target, target.name);
  const double coolant_on = probe_coolant.scattering_rate(at_rest, coolant, coolant.name);
  const bool identified = bright > 100.0 * std::max(dark, 1.0);

  j["stage3_identify"] = {{"isotope_shift_mhz", shift / 1e6},
                          {"target_rate_coolant_tuning_per_s", dark},
                          {"target_rate_retuned_per_s", bright},
                          {"coolant_rate_coolant_tuning_per_s", coolant_on},
                          {"identified", identified}};
  std::printf("stage 3  %s rate %.2e/s dark vs %.2e/s retuned (+%.0f MHz): %s\n",
              target.name.c_str(), dark, bright, shift / 1e6,
              identified ? "identified" : "ambiguous");
  if (!identified) {
    emit(ctx, {{"protocol.json", j.dump(2) + "\n"}});
    throw precondition_error("protocol aborted at stage 3: captured ion not identified");
  }
  j["completed"] = true;
  emit(ctx, {{"protocol.json", j.dump(2) + "\n"}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapsim: through-hole loading and sympathetic cooling toolkit"};
  app.require_subcommand(1);

  std::string config_opt, profile = "desk", out_opt, layout_opt, data_opt, chain_opt;
  unsigned long long seed_opt = 0;
  bool lenient = false, strict_flag = false, fix_g = false, fix_l = false;

  app.add_option("--config", config_opt, "config file (overrides --profile)");
  app.add_option("--profile", profile, "shipped profile name")
      ->check(CLI::IsMember({"desk", "overnight"}));
  app.add_option("--seed", seed_opt, "master seed (overrides config)");
  app.add_option("--out", out_opt, "output directory (overrides config)");
  app.add_flag("--strict", strict_flag, "reject unknown config keys (default)");
  app.add_flag("--lenient", lenient, "ignore unknown config keys");

  auto* trap_cmd = app.add_subcommand("trap", "electrode-layout electrostatics");
  trap_cmd->require_subcommand(1);
  auto* trap_solve = trap_cmd->add_subcommand("solve", "trap center, frequencies, principal axes");
  trap_solve->add_option("--layout", layout_opt, "layout file (overrides config)");
  auto* trap_scan =
      trap_cmd->add_subcommand("distortion-scan", "hole-size sweep of the DC distortion");
  trap_scan->add_option("--layout", layout_opt, "layout file (overrides config)");

  auto* beam_cmd = app.add_subcommand("beam", "effusive-beam geometry and speeds");
  auto* beam_div = beam_cmd->add_subcommand("divergence", "divergence angles and inversion");

  auto* spec_cmd = app.add_subcommand("spectrum", "fluorescence spectra");
  spec_cmd->require_subcommand(1);
  auto* spec_synth = spec_cmd->add_subcommand("synth", "synthesize a noisy isotope scan");
  auto* spec_fit = spec_cmd->add_subcommand("fit", "Voigt fit of a scan CSV");
  spec_fit->add_option("--data", data_opt, "CSV with detuning_hz and signal columns");
  spec_fit->add_flag("--fix-gaussian", fix_g, "pin the Gaussian width at zero");
  spec_fit->add_flag("--fix-lorentzian", fix_l, "pin the Lorentzian width at zero");

  auto* modes_cmd = app.add_subcommand("modes", "chain equilibrium and normal modes");
  modes_cmd->add_option("--chain", chain_opt, "comma-separated isotopes, e.g. 44,40,40");

  auto* cov_cmd = app.add_subcommand("coverage", "sympathetic-cooling capacity scan");

  auto* sim_cmd = app.add_subcommand("simulate", "stochastic dynamics");
  sim_cmd->require_subcommand(1);
  auto* sim_load = sim_cmd->add_subcommand("load", "beam sampling and isotope selectivity");
  auto* sim_symp = sim_cmd->add_subcommand("sympathetic", "hot ion next to a cooled coolant");
  auto* sim_proto = sim_cmd->add_subcommand("protocol", "injection draw + sympathetic capture");

  for (auto* sub : {trap_cmd, beam_cmd, spec_cmd, modes_cmd, cov_cmd, sim_cmd}) sub->fallthrough();
  for (auto* sub : {trap_solve, trap_scan, beam_div, spec_synth, spec_fit, sim_load, sim_symp,
                    sim_proto})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Ctx ctx;
    ctx.strict = !lenient;
    (void)strict_flag;

    // Config resolution: --config, else $TRAPSIM_CONFIG_DIR/<profile>.cfg,
    // else ./configs/<profile>.cfg, else built-in defaults.
    std::string path = config_opt;
    if (path.empty()) {
      const char* dir = std::getenv("TRAPSIM_CONFIG_DIR");
      const fs::path base = (dir && *dir) ? fs::path(dir) : fs::path("configs");
      const fs::path cand = base / (profile + ".cfg");
      if (fs::exists(cand)) path = cand.string();
    }
    if (!path.empty()) {
      ctx.conf = config::Config::load(path);
      ctx.config_path = path;
      ctx.config_sha = manifest::sha256_file(path);
      ctx.config_dir = fs::path(path).has_parent_path()
                           ? fs::path(path).parent_path().string()
                           : std::string(".");
      validate_config(ctx);
    }

    ctx.seed = app.count("--seed") ? seed_opt
                                   : static_cast<unsigned long long>(n_or(ctx, "run.seed", 1));
    ctx.out_dir = !out_opt.empty() ? out_opt : t_or(ctx, "run.out_dir", "out");
    std::string cmdline;
    for (int i = 1; i < argc; ++i) cmdline += std::string(i > 1 ? " " : "") + argv[i];
    ctx.command = cmdline;

    if (trap_solve->parsed()) return run_trap_solve(ctx, layout_opt);
    if (trap_scan->parsed()) return run_trap_scan(ctx, layout_opt);
    if (beam_div->parsed()) return run_beam_divergence(ctx);
    if (spec_synth->parsed()) return run_spectrum_synth(ctx);
    if (spec_fit->parsed()) return run_spectrum_fit(ctx, data_opt, fix_g, fix_l);
    if (modes_cmd->parsed()) return run_modes(ctx, chain_opt);
    if (cov_cmd->parsed()) return run_coverage(ctx);
    if (sim_load->parsed()) return run_sim_load(ctx);
    if (sim_symp->parsed()) return run_sim_sympathetic(ctx);
    if (sim_proto->parsed()) return run_sim_protocol(ctx);
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const trapsim::domain_error& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 3;
  } catch (const convergence_error& e) {
    std::fprintf(stderr, "convergence error: %s\n", e.what());
    return 4;
  } catch (const structural_error& e) {
    std::fprintf(stderr, "structural error: %s\n", e.what());
    return 5;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 6;
  } catch (const precondition_error& e) {
    std::fprintf(stderr, "precondition error: %s\n", e.what());
    return 7;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
