#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "purcell/budget.hpp"
#include "purcell/dynamics.hpp"
#include "purcell/errors.hpp"
#include "purcell/io.hpp"
#include "purcell/netmodel.hpp"
#include "purcell/spectra.hpp"
#include "purcell/units.hpp"

namespace purcell::cli {

namespace fs = std::filesystem;

namespace {

// Relative output paths land under $PURCELL_OUTPUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (const char* dir = std::getenv("PURCELL_OUTPUT_DIR"); dir && *dir && path.is_relative()) return fs::path(dir) / path;
  return path;
}

fs::path sibling(const fs::path& base, const std::string& suffix, const std::string& ext) {
  return base.parent_path() / (base.stem().string() + suffix + ext);
}

void require_file(const std::string& p, const char* what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " '" + p + "' does not exist");
}

// Collects every output, then writes them together once all computation succeeded.
struct Outputs {
  std::vector<std::pair<fs::path, std::string>> files;
  void add(const fs::path& p, std::string content) { files.emplace_back(p, std::move(content)); }
  void commit() const {
    for (const auto& [p, c] : files) io::write_atomic(p, c);
  }
};

struct Common {
  std::string dev, output;
  int n_transmon = 4, n_fock = 3;
};

LindbladModel load_model(const Common& c) {
  require_file(c.dev, "device file");
  Truncation tr;
  tr.n_transmon = c.n_transmon;
  tr.n_fock = c.n_fock;
  return build_model(io::device_from_json(io::read_json_file(c.dev)), tr);
}

void print_warnings(const std::vector<std::string>& w, std::ostream& err) {
  for (const auto& s : w) err << "warning: " << s << "\n";
}

int level_of(const std::string& s) {
  if (s == "g") return 0;
  if (s == "e") return 1;
  if (s == "f") return 2;
  throw UsageError("initial state must be g, e or f");
}

// ---- spectrum ----------------------------------------------------------------

struct SpectrumArgs {
  std::string net, dev, band = "7.9e9:8.7e9", output = "gamma.csv";
  int points = 601;
};

void cmd_spectrum(const SpectrumArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.net, "network file");
  require_file(a.dev, "device file");
  if (a.points < 2) throw UsageError("--points must be at least 2");
  const NetworkSpec net = io::network_from_json(io::read_json_file(a.net));
  const DeviceParams dev = io::device_from_json(io::read_json_file(a.dev));
  if (const auto w = net.validate(); !w.empty()) err << "warning: " << w << "\n";
  const auto [lo, hi] = io::parse_band(a.band);
  const SuppressionSpectrum s = suppression_spectrum(net, dev, lo, hi, a.points);

  const fs::path base = output_path(a.output);
  Outputs o;
  o.add(base, io::series_csv(s.freqs, s.gamma_ex));
  o.add(sibling(base, "_single_mode", ".csv"), io::series_csv(s.freqs, s.single_mode));
  o.add(sibling(base, "_suppression", ".csv"), io::series_csv(s.freqs, s.ratio));
  o.commit();
  std::size_t invalid = 0;
  for (bool v : s.valid) invalid += !v;
  out << "wrote " << a.points << " points to " << base.string() << " (+ _single_mode, _suppression)\n";
  if (invalid) out << invalid << " points near the resonator or at network poles have no suppression ratio\n";
}

// ---- fit ---------------------------------------------------------------------

struct FitArgs {
  std::string trace, mode, dev, output = "fit.json";
  double r_th = std::numeric_limits<double>::quiet_NaN();
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  require_file(a.trace, "trace file");
  const ComplexTrace trace = io::trace_from_csv(io::read_text_file(a.trace));
  FitResult fit;
  if (a.mode == "resonator-ratio") {
    fit = fit_resonator_ratio(trace);
  } else if (a.mode == "qubit-reflection") {
    double r_th = a.r_th;
    if (std::isnan(r_th)) {
      if (a.dev.empty()) throw UsageError("qubit-reflection needs --r-th or --dev");
      require_file(a.dev, "device file");
      r_th = io::device_from_json(io::read_json_file(a.dev)).r_th;
    }
    fit = fit_qubit_reflection(trace, r_th);
  } else {
    throw UsageError("--mode must be resonator-ratio or qubit-reflection");
  }
  Outputs o;
  o.add(output_path(a.output), io::to_json(fit, a.mode).dump(2) + "\n");
  o.commit();
  out << std::left << std::setw(12) << "parameter" << std::setw(22) << "value"
      << "sigma\n";
  for (const auto& p : fit.params)
    out << std::setw(12) << p.name << std::setw(22) << io::sci(p.value) << io::sci(p.sigma) << "\n";
  out << "residual rms " << io::sci(fit.residual_rms) << (fit.identifiable ? "" : " (not identifiable)") << "\n";
}

// ---- simulate ----------------------------------------------------------------

struct RabiArgs {
  Common c;
  std::string transition = "ge", durations = "0:200e-9:81";
  double amplitude = 20e6;
  double carrier = 0.0;
};

void cmd_rabi(const RabiArgs& a, std::ostream& out, std::ostream& err) {
  const LindbladModel m = load_model(a.c);
  print_warnings(m.warnings, err);
  const Transition tr = a.transition == "ge" ? Transition::ge
                        : a.transition == "ef" ? Transition::ef
                                               : throw UsageError("--transition must be ge or ef");
  const double carrier = a.carrier > 0.0 ? a.carrier
                         : tr == Transition::ge ? dressed_frequency(m, 0, 0, 1, 0)
                                                : dressed_frequency(m, 1, 0, 2, 0);
  const RabiResult r = simulate_rabi(m, carrier, a.amplitude, io::parse_grid(a.durations), tr);
  Outputs o;
  o.add(output_path(a.c.output), io::rabi_csv(r));
  o.commit();
  out << "rabi frequency " << io::sci(r.rabi_freq) << " Hz, decay time " << io::sci(r.decay_time) << " s\n";
}

struct StarkArgs {
  Common c;
  double carrier = 0.0, amplitude = 20e6, power = 1.0;
};

void cmd_stark(const StarkArgs& a, std::ostream& out, std::ostream& err) {
  const LindbladModel m = load_model(a.c);
  print_warnings(m.warnings, err);
  if (!(a.carrier > 0.0)) throw UsageError("--carrier is required");
  const StarkResult s = simulate_stark_ramsey(m, a.carrier, a.amplitude, a.power);
  print_warnings(s.warnings, err);
  io::json j{{"schema_version", io::kSchemaVersion},
             {"stark_shift", s.stark_shift},
             {"shift_per_watt", s.shift_per_watt},
             {"precondition_ratio", s.precondition_ratio},
             {"warnings", s.warnings}};
  Outputs o;
  o.add(output_path(a.c.output), j.dump(2) + "\n");
  o.commit();
  out << "stark shift " << io::sci(s.stark_shift) << " Hz\n";
}

struct ReadoutArgs {
  Common c;
  double duration = 120e-9, photons = 35.0, carrier = 0.0;
  double noise_sigma = -1.0, target_separation = 0.003;
  long shots = 20000;
  std::optional<std::uint64_t> seed;
  double lowpass = 0.0;
};

void cmd_readout(const ReadoutArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.seed) throw UsageError("--seed is required for readout sampling");
  require_file(a.c.dev, "device file");
  const DeviceParams dev = io::device_from_json(io::read_json_file(a.c.dev));
  Truncation tr;
  tr.n_transmon = a.c.n_transmon;
  tr.n_fock = a.c.n_fock;
  const LindbladModel m = build_model(dev, tr);
  print_warnings(m.warnings, err);
  const double fg = dressed_frequency(m, 0, 0, 0, 1), fe = dressed_frequency(m, 1, 0, 1, 1);
  const double carrier = a.carrier > 0.0 ? a.carrier : 0.5 * (fg + fe);
  ProbeSpec probe;
  probe.carrier = carrier;
  probe.duration = a.duration;
  probe.amplitude = probe_amplitude_for_photons(m, a.photons, carrier - fg);
  probe.record_until = a.duration;
  const SimResult wg = simulate_probe_reflection(m, probe, QubitBranch::g);
  const SimResult we = simulate_probe_reflection(m, probe, QubitBranch::e);

  double sigma = a.noise_sigma;
  if (sigma < 0.0) {
    // noise giving the requested Gaussian separation error: erfc(x/sqrt2)/2 = target
    const auto noiseless = readout_discrimination(wg, we, 0.0, 1, *a.seed);
    double w2 = 0.0;
    for (double w : noiseless.weights) w2 += w * w;
    double lo = 0.0, hi = 40.0;
    for (int k = 0; k < 200; ++k) {
      const double x = 0.5 * (lo + hi);
      (0.5 * std::erfc(x / std::numbers::sqrt2) > a.target_separation ? lo : hi) = x;
    }
    sigma = std::sqrt(w2) / (2.0 * 0.5 * (lo + hi));
  }
  DiscriminationOptions opt;
  opt.lowpass_bandwidth = a.lowpass;
  const Discrimination d = readout_discrimination(wg, we, sigma, a.shots, *a.seed, opt);

  // Repeated-readout statistics: separation errors from the histograms,
  // state flips from T1 decay during the probe split evenly early/late.
  const double decay = a.duration / dev.t1;
  ErrorModel em;
  em.eps_sep_ge = d.p_e_given_g;
  em.eps_sep_eg = d.p_g_given_e;
  const double up = 0.5 * decay * dev.r_th / (1.0 + dev.r_th), down = 0.5 * decay / (1.0 + dev.r_th);
  em.eps_flip1_ge = em.eps_flip2_ge = Interval::point(up);
  em.eps_flip1_eg = em.eps_flip2_eg = Interval::point(down);
  em.eps_pi_gg = em.eps_pi_ee = Interval::point(0.0);
  const ReadoutStats stats = synthesize_stats(em, dev.r_th);

  const fs::path base = output_path(a.c.output);
  Outputs o;
  o.add(base, io::histogram_csv(d));
  o.add(sibling(base, "_stats", ".json"), io::to_json(stats).dump(2) + "\n");
  io::json summary = io::to_json(d);
  summary["schema_version"] = io::kSchemaVersion;
  summary["noise_sigma"] = sigma;
  summary["shots"] = a.shots;
  summary["seed"] = *a.seed;
  summary["carrier"] = carrier;
  summary["probe_amplitude"] = probe.amplitude;
  o.add(sibling(base, "_summary", ".json"), summary.dump(2) + "\n");
  o.add(sibling(base, "_waveform_g", ".csv"), io::sim_result_csv(wg));
  o.add(sibling(base, "_waveform_e", ".csv"), io::sim_result_csv(we));
  o.commit();
  out << "P(e|g) " << d.p_e_given_g << ", P(g|e) " << d.p_g_given_e << ", gaussian prediction " << d.theory_error
      << "\n";
}

struct ResetArgs {
  Common c;
  std::string init = "f", durations = "0:200e-9:41";
  double f0g1_amplitude = 1.6e9, e0f0_amplitude = 10e6;
};

void cmd_reset(const ResetArgs& a, std::ostream& out, std::ostream& err) {
  const LindbladModel m = load_model(a.c);
  const int level = level_of(a.init);
  const auto [d1, d2] = calibrate_reset_drives(m, a.f0g1_amplitude, a.e0f0_amplitude);
  const ResetCurve curve = simulate_reset(m, d1, d2, io::parse_grid(a.durations), level);
  print_warnings(curve.warnings, err);
  Outputs o;
  o.add(output_path(a.c.output), io::reset_csv(curve));
  o.commit();
  out << "f0-g1 tone " << io::sci(d1.frequency) << " Hz, e0-f0 tone " << io::sci(d2.frequency) << " Hz; final residual "
      << curve.residual.back() << "\n";
}

struct EvolveArgs {
  Common c;
  std::string sequence, init = "g", times = "0:100e-9:101";
};

void cmd_evolve(const EvolveArgs& a, std::ostream& out, std::ostream& err) {
  const LindbladModel m = load_model(a.c);
  print_warnings(m.warnings, err);
  require_file(a.sequence, "sequence file");
  const PulseSequence seq = io::sequence_from_json(io::read_json_file(a.sequence));
  const SimResult r = evolve_lindblad(m, seq, dressed_density(m, level_of(a.init)), io::parse_grid(a.times));
  print_warnings(r.warnings, err);
  Outputs o;
  o.add(output_path(a.c.output), io::sim_result_csv(r));
  o.commit();
  out << "integrated " << r.times.size() << " samples in " << r.steps << " steps\n";
}

// ---- budget ------------------------------------------------------------------

struct BudgetArgs {
  std::string stats, dev, output = "budget.json";
  double tau = 120e-9, slack = 1e-4;
};

void cmd_budget(const BudgetArgs& a, std::ostream& out) {
  require_file(a.stats, "stats file");
  require_file(a.dev, "device file");
  const ReadoutStats stats = io::load_stats(a.stats);
  const DeviceParams dev = io::device_from_json(io::read_json_file(a.dev));
  const BudgetReport r = assemble_budget(stats, dev, a.tau, a.slack);
  const std::string tables = budget_tables(r);
  const fs::path base = output_path(a.output);
  Outputs o;
  o.add(base, io::to_json(r).dump(2) + "\n");
  o.add(sibling(base, "_tables", ".txt"), tables);
  o.commit();
  out << tables;
}

// ---- optimize-coupler ----------------------------------------------------------

struct CouplerArgs {
  std::string net, dev, output = "network_optimized.json";
  double target = 0.0;
  int grid = 2001;
};

void cmd_optimize(const CouplerArgs& a, std::ostream& out) {
  require_file(a.net, "network file");
  NetworkSpec net = io::network_from_json(io::read_json_file(a.net));
  double target = a.target;
  if (!(target > 0.0)) {
    if (a.dev.empty()) throw UsageError("give --target or --dev");
    require_file(a.dev, "device file");
    target = io::device_from_json(io::read_json_file(a.dev)).omega_eg;
  }
  const double w = to_angular(target);
  const double before = external_coupling_rate(net, w);
  net.coupler_position = optimize_coupler_position(net, w, a.grid);
  const double after = external_coupling_rate(net, w);
  Outputs o;
  o.add(output_path(a.output), io::to_json(net).dump(2) + "\n");
  o.commit();
  out << "coupler position " << io::sci(net.coupler_position) << " m from the open end (line length "
      << io::sci(net.total_length()) << " m)\n"
      << "Gamma_ex/2pi at target: " << io::sci(to_hz(before)) << " Hz -> " << io::sci(to_hz(after)) << " Hz\n";
}

void add_common(CLI::App* s, Common& c, const std::string& default_out) {
  c.output = default_out;
  s->add_option("--dev", c.dev, "device parameters JSON")->required();
  s->add_option("-o,--output", c.output, "output file");
  s->add_option("--n-transmon", c.n_transmon, "transmon levels kept")->check(CLI::Range(2, 12));
  s->add_option("--n-fock", c.n_fock, "cavity Fock states kept")->check(CLI::Range(1, 60));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Purcell-filtered readout toolkit: network spectra, fits, dynamics and error budgets", "purcell"};
  app.require_subcommand(1);

  SpectrumArgs spec;
  auto* s_spec = app.add_subcommand("spectrum", "external coupling rate, single-mode rate and suppression ratio");
  s_spec->add_option("--net", spec.net, "network JSON")->required();
  s_spec->add_option("--dev", spec.dev, "device parameters JSON")->required();
  s_spec->add_option("--band", spec.band, "lo:hi in Hz");
  s_spec->add_option("--points", spec.points, "grid points");
  s_spec->add_option("-o,--output", spec.output, "Gamma_ex CSV; siblings get _single_mode and _suppression");

  FitArgs fit;
  auto* s_fit = app.add_subcommand("fit", "fit a reflection trace");
  s_fit->add_option("--trace", fit.trace, "CSV freq_hz,re,im")->required();
  s_fit->add_option("--mode", fit.mode, "resonator-ratio or qubit-reflection")->required();
  s_fit->add_option("--r-th", fit.r_th, "thermal excitation ratio (qubit-reflection)");
  s_fit->add_option("--dev", fit.dev, "device JSON supplying r_th");
  s_fit->add_option("-o,--output", fit.output, "FitResult JSON");

  auto* s_sim = app.add_subcommand("simulate", "time-domain scenarios");
  s_sim->require_subcommand(1);
  RabiArgs rabi;
  auto* s_rabi = s_sim->add_subcommand("rabi", "square-pulse Rabi oscillation");
  add_common(s_rabi, rabi.c, "rabi.csv");
  s_rabi->add_option("--transition", rabi.transition, "ge or ef");
  s_rabi->add_option("--amplitude", rabi.amplitude, "drive amplitude (Hz)");
  s_rabi->add_option("--carrier", rabi.carrier, "drive frequency (Hz); default the dressed transition");
  s_rabi->add_option("--durations", rabi.durations, "start:stop:count (s)");

  StarkArgs stark;
  auto* s_stark = s_sim->add_subcommand("stark", "ac Stark shift by Ramsey phase tracking");
  add_common(s_stark, stark.c, "stark.json");
  s_stark->add_option("--carrier", stark.carrier, "drive frequency (Hz)")->required();
  s_stark->add_option("--amplitude", stark.amplitude, "drive amplitude (Hz)");
  s_stark->add_option("--power", stark.power, "drive power for the per-watt coefficient (W)");

  ReadoutArgs ro;
  auto* s_ro = s_sim->add_subcommand("readout", "dispersive readout waveforms, histograms and P(y|x)");
  add_common(s_ro, ro.c, "readout_hist.csv");
  s_ro->add_option("--seed", ro.seed, "noise seed");
  s_ro->add_option("--shots", ro.shots, "shots per branch")->check(CLI::PositiveNumber);
  s_ro->add_option("--duration", ro.duration, "probe length (s)");
  s_ro->add_option("--photons", ro.photons, "steady-state photon number");
  s_ro->add_option("--carrier", ro.carrier, "probe frequency (Hz); default midway between the branches");
  s_ro->add_option("--noise-sigma", ro.noise_sigma, "per-sample noise; default from --target-separation");
  s_ro->add_option("--target-separation", ro.target_separation, "Gaussian separation error for the default noise");
  s_ro->add_option("--lowpass", ro.lowpass, "amplifier bandwidth (Hz), 0 = none");

  ResetArgs reset;
  auto* s_reset = s_sim->add_subcommand("reset", "two-tone unconditional reset");
  add_common(s_reset, reset.c, "reset.csv");
  s_reset->add_option("--init", reset.init, "g, e or f");
  s_reset->add_option("--durations", reset.durations, "start:stop:count (s)");
  s_reset->add_option("--f0g1-amplitude", reset.f0g1_amplitude, "f0-g1 tone amplitude (Hz)");
  s_reset->add_option("--e0f0-amplitude", reset.e0f0_amplitude, "e0-f0 tone amplitude (Hz)");

  EvolveArgs ev;
  auto* s_ev = s_sim->add_subcommand("evolve", "master equation under a pulse-sequence JSON");
  add_common(s_ev, ev.c, "evolve.csv");
  s_ev->add_option("--sequence", ev.sequence, "pulse sequence JSON")->required();
  s_ev->add_option("--init", ev.init, "g, e or f");
  s_ev->add_option("--times", ev.times, "start:stop:count (s)");

  BudgetArgs bud;
  auto* s_bud = app.add_subcommand("budget", "readout error budget from repeated-readout statistics");
  s_bud->add_option("--stats", bud.stats, "ReadoutStats JSON or CSV")->required();
  s_bud->add_option("--dev", bud.dev, "device parameters JSON")->required();
  s_bud->add_option("--tau", bud.tau, "readout duration (s)");
  s_bud->add_option("--slack", bud.slack, "equality slack of the flip-error system");
  s_bud->add_option("-o,--output", bud.output, "BudgetReport JSON; tables go to stdout and <stem>_tables.txt");

  CouplerArgs cp;
  auto* s_cp = app.add_subcommand("optimize-coupler", "place the output tap at the Gamma_ex notch");
  s_cp->add_option("--net", cp.net, "network JSON")->required();
  s_cp->add_option("--dev", cp.dev, "device JSON (target defaults to its omega_eg)");
  s_cp->add_option("--target", cp.target, "qubit frequency to protect (Hz)");
  s_cp->add_option("--grid", cp.grid, "coarse grid points")->check(CLI::Range(3, 1000000));
  s_cp->add_option("-o,--output", cp.output, "network JSON with the new coupler position");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s_spec) cmd_spectrum(spec, out, err);
    else if (*s_fit) cmd_fit(fit, out);
    else if (*s_rabi) cmd_rabi(rabi, out, err);
    else if (*s_stark) cmd_stark(stark, out, err);
    else if (*s_ro) cmd_readout(ro, out, err);
    else if (*s_reset) cmd_reset(reset, out, err);
    else if (*s_ev) cmd_evolve(ev, out, err);
    else if (*s_bud) cmd_budget(bud, out);
    else if (*s_cp) cmd_optimize(cp, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FitError& e) {
    err << "error: " << e.what() << " (last residual " << e.last_residual() << ")\n";
    return kNumeric;
  } catch (const InconsistencyError& e) {
    err << "error: " << e.what() << "\n";
    return kInconsistent;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace purcell::cli
