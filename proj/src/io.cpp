#include "purcell/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "purcell/errors.hpp"

namespace purcell::io {

namespace fs = std::filesystem;

namespace {

// Tracks which keys of an object were read so leftovers can be rejected.
class Strict {
 public:
  Strict(const json& j, std::string what, bool versioned = true) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw UsageError(what_ + ": expected a JSON object");
    if (versioned) {
      const int v = integer("schema_version");
      if (v != kSchemaVersion)
        throw UsageError(what_ + ": unsupported schema_version " + std::to_string(v) + " (expected " +
                         std::to_string(kSchemaVersion) + ")");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw UsageError(what_ + ": missing field '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw UsageError(what_ + ": field '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw UsageError(what_ + ": field '" + key + "' must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw UsageError(what_ + ": field '" + key + "' must be an integer");
    return v.get<int>();
  }

  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw UsageError(what_ + ": field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw UsageError(what_ + ": unknown field '" + key + "'");
  }

 private:
  const json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

json versioned() { return json{{"schema_version", kSchemaVersion}}; }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(x)) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw UsageError(context + ": '" + s + "' is not a finite number");
  }
}

json interval_json(const Interval& v) { return json::array({v.lo, v.hi}); }

const char* const kStatsFields[] = {"p_a_e_given_g", "p_a_g_given_e", "p_b_e_given_g",
                                    "p_b_g_given_e", "p_c_g_given_g", "p_c_e_given_e",
                                    "r_a",           "r_b",           "r_c"};

double* stats_field(ReadoutStats& s, const std::string& name) {
  double* fields[] = {&s.p_a_e_given_g, &s.p_a_g_given_e, &s.p_b_e_given_g, &s.p_b_g_given_e, &s.p_c_g_given_g,
                      &s.p_c_e_given_e, &s.r_a,           &s.r_b,           &s.r_c};
  for (int k = 0; k < 9; ++k)
    if (name == kStatsFields[k]) return fields[k];
  return nullptr;
}

}  // namespace

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": invalid JSON: " + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw UsageError("write to '" + tmp.string() + "' failed");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw UsageError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string sci(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.11e", x);
  return buf;
}

// ---- network and device ------------------------------------------------------

NetworkSpec network_from_json(const json& j) {
  Strict r(j, "network");
  NetworkSpec net;
  const json& segs = r.raw("resonator_segments");
  if (!segs.is_array()) throw UsageError("network: resonator_segments must be an array");
  for (const auto& s : segs) {
    Strict rs(s, "resonator segment", false);
    TLSegment seg;
    seg.z0 = rs.number("z0");
    seg.length = rs.number("length");
    seg.phase_velocity = rs.number("phase_velocity");
    seg.loss = rs.number("loss", 0.0);
    rs.finish();
    net.resonator_segments.push_back(seg);
  }
  net.coupler_position = r.number("coupler_position");
  net.coupler_capacitance = r.number("coupler_capacitance");
  if (r.has("output_impedance")) {
    const json& z = r.raw("output_impedance");
    if (z.is_string() && z.get<std::string>() == "inf")
      net.output_impedance = std::numeric_limits<double>::infinity();
    else
      net.output_impedance = r.number("output_impedance");
  }
  net.qubit_coupling_capacitance = r.number("qubit_coupling_capacitance");
  net.transmon_capacitance = r.number("transmon_capacitance");
  net.josephson_energy = r.number("josephson_energy");
  if (r.has("phase_matrix_element")) net.phase_matrix_element = r.number("phase_matrix_element");
  if (r.has("scaling")) {
    const std::string mode = r.text("scaling");
    if (mode == "fixed_phi")
      net.scaling = ScalingMode::fixed_phi;
    else if (mode == "fixed_ec")
      net.scaling = ScalingMode::fixed_ec;
    else
      throw UsageError("network: scaling must be fixed_phi or fixed_ec");
  }
  r.finish();
  net.validate();
  return net;
}

json to_json(const NetworkSpec& net) {
  json j = versioned();
  j["resonator_segments"] = json::array();
  for (const auto& s : net.resonator_segments)
    j["resonator_segments"].push_back(
        {{"z0", s.z0}, {"length", s.length}, {"phase_velocity", s.phase_velocity}, {"loss", s.loss}});
  j["coupler_position"] = net.coupler_position;
  j["coupler_capacitance"] = net.coupler_capacitance;
  if (std::isinf(net.output_impedance))
    j["output_impedance"] = "inf";
  else
    j["output_impedance"] = net.output_impedance;
  j["qubit_coupling_capacitance"] = net.qubit_coupling_capacitance;
  j["transmon_capacitance"] = net.transmon_capacitance;
  j["josephson_energy"] = net.josephson_energy;
  if (net.phase_matrix_element) j["phase_matrix_element"] = *net.phase_matrix_element;
  j["scaling"] = net.scaling == ScalingMode::fixed_phi ? "fixed_phi" : "fixed_ec";
  return j;
}

DeviceParams device_from_json(const json& j) {
  Strict r(j, "device");
  DeviceParams d;
  d.omega_eg = r.number("omega_eg");
  d.omega_fe = r.number("omega_fe");
  d.omega_r = r.number("omega_r");
  d.omega_f0g1 = r.number("omega_f0g1");
  d.kappa_ex = r.number("kappa_ex");
  d.two_chi = r.number("two_chi");
  d.g = r.number("g");
  d.t1 = r.number("t1");
  d.t2_star = r.number("t2_star");
  d.t2_echo = r.number("t2_echo");
  d.t1f = r.number("t1f");
  d.r_th = r.number("r_th");
  d.gamma_ex_q = r.number("gamma_ex_q");
  d.gamma2 = r.number("gamma2");
  d.saturation = r.number("saturation");
  r.finish();
  d.validate();
  return d;
}

json to_json(const DeviceParams& d) {
  json j = versioned();
  j["omega_eg"] = d.omega_eg;
  j["omega_fe"] = d.omega_fe;
  j["omega_r"] = d.omega_r;
  j["omega_f0g1"] = d.omega_f0g1;
  j["kappa_ex"] = d.kappa_ex;
  j["two_chi"] = d.two_chi;
  j["g"] = d.g;
  j["t1"] = d.t1;
  j["t2_star"] = d.t2_star;
  j["t2_echo"] = d.t2_echo;
  j["t1f"] = d.t1f;
  j["r_th"] = d.r_th;
  j["gamma_ex_q"] = d.gamma_ex_q;
  j["gamma2"] = d.gamma2;
  j["saturation"] = d.saturation;
  return j;
}

// ---- readout statistics ------------------------------------------------------

ReadoutStats stats_from_json(const json& j) {
  Strict r(j, "readout stats");
  ReadoutStats s;
  for (const char* name : kStatsFields) *stats_field(s, name) = r.number(name);
  r.finish();
  s.validate();
  return s;
}

json to_json(const ReadoutStats& s) {
  json j = versioned();
  ReadoutStats copy = s;
  for (const char* name : kStatsFields) j[name] = *stats_field(copy, name);
  return j;
}

ReadoutStats stats_from_csv(const std::string& text) {
  const auto rows = csv_rows(text);
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "name" || rows[0][1] != "value")
    throw UsageError("readout stats CSV needs the header 'name,value'");
  ReadoutStats s;
  std::set<std::string> seen;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].size() != 2) throw UsageError("readout stats CSV: row " + std::to_string(k + 1) + " needs 2 cells");
    double* f = stats_field(s, rows[k][0]);
    if (!f) throw UsageError("readout stats CSV: unknown quantity '" + rows[k][0] + "'");
    if (!seen.insert(rows[k][0]).second) throw UsageError("readout stats CSV: duplicate '" + rows[k][0] + "'");
    *f = parse_number(rows[k][1], "readout stats CSV");
  }
  for (const char* name : kStatsFields)
    if (!seen.count(name)) throw UsageError(std::string("readout stats CSV: missing '") + name + "'");
  s.validate();
  return s;
}

ReadoutStats load_stats(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return stats_from_csv(read_text_file(path));
  if (ext == ".json") return stats_from_json(read_json_file(path));
  throw UsageError("readout stats must be a .json or .csv file");
}

// ---- pulses ------------------------------------------------------------------

PulseSequence sequence_from_json(const json& j) {
  Strict r(j, "pulse sequence");
  PulseSequence seq;
  const json& pulses = r.raw("pulses");
  if (!pulses.is_array()) throw UsageError("pulse sequence: pulses must be an array");
  for (const auto& pj : pulses) {
    Strict p(pj, "pulse", false);
    Pulse pulse;
    pulse.carrier = p.number("carrier");
    pulse.amplitude = p.number("amplitude");
    pulse.start = p.number("start");
    pulse.duration = p.number("duration");
    const std::string env = p.has("envelope") ? p.text("envelope") : "square";
    if (env == "square")
      pulse.envelope = Envelope::square;
    else if (env == "gaussian")
      pulse.envelope = Envelope::gaussian;
    else if (env == "flat_top")
      pulse.envelope = Envelope::flat_top;
    else
      throw UsageError("pulse: envelope must be square, gaussian or flat_top");
    const std::string target = p.has("target") ? p.text("target") : "transmon";
    if (target == "transmon")
      pulse.target = DriveTarget::transmon;
    else if (target == "cavity")
      pulse.target = DriveTarget::cavity;
    else
      throw UsageError("pulse: target must be transmon or cavity");
    if (p.has("shape")) pulse.shape = p.number("shape");
    p.finish();
    seq.pulses.push_back(pulse);
  }
  r.finish();
  seq.validate();
  return seq;
}

// ---- results -----------------------------------------------------------------

json to_json(const FitResult& fit, const std::string& mode) {
  json j = versioned();
  j["mode"] = mode;
  j["parameters"] = json::object();
  for (const auto& p : fit.params) j["parameters"][p.name] = {{"value", p.value}, {"sigma", p.sigma}};
  j["nuisance"] = {{"scale", fit.nuisance.scale},       {"scale_sigma", fit.nuisance.scale_sigma},
                   {"phase", fit.nuisance.phase},       {"phase_sigma", fit.nuisance.phase_sigma},
                   {"delay", fit.nuisance.delay},       {"delay_sigma", fit.nuisance.delay_sigma}};
  j["residual_rms"] = fit.residual_rms;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["identifiable"] = fit.identifiable;
  return j;
}

json to_json(const ErrorModel& m) {
  return {{"eps_sep_ge", m.eps_sep_ge},
          {"eps_sep_eg", m.eps_sep_eg},
          {"eps_flip1_ge", interval_json(m.eps_flip1_ge)},
          {"eps_flip1_eg", interval_json(m.eps_flip1_eg)},
          {"eps_flip2_ge", interval_json(m.eps_flip2_ge)},
          {"eps_flip2_eg", interval_json(m.eps_flip2_eg)},
          {"eps_pi_gg", interval_json(m.eps_pi_gg)},
          {"eps_pi_ee", interval_json(m.eps_pi_ee)}};
}

json to_json(const BudgetReport& r) {
  json j = versioned();
  j["fidelity"] = r.fidelity;
  j["qnd_fidelity"] = r.qnd_fidelity;
  j["out2_given_mid1"] = {{"ab_e_given_g", r.conditionals.ab_e_given_g},
                          {"ab_g_given_e", r.conditionals.ab_g_given_e},
                          {"c_g_given_g", r.conditionals.c_g_given_g},
                          {"c_e_given_e", r.conditionals.c_e_given_e}};
  j["errors"] = to_json(r.errors);
  j["flip_total_ge"] = interval_json(r.total_ge);
  j["flip_total_eg"] = interval_json(r.total_eg);
  const auto& o = r.origins;
  j["origins"] = {{"external_eg", o.external_eg},       {"internal_ge", o.internal_ge},
                  {"internal_eg", o.internal_eg},       {"back_action_ge", o.back_action_ge},
                  {"back_action_eg", o.back_action_eg}};
  auto rows = [](const std::vector<BudgetRow>& in) {
    json a = json::array();
    for (const auto& row : in)
      a.push_back({{"origin", row.origin},
                   {"formula", row.formula},
                   {"value", interval_json(row.value)},
                   {"consistent_point", row.consistent}});
    return a;
  };
  j["f_budget"] = rows(r.f_rows);
  j["q_budget"] = rows(r.q_rows);
  j["readout_error"] = {{"g_detected_e", interval_json(r.g_detected_e)},
                        {"e_detected_g", interval_json(r.e_detected_g)}};
  j["notes"] = r.notes;
  return j;
}

json to_json(const Discrimination& d) {
  return {{"threshold", d.threshold},
          {"p_e_given_g", d.p_e_given_g},
          {"p_g_given_e", d.p_g_given_e},
          {"theory_error", d.theory_error}};
}

// ---- CSV ---------------------------------------------------------------------

ComplexTrace trace_from_csv(const std::string& text) {
  const auto rows = csv_rows(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"freq_hz", "re", "im"})
    throw UsageError("trace CSV needs the header 'freq_hz,re,im'");
  ComplexTrace t;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].size() != 3) throw UsageError("trace CSV: row " + std::to_string(k + 1) + " needs 3 cells");
    t.freqs.push_back(parse_number(rows[k][0], "trace CSV"));
    t.values.emplace_back(parse_number(rows[k][1], "trace CSV"), parse_number(rows[k][2], "trace CSV"));
  }
  t.validate();
  return t;
}

std::string trace_csv(const ComplexTrace& t) {
  std::string out = "freq_hz,re,im\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    out += sci(t.freqs[k]) + "," + sci(t.values[k].real()) + "," + sci(t.values[k].imag()) + "\n";
  return out;
}

std::string series_csv(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UsageError("series_csv: length mismatch");
  std::string out = "freq_hz,value\n";
  for (std::size_t k = 0; k < x.size(); ++k) out += sci(x[k]) + "," + sci(y[k]) + "\n";
  return out;
}

std::string sim_result_csv(const SimResult& r) {
  std::string out = "time_s,p_g,p_e,p_f,p_h,re_alpha,im_alpha\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += sci(r.times[k]);
    for (int level = 0; level < 4; ++level)
      out += "," + sci(level < r.populations.cols() ? r.populations(static_cast<Eigen::Index>(k), level) : 0.0);
    const std::complex<double> a = k < r.cavity_amplitude.size() ? r.cavity_amplitude[k] : 0.0;
    out += "," + sci(a.real()) + "," + sci(a.imag()) + "\n";
  }
  return out;
}

std::string histogram_csv(const Discrimination& d) {
  std::string out = "bin_center,count_g,count_e\n";
  for (std::size_t k = 0; k < d.bin_centers.size(); ++k)
    out += sci(d.bin_centers[k]) + "," + std::to_string(d.counts_g[k]) + "," + std::to_string(d.counts_e[k]) + "\n";
  return out;
}

std::string reset_csv(const ResetCurve& c) {
  std::string out = "duration_s,residual\n";
  for (std::size_t k = 0; k < c.durations.size(); ++k) out += sci(c.durations[k]) + "," + sci(c.residual[k]) + "\n";
  return out;
}

std::string rabi_csv(const RabiResult& r) {
  std::string out = "duration_s,population\n";
  for (std::size_t k = 0; k < r.durations.size(); ++k) out += sci(r.durations[k]) + "," + sci(r.population[k]) + "\n";
  return out;
}

std::vector<double> parse_grid(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? std::string::npos : spec.find(':', a + 1);
  if (b == std::string::npos) throw UsageError("grid must look like start:stop:count");
  const double start = parse_number(spec.substr(0, a), "grid");
  const double stop = parse_number(spec.substr(a + 1, b - a - 1), "grid");
  const double count = parse_number(spec.substr(b + 1), "grid");
  if (count < 1 || count != std::floor(count) || count > 1e7) throw UsageError("grid count must be a positive integer");
  if (stop < start) throw UsageError("grid stop must not precede start");
  const int n = static_cast<int>(count);
  if (n == 1) return {start};
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = start + (stop - start) * k / (n - 1);
  return out;
}

std::pair<double, double> parse_band(const std::string& spec) {
  const auto a = spec.find(':');
  if (a == std::string::npos) throw UsageError("band must look like lo:hi");
  const double lo = parse_number(spec.substr(0, a), "band");
  const double hi = parse_number(spec.substr(a + 1), "band");
  if (!(lo > 0.0 && hi > lo)) throw UsageError("band needs 0 < lo < hi");
  return {lo, hi};
}

}  // namespace purcell::io
