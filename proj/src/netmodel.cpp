#include "purcell/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "purcell/units.hpp"

namespace purcell {

namespace {

using cplx = std::complex<double>;
constexpr cplx kI{0.0, 1.0};
constexpr double kInvPhi = 0.6180339887498949;  // (sqrt5 - 1)/2

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

cplx tap_admittance(const NetworkSpec& net, double omega) {
  if (std::isinf(net.output_impedance)) return {0.0, 0.0};
  return 1.0 / (net.output_impedance + 1.0 / (kI * omega * net.coupler_capacitance));
}

// A line piece between two nodes, lengths measured along the chain.
struct Piece {
  TLSegment seg;
  bool tap_before = false;  // tap sits on the far-end side of this piece
};

// Pieces ordered from the far open end toward the qubit, with the tap
// inserted as a zero-length marker at coupler_position.
std::vector<Piece> far_to_near_pieces(const NetworkSpec& net) {
  std::vector<Piece> pieces;
  const double total = net.total_length();
  const double xc = std::clamp(net.coupler_position, 0.0, total);
  double d = 0.0;
  bool tapped = false;
  for (auto it = net.resonator_segments.rbegin(); it != net.resonator_segments.rend(); ++it) {
    const double l = it->length;
    if (!tapped && xc <= d + l + 1e-15 * total) {
      TLSegment far = *it;
      far.length = std::clamp(xc - d, 0.0, l);
      TLSegment near = *it;
      near.length = l - far.length;
      pieces.push_back({far, false});
      pieces.push_back({near, true});
      tapped = true;
    } else {
      pieces.push_back({*it, false});
    }
    d += l;
  }
  if (!tapped) pieces.push_back({TLSegment{net.resonator_segments.front().z0, 0.0, 1.0, 0.0}, true});
  return pieces;
}

struct ChainState {
  cplx v, i;
};

double golden_minimize(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  const double scale = std::max(std::abs(a), std::abs(b));
  for (int it = 0; it < 200 && (b - a) > rel_tol * scale; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

// Re[Y] with poles mapped to +inf, for minimisation.
double re_y_or_inf(const NetworkSpec& net, double omega) {
  const auto r = junction_admittance(net, omega);
  return r.pole ? std::numeric_limits<double>::infinity() : r.re_y_stable;
}

NetworkSpec with_coupler(NetworkSpec net, double x) {
  net.coupler_position = x;
  return net;
}

}  // namespace

void TLSegment::validate() const {
  if (!finite_positive(z0)) throw UsageError("segment z0 must be positive");
  if (!(std::isfinite(length) && length >= 0.0)) throw UsageError("segment length must be >= 0");
  if (!finite_positive(phase_velocity)) throw UsageError("segment phase velocity must be positive");
  if (!(std::isfinite(loss) && loss >= 0.0)) throw UsageError("segment loss must be >= 0");
}

double NetworkSpec::total_length() const {
  double l = 0.0;
  for (const auto& s : resonator_segments) l += s.length;
  return l;
}

double NetworkSpec::charging_energy() const {
  return kElementaryCharge * kElementaryCharge / (2.0 * transmon_capacitance);
}

double NetworkSpec::phi_eg() const {
  if (phase_matrix_element) return *phase_matrix_element;
  return std::pow(2.0 * charging_energy() / josephson_energy, 0.25);
}

std::string NetworkSpec::validate() const {
  if (resonator_segments.empty()) throw UsageError("network needs at least one resonator segment");
  for (const auto& s : resonator_segments) s.validate();
  const double total = total_length();
  if (!(total > 0.0)) throw UsageError("resonator length must be positive");
  if (!(std::isfinite(coupler_position) && coupler_position >= 0.0 &&
        coupler_position <= total * (1.0 + 1e-12)))
    throw UsageError("coupler_position must lie within the resonator");
  if (!finite_positive(coupler_capacitance)) throw UsageError("coupler_capacitance must be positive");
  if (!finite_positive(qubit_coupling_capacitance))
    throw UsageError("qubit_coupling_capacitance must be positive");
  if (!finite_positive(transmon_capacitance)) throw UsageError("transmon_capacitance must be positive");
  if (!(output_impedance > 0.0)) throw UsageError("output_impedance must be positive");
  if (!finite_positive(josephson_energy)) throw UsageError("josephson_energy must be positive");
  if (phase_matrix_element && !finite_positive(*phase_matrix_element))
    throw UsageError("phase_matrix_element must be positive");
  const double ratio = josephson_energy / charging_energy();
  if (ratio <= 20.0) {
    std::ostringstream os;
    os << "E_J/E_C = " << ratio << " is below the transmon regime (> 20)";
    return os.str();
  }
  return {};
}

std::complex<double> line_input_admittance(std::span<const TLSegment> segments, double omega,
                                           std::complex<double> load) {
  ChainState s{1.0, load};
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    const auto m = segment_abcd(*it, omega);
    s = {m(0, 0) * s.v + m(0, 1) * s.i, m(1, 0) * s.v + m(1, 1) * s.i};
  }
  return s.i / s.v;
}

AdmittanceResult junction_admittance(const NetworkSpec& net, double omega) {
  if (!std::isfinite(omega) || !(omega > 0.0)) throw DomainError("junction_admittance: omega must be positive");
  const cplx y_tap = tap_admittance(net, omega);

  ChainState s{1.0, 0.0};
  double vmax = 1.0;
  double line_loss = 0.0;  // power absorbed by lossy pieces, for unit far-end voltage
  cplx v_tap = 0.0;
  for (const auto& p : far_to_near_pieces(net)) {
    if (p.tap_before) {
      v_tap = s.v;
      s.i += y_tap * s.v;
    }
    const auto m = segment_abcd(p.seg, omega);
    const ChainState next{m(0, 0) * s.v + m(0, 1) * s.i, m(1, 0) * s.v + m(1, 1) * s.i};
    if (p.seg.loss > 0.0 && p.seg.length > 0.0)
      line_loss += std::max(0.0, 0.5 * (std::real(next.v * std::conj(next.i)) -
                                        std::real(s.v * std::conj(s.i))));
    s = next;
    vmax = std::max(vmax, std::abs(s.v));
  }

  const cplx v_node = s.v + s.i / (kI * omega * net.qubit_coupling_capacitance);
  const cplx i_node = s.i + kI * omega * net.transmon_capacitance * v_node;

  AdmittanceResult out;
  out.omega = omega;
  out.pole = std::abs(v_node) < 1e-12 * vmax;
  if (out.pole) {
    out.y = cplx(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    out.re_y_stable = std::numeric_limits<double>::infinity();
    out.v_ratio = cplx(std::numeric_limits<double>::infinity(), 0.0);
    return out;
  }
  out.y = i_node / v_node;
  if (std::isinf(net.output_impedance)) {
    out.v_ratio = 0.0;
  } else {
    const cplx v0 = v_tap * net.output_impedance /
                    (net.output_impedance + 1.0 / (kI * omega * net.coupler_capacitance));
    out.v_ratio = v0 / v_node;
  }
  const double port = std::isinf(net.output_impedance)
                          ? 0.0
                          : std::norm(out.v_ratio) / net.output_impedance;
  out.re_y_stable = port + 2.0 * line_loss / std::norm(v_node);
  return out;
}

double external_coupling_rate(const NetworkSpec& net, double omega) {
  return external_coupling_rate(net, omega, net.scaling);
}

double external_coupling_rate(const NetworkSpec& net, double omega, ScalingMode mode) {
  const auto r = junction_admittance(net, omega);
  if (r.pole) throw PoleError("network pole at omega = " + std::to_string(omega) + " rad/s");
  if (mode == ScalingMode::fixed_ec) return r.re_y_stable / net.transmon_capacitance;
  const double phi = net.phi_eg();
  return phi * phi * kHbar * omega / (2.0 * kElementaryCharge * kElementaryCharge) * r.re_y_stable;
}

double single_mode_rate(double g, double delta, double kappa_ex) {
  if (delta == 0.0 || !std::isfinite(delta)) {
    if (std::isinf(delta)) return 0.0;
    throw DomainError("single_mode_rate: zero detuning");
  }
  const double ratio = g / delta;
  return ratio * ratio * kappa_ex;
}

std::optional<double> find_notch(const NetworkSpec& net, double omega_lo, double omega_hi,
                                 const NotchSearch& search) {
  if (!(omega_lo > 0.0 && omega_hi > omega_lo)) throw UsageError("find_notch: empty band");
  if (search.grid_points < 3) throw UsageError("find_notch: need at least 3 grid points");
  const int n = search.grid_points;
  std::vector<double> w(n), val(n);
  for (int k = 0; k < n; ++k) {
    w[k] = omega_lo + (omega_hi - omega_lo) * k / (n - 1);
    val[k] = re_y_or_inf(net, w[k]);
  }
  std::optional<double> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 1; k + 1 < n; ++k) {
    if (!(val[k] <= val[k - 1] && val[k] <= val[k + 1])) continue;
    const double wmin = golden_minimize([&](double x) { return re_y_or_inf(net, x); }, w[k - 1],
                                        w[k + 1], search.relative_tolerance);
    const double vmin = re_y_or_inf(net, wmin);
    if (!(vmin <= search.depth_ratio * std::min(val[k - 1], val[k + 1]))) continue;
    if (vmin < best_val) {
      best_val = vmin;
      best = wmin;
    }
  }
  return best;
}

double optimize_coupler_position(const NetworkSpec& net, double omega_target, int grid_points) {
  if (!(omega_target > 0.0)) throw UsageError("optimize_coupler_position: omega_target must be positive");
  if (grid_points < 3) throw UsageError("optimize_coupler_position: need at least 3 grid points");
  const double total = net.total_length();
  auto cost = [&](double x) { return re_y_or_inf(with_coupler(net, x), omega_target); };
  std::vector<double> xs(grid_points), val(grid_points);
  for (int k = 0; k < grid_points; ++k) {
    xs[k] = total * k / (grid_points - 1);
    val[k] = cost(xs[k]);
  }
  const auto k = std::distance(val.begin(), std::min_element(val.begin(), val.end()));
  const double a = xs[std::max<std::ptrdiff_t>(k - 1, 0)];
  const double b = xs[std::min<std::ptrdiff_t>(k + 1, grid_points - 1)];
  const double x = golden_minimize(cost, a, b, 1e-12);
  return cost(x) <= val[k] ? x : xs[k];
}

std::complex<double> port_reflection(const NetworkSpec& net, double omega) {
  if (!(omega > 0.0)) throw DomainError("port_reflection: omega must be positive");
  if (std::isinf(net.output_impedance)) return 1.0;
  // Admittance at the tap toward the far open end, and toward the qubit end
  // terminated by C_q in series with C.
  std::vector<TLSegment> far_side, near_side;
  bool tap_seen = false;
  for (const auto& p : far_to_near_pieces(net)) {
    if (p.tap_before) tap_seen = true;
    (tap_seen ? near_side : far_side).push_back(p.seg);
  }
  std::reverse(far_side.begin(), far_side.end());  // tap -> open end
  const cplx y_far = line_input_admittance(far_side, omega);
  const cplx z_qubit_end = 1.0 / (kI * omega * net.qubit_coupling_capacitance) +
                           1.0 / (kI * omega * net.transmon_capacitance);
  const cplx y_near = line_input_admittance(near_side, omega, 1.0 / z_qubit_end);
  const cplx z = 1.0 / (kI * omega * net.coupler_capacitance) + 1.0 / (y_far + y_near);
  return (z - net.output_impedance) / (z + net.output_impedance);
}

ModeParams resonator_mode_params(const NetworkSpec& net) {
  if (std::isinf(net.output_impedance)) throw UsageError("resonator_mode_params: output port is open");
  double delay = 0.0;
  for (const auto& s : net.resonator_segments) delay += s.length / s.phase_velocity;
  const double w0 = std::numbers::pi / delay;
  // Series resonance of the port load: Im Z crosses zero upward.
  auto reactance = [&](double w) {
    const cplx s11 = port_reflection(net, w);
    return std::imag(net.output_impedance * (1.0 + s11) / (1.0 - s11));
  };
  const int n = 4001;
  double root = std::numeric_limits<double>::quiet_NaN();
  double prev_w = 0.5 * w0, prev_x = reactance(prev_w);
  for (int k = 1; k < n; ++k) {
    const double w = w0 * (0.5 + static_cast<double>(k) / (n - 1));
    const double x = reactance(w);
    if (prev_x < 0.0 && x >= 0.0) {
      double a = prev_w, b = w;
      for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
        const double m = 0.5 * (a + b);
        (reactance(m) < 0.0 ? a : b) = m;
      }
      const double cand = 0.5 * (a + b);
      if (std::isnan(root) || std::abs(cand - w0) < std::abs(root - w0)) root = cand;
    }
    prev_w = w;
    prev_x = x;
  }
  if (std::isnan(root)) throw FitError("no resonance found near the fundamental", NAN);

  const double h = 1e-7 * root;
  const double slope = (reactance(root + h) - reactance(root - h)) / (2.0 * h);
  const double kappa0 = 2.0 * net.output_impedance / slope;
  if (!(kappa0 > 0.0)) throw FitError("resonance has non-positive linewidth", NAN);

  ComplexTrace trace;
  const int m = 401;
  for (int k = 0; k < m; ++k) {
    const double w = root + kappa0 * (-5.0 + 10.0 * k / (m - 1));
    trace.freqs.push_back(to_hz(w));
    trace.values.push_back(port_reflection(net, w));
  }
  ResonatorGuess guess;
  guess.omega_r = to_hz(root);
  guess.kappa_ex = to_hz(kappa0);
  const FitResult fit = fit_single_pole(trace, guess);
  if (fit.residual_rms > 1e-2)
    throw FitError("single-pole fit of the network resonance is poor (overlapping modes?)",
                   fit.residual_rms);
  return {to_angular(fit.value("omega_r")), to_angular(fit.value("kappa_ex")), fit.residual_rms};
}

ComplexTrace SuppressionSpectrum::ratio_trace() const {
  ComplexTrace t;
  t.freqs = freqs;
  t.values.reserve(ratio.size());
  for (std::size_t k = 0; k < ratio.size(); ++k)
    t.values.emplace_back(valid[k] ? ratio[k] : std::numeric_limits<double>::quiet_NaN(), 0.0);
  return t;
}

SuppressionSpectrum suppression_spectrum(const NetworkSpec& net, const DeviceParams& device,
                                         double f_lo, double f_hi, int points) {
  if (points < 2) throw UsageError("suppression_spectrum: need at least 2 points");
  if (!(f_lo > 0.0 && f_hi > f_lo)) throw UsageError("suppression_spectrum: empty band");
  const double g = to_angular(device.g);
  const double kappa = to_angular(device.kappa_ex);
  const double wr = to_angular(device.omega_r);
  SuppressionSpectrum s;
  for (int k = 0; k < points; ++k) {
    const double f = f_lo + (f_hi - f_lo) * k / (points - 1);
    const double w = to_angular(f);
    const double delta = w - wr;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    bool ok = std::abs(delta) > kappa;
    try {
      gamma = external_coupling_rate(net, w);
    } catch (const PoleError&) {
      ok = false;
    }
    const double single = delta == 0.0 ? std::numeric_limits<double>::infinity()
                                       : single_mode_rate(g, delta, kappa);
    const double ratio = single / gamma;
    ok = ok && std::isfinite(ratio);
    s.freqs.push_back(f);
    s.gamma_ex.push_back(to_hz(gamma));
    s.single_mode.push_back(to_hz(single));
    s.ratio.push_back(ok ? ratio : std::numeric_limits<double>::quiet_NaN());
    s.valid.push_back(ok);
  }
  return s;
}

std::pair<double, double> band_above(const SuppressionSpectrum& s, double f_center, double threshold) {
  if (s.freqs.empty()) throw UsageError("band_above: empty spectrum");
  const auto it = std::lower_bound(s.freqs.begin(), s.freqs.end(), f_center);
  std::size_t c = static_cast<std::size_t>(std::distance(s.freqs.begin(), it));
  if (c == s.freqs.size()) --c;
  if (c > 0 && std::abs(s.freqs[c - 1] - f_center) < std::abs(s.freqs[c] - f_center)) --c;
  auto above = [&](std::size_t k) { return s.valid[k] && s.ratio[k] > threshold; };
  if (!above(c)) return {f_center, f_center};
  std::size_t lo = c, hi = c;
  while (lo > 0 && above(lo - 1)) --lo;
  while (hi + 1 < s.freqs.size() && above(hi + 1)) ++hi;
  return {s.freqs[lo], s.freqs[hi]};
}

NetworkSpec tune_to_device(const NetworkSpec& base, const DeviceParams& device) {
  base.validate();
  device.validate();
  NetworkSpec net = base;
  const double wr = to_angular(device.omega_r);
  const double weg = to_angular(device.omega_eg);
  const double kappa = to_angular(device.kappa_ex);

  // Transmon: E_C ~ -alpha h, E_J from the plasma frequency h f_eg = sqrt(8 E_J E_C) - E_C.
  const double ec = -device.alpha() * kPlanck;
  if (!(ec > 0.0)) throw UsageError("tune_to_device: anharmonicity must be negative");
  net.transmon_capacitance = kElementaryCharge * kElementaryCharge / (2.0 * ec);
  const double heg = kPlanck * device.omega_eg;
  net.josephson_energy = (heg + ec) * (heg + ec) / (8.0 * ec);

  // Lumped coupling to a half-wave mode with effective capacitance pi/(2 w_r Z).
  const double z_line = net.resonator_segments.front().z0;
  const double c_r = std::numbers::pi / (2.0 * wr * z_line);
  net.qubit_coupling_capacitance = 2.0 * to_angular(device.g) *
                                   std::sqrt(net.transmon_capacitance * c_r) /
                                   std::sqrt(weg * wr);

  for (int it = 0; it < 60; ++it) {
    const ModeParams mode = resonator_mode_params(net);
    const double len_scale = mode.omega_r / wr;
    const double cc_scale = std::sqrt(kappa / mode.kappa_ex);
    for (auto& s : net.resonator_segments) s.length *= len_scale;
    net.coupler_capacitance *= cc_scale;
    net.coupler_position = std::min(net.coupler_position * len_scale, net.total_length());
    net.coupler_position = optimize_coupler_position(net, weg);
    if (std::abs(len_scale - 1.0) < 1e-12 && std::abs(cc_scale - 1.0) < 1e-10) break;
  }
  return net;
}

}  // namespace purcell
