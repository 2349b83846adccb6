#include "purcell/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "purcell/errors.hpp"
#include "purcell/lsq.hpp"
#include "purcell/units.hpp"

namespace purcell {

using cplx = std::complex<double>;
constexpr cplx kI{0.0, 1.0};

void DeviceParams::validate() const {
  for (double f : {omega_eg, omega_fe, omega_r, omega_f0g1, g})
    if (!(f > 0.0) || !std::isfinite(f)) throw UsageError("device frequencies must be positive and finite");
  if (!(kappa_ex > 0.0)) throw UsageError("kappa_ex must be positive");
  if (!(r_th >= 0.0 && r_th < 1.0)) throw UsageError("r_th must lie in [0, 1)");
  if (!(t1 > 0.0) || !(t1f > 0.0)) throw UsageError("t1 and t1f must be positive");
  if (!(t2_star > 0.0) || !(t2_echo > 0.0)) throw UsageError("dephasing times must be positive");
  if (!(saturation >= 0.0)) throw UsageError("saturation must be non-negative");
  if (!(gamma_ex_q >= 0.0) || !(gamma2 > 0.0)) throw UsageError("qubit rates must be positive");
}

void ComplexTrace::validate() const {
  if (freqs.size() != values.size()) throw UsageError("trace frequency and value counts differ");
  if (freqs.size() < 2) throw UsageError("trace needs at least two points");
  for (std::size_t k = 1; k < freqs.size(); ++k)
    if (!(freqs[k] > freqs[k - 1])) throw UsageError("trace frequencies must be strictly increasing");
}

const Estimate& FitResult::at(std::string_view name) const {
  for (const auto& e : params)
    if (e.name == name) return e;
  throw UsageError("fit result has no parameter '" + std::string(name) + "'");
}

cplx s11_single_pole(double omega, double omega_r, double kappa_ex) {
  return 1.0 - kappa_ex / (kappa_ex / 2.0 + kI * (omega - omega_r));
}

cplx s11_resonator_ratio_model(double omega, double omega_r, double kappa_ex, double two_chi) {
  if (!(kappa_ex > 0.0)) throw DomainError("kappa_ex must be positive");
  return s11_single_pole(omega, omega_r, kappa_ex) /
         s11_single_pole(omega, omega_r + two_chi, kappa_ex);
}

double thermal_reduction(double r_th) { return (1.0 - r_th) / (1.0 + r_th); }

cplx s11_qubit_model(double omega, double omega_eg, double gamma_ex, double gamma2,
                     double saturation, double r_th) {
  if (!(gamma2 > 0.0)) throw DomainError("gamma2 must be positive");
  const double tilde = gamma_ex * thermal_reduction(r_th);
  const double x = (omega_eg - omega) / gamma2;
  return 1.0 - (tilde / gamma2) * (1.0 - kI * x) / (1.0 + saturation + x * x);
}

ComplexTrace apply_nuisance(const ComplexTrace& trace, const Nuisance& n) {
  ComplexTrace out = trace;
  for (std::size_t k = 0; k < out.size(); ++k)
    out.values[k] *= n.scale * std::exp(kI * (n.phase - kTwoPi * out.freqs[k] * n.delay));
  return out;
}

namespace {

double wrap_phase(double phi) { return std::remainder(phi, kTwoPi); }

std::vector<double> unwrapped_phase(const std::vector<cplx>& v) {
  std::vector<double> out(v.size());
  double offset = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double raw = std::arg(v[k]);
    if (k > 0) {
      const double prev = out[k - 1] - offset;
      offset += -kTwoPi * std::round((raw - prev) / kTwoPi);
    }
    out[k] = raw + offset;
  }
  return out;
}

// Least-squares slope of y against x over [lo, hi).
double slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo,
             std::size_t hi) {
  const double n = static_cast<double>(hi - lo);
  double mx = 0, my = 0;
  for (std::size_t k = lo; k < hi; ++k) mx += x[k], my += y[k];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = lo; k < hi; ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

// Deterministic background removal from the trace edges.
struct Background {
  double delay = 0.0;  // seconds
  cplx scale{1.0, 0.0};
};

Background estimate_background(const ComplexTrace& trace) {
  const std::size_t n = trace.size();
  const std::size_t edge = std::max<std::size_t>(3, n / 8);
  Background bg;
  if (n < 2 * edge + 1) return bg;
  const auto phase = unwrapped_phase(trace.values);
  const double s_left = slope(trace.freqs, phase, 0, edge);
  const double s_right = slope(trace.freqs, phase, n - edge, n);
  bg.delay = -0.5 * (s_left + s_right) / kTwoPi;
  cplx sum{0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    if (k >= edge && k < n - edge) continue;
    sum += trace.values[k] * std::exp(kI * kTwoPi * trace.freqs[k] * bg.delay);
  }
  bg.scale = sum / static_cast<double>(2 * edge);
  return bg;
}

struct Feature {
  double center = 0.0;
  double fwhm = 0.0;  // of |t - 1|^2
  double peak = 0.0;  // max |t - 1|
  cplx at_peak{0.0, 0.0};
};

Feature locate_feature(const ComplexTrace& trace, const Background& bg) {
  const std::size_t n = trace.size();
  std::vector<cplx> dev(n);
  std::vector<double> mag2(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx normalized =
        trace.values[k] * std::exp(kI * kTwoPi * trace.freqs[k] * bg.delay) / bg.scale;
    dev[k] = normalized - 1.0;
    mag2[k] = std::norm(dev[k]);
  }
  const auto peak_it = std::max_element(mag2.begin(), mag2.end());
  const std::size_t kp = static_cast<std::size_t>(peak_it - mag2.begin());
  Feature f;
  f.center = trace.freqs[kp];
  f.peak = std::sqrt(mag2[kp]);
  f.at_peak = dev[kp];
  const double half = 0.5 * mag2[kp];
  double left = trace.freqs.front(), right = trace.freqs.back();
  for (std::size_t k = kp; k > 0; --k) {
    if (mag2[k - 1] < half) {
      const double t = (half - mag2[k - 1]) / (mag2[k] - mag2[k - 1]);
      left = trace.freqs[k - 1] + t * (trace.freqs[k] - trace.freqs[k - 1]);
      break;
    }
  }
  for (std::size_t k = kp; k + 1 < n; ++k) {
    if (mag2[k + 1] < half) {
      const double t = (mag2[k] - half) / (mag2[k] - mag2[k + 1]);
      right = trace.freqs[k] + t * (trace.freqs[k + 1] - trace.freqs[k]);
      break;
    }
  }
  f.fwhm = std::max(right - left, 2.0 * (trace.freqs[1] - trace.freqs[0]));
  return f;
}

// Generic complex fit in scaled frequency u = (f - center)/width. The
// parameter vector is [physical..., log-free scale, phase, delay*2pi*width].
using ScaledModel = std::function<cplx(double u, const Eigen::VectorXd& phys)>;

struct ScaledFit {
  lsq::Result lsq;
  Eigen::Index n_phys = 0;
  double center = 0.0;
  double width = 1.0;
};

ScaledFit run_scaled_fit(const ComplexTrace& trace, double center, double width,
                         const Eigen::VectorXd& phys0, const Background& bg,
                         const ScaledModel& model) {
  const Eigen::Index np = phys0.size();
  const std::size_t n = trace.size();
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = (trace.freqs[k] - center) / width;

  Eigen::VectorXd x0(np + 3);
  x0.head(np) = phys0;
  x0[np] = std::abs(bg.scale);
  // Internal phase is referenced to the center frequency.
  x0[np + 1] = wrap_phase(std::arg(bg.scale) - kTwoPi * center * bg.delay);
  x0[np + 2] = kTwoPi * bg.delay * width;

  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(2 * n);
    const Eigen::VectorXd phys = p.head(np);
    for (std::size_t k = 0; k < n; ++k) {
      const cplx m = p[np] * std::exp(kI * (p[np + 1] - p[np + 2] * u[k])) * model(u[k], phys);
      const cplx d = m - trace.values[k];
      r[2 * k] = d.real();
      r[2 * k + 1] = d.imag();
    }
    return r;
  };
  ScaledFit out;
  out.lsq = lsq::levenberg_marquardt(residual, x0);
  out.n_phys = np;
  out.center = center;
  out.width = width;
  if (!out.lsq.converged)
    throw FitError("fit did not converge within the iteration limit",
                   std::sqrt(out.lsq.rss / static_cast<double>(2 * n)));
  return out;
}

double sigma_of(const lsq::Result& r, Eigen::Index k) {
  const double v = r.covariance(k, k);
  return std::isfinite(v) && v >= 0 ? std::sqrt(v) : std::numeric_limits<double>::infinity();
}

void fill_nuisance(FitResult& out, const ScaledFit& fit) {
  const auto& r = fit.lsq;
  const Eigen::Index np = fit.n_phys;
  const double amp = r.x[np];
  const double tau = r.x[np + 2] / (kTwoPi * fit.width);
  // Public phase is referenced to f = 0: phase_pub = phase_int + 2 pi f_c tau.
  const double c = fit.center / fit.width;
  out.nuisance.scale = std::abs(amp);
  out.nuisance.scale_sigma = sigma_of(r, np);
  out.nuisance.phase = wrap_phase(r.x[np + 1] + c * r.x[np + 2] + (amp < 0 ? std::numbers::pi : 0.0));
  const double var_phase = r.covariance(np + 1, np + 1) + c * c * r.covariance(np + 2, np + 2) +
                           2.0 * c * r.covariance(np + 1, np + 2);
  out.nuisance.phase_sigma = std::isfinite(var_phase) && var_phase >= 0
                                 ? std::sqrt(var_phase)
                                 : std::numeric_limits<double>::infinity();
  out.nuisance.delay = tau;
  out.nuisance.delay_sigma = sigma_of(r, np + 2) / (kTwoPi * fit.width);
  out.iterations = r.iterations;
  out.converged = r.converged;
}

// A linewidth below the frequency step means the feature is fitted noise.
void finalize_identifiability(FitResult& out, const ScaledFit& fit, const ComplexTrace& trace,
                              std::string_view linewidth,
                              std::initializer_list<std::string_view> freq_params) {
  const double span = trace.freqs.back() - trace.freqs.front();
  const double step = span / static_cast<double>(trace.size() - 1);
  out.identifiable = fit.lsq.condition < 1e10 && out.value(linewidth) > step;
  for (auto name : freq_params) {
    const double s = out.sigma(name);
    if (!std::isfinite(s) || s > span) out.identifiable = false;
  }
}

}  // namespace

FitResult fit_resonator_ratio(const ComplexTrace& trace, const ResonatorGuess& initial) {
  trace.validate();
  if (trace.size() < 8) throw UsageError("resonator-ratio fit needs at least 8 points");
  const Background bg = estimate_background(trace);
  const Feature feat = locate_feature(trace, bg);

  const double kappa0 = initial.kappa_ex.value_or(feat.fwhm / std::sqrt(std::sqrt(2.0) - 1.0));
  // Near the midpoint t - 1 ~ -i 4 (2chi)/kappa.
  double two_chi0 = feat.peak * kappa0 / 4.0;
  if (feat.at_peak.imag() > 0) two_chi0 = -two_chi0;
  two_chi0 = initial.two_chi.value_or(two_chi0);
  const double omega0 = initial.omega_r.value_or(feat.center - two_chi0 / 2.0);

  const double width = kappa0;
  const double center = omega0;
  Eigen::VectorXd phys0(3);
  phys0 << 0.0, 1.0, two_chi0 / width;
  const auto fit = run_scaled_fit(trace, center, width, phys0, bg,
                                  [](double u, const Eigen::VectorXd& p) {
                                    const double k = p[1];
                                    return s11_single_pole(u, p[0], k) /
                                           s11_single_pole(u, p[0] + p[2], k);
                                  });
  FitResult out;
  const auto& x = fit.lsq.x;
  out.params = {
      {"omega_r", center + width * x[0], width * sigma_of(fit.lsq, 0)},
      {"kappa_ex", width * std::abs(x[1]), width * sigma_of(fit.lsq, 1)},
      {"two_chi", width * x[2], width * sigma_of(fit.lsq, 2)},
  };
  fill_nuisance(out, fit);
  out.residual_rms = std::sqrt(fit.lsq.rss / static_cast<double>(2 * trace.size()));
  finalize_identifiability(out, fit, trace, "kappa_ex", {"omega_r", "kappa_ex", "two_chi"});
  return out;
}

FitResult fit_single_pole(const ComplexTrace& trace, const ResonatorGuess& initial) {
  trace.validate();
  if (trace.size() < 6) throw UsageError("single-pole fit needs at least 6 points");
  const Background bg = estimate_background(trace);
  const Feature feat = locate_feature(trace, bg);
  // |t - 1|^2 = kappa^2/(kappa^2/4 + delta^2) has FWHM kappa.
  const double kappa0 = initial.kappa_ex.value_or(feat.fwhm);
  const double omega0 = initial.omega_r.value_or(feat.center);
  Eigen::VectorXd phys0(2);
  phys0 << 0.0, 1.0;
  const auto fit = run_scaled_fit(trace, omega0, kappa0, phys0, bg,
                                  [](double u, const Eigen::VectorXd& p) {
                                    return s11_single_pole(u, p[0], p[1]);
                                  });
  FitResult out;
  const auto& x = fit.lsq.x;
  out.params = {
      {"omega_r", omega0 + kappa0 * x[0], kappa0 * sigma_of(fit.lsq, 0)},
      {"kappa_ex", kappa0 * std::abs(x[1]), kappa0 * sigma_of(fit.lsq, 1)},
  };
  fill_nuisance(out, fit);
  out.residual_rms = std::sqrt(fit.lsq.rss / static_cast<double>(2 * trace.size()));
  finalize_identifiability(out, fit, trace, "kappa_ex", {"omega_r", "kappa_ex"});
  return out;
}

FitResult fit_qubit_reflection(const ComplexTrace& trace, double r_th, const QubitGuess& initial) {
  trace.validate();
  if (!(r_th >= 0.0 && r_th < 1.0)) throw UsageError("r_th must lie in [0, 1)");
  if (trace.size() < 10) throw UsageError("qubit-reflection fit needs at least 10 points");
  const Background bg = estimate_background(trace);
  const Feature feat = locate_feature(trace, bg);
  const double reduction = thermal_reduction(r_th);

  const double gamma2_0 = initial.gamma2.value_or(feat.fwhm / 2.0);
  const double s0 = initial.saturation.value_or(0.0);
  const double tilde0 = initial.gamma_ex ? *initial.gamma_ex * reduction
                                         : feat.peak * gamma2_0 * (1.0 + s0);
  const double omega0 = initial.omega_eg.value_or(feat.center);

  const double width = gamma2_0;
  Eigen::VectorXd phys0(4);
  phys0 << 0.0, tilde0 / width, 1.0, s0;
  const auto fit = run_scaled_fit(trace, omega0, width, phys0, bg,
                                  [](double u, const Eigen::VectorXd& p) {
                                    // r_th already folded into gamma_ex_tilde; the sign
                                    // of gamma2 is irrelevant, so trial steps may cross zero.
                                    const double g2 = std::max(std::abs(p[2]), 1e-12);
                                    return s11_qubit_model(u, p[0], p[1], g2, p[3], 0.0);
                                  });
  const auto& x = fit.lsq.x;
  const double tilde = width * x[1];
  const double tilde_sigma = width * sigma_of(fit.lsq, 1);
  const double gamma_ex = tilde / reduction;
  const double gamma_ex_sigma = tilde_sigma / reduction;
  const double t1ex = 1.0 / (kTwoPi * gamma_ex);

  FitResult out;
  out.params = {
      {"omega_eg", omega0 + width * x[0], width * sigma_of(fit.lsq, 0)},
      {"gamma_ex_tilde", tilde, tilde_sigma},
      {"gamma_ex", gamma_ex, gamma_ex_sigma},
      {"gamma2", width * std::abs(x[2]), width * sigma_of(fit.lsq, 2)},
      {"s", x[3], sigma_of(fit.lsq, 3)},
      {"t1ex", t1ex, t1ex * gamma_ex_sigma / std::abs(gamma_ex)},
  };
  fill_nuisance(out, fit);
  out.residual_rms = std::sqrt(fit.lsq.rss / static_cast<double>(2 * trace.size()));
  finalize_identifiability(out, fit, trace, "gamma2", {"omega_eg", "gamma_ex", "gamma2"});
  return out;
}

// ---- drive calibration -----------------------------------------------------

double coupling_from_drive(double omega_d, double amplitude, double power) {
  if (!(power > 0.0)) throw DomainError("drive power must be positive");
  if (!(omega_d > 0.0) || !(amplitude >= 0.0)) throw DomainError("drive frequency and amplitude must be positive");
  const double w_d = to_angular(omega_d);
  const double big_omega = to_angular(amplitude);
  const double gamma = big_omega * big_omega / 4.0 * kHbar * w_d / power;
  return to_hz(gamma);
}

double amplitude_from_coupling(double omega_d, double gamma_ex, double power) {
  if (!(power > 0.0)) throw DomainError("drive power must be positive");
  if (!(gamma_ex >= 0.0)) throw DomainError("coupling rate must be non-negative");
  const double w_d = to_angular(omega_d);
  const double big_omega = std::sqrt(4.0 * to_angular(gamma_ex) * power / (kHbar * w_d));
  return to_hz(big_omega);
}

double omega_from_stark(double omega_d, double omega_eg, double omega_fe, double stark_shift) {
  if (omega_d == omega_eg || omega_d == omega_fe)
    throw DomainError("drive must be detuned from both g-e and e-f transitions");
  if (omega_fe == omega_eg) throw DomainError("anharmonicity must be non-zero");
  const double radicand = 2.0 * (omega_fe - omega_d) * (omega_eg - omega_d) /
                          (omega_fe - omega_eg) * stark_shift;
  if (radicand < 0.0)
    throw DomainError("Stark shift sign is incompatible with the drive detunings");
  return std::sqrt(radicand);
}

double stark_shift_from_omega(double omega_d, double omega_eg, double omega_fe, double amplitude) {
  if (omega_d == omega_eg || omega_d == omega_fe)
    throw DomainError("drive must be detuned from both g-e and e-f transitions");
  return amplitude * amplitude * (omega_fe - omega_eg) /
         (2.0 * (omega_fe - omega_d) * (omega_eg - omega_d));
}

double omega_from_rabi(double rabi_freq, Transition transition) {
  if (!(rabi_freq >= 0.0)) throw DomainError("Rabi frequency must be non-negative");
  return transition == Transition::ge ? rabi_freq : rabi_freq / std::numbers::sqrt2;
}

double dispersive_shift(double g, double delta, double alpha) {
  return 2.0 * g * g * alpha / (delta * (delta + alpha));
}

double g_from_dispersive_shift(double two_chi, double delta, double alpha) {
  if (delta == 0.0 || alpha == 0.0 || delta + alpha == 0.0)
    throw DomainError("dispersive formula needs non-zero delta, alpha and delta + alpha");
  const double chi = two_chi / 2.0;
  const double g2 = chi * delta * (delta + alpha) / alpha;
  if (g2 < 0.0) throw DomainError("dispersive shift sign is inconsistent with the detunings");
  return std::sqrt(g2);
}

double line_attenuation(double power_at_device, double power_at_fridge_input) {
  if (!(power_at_device > 0.0) || !(power_at_fridge_input > 0.0))
    throw DomainError("powers must be positive");
  return 10.0 * std::log10(power_at_fridge_input / power_at_device);
}

bool attenuation_is_flat(std::span<const double> attenuation_db, double threshold_db) {
  if (attenuation_db.empty()) return true;
  const auto [lo, hi] = std::minmax_element(attenuation_db.begin(), attenuation_db.end());
  return *hi - *lo < threshold_db;
}

}  // namespace purcell
