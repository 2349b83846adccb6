#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace purcell {

/// Measured device quantities. Frequencies and rates are ordinary
/// frequencies in Hz (omega/2pi, kappa/2pi, ...), times in seconds.
struct DeviceParams {
  double omega_eg = 8.319e9;
  double omega_fe = 7.935e9;
  double omega_r = 10.5106e9;
  double omega_f0g1 = 5.611e9;
  double kappa_ex = 45.7e6;
  double two_chi = -6.9e6;
  double g = 224e6;
  double t1 = 17e-6;
  double t2_star = 5.2e-6;
  double t2_echo = 15e-6;
  double t1f = 10e-6;
  double r_th = 0.19;
  double gamma_ex_q = 1.33e3;
  double gamma2 = 38e3;
  double saturation = 0.7;

  /// Throws UsageError when an invariant is violated.
  void validate() const;
  double alpha() const { return omega_fe - omega_eg; }
  double detuning() const { return omega_eg - omega_r; }
};

/// Frequency-indexed complex response, e.g. an S11 sweep.
struct ComplexTrace {
  std::vector<double> freqs;
  std::vector<std::complex<double>> values;

  void validate() const;
  std::size_t size() const { return freqs.size(); }
};

struct Estimate {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
};

/// Background terms multiplying every model: scale * e^{i phase} * e^{-i 2 pi f delay}.
struct Nuisance {
  double scale = 1.0;
  double scale_sigma = 0.0;
  double phase = 0.0;
  double phase_sigma = 0.0;
  double delay = 0.0;
  double delay_sigma = 0.0;
};

struct FitResult {
  std::vector<Estimate> params;
  Nuisance nuisance;
  double residual_rms = 0.0;
  int iterations = 0;
  bool converged = false;
  /// False when the Jacobian is numerically rank deficient or a physical
  /// parameter's uncertainty exceeds the span of the trace.
  bool identifiable = true;

  const Estimate& at(std::string_view name) const;
  double value(std::string_view name) const { return at(name).value; }
  double sigma(std::string_view name) const { return at(name).sigma; }
};

struct DriveSpec {
  double omega_d = 0.0;
  double power = 0.0;
  double amplitude = 0.0;
  double stark_shift = 0.0;
};

enum class Transition { ge, ef };

/// Optional starting values; unset entries are estimated from the trace.
struct ResonatorGuess {
  std::optional<double> omega_r, kappa_ex, two_chi;
};
struct QubitGuess {
  std::optional<double> omega_eg, gamma_ex, gamma2, saturation;
};

// ---- model functions -------------------------------------------------------

/// Single-pole reflection 1 - kappa/(kappa/2 + i(omega - omega_r)).
std::complex<double> s11_single_pole(double omega, double omega_r, double kappa_ex);

/// S11^g/S11^e for the post-selected resonator spectroscopy, where the
/// e-branch resonance is displaced by two_chi.
std::complex<double> s11_resonator_ratio_model(double omega, double omega_r,
                                               double kappa_ex, double two_chi);

/// Continuous-wave reflection off the qubit with thermal reduction of the
/// external rate, Gamma_ex (1 - r_th)/(1 + r_th).
std::complex<double> s11_qubit_model(double omega, double omega_eg, double gamma_ex,
                                     double gamma2, double saturation, double r_th);

double thermal_reduction(double r_th);

// ---- fits -----------------------------------------------------------------

/// Fits (omega_r, kappa_ex, two_chi) plus scale, phase and electrical delay.
FitResult fit_resonator_ratio(const ComplexTrace& trace, const ResonatorGuess& initial = {});

/// Fits (omega_r, kappa_ex) of a bare single-pole reflection plus nuisance.
FitResult fit_single_pole(const ComplexTrace& trace, const ResonatorGuess& initial = {});

/// Fits (omega_eg, gamma_ex_tilde, gamma2, s) plus nuisance, then reports
/// gamma_ex and t1ex = 1/(2 pi gamma_ex) using the independently measured r_th.
FitResult fit_qubit_reflection(const ComplexTrace& trace, double r_th,
                               const QubitGuess& initial = {});

/// Applies scale * e^{i phase} * e^{-i 2 pi f delay} to a model trace.
ComplexTrace apply_nuisance(const ComplexTrace& trace, const Nuisance& nuisance);

// ---- drive calibration -----------------------------------------------------

/// Gamma_ex(omega_d) = (Omega^2/4) hbar omega_d / P, evaluated in angular
/// units. Inputs in Hz and W, result in Hz.
double coupling_from_drive(double omega_d, double amplitude, double power);

/// Inverse of coupling_from_drive for the amplitude.
double amplitude_from_coupling(double omega_d, double gamma_ex, double power);

/// Drive amplitude from the perturbative ac Stark shift of the g-e line.
double omega_from_stark(double omega_d, double omega_eg, double omega_fe, double stark_shift);

/// Perturbative ac Stark shift of the g-e line; inverse of omega_from_stark.
double stark_shift_from_omega(double omega_d, double omega_eg, double omega_fe, double amplitude);

double omega_from_rabi(double rabi_freq, Transition transition);

/// Coupling strength from the dispersive shift chi = g^2 alpha/(Delta(Delta+alpha)).
double g_from_dispersive_shift(double two_chi, double delta, double alpha);
double dispersive_shift(double g, double delta, double alpha);  // returns 2 chi

/// 10 log10(input/device) in dB.
double line_attenuation(double power_at_device, double power_at_fridge_input);

/// True when max - min of an attenuation table (dB) stays within threshold.
bool attenuation_is_flat(std::span<const double> attenuation_db, double threshold_db);

}  // namespace purcell
