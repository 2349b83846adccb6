#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "purcell/errors.hpp"
#include "purcell/spectra.hpp"

namespace purcell {

// ---- types -----------------------------------------------------------------

/// Uniform transmission-line section (SI units, loss in nepers per metre).
struct TLSegment {
  double z0 = 50.0;
  double length = 0.0;
  double phase_velocity = 1.0e8;
  double loss = 0.0;

  void validate() const;
};

/// How the junction phase matrix element scales when the qubit frequency
/// is swept: held fixed (phi_eg constant) or derived from a fixed E_C.
enum class ScalingMode { fixed_phi, fixed_ec };

/// The fixed topology
///
///   junction -- C (shunt) -- C_q (series) -- line ... tap ... line -- open
///                                                     |
///                                                    C_c -- Z0 (output port)
///
/// with the tap located `coupler_position` metres from the far open end.
struct NetworkSpec {
  /// Ordered from the qubit end to the far open end.
  std::vector<TLSegment> resonator_segments;
  double coupler_position = 0.0;
  double coupler_capacitance = 0.0;
  /// Infinity models a removed (open) output port.
  double output_impedance = 50.0;
  double qubit_coupling_capacitance = 0.0;
  double transmon_capacitance = 0.0;
  double josephson_energy = 0.0;  // J
  /// Overrides (2 E_C/E_J)^{1/4} when set.
  std::optional<double> phase_matrix_element;
  ScalingMode scaling = ScalingMode::fixed_phi;

  double total_length() const;
  double charging_energy() const;  // e^2/2C in J
  double phi_eg() const;
  /// Throws UsageError on invariant violations. Returns a warning message
  /// (empty if none) for E_J/E_C below the transmon regime.
  std::string validate() const;
};

struct AdmittanceResult {
  double omega = 0.0;  // rad/s
  std::complex<double> y;
  double re_y_stable = 0.0;
  std::complex<double> v_ratio;  // V0/V
  bool pole = false;
};

template <typename Scalar>
using Abcd = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

// ---- chain matrices ----------------------------------------------------------

/// Chain (ABCD) matrix of a line section at angular frequency omega.
template <typename Scalar = double>
Abcd<Scalar> segment_abcd(const TLSegment& seg, Scalar omega) {
  using C = std::complex<Scalar>;
  if (!std::isfinite(static_cast<double>(omega)) || !std::isfinite(seg.z0) ||
      !std::isfinite(seg.length) || !std::isfinite(seg.phase_velocity) || !std::isfinite(seg.loss))
    throw DomainError("segment_abcd: non-finite input");
  if (!(omega > Scalar(0))) throw DomainError("segment_abcd: omega must be positive");
  const Scalar z0 = static_cast<Scalar>(seg.z0);
  const C gl = C(static_cast<Scalar>(seg.loss * seg.length),
                 omega * static_cast<Scalar>(seg.length / seg.phase_velocity));
  const C ch = std::cosh(gl);
  const C sh = std::sinh(gl);
  Abcd<Scalar> m;
  m << ch, z0 * sh, sh / z0, ch;
  return m;
}

/// Ordered product m[0] * m[1] * ... .
template <typename Scalar = double>
Abcd<Scalar> cascade(std::span<const Abcd<Scalar>> matrices) {
  if (matrices.empty()) throw UsageError("cascade: empty matrix list");
  Abcd<Scalar> out = matrices.front();
  for (std::size_t k = 1; k < matrices.size(); ++k) out = out * matrices[k];
  return out;
}

/// Series impedance and shunt admittance elements.
template <typename Scalar = double>
Abcd<Scalar> series_abcd(std::complex<Scalar> z) {
  Abcd<Scalar> m;
  m << Scalar(1), z, Scalar(0), Scalar(1);
  return m;
}
template <typename Scalar = double>
Abcd<Scalar> shunt_abcd(std::complex<Scalar> y) {
  Abcd<Scalar> m;
  m << Scalar(1), Scalar(0), y, Scalar(1);
  return m;
}

/// Input admittance of a chain of segments terminated by `load` (open by default).
std::complex<double> line_input_admittance(std::span<const TLSegment> segments, double omega,
                                           std::complex<double> load = {0.0, 0.0});

// ---- network quantities ------------------------------------------------------

/// Admittance seen by the junction. Re[Y] is also computed from the output
/// port voltage, Re[Y] = |V0/V|^2/Z0, which stays accurate near the notch.
AdmittanceResult junction_admittance(const NetworkSpec& net, double omega);

/// Gamma_ex(omega) from Re[Y] in rad/s. Throws PoleError at a network pole.
double external_coupling_rate(const NetworkSpec& net, double omega);
double external_coupling_rate(const NetworkSpec& net, double omega, ScalingMode mode);

/// (g/Delta)^2 kappa_ex; all arguments in the same (angular) units.
double single_mode_rate(double g, double delta, double kappa_ex);

struct NotchSearch {
  int grid_points = 2001;
  double relative_tolerance = 1e-9;
  /// A minimum counts as a notch when it lies this far below its bracketing samples.
  double depth_ratio = 1e-3;
};

/// Frequency (rad/s) of the deepest Re[Y] notch inside the band, if any.
std::optional<double> find_notch(const NetworkSpec& net, double omega_lo, double omega_hi,
                                 const NotchSearch& search = {});

/// Coupler distance from the far open end (m) minimising Gamma_ex(omega_target).
double optimize_coupler_position(const NetworkSpec& net, double omega_target,
                                 int grid_points = 2001);

/// S11 at the output port, looking into the coupling capacitor. The
/// junction node is left open (no junction inductance).
std::complex<double> port_reflection(const NetworkSpec& net, double omega);

struct ModeParams {
  double omega_r = 0.0;   // rad/s
  double kappa_ex = 0.0;  // rad/s
  double fit_rms = 0.0;
};

/// Fundamental resonance seen from the output port, from a single-pole fit
/// of the network S11. Throws FitError when the fit quality is poor.
ModeParams resonator_mode_params(const NetworkSpec& net);

/// Suppression ratio single_mode_rate/Gamma_ex on a uniform grid in Hz.
struct SuppressionSpectrum {
  std::vector<double> freqs;         // Hz
  std::vector<double> gamma_ex;      // Gamma_ex/2pi in Hz
  std::vector<double> single_mode;   // Gamma'_ex/2pi in Hz
  std::vector<double> ratio;
  std::vector<bool> valid;           // false near omega_r or at network poles

  ComplexTrace ratio_trace() const;
};

SuppressionSpectrum suppression_spectrum(const NetworkSpec& net, const DeviceParams& device,
                                         double f_lo, double f_hi, int points);

/// Contiguous band (Hz) around `f_center` where ratio stays above `threshold`.
std::pair<double, double> band_above(const SuppressionSpectrum& s, double f_center, double threshold);

/// Adjusts line length, coupler position, C_c, C_q, C and E_J of `base` so
/// that the network reproduces omega_r, kappa_ex and a notch at omega_eg,
/// with C from the anharmonicity and C_q from the lumped estimate of g.
NetworkSpec tune_to_device(const NetworkSpec& base, const DeviceParams& device);

}  // namespace purcell
