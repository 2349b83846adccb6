#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "purcell/spectra.hpp"

namespace purcell {

using CMatrix = Eigen::MatrixXcd;
using SparseOp = Eigen::SparseMatrix<std::complex<double>>;

enum class DephasingSource { echo, ramsey };

struct Truncation {
  int n_transmon = 4;
  int n_fock = 10;
  DephasingSource dephasing = DephasingSource::echo;
  /// Keep only cavity-like transitions of the cavity decay operator in the
  /// dressed basis, so the qubit does not inherit single-mode Purcell decay.
  bool filter_purcell = true;
  /// Largest transmon drive amplitude (Hz) the model will see, for the
  /// cutoff check. Zero skips the check.
  double drive_amplitude_hint = 0.0;
  /// Largest expected mean photon number, for the cavity cutoff check.
  double photon_hint = 0.0;
};

/// Duffing transmon (levels n omega_eg + alpha n(n-1)/2) exchange-coupled
/// to a single cavity mode. Frequencies in Hz, times in seconds. The
/// frequencies are bare Hamiltonian parameters; see dressed_spectrum().
struct LindbladModel {
  int n_transmon = 4;
  int n_fock = 10;
  double omega_eg = 0.0;
  double alpha = 0.0;
  double omega_r = 0.0;
  double g = 0.0;
  double kappa_ex = 0.0;
  double t1 = 0.0;
  double t1f = 0.0;
  double gamma_phi = 0.0;  // s^-1
  double r_th = 0.0;
  bool filter_purcell = true;
  std::vector<std::string> warnings;

  int dim() const { return n_transmon * n_fock; }
  int index(int level, int photons) const { return level * n_fock + photons; }
  void validate() const;

  /// Transmon lowering b and cavity lowering a on the product space.
  SparseOp transmon_lowering() const;
  SparseOp cavity_lowering() const;
  /// Excitation number b'b + a'a.
  SparseOp excitation_number() const;
  /// Undriven Hamiltonian in rad/s, in the frame rotating at frame_hz per excitation.
  SparseOp hamiltonian(double frame_hz = 0.0) const;
  /// Collapse operators with rates folded in (units sqrt(s^-1)).
  std::vector<SparseOp> collapse_operators() const;
};

LindbladModel build_model(const DeviceParams& device, const Truncation& truncation = {});

// ---- dressed states --------------------------------------------------------

struct DressedSpectrum {
  Eigen::VectorXd energies;  // rad/s, lab frame
  CMatrix vectors;           // columns are eigenstates
  /// labels[k] = bare index with the largest overlap with eigenstate k.
  std::vector<int> labels;
  /// Column of the eigenstate carrying each bare label.
  std::vector<int> state_of_label;

  CMatrix dressed_state(int bare_index) const;
};

DressedSpectrum dressed_spectrum(const LindbladModel& model);

/// Transition frequency (Hz) between dressed states labelled by bare
/// (level, photons) pairs.
double dressed_frequency(const LindbladModel& model, int level_from, int photons_from,
                         int level_to, int photons_to);

/// 2 chi (Hz) from the dressed spectrum.
double dressed_dispersive_shift(const LindbladModel& model);

// ---- pulses ----------------------------------------------------------------

enum class Envelope { square, gaussian, flat_top };
enum class DriveTarget { transmon, cavity };

/// One drive tone. Hamiltonian term (amplitude/2) f(t) (X' e^{-i w t} + h.c.)
/// with X = b or a, all in angular units internally.
struct Pulse {
  double carrier = 0.0;    // Hz
  Envelope envelope = Envelope::square;
  double amplitude = 0.0;  // Hz
  double start = 0.0;      // s
  double duration = 0.0;   // s
  DriveTarget target = DriveTarget::transmon;
  /// Gaussian sigma or flat-top ramp length (s). Defaults: duration/4, duration/10.
  std::optional<double> shape;

  double envelope_at(double t) const;
  double end() const { return start + duration; }
};

struct PulseSequence {
  std::vector<Pulse> pulses;

  void validate() const;
  /// Index pairs of pulses that overlap in time.
  std::vector<std::pair<int, int>> overlaps() const;
};

// ---- evolution -------------------------------------------------------------

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double trace_tolerance = 1e-9;
  /// Rotating-frame frequency per excitation (Hz). Defaults to the first
  /// pulse carrier, or omega_eg without pulses.
  std::optional<double> frame;
  /// Time of rho0; drive phases and envelopes use absolute time.
  double t_start = 0.0;
  bool keep_states = false;
  long max_steps = 50'000'000;
  double min_step = 1e-22;
};

struct SimResult {
  std::vector<double> times;
  /// populations(k, n): transmon level n at times[k], in the dressed basis.
  Eigen::MatrixXd populations;
  std::vector<std::complex<double>> cavity_amplitude;
  std::vector<std::complex<double>> output_records;
  std::vector<CMatrix> states;  // rotating frame, only with keep_states
  std::vector<std::string> warnings;
  long steps = 0;
};

/// Adaptive Dormand-Prince integration of the master equation.
SimResult evolve_lindblad(const LindbladModel& model, const PulseSequence& seq,
                          const CMatrix& rho0, const std::vector<double>& t_grid,
                          const EvolveOptions& options = {});

/// Pure-state density matrix of a dressed eigenstate.
CMatrix dressed_density(const LindbladModel& model, int level, int photons = 0);

/// Per-level transmon populations of rho in the dressed basis.
Eigen::VectorXd dressed_populations(const LindbladModel& model, const CMatrix& rho);

// ---- experiments -----------------------------------------------------------

struct RabiResult {
  double rabi_freq = 0.0;  // Hz
  double decay_time = 0.0;
  std::vector<double> durations;
  std::vector<double> population;  // target-level population vs duration
};

/// Square drive on the ge (from |g>) or ef (from |e>) transition; fits a
/// damped cosine to the upper-level population. Throws FitError (whose
/// message carries the raw trace) if the fit fails.
RabiResult simulate_rabi(const LindbladModel& model, double omega_d, double amplitude,
                         const std::vector<double>& durations, Transition transition);

struct StarkResult {
  double stark_shift = 0.0;  // Hz, signed
  double shift_per_watt = 0.0;
  double precondition_ratio = 0.0;
  std::vector<std::string> warnings;
};

/// Ramsey-style phase tracking of the ge coherence under a continuous
/// off-resonant transmon drive; returns the frequency change relative to
/// the undriven case.
StarkResult simulate_stark_ramsey(const LindbladModel& model, double omega_d, double amplitude,
                                  double power_proxy);

struct ProbeSpec {
  double carrier = 0.0;    // Hz
  double amplitude = 0.0;  // input field, sqrt(photons/s)
  double duration = 0.0;   // s
  double record_until = 0.0;  // s, defaults to duration + 10/kappa
  int samples = 0;            // defaults to 1 per ns
};

enum class QubitBranch { g, e };

/// Semiclassical cavity response dalpha/dt = -(i delta + kappa/2) alpha +
/// sqrt(kappa) a_in for the chosen qubit branch, with out = in - sqrt(kappa) alpha.
/// Branch cavity frequencies come from the dressed spectrum.
SimResult simulate_probe_reflection(const LindbladModel& model, const ProbeSpec& probe,
                                    QubitBranch branch);

struct PhotonNumbers {
  double n_bar = 0.0;
  double n_crit = 0.0;
};

/// |alpha_ss|^2 for an input amplitude and probe-cavity detuning (Hz), and
/// Delta^2/4g^2 from the model's bare parameters.
PhotonNumbers steady_state_photons(const LindbladModel& model, double probe_amplitude,
                                   double detuning);
double probe_amplitude_for_photons(const LindbladModel& model, double n_bar, double detuning);

// ---- readout ---------------------------------------------------------------

struct DiscriminationOptions {
  /// Single-pole amplifier bandwidth (Hz); zero disables the filter.
  double lowpass_bandwidth = 0.0;
  int bins = 100;
};

struct Discrimination {
  std::vector<double> bin_centers;
  std::vector<long> counts_g, counts_e;
  double threshold = 0.0;
  double p_e_given_g = 0.0;
  double p_g_given_e = 0.0;
  /// Gaussian prediction Phi(-|w|/(2 sigma)) for both error rates.
  double theory_error = 0.0;
  std::vector<double> weights;
};

Discrimination readout_discrimination(const SimResult& waveform_g, const SimResult& waveform_e,
                                      double noise_sigma, long n_shots, std::uint64_t seed,
                                      const DiscriminationOptions& options = {});

/// Counter-based generator: the k-th standard normal draw of a stream.
double normal_draw(std::uint64_t seed, std::uint64_t counter);

// ---- reset -----------------------------------------------------------------

struct ResetDrive {
  double frequency = 0.0;  // Hz
  double amplitude = 0.0;  // Hz
};

struct ResetOptions {
  double ramp = 5e-9;  // cosine ramp at each pulse edge
  EvolveOptions evolve;
};

/// Frequencies for the f0-g1 tone (minimum dressed f0/g1 splitting in the
/// frame of that tone) and the e0-f0 tone (e0 to the centre of the f0/g1
/// doublet), at the given amplitudes.
std::pair<ResetDrive, ResetDrive> calibrate_reset_drives(const LindbladModel& model,
                                                         double f0g1_amplitude,
                                                         double e0f0_amplitude);

struct ResetCurve {
  std::vector<double> durations;
  std::vector<double> residual;  // 1 - P(g0), dressed basis, after the drives end
  std::vector<std::string> warnings;
};

/// Both tones applied together for each duration (with ramps), starting
/// from the dressed |level, 0>. Integrated in the frame of the f0-g1 tone.
ResetCurve simulate_reset(const LindbladModel& model, const ResetDrive& f0g1,
                          const ResetDrive& e0f0, const std::vector<double>& durations,
                          int initial_level, const ResetOptions& options = {});

}  // namespace purcell
