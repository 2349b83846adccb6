#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "purcell/dynamics.hpp"
#include "purcell/errors.hpp"
#include "purcell/units.hpp"

using namespace purcell;

namespace {

LindbladModel device_model(int n_transmon = 4, int n_fock = 3) {
  Truncation t;
  t.n_transmon = n_transmon;
  t.n_fock = n_fock;
  return build_model(DeviceParams{}, t);
}

// Qubit alone: two levels, no coupling.
LindbladModel bare_qubit() {
  LindbladModel m = device_model(2, 2);
  m.g = 0.0;
  return m;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int k = 0; k < n; ++k) v[k] = a + (b - a) * k / (n - 1);
  return v;
}

double min_eigenvalue(const CMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("model assembly") {
  const LindbladModel m = device_model(4, 10);
  CHECK(m.dim() == 40);
  const CMatrix h = CMatrix(m.hamiltonian());
  CHECK((h - h.adjoint()).norm() <= 1e-12 * h.norm());
  for (const auto& c : m.collapse_operators()) CHECK(CMatrix(c).allFinite());

  // Dispersive shift from the spectrum against the perturbative formula.
  const DeviceParams d;
  const double alpha = d.omega_fe - d.omega_eg, delta = d.omega_eg - d.omega_r;
  const double chi2 = 2.0 * d.g * d.g * alpha / (delta * (delta + alpha));
  CHECK(dressed_dispersive_shift(m) == doctest::Approx(chi2).epsilon(0.05));

  LindbladModel bad = m;
  bad.n_transmon = 6;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("free decay and detailed balance") {
  const LindbladModel m = bare_qubit();
  const double p_ss = m.r_th / (1.0 + m.r_th);
  const auto times = linspace(0.0, 40e-6, 21);
  const SimResult r = evolve_lindblad(m, {}, dressed_density(m, 1), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double ref = p_ss + (1.0 - p_ss) * std::exp(-times[k] / m.t1);
    CHECK(std::abs(r.populations(k, 1) - ref) < 1e-4);
  }
  const SimResult late = evolve_lindblad(m, {}, dressed_density(m, 0), {0.0, 12.0 * m.t1});
  CHECK(late.populations(1, 1) / late.populations(1, 0) == doctest::Approx(m.r_th).epsilon(0.02));
}

TEST_CASE("two-level Rabi matches the Bloch equations") {
  const LindbladModel m = bare_qubit();
  for (double detuning : {0.0, 4e6}) {
    const double rabi = 10e6;
    PulseSequence seq;
    seq.pulses.push_back({m.omega_eg + detuning, Envelope::square, rabi, 0.0, 300e-9});
    const auto times = linspace(0.0, 300e-9, 61);
    const SimResult r = evolve_lindblad(m, seq, dressed_density(m, 0), times);
    double sup = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double ref = oracle::bloch_excited(rabi, detuning, 1.0 / m.t1, m.gamma_phi, times[k], 4000);
      // Thermal upward decay adds r_th/(1+r_th) (1 - e^{-t/T1}) at most.
      sup = std::max(sup, std::abs(r.populations(k, 1) - ref));
    }
    CHECK(sup < 1e-3);
  }
}

TEST_CASE("density matrix health over random models") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    DeviceParams d;
    d.g = 50e6 + 200e6 * u(rng);
    d.kappa_ex = 5e6 + 50e6 * u(rng);
    d.t1 = 2e-6 + 20e-6 * u(rng);
    d.r_th = 0.3 * u(rng);
    Truncation t;
    t.n_transmon = 2 + trial % 3;
    t.n_fock = 2 + trial % 2;
    const LindbladModel m = build_model(d, t);
    PulseSequence seq;
    const auto env = static_cast<Envelope>(trial % 3);
    seq.pulses.push_back({d.omega_eg + 20e6 * (u(rng) - 0.5), env, 5e6 + 20e6 * u(rng), 5e-9, 60e-9});
    seq.pulses.push_back({d.omega_r + 10e6 * (u(rng) - 0.5), Envelope::gaussian, 5e6 * u(rng), 30e-9, 40e-9,
                          DriveTarget::cavity});
    EvolveOptions opt;
    opt.keep_states = true;
    const SimResult r = evolve_lindblad(m, seq, dressed_density(m, trial % 2), linspace(0.0, 100e-9, 21), opt);
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      CHECK(std::abs(r.states[k].trace() - 1.0) < 1e-9);
      CHECK(min_eigenvalue(r.states[k]) >= -1e-7);
      CHECK(std::abs(r.populations.row(k).sum() - 1.0) < 1e-6);
      CHECK(r.populations.row(k).minCoeff() >= -1e-7);
    }
  }
}

TEST_CASE("frame choice does not change populations") {
  const LindbladModel m = device_model(3, 3);
  PulseSequence seq;
  seq.pulses.push_back({dressed_frequency(m, 0, 0, 1, 0), Envelope::gaussian, 15e6, 0.0, 80e-9});
  const auto times = linspace(0.0, 100e-9, 11);
  EvolveOptions a, b;
  a.frame = seq.pulses[0].carrier;
  b.frame = seq.pulses[0].carrier + 60e6;
  const SimResult ra = evolve_lindblad(m, seq, dressed_density(m, 0), times, a);
  const SimResult rb = evolve_lindblad(m, seq, dressed_density(m, 0), times, b);
  CHECK((ra.populations - rb.populations).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Rabi frequencies") {
  const LindbladModel m = device_model(4, 3);
  const double f_ge = dressed_frequency(m, 0, 0, 1, 0);
  const double f_ef = dressed_frequency(m, 1, 0, 2, 0);
  const auto durations = linspace(0.0, 200e-9, 81);
  const double omega = 20e6;
  const RabiResult ge = simulate_rabi(m, f_ge, omega, durations, Transition::ge);
  CHECK(ge.rabi_freq == doctest::Approx(omega).epsilon(0.01));
  const RabiResult ef = simulate_rabi(m, f_ef, omega, durations, Transition::ef);
  CHECK(ef.rabi_freq / ge.rabi_freq == doctest::Approx(std::sqrt(2.0)).epsilon(0.02));
  CHECK(omega_from_rabi(ef.rabi_freq, Transition::ef) == doctest::Approx(omega).epsilon(0.02));

  const double delta = 8e6;
  const RabiResult off = simulate_rabi(m, f_ge + delta, omega, durations, Transition::ge);
  CHECK(off.rabi_freq == doctest::Approx(std::hypot(ge.rabi_freq, delta)).epsilon(0.02));
}

TEST_CASE("ac Stark shift") {
  Truncation t;
  t.n_transmon = 4;
  t.n_fock = 2;
  const LindbladModel m = build_model(DeviceParams{}, t);
  const double f_eg = dressed_frequency(m, 0, 0, 1, 0), f_fe = dressed_frequency(m, 1, 0, 2, 0);
  CHECK(simulate_stark_ramsey(m, f_eg + 150e6, 0.0, 0.0).stark_shift == 0.0);

  // Sign from perturbation theory; the shift changes sign only between the
  // lines. The midpoint itself is the two-photon g-f resonance, so stay off it.
  for (double wd : {f_eg + 150e6, f_eg - 100e6, f_fe - 300e6}) {
    const StarkResult s = simulate_stark_ramsey(m, wd, 20e6, 1e-12);
    const double expected = stark_shift_from_omega(wd, f_eg, f_fe, 20e6);
    CHECK(std::signbit(s.stark_shift) == std::signbit(expected));
    CHECK(omega_from_stark(wd, f_eg, f_fe, s.stark_shift) == doctest::Approx(20e6).epsilon(0.05));
    CHECK(s.shift_per_watt == doctest::Approx(s.stark_shift / 1e-12));
  }
  CHECK_THROWS_AS(simulate_stark_ramsey(m, f_eg + 30e6, 20e6, 0.0), DomainError);
}

TEST_CASE("probe reflection") {
  const LindbladModel m = device_model(4, 3);
  const double kappa = to_angular(m.kappa_ex);
  const double f_g = dressed_frequency(m, 0, 0, 0, 1), f_e = dressed_frequency(m, 1, 0, 1, 1);
  ProbeSpec p;
  p.carrier = 0.5 * (f_g + f_e);
  p.amplitude = probe_amplitude_for_photons(m, 35.0, p.carrier - f_g);
  p.duration = 120e-9;
  p.record_until = 200e-9;
  p.samples = 2001;
  const SimResult g = simulate_probe_reflection(m, p, QubitBranch::g);
  const SimResult e = simulate_probe_reflection(m, p, QubitBranch::e);

  // Steady-state branch phase difference, 2 arctan(2chi/kappa).
  const std::size_t ss = 1190;  // 119 ns
  const double diff = std::abs(std::remainder(std::arg(g.cavity_amplitude[ss]) - std::arg(e.cavity_amplitude[ss]), 2 * std::numbers::pi));
  CHECK(diff == doctest::Approx(2 * std::atan(std::abs(to_angular(f_g - f_e)) / kappa)).epsilon(1e-6));

  // Ring-down after the drive: energy factor exp(-kappa t).
  const std::size_t off = 1200, later = 1800;  // 120 ns and 180 ns
  const double factor = std::norm(g.cavity_amplitude[later]) / std::norm(g.cavity_amplitude[off]);
  CHECK(factor == doctest::Approx(std::exp(-kappa * 60e-9)).epsilon(1e-6));
  CHECK(factor < 1e-7);

  ProbeSpec zero = p;
  zero.amplitude = 0.0;
  const SimResult z = simulate_probe_reflection(m, zero, QubitBranch::e);
  for (std::size_t k = 0; k < z.times.size(); k += 100) {
    CHECK(std::abs(z.cavity_amplitude[k]) == 0.0);
    CHECK(std::abs(z.output_records[k]) == 0.0);
  }
}

TEST_CASE("branch model against the master equation") {
  Truncation t;
  t.n_transmon = 3;
  t.n_fock = 5;
  const LindbladModel m = build_model(DeviceParams{}, t);
  const double f_g = dressed_frequency(m, 0, 0, 0, 1);
  const double kappa = to_angular(m.kappa_ex);
  const double drive = 0.3 * m.kappa_ex;  // Hz, weak: n_bar well below one
  PulseSequence seq;
  seq.pulses.push_back({f_g + 10e6, Envelope::square, drive, 0.0, 150e-9, DriveTarget::cavity});
  const SimResult full = evolve_lindblad(m, seq, dressed_density(m, 0), {0.0, 140e-9});

  ProbeSpec p;
  p.carrier = f_g + 10e6;
  p.amplitude = to_angular(drive) / (2.0 * std::sqrt(kappa));
  p.duration = 150e-9;
  p.record_until = 150e-9;
  p.samples = 151;
  const SimResult branch = simulate_probe_reflection(m, p, QubitBranch::g);
  const double n_semi = std::norm(branch.cavity_amplitude[140]);
  CHECK(n_semi < 1.0);
  CHECK(std::abs(full.cavity_amplitude[1]) == doctest::Approx(std::abs(branch.cavity_amplitude[140])).epsilon(0.05));
}

TEST_CASE("photon numbers") {
  const LindbladModel m = device_model();
  const PhotonNumbers zero = steady_state_photons(m, 0.0, 0.0);
  CHECK(zero.n_bar == 0.0);
  CHECK(zero.n_crit == doctest::Approx(2191.6 * 2191.6 / (4 * 224.0 * 224.0)).epsilon(1e-3));
  CHECK(zero.n_crit == doctest::Approx(24).epsilon(0.5 / 24));
  const double amp = probe_amplitude_for_photons(m, 35.0, 3e6);
  const PhotonNumbers p = steady_state_photons(m, amp, 3e6);
  CHECK(p.n_bar == doctest::Approx(35.0).epsilon(1e-12));
  CHECK(p.n_bar / p.n_crit == doctest::Approx(1.5).epsilon(0.05 / 1.5));
}

TEST_CASE("readout discrimination") {
  const LindbladModel m = device_model(4, 3);
  const double f_g = dressed_frequency(m, 0, 0, 0, 1), f_e = dressed_frequency(m, 1, 0, 1, 1);
  ProbeSpec p;
  p.carrier = 0.5 * (f_g + f_e);
  p.amplitude = probe_amplitude_for_photons(m, 35.0, p.carrier - f_g);
  p.duration = 120e-9;
  p.record_until = 120e-9;
  p.samples = 121;
  const SimResult g = simulate_probe_reflection(m, p, QubitBranch::g);
  const SimResult e = simulate_probe_reflection(m, p, QubitBranch::e);

  const Discrimination clean = readout_discrimination(g, e, 0.0, 1000, 1);
  CHECK(clean.p_e_given_g == 0.0);
  CHECK(clean.p_g_given_e == 0.0);
  CHECK(clean.threshold == 0.0);

  // Pick the noise so the Gaussian prediction is about 5%.
  double lo = 1.0, hi = 1e6;
  for (int k = 0; k < 80; ++k) {
    const double mid = std::sqrt(lo * hi);
    (readout_discrimination(g, e, mid, 1, 1).theory_error < 0.05 ? lo : hi) = mid;
  }
  const long shots = 20000;
  const Discrimination d = readout_discrimination(g, e, lo, shots, 42);
  const double q = d.theory_error;
  CHECK(q == doctest::Approx(0.05).epsilon(1e-3));
  const double sigma = std::sqrt(q * (1 - q) / shots);
  CHECK(std::abs(d.p_e_given_g - q) < 3 * sigma);
  CHECK(std::abs(d.p_g_given_e - q) < 3 * sigma);
  long total = 0;
  for (long c : d.counts_g) total += c;
  CHECK(total == shots);

  const Discrimination again = readout_discrimination(g, e, lo, shots, 42);
  CHECK(again.counts_g == d.counts_g);
  CHECK(again.counts_e == d.counts_e);
  const Discrimination other = readout_discrimination(g, e, lo, shots, 43);
  CHECK(other.counts_g != d.counts_g);

  double mean = 0.0, var = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double x = normal_draw(5, k);
    mean += x;
    var += x * x;
  }
  CHECK(std::abs(mean / 1e5) < 0.015);
  CHECK(std::abs(var / 1e5 - 1.0) < 0.02);
}

TEST_CASE("reset without drives follows T1") {
  const LindbladModel m = device_model(4, 3);
  const auto durations = linspace(0.0, 200e-9, 5);
  const ResetDrive none_a{m.omega_eg, 0.0}, none_b{m.omega_eg, 0.0};
  const ResetCurve from_e = simulate_reset(m, none_a, none_b, durations, 1);
  const double p_ss = m.r_th / (1.0 + m.r_th);
  for (std::size_t k = 0; k < durations.size(); ++k) {
    // Ramps included: the drive window is the duration.
    const double ref = p_ss + (1.0 - p_ss) * std::exp(-durations[k] / m.t1);
    CHECK(std::abs(from_e.residual[k] - ref) < 1e-3);
  }
}

TEST_CASE("reset from g stays near the floor") {
  const LindbladModel m = device_model(4, 3);
  const auto [f0g1, e0f0] = calibrate_reset_drives(m, 1.6e9, 10e6);
  const std::vector<double> durations{50e-9, 150e-9};
  const ResetCurve c = simulate_reset(m, f0g1, e0f0, durations, 0);
  for (double r : c.residual) CHECK(r < 0.01);
}

TEST_CASE("reset is eventually monotone without leakage") {
  const LindbladModel m = device_model(3, 3);
  const auto [f0g1, e0f0] = calibrate_reset_drives(m, 1.6e9, 10e6);
  const std::vector<double> durations{100e-9, 150e-9, 200e-9, 250e-9, 300e-9};
  const ResetCurve c = simulate_reset(m, f0g1, e0f0, durations, 2);
  for (std::size_t k = 1; k < c.residual.size(); ++k) CHECK(c.residual[k] < c.residual[k - 1]);
  CHECK(c.residual.back() < 0.01);
}

TEST_CASE("reset calibration follows the resonance") {
  // A larger cutoff opens a second near-crossing of g1 about 1 GHz higher.
  const LindbladModel m4 = device_model(4, 3), m5 = device_model(5, 3);
  const auto [a4, b4] = calibrate_reset_drives(m4, 1.2e9, 10e6);
  const auto [a5, b5] = calibrate_reset_drives(m5, 1.2e9, 10e6);
  CHECK(std::abs(a5.frequency - a4.frequency) < 200e6);
  const ResetCurve c = simulate_reset(m5, a5, b5, {200e-9}, 2);
  CHECK(c.residual.back() < 0.01);
}
