#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "purcell/errors.hpp"
#include "purcell/spectra.hpp"
#include "purcell/units.hpp"

using namespace purcell;
using cplx = std::complex<double>;

TEST_CASE("resonator ratio model") {
  const double wr = 10.5106e9, k = 45.7e6, chi2 = -6.9e6;
  CHECK(std::abs(s11_single_pole(wr, wr, k) - cplx(-1.0, 0.0)) < 1e-15);
  CHECK(std::abs(s11_resonator_ratio_model(wr + 1e15, wr, k, chi2) - 1.0) < 1e-6);
  CHECK(std::abs(s11_resonator_ratio_model(wr - 1e15, wr, k, chi2) - 1.0) < 1e-6);

  // Direct arithmetic at omega = omega_r: S^g = -1, S^e = 1 - k/(k/2 - i 2chi).
  const cplx se = 1.0 - k / cplx(k / 2, -chi2);
  const cplx ref = -1.0 / se;
  CHECK(std::abs(s11_resonator_ratio_model(wr, wr, k, chi2) - ref) < 1e-14);
  CHECK_THROWS_AS(s11_resonator_ratio_model(wr, wr, 0.0, chi2), DomainError);
}

TEST_CASE("qubit reflection model") {
  const double weg = 8.319e9;
  CHECK(std::abs(s11_qubit_model(weg, weg, 1.33e3, 38e3, 0.0, 0.0) - (1.0 - 1.33 / 38.0)) < 1e-15);
  CHECK(std::abs(s11_qubit_model(weg + 1e9, weg, 1.33e3, 38e3, 0.7, 0.19) - 1.0) < 1e-6);

  // Table II values with r_th = 0.19.
  const double tilde = 1.33e3 * (1 - 0.19) / (1 + 0.19);
  const double ref = 1.0 - tilde / 38e3 / 1.7;
  const double mag = std::abs(s11_qubit_model(weg, weg, 1.33e3, 38e3, 0.7, 0.19));
  CHECK(mag == doctest::Approx(ref).epsilon(1e-14));
  CHECK(mag == doctest::Approx(0.986).epsilon(5e-4));

  CHECK(thermal_reduction(0.0) == 1.0);
  for (double d : {1e3, 2e4, 7e4, 3e5})
    CHECK(std::abs(s11_qubit_model(weg + d, weg, 1.33e3, 38e3, 0.7, 0.19)) ==
          doctest::Approx(std::abs(s11_qubit_model(weg - d, weg, 1.33e3, 38e3, 0.7, 0.19))).epsilon(1e-14));
  CHECK_THROWS_AS(s11_qubit_model(weg, weg, 1.33e3, 0.0, 0.7, 0.19), DomainError);
}

TEST_CASE("resonator fit roundtrip") {
  const auto c = oracle::resonator_roundtrips(100);
  CHECK(c.failed == 0);
  CHECK(c.within >= 95);
}

TEST_CASE("qubit fit roundtrip") {
  const auto c = oracle::qubit_roundtrips(100);
  CHECK(c.failed == 0);
  CHECK(c.within >= 95);

  const DeviceParams d;
  const auto f = fit_qubit_reflection(oracle::qubit_trace(d, {}, 1e-4, 1), d.r_th);
  CHECK(f.value("t1ex") == doctest::Approx(1.0 / (kTwoPi * f.value("gamma_ex"))).epsilon(1e-12));
  CHECK(f.value("gamma_ex_tilde") == doctest::Approx(f.value("gamma_ex") * thermal_reduction(d.r_th)).epsilon(1e-12));

  // r_th = 0: the reduced rate is the rate.
  DeviceParams cold = d;
  cold.r_th = 0.0;
  const auto g = fit_qubit_reflection(oracle::qubit_trace(cold, {}, 1e-4, 2), 0.0);
  CHECK(g.value("gamma_ex_tilde") == g.value("gamma_ex"));
}

TEST_CASE("fit error decreases with noise") {
  const DeviceParams d;
  Nuisance n;
  n.scale = 0.8;
  n.phase = 1.1;
  n.delay = 7e-9;
  double prev_r = 1e300, prev_q = 1e300;
  for (double noise : {1e-2, 1e-3, 1e-4}) {
    const auto fr = fit_resonator_ratio(oracle::resonator_trace(d, n, noise, 9));
    const double er = std::abs(fr.value("omega_r") - d.omega_r) / d.kappa_ex + std::abs(fr.value("kappa_ex") / d.kappa_ex - 1) +
                      std::abs(fr.value("two_chi") - d.two_chi) / d.kappa_ex;
    const auto fq = fit_qubit_reflection(oracle::qubit_trace(d, n, noise / 5, 9), d.r_th);
    const double eq = std::abs(fq.value("omega_eg") - d.omega_eg) / d.gamma2 + std::abs(fq.value("gamma_ex") / d.gamma_ex_q - 1) +
                      std::abs(fq.value("gamma2") / d.gamma2 - 1) + std::abs(fq.value("s") - d.saturation);
    CHECK(er < prev_r);
    CHECK(eq < prev_q);
    prev_r = er;
    prev_q = eq;
  }
  CHECK(prev_r < 1e-3);
  CHECK(prev_q < 1e-2);
}

TEST_CASE("electrical delay and nuisance invariance") {
  const DeviceParams d;
  Nuisance n;
  n.delay = 12e-9;
  n.scale = 1.3;
  n.phase = -0.4;
  const auto f = fit_resonator_ratio(oracle::resonator_trace(d, n, 0.01, 31));
  CHECK(std::abs(f.nuisance.delay - n.delay) <= 3.0 * f.nuisance.delay_sigma);

  const auto base = fit_resonator_ratio(oracle::resonator_trace(d, {}, 0.01, 32));
  // Same noise realisation with an extra background applied on top.
  ComplexTrace shifted = oracle::resonator_trace(d, {}, 0.01, 32);
  Nuisance extra;
  extra.scale = 0.3;
  extra.phase = 2.0;
  extra.delay = 4e-9;
  shifted = apply_nuisance(shifted, extra);
  const auto moved = fit_resonator_ratio(shifted);
  for (const char* p : {"omega_r", "kappa_ex", "two_chi"})
    CHECK(std::abs(moved.value(p) - base.value(p)) <= 3.0 * base.sigma(p));
}

TEST_CASE("degenerate dispersive shift") {
  DeviceParams d;
  d.two_chi = 0.0;
  const auto t = oracle::resonator_trace(d, {}, 0.0, 1);
  for (const auto& v : t.values) CHECK(std::abs(v - 1.0) < 1e-15);
  const auto f = fit_resonator_ratio(oracle::resonator_trace(d, {}, 0.01, 2));
  CHECK_FALSE(f.identifiable);
}

TEST_CASE("fit input validation") {
  ComplexTrace t{{1e9}, {cplx(1, 0)}};
  CHECK_THROWS_AS(fit_resonator_ratio(t), UsageError);
  ComplexTrace u{{2e9, 1e9, 3e9}, {1.0, 1.0, 1.0}};
  CHECK_THROWS_AS(fit_qubit_reflection(u, 0.1), UsageError);
}

TEST_CASE("coupling from drive") {
  const double wd = 8.319e9, p = 1e-15;
  CHECK(coupling_from_drive(wd, 0.0, p) == 0.0);
  CHECK(coupling_from_drive(wd, 2e6, p) == doctest::Approx(4.0 * coupling_from_drive(wd, 1e6, p)).epsilon(1e-14));
  const double omega = amplitude_from_coupling(wd, 1.33e3, p);
  CHECK(std::abs(coupling_from_drive(wd, omega, p) / 1.33e3 - 1.0) < 1e-12);
  CHECK_THROWS_AS(coupling_from_drive(wd, 1e6, 0.0), DomainError);

  // Units: evaluate (Omega^2/4) hbar omega_d / P in rad/s and convert back to Hz.
  const double om = kTwoPi * 3e6, w = kTwoPi * wd;
  const double rate_rad = om * om / 4.0 * kHbar * w / p;
  CHECK(coupling_from_drive(wd, 3e6, p) == doctest::Approx(rate_rad / kTwoPi).epsilon(1e-12));
  // Plugging Hz straight into the formula is off by (2 pi)^2.
  const double naive = 3e6 * 3e6 / 4.0 * kHbar * wd / p;
  CHECK(coupling_from_drive(wd, 3e6, p) / naive == doctest::Approx(kTwoPi * kTwoPi).epsilon(1e-12));
}

TEST_CASE("Stark-shift inversion") {
  const double weg = 8.319e9, wfe = 7.935e9;
  CHECK(omega_from_stark(9.0e9, weg, wfe, 0.0) == 0.0);
  for (double wd : {7.5e9, 8.8e9, 9.3e9}) {
    const double shift = stark_shift_from_omega(wd, weg, wfe, 20e6);
    CHECK(omega_from_stark(wd, weg, wfe, shift) == doctest::Approx(20e6).epsilon(1e-12));
    // Independent closed form for the radicand.
    const double rad = 2 * (wfe - wd) * (weg - wd) / (wfe - weg) * shift;
    CHECK(rad == doctest::Approx(20e6 * 20e6).epsilon(1e-12));
  }
  // Between the two lines the shift changes sign relative to outside.
  const double mid = 8.1e9;
  const double s_in = stark_shift_from_omega(mid, weg, wfe, 20e6);
  CHECK_THROWS_AS(omega_from_stark(mid, weg, wfe, -s_in), DomainError);
  CHECK_THROWS_AS(omega_from_stark(weg, weg, wfe, 1e5), DomainError);
}

TEST_CASE("Rabi and dispersive-shift conversions") {
  CHECK(omega_from_rabi(0.0, Transition::ge) == 0.0);
  CHECK(omega_from_rabi(std::sqrt(2.0) * 13e6, Transition::ef) == doctest::Approx(13e6).epsilon(1e-15));
  CHECK(omega_from_rabi(13e6, Transition::ge) == 13e6);

  const double g = g_from_dispersive_shift(-6.9e6, -2191.6e6, -384e6);
  CHECK(g == doctest::Approx(224e6).epsilon(0.01));
  CHECK(g_from_dispersive_shift(0.0, -2191.6e6, -384e6) == 0.0);
  for (double chi2 : {-6.9e6, -1e6, -20e6}) {
    const double gg = g_from_dispersive_shift(chi2, -2191.6e6, -384e6);
    CHECK(std::abs(dispersive_shift(gg, -2191.6e6, -384e6) / chi2 - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(g_from_dispersive_shift(+6.9e6, -2191.6e6, -384e6), DomainError);
  CHECK_THROWS_AS(g_from_dispersive_shift(-6.9e6, 0.0, -384e6), DomainError);
}

TEST_CASE("line attenuation") {
  CHECK(line_attenuation(1e-12, 1e-12) == 0.0);
  CHECK(line_attenuation(1e-14, 1e-12) == doctest::Approx(20.0).epsilon(1e-14));
  CHECK_THROWS_AS(line_attenuation(0.0, 1e-12), DomainError);
  std::vector<double> table;
  for (int i = 0; i <= 20; ++i) table.push_back(60.0 + 0.5 * std::sin(0.3 * i) * std::sin(0.3 * i));
  CHECK(attenuation_is_flat(table, 0.6));
  table.push_back(60.7);
  CHECK_FALSE(attenuation_is_flat(table, 0.6));
}
