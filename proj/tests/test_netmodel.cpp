#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "purcell/io.hpp"
#include "purcell/netmodel.hpp"
#include "purcell/units.hpp"

using namespace purcell;
using cplx = std::complex<double>;

namespace {

constexpr double kV = 1.2e8;
const double kPi = std::numbers::pi;

NetworkSpec uniform_network(double length, double x_c, double c_c = 5e-15) {
  NetworkSpec net;
  net.resonator_segments = {TLSegment{50.0, length, kV, 0.0}};
  net.coupler_position = x_c;
  net.coupler_capacitance = c_c;
  net.output_impedance = 50.0;
  net.qubit_coupling_capacitance = 7.4e-15;
  net.transmon_capacitance = 50.4e-15;
  net.josephson_energy = 24.66e9 * kPlanck;
  return net;
}

NetworkSpec device_like() {
  return io::network_from_json(io::read_json_file(PURCELL_DATA_DIR "/device_like_network.json"));
}

double omega_for_phase(double theta, double length) { return theta * kV / length; }

bool close(cplx a, cplx b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("segment_abcd analytic forms") {
  const TLSegment seg{50.0, 0.01, kV, 0.0};
  SUBCASE("quarter wave") {
    const auto m = segment_abcd(seg, omega_for_phase(kPi / 2, seg.length));
    CHECK(close(m(0, 0), 0.0, 1e-12));
    CHECK(close(m(1, 1), 0.0, 1e-12));
    CHECK(close(m(0, 1), cplx(0, 50.0), 1e-10));
    CHECK(close(m(1, 0), cplx(0, 1.0 / 50.0), 1e-14));
  }
  SUBCASE("half wave") {
    const auto m = segment_abcd(seg, omega_for_phase(kPi, seg.length));
    CHECK(close(m(0, 0), -1.0, 1e-12));
    CHECK(close(m(1, 1), -1.0, 1e-12));
    CHECK(close(m(0, 1), 0.0, 1e-10));
    CHECK(close(m(1, 0), 0.0, 1e-14));
  }
  SUBCASE("zero length") {
    const auto m = segment_abcd(TLSegment{50.0, 0.0, kV, 0.0}, 1e10);
    CHECK((m - Abcd<double>::Identity()).norm() == 0.0);
  }
  SUBCASE("lossy determinant") {
    const auto m = segment_abcd(TLSegment{35.0, 0.02, kV, 3.0}, 4e10);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-12);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(segment_abcd(seg, -1.0), DomainError);
    CHECK_THROWS_AS(segment_abcd(seg, std::nan("")), DomainError);
  }
}

TEST_CASE("cascade") {
  const TLSegment seg{50.0, 0.01, kV, 0.0};
  const double w = omega_for_phase(kPi / 2, seg.length);
  const auto q = segment_abcd(seg, w);
  const std::array<Abcd<double>, 2> qq{q, q};
  const auto half = cascade<double>(qq);
  // Independent 2x2 product.
  Abcd<double> ref;
  ref(0, 0) = q(0, 0) * q(0, 0) + q(0, 1) * q(1, 0);
  ref(0, 1) = q(0, 0) * q(0, 1) + q(0, 1) * q(1, 1);
  ref(1, 0) = q(1, 0) * q(0, 0) + q(1, 1) * q(1, 0);
  ref(1, 1) = q(1, 0) * q(0, 1) + q(1, 1) * q(1, 1);
  CHECK((half - ref).norm() < 1e-12);
  CHECK(close(half(0, 0), -1.0, 1e-12));

  const std::array<Abcd<double>, 2> im{Abcd<double>::Identity(), q};
  CHECK((cascade<double>(im) - q).norm() == 0.0);
  CHECK_THROWS_AS(cascade<double>(std::span<const Abcd<double>>{}), UsageError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.001, 0.02);
  std::vector<Abcd<double>> chain;
  for (int k = 0; k < 6; ++k) chain.push_back(segment_abcd(TLSegment{20 + 60 * u(rng) / 0.02, u(rng), kV, 0.0}, 3e10));
  chain.push_back(series_abcd<double>(cplx(0, -120.0)));
  chain.push_back(shunt_abcd<double>(cplx(0, 0.003)));
  CHECK(std::abs(cascade<double>(chain).determinant() - 1.0) < 1e-12);
}

TEST_CASE("open stub admittance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.002, 0.02), freq(1e9, 2e10);
  for (int k = 0; k < 50; ++k) {
    const std::vector<TLSegment> segs{TLSegment{50.0, len(rng), kV, 0.0}};
    const double w = kTwoPi * freq(rng);
    const cplx y = line_input_admittance(segs, w);
    const cplx ref(0.0, std::tan(w * segs[0].length / kV) / 50.0);
    CHECK(std::abs(y - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
  }
  // Two segments of the same line behave as one.
  const std::vector<TLSegment> split{TLSegment{50.0, 0.004, kV, 0.0}, TLSegment{50.0, 0.003, kV, 0.0}};
  const std::vector<TLSegment> whole{TLSegment{50.0, 0.007, kV, 0.0}};
  CHECK(std::abs(line_input_admittance(split, 5e10) - line_input_admittance(whole, 5e10)) < 1e-12);
}

TEST_CASE("open output port dissipates nothing") {
  NetworkSpec net = uniform_network(0.0056, 0.0036, 60e-15);
  net.output_impedance = std::numeric_limits<double>::infinity();
  for (double f = 4e9; f < 12e9; f += 0.37e9) {
    const auto r = junction_admittance(net, kTwoPi * f);
    CHECK(r.re_y_stable == doctest::Approx(0.0));
    CHECK(std::abs(r.y.real()) < 1e-15);
    CHECK(external_coupling_rate(net, kTwoPi * f) == doctest::Approx(0.0));
  }
}

TEST_CASE("passivity and stable Re[Y]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  for (int k = 0; k < 100; ++k) {
    NetworkSpec net;
    const int nseg = 1 + static_cast<int>(u(rng) * 3);
    for (int s = 0; s < nseg; ++s)
      net.resonator_segments.push_back(TLSegment{30 + 40 * u(rng), 0.001 + 0.004 * u(rng), kV, u(rng) < 0.3 ? 0.5 * u(rng) : 0.0});
    net.coupler_position = u(rng) * net.total_length();
    net.coupler_capacitance = 1e-15 + 100e-15 * u(rng);
    net.output_impedance = 50.0;
    net.qubit_coupling_capacitance = 1e-15 + 10e-15 * u(rng);
    net.transmon_capacitance = 40e-15 + 30e-15 * u(rng);
    net.josephson_energy = 20e9 * kPlanck;
    const double w = kTwoPi * (2e9 + 14e9 * u(rng));
    const auto r = junction_admittance(net, w);
    if (r.pole) continue;
    CHECK(r.re_y_stable >= 0.0);
    if (std::abs(r.y.real()) / std::abs(r.y) > 1e-6) {
      ++compared;
      CHECK(std::abs(r.re_y_stable - r.y.real()) / r.y.real() < 1e-3);
    }
  }
  CHECK(compared > 50);
}

TEST_CASE("external coupling rate formula and scaling modes") {
  NetworkSpec net = uniform_network(0.0056, 0.0036, 60e-15);
  const double phi2 = std::sqrt(2.0 * net.charging_energy() / net.josephson_energy);
  const double e2 = kElementaryCharge * kElementaryCharge;
  for (double f : {6e9, 7.5e9, 9e9}) {
    const double w = kTwoPi * f;
    const double re_y = junction_admittance(net, w).re_y_stable;
    CHECK(external_coupling_rate(net, w) == doctest::Approx(phi2 * kHbar * w / (2 * e2) * re_y).epsilon(1e-12));
    CHECK(external_coupling_rate(net, w, ScalingMode::fixed_ec) ==
          doctest::Approx(re_y / net.transmon_capacitance).epsilon(1e-12));
  }
  // Ratio of the two conventions is proportional to omega.
  const double r1 = external_coupling_rate(net, kTwoPi * 6e9) / external_coupling_rate(net, kTwoPi * 6e9, ScalingMode::fixed_ec);
  const double r2 = external_coupling_rate(net, kTwoPi * 9e9) / external_coupling_rate(net, kTwoPi * 9e9, ScalingMode::fixed_ec);
  CHECK(r2 / r1 == doctest::Approx(1.5).epsilon(1e-12));
  // They agree where phi^2 hbar w / 2e^2 = 1/C.
  const double w_eq = 2 * e2 / (phi2 * kHbar * net.transmon_capacitance);
  CHECK(external_coupling_rate(net, w_eq) ==
        doctest::Approx(external_coupling_rate(net, w_eq, ScalingMode::fixed_ec)).epsilon(1e-12));
}

TEST_CASE("single-mode Purcell rate") {
  const double g = kTwoPi * 224e6, d = kTwoPi * -2191.6e6, k = kTwoPi * 45.7e6;
  const double rate = single_mode_rate(g, d, k);
  CHECK(to_hz(rate) == doctest::Approx(477e3).epsilon(0.01));
  CHECK(1.0 / rate == doctest::Approx(0.33e-6).epsilon(0.02));
  CHECK(single_mode_rate(g, -g, k) == doctest::Approx(k));
  CHECK(single_mode_rate(g, 1e30, k) < 1e-30);
  CHECK_THROWS_AS(single_mode_rate(g, 0.0, k), DomainError);
}

TEST_CASE("quarter-wave notch law") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> len(0.004, 0.008), frac(0.55, 0.75);
  for (int k = 0; k < 100; ++k) {
    const double length = len(rng), x_c = frac(rng) * length;
    const NetworkSpec net = uniform_network(length, x_c);
    const double w0 = kPi * kV / (2 * x_c);
    const auto notch = find_notch(net, 0.95 * w0, 1.05 * w0);
    REQUIRE(notch.has_value());
    CHECK(std::abs(x_c * *notch / kV / (kPi / 2) - 1.0) < 1e-3);
  }
}

TEST_CASE("notch special positions") {
  const double length = 0.0057;
  const double w_r = kPi * kV / length;
  const auto mid = find_notch(uniform_network(length, length / 2), 0.9 * w_r, 1.1 * w_r);
  REQUIRE(mid.has_value());
  CHECK(*mid / w_r == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_FALSE(find_notch(uniform_network(length, 0.0), 0.3 * w_r, 0.95 * w_r).has_value());
}

TEST_CASE("coupler position optimisation") {
  const double length = 0.0057;
  const double w_r = kPi * kV / length;
  const NetworkSpec net = uniform_network(length, 0.2 * length);
  CHECK(optimize_coupler_position(net, w_r) / length == doctest::Approx(0.5).epsilon(2e-3));
  const double w_q = w_r * 8.319 / 10.5106;
  CHECK(optimize_coupler_position(net, w_q) / length == doctest::Approx(10.5106 / (2 * 8.319)).epsilon(2e-3));

  double last = 0.0;
  for (double ratio : {0.95, 0.9, 0.85, 0.8, 0.75, 0.7}) {
    const double x = optimize_coupler_position(net, ratio * w_r);
    CHECK(x > last);
    last = x;
  }

  // Coupling strength changes the rates but not the argmin.
  NetworkSpec strong = net;
  strong.coupler_capacitance *= 4.0;
  const double grid_step = length / 2000.0;
  CHECK(std::abs(optimize_coupler_position(strong, w_q) - optimize_coupler_position(net, w_q)) <= grid_step);
}

TEST_CASE("resonator mode parameters") {
  const double length = 0.0057;
  const double w_half = kPi * kV / length;
  double prev_k = 0.0, prev_c = 0.0;
  std::vector<double> slopes;
  for (double c_c : {0.5e-15, 1e-15, 2e-15, 4e-15}) {
    const ModeParams m = resonator_mode_params(uniform_network(length, 0.6 * length, c_c));
    if (prev_k > 0.0) slopes.push_back(std::log(m.kappa_ex / prev_k) / std::log(c_c / prev_c));
    prev_k = m.kappa_ex;
    prev_c = c_c;
    if (c_c == 0.5e-15) {
      // The qubit capacitor loads the line slightly; the bare mode is the limit.
      CHECK(m.omega_r / w_half == doctest::Approx(1.0).epsilon(0.02));
    }
  }
  for (double s : slopes) CHECK(s == doctest::Approx(2.0).epsilon(0.05));

  // The network S11 sits on a single-pole resonance at the fitted centre.
  const NetworkSpec net = uniform_network(length, 0.6 * length, 20e-15);
  const ModeParams m = resonator_mode_params(net);
  const double phase = std::arg(port_reflection(net, m.omega_r));
  CHECK(std::abs(std::abs(phase) - kPi) < 0.2);
  std::vector<double> f;
  std::vector<cplx> v;
  for (int i = 0; i < 401; ++i) {
    const double w = m.omega_r + (i - 200) * m.kappa_ex / 40.0;
    f.push_back(to_hz(w));
    v.push_back(port_reflection(net, w));
  }
  const FitResult fit = fit_single_pole(ComplexTrace{f, v});
  CHECK(std::abs(kTwoPi * fit.value("omega_r") - m.omega_r) < 0.5 * m.kappa_ex);
}

TEST_CASE("device-like network spectrum") {
  const NetworkSpec net = device_like();
  const DeviceParams dev;
  const auto s = suppression_spectrum(net, dev, 7.9e9, 8.7e9, 1601);
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.ratio.size(); ++i)
    if (s.valid[i] && s.ratio[i] > s.ratio[best]) best = i;
  CHECK(s.ratio[best] > 1e3);
  const auto [lo, hi] = band_above(s, s.freqs[best], 100.0);
  CHECK(hi - lo >= 0.05 * dev.omega_r);
  CHECK(lo <= dev.omega_eg);
  CHECK(hi >= dev.omega_eg);

  // Well below the filter band the stub no longer nulls the coupling.
  const auto far = suppression_spectrum(net, dev, 4.5e9, 5.5e9, 5);
  for (double r : far.ratio) {
    CHECK(r > 0.1);
    CHECK(r < 10.0);
  }

  // Gamma_ex at the f0-g1 drive frequency: order of magnitude of 11 kHz.
  const double gamma = to_hz(external_coupling_rate(net, kTwoPi * dev.omega_f0g1));
  CHECK(gamma > 1.1e3);
  CHECK(gamma < 1.1e5);
}

TEST_CASE("network validation") {
  NetworkSpec net = uniform_network(0.005, 0.006);
  CHECK_THROWS_AS(net.validate(), UsageError);
  net = uniform_network(0.005, 0.002);
  net.coupler_capacitance = 0.0;
  CHECK_THROWS_AS(net.validate(), UsageError);
  net = uniform_network(0.005, 0.002);
  net.josephson_energy = 2.0 * net.charging_energy();
  CHECK_FALSE(net.validate().empty());
}
