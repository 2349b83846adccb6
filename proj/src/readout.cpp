#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "purcell/dynamics.hpp"
#include "purcell/errors.hpp"

namespace purcell {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform on (0, 1), never exactly 0.
double uniform_draw(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ (counter * 0xD1B54A32D192ED03ULL));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Amplified quadrature: projection onto the direction of the summed
// mean-waveform difference, then the optional amplifier low-pass.
std::vector<double> quadrature(const std::vector<std::complex<double>>& x, std::complex<double> axis,
                               double dt, double bandwidth) {
  std::vector<double> s(x.size());
  double y = 0.0;
  const double k = bandwidth > 0.0 ? 1.0 - std::exp(-2.0 * std::numbers::pi * bandwidth * dt) : 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double raw = std::real(x[i] * std::conj(axis));
    y += k * (raw - y);
    s[i] = y;
  }
  return s;
}

}  // namespace

double normal_draw(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = uniform_draw(seed, 2 * counter);
  const double u2 = uniform_draw(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Discrimination readout_discrimination(const SimResult& waveform_g, const SimResult& waveform_e,
                                      double noise_sigma, long n_shots, std::uint64_t seed,
                                      const DiscriminationOptions& options) {
  const auto& rg = waveform_g.output_records;
  const auto& re = waveform_e.output_records;
  if (rg.empty() || rg.size() != re.size()) throw UsageError("waveforms must be non-empty and of equal length");
  if (n_shots < 1) throw UsageError("n_shots must be positive");
  if (!(noise_sigma >= 0.0)) throw UsageError("noise_sigma must be non-negative");
  if (options.bins < 1) throw UsageError("need at least one histogram bin");
  const double dt = waveform_g.times.size() > 1 ? waveform_g.times[1] - waveform_g.times[0] : 1.0;

  std::complex<double> diff = 0.0;
  for (std::size_t k = 0; k < rg.size(); ++k) diff += re[k] - rg[k];
  const std::complex<double> axis = std::abs(diff) > 0.0 ? diff / std::abs(diff) : 1.0;
  const auto sg = quadrature(rg, axis, dt, options.lowpass_bandwidth);
  const auto se = quadrature(re, axis, dt, options.lowpass_bandwidth);

  Discrimination out;
  const std::size_t n = sg.size();
  out.weights.resize(n);
  double midpoint = 0.0, wnorm2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out.weights[k] = se[k] - sg[k];
    midpoint += out.weights[k] * 0.5 * (se[k] + sg[k]);
    wnorm2 += out.weights[k] * out.weights[k];
  }
  const double wnorm = std::sqrt(wnorm2);
  out.threshold = 0.0;
  out.theory_error = noise_sigma > 0.0 ? 0.5 * std::erfc(wnorm / (2.0 * noise_sigma) / std::numbers::sqrt2)
                                       : (wnorm > 0.0 ? 0.0 : 0.5);

  std::vector<double> vg(n_shots), ve(n_shots);
  const auto shots = static_cast<std::uint64_t>(n_shots);
  for (int branch = 0; branch < 2; ++branch) {
    const auto& s = branch == 0 ? sg : se;
    auto& v = branch == 0 ? vg : ve;
    double clean = -midpoint;
    for (std::size_t k = 0; k < n; ++k) clean += out.weights[k] * s[k];
    for (std::uint64_t shot = 0; shot < shots; ++shot) {
      double acc = clean;
      if (noise_sigma > 0.0)
        for (std::size_t k = 0; k < n; ++k)
          acc += out.weights[k] * noise_sigma * normal_draw(seed, (branch * shots + shot) * n + k);
      v[shot] = acc;
    }
  }
  long e_given_g = 0, g_given_e = 0;
  for (long k = 0; k < n_shots; ++k) {
    if (vg[k] > out.threshold) ++e_given_g;
    if (!(ve[k] > out.threshold)) ++g_given_e;
  }
  out.p_e_given_g = static_cast<double>(e_given_g) / n_shots;
  out.p_g_given_e = static_cast<double>(g_given_e) / n_shots;

  double lo = std::min(*std::min_element(vg.begin(), vg.end()), *std::min_element(ve.begin(), ve.end()));
  double hi = std::max(*std::max_element(vg.begin(), vg.end()), *std::max_element(ve.begin(), ve.end()));
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double width = (hi - lo) / options.bins;
  out.counts_g.assign(options.bins, 0);
  out.counts_e.assign(options.bins, 0);
  for (int b = 0; b < options.bins; ++b) out.bin_centers.push_back(lo + (b + 0.5) * width);
  auto bin = [&](double v) { return std::clamp(static_cast<int>((v - lo) / width), 0, options.bins - 1); };
  for (long k = 0; k < n_shots; ++k) {
    ++out.counts_g[bin(vg[k])];
    ++out.counts_e[bin(ve[k])];
  }
  return out;
}

}  // namespace purcell
