#pragma once

#include <numbers>

namespace purcell {

// CODATA 2018 exact values.
inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kHbar = kPlanck / (2.0 * std::numbers::pi);
inline constexpr double kElementaryCharge = 1.602176634e-19;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Public APIs take ordinary frequencies in Hz. Internal rates are angular.
constexpr double to_angular(double hz) { return kTwoPi * hz; }
constexpr double to_hz(double rad_per_s) { return rad_per_s / kTwoPi; }

// Phasor convention.
//
// Reflection models in spectra follow 1 - k/(k/2 + i(w - w_r)), which is the
// e^{+i w t} phasor convention also used by the transmission-line network
// solver. The master-equation code evolves Schroedinger amplitudes with the
// e^{-i w t} convention, so its cavity fields and output records are the
// complex conjugates of the corresponding reflection phasors. Use
// to_reflection_phasor() when comparing the two.
template <typename Complex>
constexpr Complex to_reflection_phasor(const Complex& schroedinger_amplitude) {
  return Complex(schroedinger_amplitude.real(), -schroedinger_amplitude.imag());
}

}  // namespace purcell
