#pragma once

#include <string>
#include <vector>

#include "purcell/lp.hpp"
#include "purcell/spectra.hpp"

namespace purcell {

/// Repeated-readout statistics. Experiment a starts from the thermal state,
/// b from a pi pulse on it; c inserts a pi pulse between the two readouts.
/// P_z(y|x) is the second outcome y given the first outcome x, and r_z the
/// first-outcome ratio P(e)/P(g).
struct ReadoutStats {
  double p_a_e_given_g = 0.0;
  double p_a_g_given_e = 0.0;
  double p_b_e_given_g = 0.0;
  double p_b_g_given_e = 0.0;
  double p_c_g_given_g = 0.0;
  double p_c_e_given_e = 0.0;
  double r_a = 0.0;
  double r_b = 0.0;
  double r_c = 0.0;

  void validate() const;
  /// Relabels g <-> e throughout.
  ReadoutStats exchanged() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  static Interval point(double x) { return {x, x}; }
};

/// Error probabilities of one readout plus the pi-pulse errors. The
/// separation errors are point values; the rest may be bounds.
struct ErrorModel {
  double eps_sep_ge = 0.0;
  double eps_sep_eg = 0.0;
  Interval eps_flip1_ge, eps_flip1_eg, eps_flip2_ge, eps_flip2_eg;
  Interval eps_pi_gg, eps_pi_ee;

  void validate() const;
};

/// Post-selection-free second-outcome probabilities given the mid-first-readout state.
struct Conditionals {
  double ab_e_given_g = 0.0;
  double ab_g_given_e = 0.0;
  double c_g_given_g = 0.0;
  double c_e_given_e = 0.0;
  std::vector<std::string> notes;
};

struct SeparationErrors {
  double ge = 0.0;
  double eg = 0.0;
  std::vector<std::string> notes;
};

struct Origins {
  double external_eg = 0.0;
  double internal_ge = 0.0;
  double internal_eg = 0.0;
  double back_action_ge = 0.0;
  double back_action_eg = 0.0;
  std::vector<std::string> warnings;
};

struct BudgetRow {
  std::string origin;
  std::string formula;
  Interval value;
  /// Row value at one feasible point of the joint polytope; these sum to
  /// the infidelity up to first-order terms.
  double consistent = 0.0;
};

struct BudgetReport {
  double fidelity = 0.0;
  double qnd_fidelity = 0.0;
  Conditionals conditionals;
  SeparationErrors separation;
  ErrorModel errors;
  Interval total_ge, total_eg;
  Origins origins;
  std::vector<BudgetRow> f_rows, q_rows;
  Interval g_detected_e, e_detected_g;
  std::vector<std::string> notes;
};

/// Experiments a and b; throws InconsistencyError on r_a = r_b or results outside [0, 1].
Conditionals out2_given_mid1(const ReadoutStats& stats);
/// Adds the experiment-c quantities, which need the separation errors.
Conditionals out2_given_mid1_c(const ReadoutStats& stats, const Conditionals& ab, const SeparationErrors& seps);

SeparationErrors separation_errors(const ReadoutStats& stats, const Conditionals& cond);

/// Linear constraints on x = (flip1_ge, flip1_eg, flip2_ge, flip2_eg, pi_gg, pi_ee).
lp::Polytope flip_polytope(const Conditionals& cond, const SeparationErrors& seps, double slack = 1e-4);

/// Interval bounds for the six unknowns. Throws InfeasibleError with a
/// certificate naming the violated equations when the system has no
/// non-negative solution within the slack.
ErrorModel flip_error_bounds(const ReadoutStats& stats, const SeparationErrors& seps, double slack = 1e-4);

Origins origin_decomposition(double total_ge, double total_eg, const DeviceParams& device, double tau_ro);

struct Fidelities {
  double f = 0.0;
  double q = 0.0;
};
Fidelities fidelities(const ReadoutStats& stats);

BudgetReport assemble_budget(const ReadoutStats& stats, const DeviceParams& device, double tau_ro = 120e-9,
                             double slack = 1e-4);

/// Aligned plain-text rendering of the separation/flip bounds, origins,
/// both budgets and the readout error probabilities.
std::string budget_tables(const BudgetReport& report);

/// Exact forward model: statistics produced by a given error model with
/// thermal excitation ratio r_th before each experiment. Intervals in the
/// model are evaluated at their midpoints.
ReadoutStats synthesize_stats(const ErrorModel& model, double r_th);

}  // namespace purcell
