#include "purcell/budget.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "purcell/errors.hpp"
#include "purcell/units.hpp"

namespace purcell {

namespace {

constexpr double kClip = 1e-4;

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string(name) + " must lie in [0, 1]");
}

// Clips first-order residue slightly outside [0, 1]; anything further out is inconsistent.
double clip_probability(double p, const std::string& name, std::vector<std::string>& notes) {
  if (!std::isfinite(p) || p < -kClip || p > 1.0 + kClip)
    throw InconsistencyError(name + " = " + std::to_string(p) + " lies outside [0, 1]");
  if (p < 0.0) {
    notes.push_back(name + " = " + std::to_string(p) + " clipped to 0");
    return 0.0;
  }
  if (p > 1.0) {
    notes.push_back(name + " = " + std::to_string(p) + " clipped to 1");
    return 1.0;
  }
  return p;
}

enum Var { kF1ge, kF1eg, kF2ge, kF2eg, kPiGG, kPiEE, kNumFlip };
// Extra unknowns of the joint origin polytope.
enum ExtraVar { kEx1 = kNumFlip, kIn1ge, kIn1eg, kNumJoint };

const char* const kEquationNames[] = {
    "P_ab(e|g) = flip2_ge + flip1_ge + sep_ge",
    "P_ab(g|e) = flip2_eg + flip1_eg + sep_eg",
    "P_c(g|g) = flip2_ge + pi_gg + flip1_eg + sep_eg",
    "P_c(e|e) = flip2_eg + pi_ee + flip1_ge + sep_ge",
};

struct Equations {
  Eigen::Matrix<double, 4, kNumFlip> a;
  Eigen::Vector4d rhs;
};

Equations flip_equations(const Conditionals& cond, const SeparationErrors& seps) {
  Equations eq;
  eq.a.setZero();
  eq.a(0, kF2ge) = eq.a(0, kF1ge) = 1.0;
  eq.a(1, kF2eg) = eq.a(1, kF1eg) = 1.0;
  eq.a(2, kF2ge) = eq.a(2, kPiGG) = eq.a(2, kF1eg) = 1.0;
  eq.a(3, kF2eg) = eq.a(3, kPiEE) = eq.a(3, kF1ge) = 1.0;
  eq.rhs << cond.ab_e_given_g - seps.ge, cond.ab_g_given_e - seps.eg, cond.c_g_given_g - seps.eg,
      cond.c_e_given_e - seps.ge;
  return eq;
}

// Equalities as slack pairs, padded to n unknowns, plus x >= 0.
lp::Polytope slack_polytope(const Equations& eq, double slack, int n) {
  lp::Polytope p;
  p.a = Eigen::MatrixXd::Zero(8 + n, n);
  p.b = Eigen::VectorXd::Zero(8 + n);
  for (int k = 0; k < 4; ++k) {
    p.a.block(2 * k, 0, 1, kNumFlip) = eq.a.row(k);
    p.a.block(2 * k + 1, 0, 1, kNumFlip) = -eq.a.row(k);
    p.b[2 * k] = eq.rhs[k] + slack;
    p.b[2 * k + 1] = -(eq.rhs[k] - slack);
  }
  p.a.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
  return p;
}

std::string certificate(const Equations& eq, double slack) {
  // min t  s.t.  |A x - rhs| <= slack + t,  x, t >= 0
  lp::Polytope p;
  p.a = Eigen::MatrixXd::Zero(8, kNumFlip + 1);
  p.b = Eigen::VectorXd::Zero(8);
  for (int k = 0; k < 4; ++k) {
    p.a.block(2 * k, 0, 1, kNumFlip) = eq.a.row(k);
    p.a.block(2 * k + 1, 0, 1, kNumFlip) = -eq.a.row(k);
    p.a(2 * k, kNumFlip) = p.a(2 * k + 1, kNumFlip) = -1.0;
    p.b[2 * k] = eq.rhs[k] + slack;
    p.b[2 * k + 1] = -(eq.rhs[k] - slack);
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(kNumFlip + 1);
  c[kNumFlip] = 1.0;
  const auto sol = lp::minimize(c, p);
  const Eigen::VectorXd x = sol.x.head(kNumFlip);
  const Eigen::Vector4d resid = eq.a * x - eq.rhs;
  std::ostringstream os;
  os << "flip-error equations have no non-negative solution within slack " << slack
     << "; smallest extra slack needed " << sol.objective << ". Violated at the best point:";
  for (int k = 0; k < 4; ++k)
    if (std::abs(resid[k]) > slack + 1e-12)
      os << "\n  " << kEquationNames[k] << " (right-hand side " << eq.rhs[k] << ", residual " << resid[k] << ")";
  return os.str();
}

struct Affine {
  Eigen::VectorXd c;
  double c0 = 0.0;
  double at(const Eigen::VectorXd& x) const { return c.dot(x) + c0; }
};

Interval range_over(const std::vector<Eigen::VectorXd>& vertices, const Affine& f) {
  Interval out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : vertices) {
    const double y = f.at(v);
    out.lo = std::min(out.lo, y);
    out.hi = std::max(out.hi, y);
  }
  return out;
}

Affine flip_sum(int i, int j) {
  Affine f{Eigen::VectorXd::Zero(kNumFlip), 0.0};
  f.c[i] = f.c[j] = 1.0;
  return f;
}

Interval nonnegative(Interval v) { return {std::max(0.0, v.lo), std::max(0.0, v.hi)}; }

std::string pct(double x) {
  char buf[32];
  // half-up at the printed digit; binary 0.85 would otherwise print as 0.8
  double v = std::floor(1000.0 * x + 0.5 + 1e-7) / 10.0;
  if (v == 0.0) v = 0.0;  // no "-0.0"
  std::snprintf(buf, sizeof buf, "%.1f%%", v);
  return buf;
}

std::string pct(const Interval& v) {
  std::string lo = pct(v.lo);
  const std::string hi = pct(v.hi);
  if (lo == hi) return hi;
  if (lo == "0.0%") return "<=" + hi;
  lo.pop_back();  // "2.0-2.9%"
  return lo + "-" + hi;
}

void table(std::ostringstream& os, const std::string& title,
           const std::vector<std::array<std::string, 3>>& rows) {
  std::size_t w0 = 0, w1 = 0;
  for (const auto& r : rows) {
    w0 = std::max(w0, r[0].size());
    w1 = std::max(w1, r[1].size());
  }
  os << title << "\n";
  for (const auto& r : rows) {
    os << "  " << r[0] << std::string(w0 - r[0].size() + 2, ' ') << r[1] << std::string(w1 - r[1].size() + 2, ' ')
       << r[2] << "\n";
  }
  os << "\n";
}

}  // namespace

void ReadoutStats::validate() const {
  check_probability(p_a_e_given_g, "p_a_e_given_g");
  check_probability(p_a_g_given_e, "p_a_g_given_e");
  check_probability(p_b_e_given_g, "p_b_e_given_g");
  check_probability(p_b_g_given_e, "p_b_g_given_e");
  check_probability(p_c_g_given_g, "p_c_g_given_g");
  check_probability(p_c_e_given_e, "p_c_e_given_e");
  for (double r : {r_a, r_b, r_c})
    if (!(r >= 0.0 && std::isfinite(r))) throw UsageError("excitation ratios must be finite and non-negative");
}

ReadoutStats ReadoutStats::exchanged() const {
  // g <-> e also exchanges the roles of the mostly-g (a) and mostly-e (b) experiments.
  ReadoutStats s;
  s.p_a_e_given_g = p_b_g_given_e;
  s.p_a_g_given_e = p_b_e_given_g;
  s.p_b_e_given_g = p_a_g_given_e;
  s.p_b_g_given_e = p_a_e_given_g;
  s.p_c_g_given_g = p_c_e_given_e;
  s.p_c_e_given_e = p_c_g_given_g;
  s.r_a = 1.0 / r_b;
  s.r_b = 1.0 / r_a;
  s.r_c = 1.0 / r_c;
  return s;
}

void ErrorModel::validate() const {
  for (double e : {eps_sep_ge, eps_sep_eg}) check_probability(e, "separation error");
  for (const Interval* v : {&eps_flip1_ge, &eps_flip1_eg, &eps_flip2_ge, &eps_flip2_eg, &eps_pi_gg, &eps_pi_ee}) {
    check_probability(v->lo, "error bound");
    check_probability(v->hi, "error bound");
    if (v->lo > v->hi) throw UsageError("error interval has lo > hi");
  }
}

Conditionals out2_given_mid1(const ReadoutStats& stats) {
  stats.validate();
  const double ra = stats.r_a, rb = stats.r_b;
  if (!(std::abs(rb - ra) > 1e-12 * std::max(1.0, std::max(ra, rb))))
    throw InconsistencyError("degenerate excitation ratios: r_a = r_b leaves the expansion unsolvable");
  Conditionals c;
  c.ab_e_given_g = clip_probability((rb * stats.p_a_e_given_g - ra * stats.p_b_e_given_g) / (rb - ra),
                                    "P_ab^{out2|mid1}(e|g)", c.notes);
  c.ab_g_given_e = clip_probability((rb * stats.p_b_g_given_e - ra * stats.p_a_g_given_e) / (rb - ra),
                                    "P_ab^{out2|mid1}(g|e)", c.notes);
  return c;
}

Conditionals out2_given_mid1_c(const ReadoutStats& stats, const Conditionals& ab, const SeparationErrors& seps) {
  if (!(stats.r_c > 0.0)) throw InconsistencyError("r_c must be positive to expand experiment c");
  // P_c(g|g) = X (1 - u) + (1 - Y) u,  P_c(e|e) = Y (1 - w) + (1 - X) w
  const double u = stats.r_c * seps.eg;
  const double w = seps.ge / stats.r_c;
  const double det = 1.0 - u - w;
  if (!(det > 1e-9)) throw InconsistencyError("experiment-c expansion is singular (r_c eps_sep^{e->g} + eps_sep^{g->e} / r_c >= 1)");
  const double bx = stats.p_c_g_given_g - u;
  const double by = stats.p_c_e_given_e - w;
  Conditionals c = ab;
  c.c_g_given_g = clip_probability(((1.0 - w) * bx + u * by) / det, "P_c^{out2|mid1}(g|g)", c.notes);
  c.c_e_given_e = clip_probability((w * bx + (1.0 - u) * by) / det, "P_c^{out2|mid1}(e|e)", c.notes);
  return c;
}

SeparationErrors separation_errors(const ReadoutStats& stats, const Conditionals& cond) {
  const double d = 1.0 - cond.ab_e_given_g - cond.ab_g_given_e;
  if (!(d > 0.0)) throw InconsistencyError("1 - P(e|g) - P(g|e) must be positive");
  if (!(stats.r_b > 0.0)) throw InconsistencyError("r_b must be positive");
  SeparationErrors s;
  s.eg = clip_probability((stats.p_b_e_given_g - cond.ab_e_given_g) / (stats.r_b * d), "eps_sep^{e->g}", s.notes);
  s.ge = clip_probability(stats.r_a * (stats.p_a_g_given_e - cond.ab_g_given_e) / d, "eps_sep^{g->e}", s.notes);
  return s;
}

lp::Polytope flip_polytope(const Conditionals& cond, const SeparationErrors& seps, double slack) {
  return slack_polytope(flip_equations(cond, seps), slack, kNumFlip);
}

ErrorModel flip_error_bounds(const ReadoutStats& stats, const SeparationErrors& seps, double slack) {
  if (!(slack >= 0.0)) throw UsageError("slack must be non-negative");
  const Conditionals cond = out2_given_mid1_c(stats, out2_given_mid1(stats), seps);
  const Equations eq = flip_equations(cond, seps);
  const auto vertices = lp::enumerate_vertices(slack_polytope(eq, slack, kNumFlip));
  if (vertices.empty()) throw InfeasibleError(certificate(eq, slack));

  auto bound = [&](int i) {
    Affine f{Eigen::VectorXd::Unit(kNumFlip, i), 0.0};
    return nonnegative(range_over(vertices, f));
  };
  ErrorModel m;
  m.eps_sep_ge = seps.ge;
  m.eps_sep_eg = seps.eg;
  m.eps_flip1_ge = bound(kF1ge);
  m.eps_flip1_eg = bound(kF1eg);
  m.eps_flip2_ge = bound(kF2ge);
  m.eps_flip2_eg = bound(kF2eg);
  m.eps_pi_gg = bound(kPiGG);
  m.eps_pi_ee = bound(kPiEE);
  return m;
}

Origins origin_decomposition(double total_ge, double total_eg, const DeviceParams& device, double tau_ro) {
  if (!(tau_ro > 0.0)) throw UsageError("tau_ro must be positive");
  if (!(device.t1 > 0.0) || !(device.r_th >= 0.0) || !(device.gamma_ex_q >= 0.0))
    throw UsageError("device needs t1 > 0, r_th >= 0 and gamma_ex_q >= 0");
  Origins o;
  o.external_eg = to_angular(device.gamma_ex_q) * tau_ro;
  const double decay = tau_ro / device.t1;
  o.internal_eg = decay / (1.0 + device.r_th) - o.external_eg;
  o.internal_ge = decay * device.r_th / (1.0 + device.r_th);
  if (o.internal_eg < 0.0) {
    o.warnings.push_back("external decay exceeds the total T1 decay; internal e->g loss set to 0");
    o.internal_eg = 0.0;
  }
  auto back_action = [&](double v, const char* dir) {
    if (v < -1e-3)
      o.warnings.push_back(std::string("back action ") + dir + " is negative (" + pct(v) +
                           "): measured flips are smaller than the decay model predicts");
    return std::max(0.0, v);
  };
  o.back_action_ge = back_action(total_ge - o.internal_ge, "g->e");
  o.back_action_eg = back_action(total_eg - o.external_eg - o.internal_eg, "e->g");
  return o;
}

Fidelities fidelities(const ReadoutStats& stats) {
  stats.validate();
  return {1.0 - 0.5 * (stats.p_a_e_given_g + stats.p_c_g_given_g),
          1.0 - 0.5 * (stats.p_a_e_given_g + stats.p_b_g_given_e)};
}

BudgetReport assemble_budget(const ReadoutStats& stats, const DeviceParams& device, double tau_ro, double slack) {
  BudgetReport rep;
  const Conditionals ab = out2_given_mid1(stats);
  rep.separation = separation_errors(stats, ab);
  rep.conditionals = out2_given_mid1_c(stats, ab, rep.separation);
  rep.errors = flip_error_bounds(stats, rep.separation, slack);
  const auto fq = fidelities(stats);
  rep.fidelity = fq.f;
  rep.qnd_fidelity = fq.q;
  const double sge = rep.separation.ge, seg = rep.separation.eg;

  const Equations eq = flip_equations(rep.conditionals, rep.separation);
  const auto flip_vertices = lp::enumerate_vertices(slack_polytope(eq, slack, kNumFlip));
  rep.total_ge = nonnegative(range_over(flip_vertices, flip_sum(kF1ge, kF2ge)));
  rep.total_eg = nonnegative(range_over(flip_vertices, flip_sum(kF1eg, kF2eg)));
  rep.origins = origin_decomposition(rep.total_ge.mid(), rep.total_eg.mid(), device, tau_ro);
  const Origins& o = rep.origins;
  const double ex = o.external_eg;

  // Joint polytope: flips, pi errors and the early parts of each origin.
  lp::Polytope joint = slack_polytope(eq, slack, kNumJoint);
  auto add_row = [&](const Eigen::VectorXd& a, double b) {
    joint.a.conservativeResize(joint.a.rows() + 1, Eigen::NoChange);
    joint.b.conservativeResize(joint.b.size() + 1);
    joint.a.bottomRows(1) = a.transpose();
    joint.b[joint.b.size() - 1] = b;
  };
  auto unit = [](int i) { return Eigen::VectorXd::Unit(kNumJoint, i); };
  add_row(unit(kEx1), ex);
  add_row(unit(kIn1ge), o.internal_ge);
  add_row(unit(kIn1eg), o.internal_eg);
  // back action of each half is non-negative
  lp::Polytope relaxed = joint;
  add_row(unit(kIn1ge) - unit(kF1ge), 0.0);
  add_row(unit(kIn1eg) + unit(kEx1) - unit(kF1eg), 0.0);
  add_row(-unit(kF2ge) - unit(kIn1ge), -o.internal_ge);
  add_row(-unit(kF2eg) - unit(kEx1) - unit(kIn1eg), -(ex + o.internal_eg));

  const double prep_const = 0.5 * (stats.r_a + stats.r_c) * seg;
  const std::vector<std::pair<std::string, Affine>> f_objectives = {
      {"preparation",
       {0.5 * (2.0 * unit(kF2ge) + unit(kPiGG)), prep_const}},
      {"back_action", {0.5 * (unit(kF1ge) - unit(kIn1ge) + unit(kF1eg) - unit(kIn1eg) - unit(kEx1)), 0.0}},
      {"internal", {0.5 * (unit(kIn1ge) + unit(kIn1eg)), 0.0}},
      {"external", {0.5 * unit(kEx1), 0.0}},
  };
  const std::vector<std::string> f_formulas = {
      "(r_a sep_eg + flip2_ge + r_c sep_eg + flip2_ge + pi_gg)/2", "(ba1_ge + ba1_eg)/2",
      "(in1_ge + in1_eg)/2", "ex1_eg/2"};

  const lp::Polytope* used = &joint;
  std::vector<Eigen::VectorXd> optima;
  std::vector<Interval> f_ranges;
  for (int attempt = 0; attempt < 2 && f_ranges.empty(); ++attempt) {
    try {
      for (const auto& [name, f] : f_objectives) {
        const auto lo = lp::minimize(f.c, *used);
        const auto hi = lp::maximize(f.c, *used);
        optima.push_back(lo.x);
        optima.push_back(hi.x);
        f_ranges.push_back(nonnegative({f.at(lo.x), f.at(hi.x)}));
      }
    } catch (const InfeasibleError&) {
      optima.clear();
      f_ranges.clear();
      if (attempt == 1) throw;
      rep.notes.push_back("back-action parts cannot all be non-negative; F rows bounded without that constraint");
      used = &relaxed;
    }
  }
  Eigen::VectorXd rep_point = Eigen::VectorXd::Zero(kNumJoint);
  for (const auto& x : optima) rep_point += x;
  rep_point /= static_cast<double>(optima.size());

  for (std::size_t k = 0; k < f_objectives.size(); ++k) {
    BudgetRow row{f_objectives[k].first, f_formulas[k], f_ranges[k], f_objectives[k].second.at(rep_point)};
    rep.f_rows.push_back(row);
  }
  const double f_sep = 0.5 * (sge + seg);
  rep.f_rows.insert(rep.f_rows.begin() + 3, BudgetRow{"separation", "(sep_ge + sep_eg)/2", Interval::point(f_sep), f_sep});

  const double q_ba = 0.5 * (o.back_action_ge + o.back_action_eg);
  const double q_in = 0.5 * (o.internal_ge + o.internal_eg);
  const double q_sep = 0.5 * (stats.r_a * seg + sge + sge / stats.r_b + seg);
  const double q_ex = 0.5 * ex;
  rep.q_rows = {
      {"back_action", "(ba1_ge + ba2_ge + ba1_eg + ba2_eg)/2", Interval::point(q_ba), q_ba},
      {"internal", "(in1_ge + in2_ge + in1_eg + in2_eg)/2", Interval::point(q_in), q_in},
      {"separation", "(r_a sep_eg + sep_ge + sep_ge/r_b + sep_eg)/2", Interval::point(q_sep), q_sep},
      {"external", "(ex1_eg + ex2_eg)/2", Interval::point(q_ex), q_ex},
  };

  rep.g_detected_e = {rep.errors.eps_flip1_ge.lo + sge, rep.errors.eps_flip1_ge.hi + sge};
  rep.e_detected_g = {rep.errors.eps_flip1_eg.lo + seg, rep.errors.eps_flip1_eg.hi + seg};

  for (const auto& n : rep.conditionals.notes) rep.notes.push_back(n);
  for (const auto& n : rep.separation.notes) rep.notes.push_back(n);
  for (const auto& n : o.warnings) rep.notes.push_back(n);
  rep.notes.push_back(
      "binary-qubit model: P_a(g|e) and P_c(e|e) post-select on outcome e, which also admits higher transmon "
      "levels; eps_sep^{g->e} and the bounds using P_c(e|e) may be biased by that population");
  return rep;
}

std::string budget_tables(const BudgetReport& r) {
  std::ostringstream os;
  const auto& e = r.errors;
  table(os, "Individual error probabilities",
        {{{"Separation error", "sep g->e", pct(e.eps_sep_ge)}},
         {{"", "sep e->g", pct(e.eps_sep_eg)}},
         {{"Early state-flip error", "flip1 g->e", pct(e.eps_flip1_ge)}},
         {{"", "flip1 e->g", pct(e.eps_flip1_eg)}},
         {{"Late state-flip error", "flip2 g->e", pct(e.eps_flip2_ge)}},
         {{"", "flip2 e->g", pct(e.eps_flip2_eg)}},
         {{"Pi-pulse error", "pi g->g", pct(e.eps_pi_gg)}},
         {{"", "pi e->e", pct(e.eps_pi_ee)}}});
  const auto& o = r.origins;
  table(os, "State-flip errors by origin",
        {{{"Total", "flip1 + flip2 g->e", pct(r.total_ge.mid())}},
         {{"", "flip1 + flip2 e->g", pct(r.total_eg.mid())}},
         {{"External decay", "ex1 + ex2 e->g", pct(o.external_eg)}},
         {{"Internal loss", "in1 + in2 g->e", pct(o.internal_ge)}},
         {{"", "in1 + in2 e->g", pct(o.internal_eg)}},
         {{"Back action", "ba1 + ba2 g->e", pct(o.back_action_ge)}},
         {{"", "ba1 + ba2 e->g", pct(o.back_action_eg)}}});
  auto label = [](const std::string& origin) {
    if (origin == "preparation") return std::string("Preparation error");
    if (origin == "back_action") return std::string("Back action");
    if (origin == "internal") return std::string("Internal loss");
    if (origin == "separation") return std::string("Separation error");
    return std::string("External decay");
  };
  std::vector<std::array<std::string, 3>> f{{{"Readout infidelity", "1 - F = [P_a(e|g) + P_c(g|g)]/2", pct(1.0 - r.fidelity)}}};
  for (const auto& row : r.f_rows) f.push_back({label(row.origin), row.formula, pct(row.value)});
  table(os, "Readout infidelity budget", f);
  std::vector<std::array<std::string, 3>> q{{{"QND infidelity", "1 - Q = [P_a(e|g) + P_b(g|e)]/2", pct(1.0 - r.qnd_fidelity)}}};
  for (const auto& row : r.q_rows) q.push_back({label(row.origin), row.formula, pct(row.value)});
  table(os, "QND infidelity budget", q);
  table(os, "Readout error probabilities",
        {{{"|g> detected as \"e\"", "flip1 g->e + sep g->e", pct(r.g_detected_e)}},
         {{"|e> detected as \"g\"", "flip1 e->g + sep e->g", pct(r.e_detected_g)}}});
  os << "F = " << pct(r.fidelity) << ", Q = " << pct(r.qnd_fidelity) << "\n";
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

ReadoutStats synthesize_stats(const ErrorModel& model, double r_th) {
  model.validate();
  if (!(r_th >= 0.0 && std::isfinite(r_th))) throw UsageError("r_th must be finite and non-negative");
  // Column-stochastic channels on (g, e): column = input state.
  auto channel = [](double ge, double eg) {
    Eigen::Matrix2d m;
    m << 1.0 - ge, eg, ge, 1.0 - eg;
    return m;
  };
  const Eigen::Matrix2d flip1 = channel(model.eps_flip1_ge.mid(), model.eps_flip1_eg.mid());
  const Eigen::Matrix2d flip2 = channel(model.eps_flip2_ge.mid(), model.eps_flip2_eg.mid());
  const Eigen::Matrix2d sep = channel(model.eps_sep_ge, model.eps_sep_eg);
  const double pgg = model.eps_pi_gg.mid(), pee = model.eps_pi_ee.mid();
  Eigen::Matrix2d pi;
  pi << pgg, 1.0 - pee, 1.0 - pgg, pee;
  const Eigen::Vector2d thermal(1.0 / (1.0 + r_th), r_th / (1.0 + r_th));

  // Joint (out1, out2) distribution; `between` acts on the post-first-readout state.
  auto joint = [&](const Eigen::Vector2d& pre, const Eigen::Matrix2d& between) {
    const Eigen::Vector2d mid = flip1 * pre;
    const Eigen::Matrix2d second = sep * flip1 * between * flip2;  // out2 given mid1
    Eigen::Matrix2d j;  // j(x, y)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) j(x, y) = sep(x, 0) * second(y, 0) * mid[0] + sep(x, 1) * second(y, 1) * mid[1];
    return j;
  };
  const Eigen::Matrix2d ja = joint(thermal, Eigen::Matrix2d::Identity());
  const Eigen::Matrix2d jb = joint(pi * thermal, Eigen::Matrix2d::Identity());
  const Eigen::Matrix2d jc = joint(thermal, pi);
  auto cond = [](const Eigen::Matrix2d& j, int x, int y) { return j(x, y) / j.row(x).sum(); };
  auto ratio = [](const Eigen::Matrix2d& j) { return j.row(1).sum() / j.row(0).sum(); };

  ReadoutStats s;
  s.p_a_e_given_g = cond(ja, 0, 1);
  s.p_a_g_given_e = cond(ja, 1, 0);
  s.p_b_e_given_g = cond(jb, 0, 1);
  s.p_b_g_given_e = cond(jb, 1, 0);
  s.p_c_g_given_g = cond(jc, 0, 0);
  s.p_c_e_given_e = cond(jc, 1, 1);
  s.r_a = ratio(ja);
  s.r_b = ratio(jb);
  s.r_c = ratio(jc);
  return s;
}

}  // namespace purcell
