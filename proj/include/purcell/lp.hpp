#pragma once

#include <vector>

#include <Eigen/Dense>

namespace purcell::lp {

/// Polyhedron {x : A x <= b}.
struct Polytope {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;

  Eigen::Index dim() const { return a.cols(); }
  /// Largest constraint violation max_i (A x - b)_i, clipped at zero.
  double violation(const Eigen::VectorXd& x) const;
};

/// All vertices of a bounded polytope, by solving every square subsystem
/// of active constraints. Intended for a handful of variables.
std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& p, double tol = 1e-12);

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// min c'x subject to A x <= b and x >= 0, by two-phase dense simplex with
/// Bland's rule. Throws InfeasibleError or NumericError (unbounded).
Solution minimize(const Eigen::VectorXd& c, const Polytope& p);
Solution maximize(const Eigen::VectorXd& c, const Polytope& p);

}  // namespace purcell::lp
