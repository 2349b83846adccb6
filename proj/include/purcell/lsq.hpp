#pragma once

#include <functional>

#include <Eigen/Dense>

namespace purcell::lsq {

/// Damped Gauss-Newton (Levenberg-Marquardt) for small dense problems.
///
/// The damping lambda multiplies the diagonal of J^T J and is scaled by 10
/// on rejected steps and by 1/10 on accepted ones. Parameters should be
/// pre-scaled by the caller to order unity; the Jacobian uses central
/// differences with step `fd_step` in those units.
struct Options {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
  double initial_lambda = 1e-3;
  double fd_step = 1e-7;
};

struct Result {
  Eigen::VectorXd x;
  /// Linearized covariance scaled by the residual variance rss/(m-n).
  Eigen::MatrixXd covariance;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Ratio of extreme singular values of J.
  double condition = 0.0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                 double step);

Result levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0,
                           const Options& options = {});

}  // namespace purcell::lsq
