#include "purcell/lsq.hpp"

#include <cmath>
#include <limits>

#include "purcell/errors.hpp"

namespace purcell::lsq {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                 double step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(x[k]));
    probe[k] = x[k] + h;
    const Eigen::VectorXd up = f(probe);
    probe[k] = x[k] - h;
    const Eigen::VectorXd down = f(probe);
    probe[k] = x[k];
    if (jac.size() == 0) jac.resize(up.size(), x.size());
    jac.col(k) = (up - down) / (2.0 * h);
  }
  return jac;
}

Result levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0,
                           const Options& options) {
  Result out;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = f(x);
  if (!r.allFinite()) throw FitError("residuals are not finite at the initial guess", NAN);
  if (r.size() <= x.size()) throw UsageError("least squares needs more residuals than parameters");
  double rss = r.squaredNorm();
  double lambda = options.initial_lambda;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd jac = numeric_jacobian(f, x, options.fd_step);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-30);

    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(-grad);
      const Eigen::VectorXd trial = x + delta;
      const Eigen::VectorXd r_trial = f(trial);
      const double rss_trial = r_trial.allFinite()
                                   ? r_trial.squaredNorm()
                                   : std::numeric_limits<double>::infinity();
      if (rss_trial <= rss) {
        const double rel_step = delta.norm() / (x.norm() + options.step_tolerance);
        x = trial;
        r = r_trial;
        rss = rss_trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel_step < options.step_tolerance) out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    // No downhill step at any damping: stationary to working precision.
    if (!accepted) out.converged = true;
    if (out.converged) break;
  }

  out.x = x;
  out.rss = rss;
  out.iterations = iter;

  const Eigen::MatrixXd jac = numeric_jacobian(f, x, options.fd_step);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  out.condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();

  const double dof = static_cast<double>(r.size() - x.size());
  const double variance = rss / dof;
  const Eigen::Index n = x.size();
  out.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  if (smin > smax * 1e-14) {
    const Eigen::MatrixXd v = svd.matrixV();
    const Eigen::VectorXd inv_s2 = sv.array().square().inverse();
    out.covariance = variance * v * inv_s2.asDiagonal() * v.transpose();
  }
  return out;
}

}  // namespace purcell::lsq
