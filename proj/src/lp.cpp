#include "purcell/lp.hpp"

#include <limits>
#include <numeric>

#include "purcell/errors.hpp"

namespace purcell::lp {

double Polytope::violation(const Eigen::VectorXd& x) const {
  return std::max(0.0, (a * x - b).maxCoeff());
}

namespace {

// Visits every k-subset of {0..n-1} in lexicographic order.
template <typename F>
void for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

constexpr double kEps = 1e-12;

struct Tableau {
  Eigen::MatrixXd t;  // rows 0..m-1 constraints, last row reduced costs; last column rhs
  std::vector<int> basis;
  int m, cols;

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i < t.rows(); ++i)
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    basis[r] = c;
  }

  // Minimises the objective held in the last row over eligible columns.
  void run(int eligible_cols) {
    for (int iter = 0; iter < 100000; ++iter) {
      int enter = -1;
      for (int j = 0; j < eligible_cols; ++j)
        if (t(m, j) < -kEps) {
          enter = j;
          break;
        }
      if (enter < 0) return;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (t(i, enter) <= kEps) continue;
        const double ratio = t(i, cols) / t(i, enter);
        if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && leave >= 0 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) throw NumericError("linear program is unbounded");
      pivot(leave, enter);
    }
    throw NumericError("simplex iteration limit reached");
  }
};

}  // namespace

std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& p, double tol) {
  const int n = static_cast<int>(p.a.cols());
  const int m = static_cast<int>(p.a.rows());
  std::vector<Eigen::VectorXd> out;
  if (m < n) return out;
  const double scale = std::max(1.0, p.b.cwiseAbs().maxCoeff());
  Eigen::MatrixXd sub(n, n);
  Eigen::VectorXd rhs(n);
  for_each_subset(m, n, [&](const std::vector<int>& rows) {
    for (int i = 0; i < n; ++i) {
      sub.row(i) = p.a.row(rows[i]);
      rhs[i] = p.b[rows[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.rank() < n) return;
    const Eigen::VectorXd x = lu.solve(rhs);
    if (p.violation(x) > tol * scale * 1e3) return;
    for (const auto& v : out)
      if ((v - x).cwiseAbs().maxCoeff() <= tol * scale * 1e3) return;
    out.push_back(x);
  });
  return out;
}

Solution minimize(const Eigen::VectorXd& c, const Polytope& p) {
  const int n = static_cast<int>(p.a.cols());
  const int m = static_cast<int>(p.a.rows());
  if (c.size() != n) throw UsageError("objective size does not match the constraint matrix");
  std::vector<int> artificial_rows;
  for (int i = 0; i < m; ++i)
    if (p.b[i] < 0.0) artificial_rows.push_back(i);
  const int k = static_cast<int>(artificial_rows.size());
  Tableau tb;
  tb.m = m;
  tb.cols = n + m + k;
  tb.t = Eigen::MatrixXd::Zero(m + 1, tb.cols + 1);
  tb.basis.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    const double sign = p.b[i] < 0.0 ? -1.0 : 1.0;
    tb.t.block(i, 0, 1, n) = sign * p.a.row(i);
    tb.t(i, n + i) = sign;
    tb.t(i, tb.cols) = sign * p.b[i];
    tb.basis[i] = n + i;
  }
  for (int j = 0; j < k; ++j) {
    const int i = artificial_rows[j];
    tb.t(i, n + m + j) = 1.0;
    tb.basis[i] = n + m + j;
  }

  if (k > 0) {
    for (int j = 0; j < k; ++j) tb.t(m, n + m + j) = 1.0;
    for (int j = 0; j < k; ++j) tb.t.row(m) -= tb.t.row(artificial_rows[j]);
    tb.run(tb.cols);
    if (-tb.t(m, tb.cols) > 1e-10) throw InfeasibleError("linear program is infeasible");
    for (int i = 0; i < m; ++i) {
      if (tb.basis[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j)
        if (std::abs(tb.t(i, j)) > 1e-9) {
          tb.pivot(i, j);
          break;
        }
    }
  }

  tb.t.row(m).setZero();
  tb.t.block(m, 0, 1, n) = c.transpose();
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] < n + m && tb.t(m, tb.basis[i]) != 0.0) tb.t.row(m) -= tb.t(m, tb.basis[i]) * tb.t.row(i);
  tb.run(n + m);

  Solution s;
  s.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] < n) s.x[tb.basis[i]] = tb.t(i, tb.cols);
  s.objective = c.dot(s.x);
  return s;
}

Solution maximize(const Eigen::VectorXd& c, const Polytope& p) {
  Solution s = minimize(-c, p);
  s.objective = c.dot(s.x);
  return s;
}

}  // namespace purcell::lp
