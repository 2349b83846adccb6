#include "purcell/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "purcell/errors.hpp"
#include "purcell/lsq.hpp"
#include "purcell/units.hpp"

namespace purcell {

namespace {

using cplx = std::complex<double>;
using Triplet = Eigen::Triplet<cplx>;
constexpr cplx kI{0.0, 1.0};

SparseOp from_triplets(int dim, const std::vector<Triplet>& t) {
  SparseOp m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

double transmon_energy(const LindbladModel& m, int n) {
  return to_angular(n * m.omega_eg + 0.5 * m.alpha * n * (n - 1));
}

// Lab-frame undriven Hamiltonian as a dense real matrix (rad/s).
Eigen::MatrixXd dense_h0(const LindbladModel& m) {
  return Eigen::MatrixXd(m.hamiltonian(0.0).real());
}

int level_of(const LindbladModel& m, int bare) { return bare / m.n_fock; }
int photons_of(const LindbladModel& m, int bare) { return bare % m.n_fock; }

// Drive tone prepared for the right-hand side.
struct ActiveDrive {
  const Pulse* pulse;
  double half_amplitude;  // rad/s
  double detuning;        // carrier - frame, rad/s
  const SparseOp* raise;
  const SparseOp* lower;
};

struct Generator {
  SparseOp h_eff;
  std::vector<SparseOp> jumps, jumps_dag;
  SparseOp b_up, b_down, a_up, a_down;
  std::vector<ActiveDrive> drives;

  void rhs(double t, const CMatrix& rho, CMatrix& out) const {
    CMatrix a = h_eff * rho;
    for (const auto& d : drives) {
      const double env = d.pulse->envelope_at(t);
      if (env == 0.0) continue;
      const cplx c = d.half_amplitude * env * std::exp(-kI * (d.detuning * t));
      a.noalias() += c * ((*d.raise) * rho);
      a.noalias() += std::conj(c) * ((*d.lower) * rho);
    }
    a *= -kI;
    out = a + a.adjoint();
    for (std::size_t k = 0; k < jumps.size(); ++k) {
      const CMatrix m = jumps[k] * rho;
      out.noalias() += m * jumps_dag[k];
    }
  }
};

Generator make_generator(const LindbladModel& model, const PulseSequence& seq, double frame_hz) {
  Generator gen;
  gen.b_down = model.transmon_lowering();
  gen.b_up = SparseOp(gen.b_down.adjoint());
  gen.a_down = model.cavity_lowering();
  gen.a_up = SparseOp(gen.a_down.adjoint());
  SparseOp h = model.hamiltonian(frame_hz);
  SparseOp loss(model.dim(), model.dim());
  for (const auto& l : model.collapse_operators()) {
    gen.jumps.push_back(l);
    gen.jumps_dag.push_back(SparseOp(l.adjoint()));
    loss += SparseOp(gen.jumps_dag.back() * l);
  }
  gen.h_eff = h - 0.5 * kI * loss;
  gen.h_eff.makeCompressed();
  for (const auto& p : seq.pulses) {
    const bool tr = p.target == DriveTarget::transmon;
    gen.drives.push_back({&p, 0.5 * to_angular(p.amplitude), to_angular(p.carrier - frame_hz),
                          tr ? &gen.b_up : &gen.a_up, tr ? &gen.b_down : &gen.a_down});
  }
  return gen;
}

// Dormand-Prince 5(4).
struct Stepper {
  const Generator& gen;
  double rtol, atol, trace_tol;
  long max_steps;
  double min_step;
  long steps = 0;
  double h = 0.0;

  void advance(CMatrix& y, double t0, double t1) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    if (t1 <= t0) return;
    const double trace0 = y.trace().real();
    const int n = static_cast<int>(y.rows());
    CMatrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), k5(n, n), k6(n, n), k7(n, n), tmp(n, n), y5(n, n);
    double t = t0;
    if (h <= 0.0) h = std::min(1e-12, t1 - t0);
    gen.rhs(t, y, k1);
    while (t < t1) {
      if (++steps > max_steps) throw IntegrationError("step budget exhausted at t = " + std::to_string(t));
      const bool last = t + h >= t1;
      const double hs = last ? t1 - t : h;
      tmp = y + hs * a21 * k1;
      gen.rhs(t + c2 * hs, tmp, k2);
      tmp = y + hs * (a31 * k1 + a32 * k2);
      gen.rhs(t + c3 * hs, tmp, k3);
      tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      gen.rhs(t + c4 * hs, tmp, k4);
      tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      gen.rhs(t + c5 * hs, tmp, k5);
      tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      gen.rhs(t + hs, tmp, k6);
      y5 = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      gen.rhs(t + hs, y5, k7);
      tmp = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double err = 0.0;
      for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double sc = atol + rtol * std::max(std::abs(y.data()[j]), std::abs(y5.data()[j]));
        err = std::max(err, std::abs(tmp.data()[j]) / sc);
      }
      const bool trace_ok = std::abs(y5.trace().real() - trace0) <= trace_tol;
      if (!std::isfinite(err)) err = 1e10;
      if (err <= 1.0 && trace_ok) {
        t = last ? t1 : t + hs;
        y = y5;
        k1 = k7;
        const double grow = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
        if (!last) h = hs * grow;
      } else {
        h = hs * std::max(0.2, 0.9 * std::pow(std::max(err, 1.0), -0.2));
        if (!trace_ok) h = std::min(h, 0.5 * hs);
        if (h < min_step) {
          std::ostringstream os;
          os << "step size underflow at t = " << t << " s (h = " << h << ", error norm " << err
             << ", trace drift " << y5.trace().real() - trace0 << ")";
          throw IntegrationError(os.str());
        }
      }
    }
  }
};

void check_density(const CMatrix& rho, int dim) {
  if (rho.rows() != dim || rho.cols() != dim) throw UsageError("initial state has the wrong dimension");
  if ((rho - rho.adjoint()).norm() > 1e-10) throw UsageError("initial state is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > 1e-9) throw UsageError("initial state must have unit trace");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) throw UsageError("initial state is not positive semidefinite");
}

// Damped cosine fit p(t) = c + a cos(2 pi f t + phi) exp(-gamma t).
struct CosineFit {
  double c, a, f, phi, gamma;
};

CosineFit fit_damped_cosine(const std::vector<double>& t, const std::vector<double>& p, double f_guess) {
  const double mean = [&] {
    double s = 0.0;
    for (double v : p) s += v;
    return s / p.size();
  }();
  int crossings = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if ((p[k - 1] - mean) * (p[k] - mean) < 0.0) ++crossings;
  const double span = t.back() - t.front();
  if (crossings >= 4) f_guess = crossings / (2.0 * span);
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  const double amp0 = 0.5 * (*hi - *lo);
  const double phi0 = p.front() < mean ? std::numbers::pi : 0.0;

  lsq::ResidualFn f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double tt = t[k] * f_guess;  // in periods of the guess
      r[k] = x[0] + x[1] * std::cos(2.0 * std::numbers::pi * x[2] * tt + x[3]) * std::exp(-x[4] * tt) - p[k];
    }
    return r;
  };
  Eigen::VectorXd x0(5);
  x0 << mean, amp0, 1.0, phi0, 0.0;
  const auto res = lsq::levenberg_marquardt(f, x0);
  const double rms = std::sqrt(res.rss / t.size());
  if (!res.converged || !(rms < 0.05 * std::max(amp0, 1e-12))) {
    std::ostringstream os;
    os << "damped-cosine fit failed (rms " << rms << "); trace:";
    for (std::size_t k = 0; k < t.size(); ++k) os << ' ' << t[k] << ':' << p[k];
    throw FitError(os.str(), rms);
  }
  return {res.x[0], res.x[1], std::abs(res.x[2]) * f_guess, res.x[3], res.x[4] * f_guess};
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

// ---- model -----------------------------------------------------------------

void LindbladModel::validate() const {
  if (n_transmon < 2 || n_transmon > 5) throw UsageError("n_transmon must lie in [2, 5]");
  if (n_fock < 2) throw UsageError("n_fock must be at least 2");
  if (!(omega_eg > 0.0 && omega_r > 0.0)) throw UsageError("model frequencies must be positive");
  if (!(kappa_ex >= 0.0 && gamma_phi >= 0.0)) throw UsageError("model rates must be non-negative");
  if (!(t1 > 0.0 && t1f > 0.0)) throw UsageError("t1 and t1f must be positive");
  if (!(r_th >= 0.0 && r_th < 1.0)) throw UsageError("r_th must lie in [0, 1)");
  if (!std::isfinite(alpha) || !std::isfinite(g)) throw UsageError("model parameters must be finite");
}

SparseOp LindbladModel::transmon_lowering() const {
  std::vector<Triplet> t;
  for (int n = 1; n < n_transmon; ++n)
    for (int m = 0; m < n_fock; ++m) t.emplace_back(index(n - 1, m), index(n, m), std::sqrt(double(n)));
  return from_triplets(dim(), t);
}

SparseOp LindbladModel::cavity_lowering() const {
  std::vector<Triplet> t;
  for (int n = 0; n < n_transmon; ++n)
    for (int m = 1; m < n_fock; ++m) t.emplace_back(index(n, m - 1), index(n, m), std::sqrt(double(m)));
  return from_triplets(dim(), t);
}

SparseOp LindbladModel::excitation_number() const {
  std::vector<Triplet> t;
  for (int n = 0; n < n_transmon; ++n)
    for (int m = 0; m < n_fock; ++m) t.emplace_back(index(n, m), index(n, m), double(n + m));
  return from_triplets(dim(), t);
}

SparseOp LindbladModel::hamiltonian(double frame_hz) const {
  std::vector<Triplet> t;
  const double wf = to_angular(frame_hz);
  const double wr = to_angular(omega_r);
  const double gg = to_angular(g);
  for (int n = 0; n < n_transmon; ++n)
    for (int m = 0; m < n_fock; ++m) {
      t.emplace_back(index(n, m), index(n, m), transmon_energy(*this, n) + m * wr - (n + m) * wf);
      // g (b' a + b a'): |n+1, m-1> <n, m| with sqrt(n+1) sqrt(m).
      if (n + 1 < n_transmon && m >= 1) {
        const double el = gg * std::sqrt(double(n + 1)) * std::sqrt(double(m));
        t.emplace_back(index(n + 1, m - 1), index(n, m), el);
        t.emplace_back(index(n, m), index(n + 1, m - 1), el);
      }
    }
  return from_triplets(dim(), t);
}

std::vector<SparseOp> LindbladModel::collapse_operators() const {
  std::vector<SparseOp> ops;
  const double down1 = (1.0 / t1) / (1.0 + r_th);
  for (int n = 1; n < n_transmon; ++n) {
    const double rate = n == 1 ? down1 : (n == 2 ? 1.0 / t1f : 0.5 * n / t1f);
    std::vector<Triplet> t;
    for (int m = 0; m < n_fock; ++m) t.emplace_back(index(n - 1, m), index(n, m), std::sqrt(rate));
    ops.push_back(from_triplets(dim(), t));
  }
  if (r_th > 0.0) {
    std::vector<Triplet> t;
    for (int m = 0; m < n_fock; ++m) t.emplace_back(index(1, m), index(0, m), std::sqrt(r_th * down1));
    ops.push_back(from_triplets(dim(), t));
  }
  if (gamma_phi > 0.0) {
    std::vector<Triplet> t;
    for (int n = 1; n < n_transmon; ++n)
      for (int m = 0; m < n_fock; ++m) t.emplace_back(index(n, m), index(n, m), std::sqrt(2.0 * gamma_phi) * n);
    ops.push_back(from_triplets(dim(), t));
  }
  if (kappa_ex > 0.0) {
    const double sk = std::sqrt(to_angular(kappa_ex));
    SparseOp a = cavity_lowering();
    if (!filter_purcell) {
      ops.push_back(sk * a);
    } else {
      const DressedSpectrum ds = dressed_spectrum(*this);
      CMatrix ad = ds.vectors.adjoint() * CMatrix(a) * ds.vectors;
      for (int i = 0; i < dim(); ++i)
        for (int j = 0; j < dim(); ++j) {
          const int li = ds.labels[i], lj = ds.labels[j];
          const bool cavity_like = level_of(*this, li) == level_of(*this, lj) &&
                                   photons_of(*this, li) + 1 == photons_of(*this, lj);
          if (!cavity_like) ad(i, j) = 0.0;
        }
      const CMatrix back = ds.vectors * ad * ds.vectors.adjoint();
      const double cut = 1e-12 * back.cwiseAbs().maxCoeff();
      std::vector<Triplet> t;
      for (int i = 0; i < dim(); ++i)
        for (int j = 0; j < dim(); ++j)
          if (std::abs(back(i, j)) > cut) t.emplace_back(i, j, sk * back(i, j));
      ops.push_back(from_triplets(dim(), t));
    }
  }
  return ops;
}

LindbladModel build_model(const DeviceParams& device, const Truncation& tr) {
  device.validate();
  LindbladModel m;
  m.n_transmon = tr.n_transmon;
  m.n_fock = tr.n_fock;
  m.omega_eg = device.omega_eg;
  m.alpha = device.alpha();
  m.omega_r = device.omega_r;
  m.g = device.g;
  m.kappa_ex = device.kappa_ex;
  m.t1 = device.t1;
  m.t1f = device.t1f;
  m.r_th = device.r_th;
  m.filter_purcell = tr.filter_purcell;
  const double t2 = tr.dephasing == DephasingSource::echo ? device.t2_echo : device.t2_star;
  m.gamma_phi = std::max(0.0, 1.0 / t2 - 1.0 / (2.0 * device.t1));
  m.validate();

  if (tr.drive_amplitude_hint > 0.0) {
    // Admixture of the top level when driving the transition just below it.
    const int top = m.n_transmon - 1;
    const double gap = std::abs(to_hz(transmon_energy(m, top) - transmon_energy(m, top - 1)) - m.omega_eg);
    const double mix = std::sqrt(double(top)) * tr.drive_amplitude_hint / 2.0 / std::max(gap, 1.0);
    if (mix * mix > 1e-3) {
      std::ostringstream os;
      os << "transmon cutoff " << m.n_transmon << " may be too small: estimated top-level leakage "
         << mix * mix;
      m.warnings.push_back(os.str());
    }
  }
  if (tr.photon_hint > 0.0) {
    // Poisson tail above the Fock cutoff.
    double term = std::exp(-tr.photon_hint), cdf = 0.0;
    for (int k = 0; k < m.n_fock; ++k) {
      cdf += term;
      term *= tr.photon_hint / (k + 1);
    }
    if (1.0 - cdf > 1e-3) {
      std::ostringstream os;
      os << "Fock cutoff " << m.n_fock << " truncates " << 1.0 - cdf << " of a coherent state with "
         << tr.photon_hint << " photons";
      m.warnings.push_back(os.str());
    }
  }
  return m;
}

// ---- dressed states --------------------------------------------------------

CMatrix DressedSpectrum::dressed_state(int bare_index) const {
  return vectors.col(state_of_label.at(bare_index));
}

DressedSpectrum dressed_spectrum(const LindbladModel& model) {
  model.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_h0(model));
  DressedSpectrum ds;
  ds.energies = es.eigenvalues();
  ds.vectors = es.eigenvectors().cast<cplx>();
  const int n = model.dim();
  // Greedy one-to-one labelling by descending overlap.
  std::vector<std::tuple<double, int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double w = std::norm(ds.vectors(i, k));
      if (w > 1e-6) pairs.emplace_back(w, k, i);
    }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  ds.labels.assign(n, -1);
  ds.state_of_label.assign(n, -1);
  for (const auto& [w, k, i] : pairs) {
    if (ds.labels[k] >= 0 || ds.state_of_label[i] >= 0) continue;
    ds.labels[k] = i;
    ds.state_of_label[i] = k;
  }
  for (int k = 0; k < n; ++k)
    if (ds.labels[k] < 0) throw NumericError("dressed-state labelling failed");
  return ds;
}

double dressed_frequency(const LindbladModel& model, int level_from, int photons_from, int level_to,
                         int photons_to) {
  const DressedSpectrum ds = dressed_spectrum(model);
  const double e_from = ds.energies[ds.state_of_label.at(model.index(level_from, photons_from))];
  const double e_to = ds.energies[ds.state_of_label.at(model.index(level_to, photons_to))];
  return to_hz(e_to - e_from);
}

double dressed_dispersive_shift(const LindbladModel& model) {
  const DressedSpectrum ds = dressed_spectrum(model);
  auto e = [&](int n, int m) { return ds.energies[ds.state_of_label.at(model.index(n, m))]; };
  return to_hz((e(1, 1) - e(1, 0)) - (e(0, 1) - e(0, 0)));
}

CMatrix dressed_density(const LindbladModel& model, int level, int photons) {
  const DressedSpectrum ds = dressed_spectrum(model);
  const CMatrix v = ds.dressed_state(model.index(level, photons));
  return v * v.adjoint();
}

Eigen::VectorXd dressed_populations(const LindbladModel& model, const CMatrix& rho) {
  const DressedSpectrum ds = dressed_spectrum(model);
  const CMatrix rd = ds.vectors.adjoint() * rho * ds.vectors;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(model.n_transmon);
  for (int k = 0; k < model.dim(); ++k) p[level_of(model, ds.labels[k])] += rd(k, k).real();
  return p;
}

// ---- pulses ----------------------------------------------------------------

double Pulse::envelope_at(double t) const {
  const double u = t - start;
  if (u < 0.0 || u > duration) return 0.0;
  switch (envelope) {
    case Envelope::square:
      return u < duration ? 1.0 : 0.0;
    case Envelope::gaussian: {
      const double s = shape.value_or(duration / 4.0);
      const double x = (u - 0.5 * duration) / s;
      return std::exp(-0.5 * x * x);
    }
    case Envelope::flat_top: {
      const double r = std::min(shape.value_or(duration / 10.0), 0.5 * duration);
      if (r <= 0.0) return 1.0;
      if (u < r) return 0.5 * (1.0 - std::cos(std::numbers::pi * u / r));
      if (u > duration - r) return 0.5 * (1.0 - std::cos(std::numbers::pi * (duration - u) / r));
      return 1.0;
    }
  }
  return 0.0;
}

void PulseSequence::validate() const {
  for (const auto& p : pulses) {
    if (!(p.duration > 0.0) || !std::isfinite(p.duration)) throw UsageError("pulse durations must be positive");
    if (!(p.amplitude >= 0.0) || !std::isfinite(p.amplitude)) throw UsageError("pulse amplitudes must be >= 0");
    if (!std::isfinite(p.start) || !std::isfinite(p.carrier) || !(p.carrier > 0.0))
      throw UsageError("pulse start and carrier must be finite, carrier positive");
    if (p.shape && !(*p.shape > 0.0)) throw UsageError("pulse shape parameter must be positive");
  }
}

std::vector<std::pair<int, int>> PulseSequence::overlaps() const {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < pulses.size(); ++i)
    for (std::size_t j = i + 1; j < pulses.size(); ++j)
      if (pulses[i].start < pulses[j].end() && pulses[j].start < pulses[i].end())
        out.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return out;
}

// ---- evolution -------------------------------------------------------------

SimResult evolve_lindblad(const LindbladModel& model, const PulseSequence& seq, const CMatrix& rho0,
                          const std::vector<double>& t_grid, const EvolveOptions& options) {
  model.validate();
  seq.validate();
  check_density(rho0, model.dim());
  if (!(options.t_start >= 0.0) || !std::isfinite(options.t_start)) throw UsageError("t_start must be non-negative");
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (!(t_grid[k] >= options.t_start) || (k > 0 && t_grid[k] < t_grid[k - 1]))
      throw UsageError("time grid must start at t_start and be non-decreasing");

  const double frame = options.frame.value_or(seq.pulses.empty() ? model.omega_eg : seq.pulses.front().carrier);
  const Generator gen = make_generator(model, seq, frame);
  const DressedSpectrum ds = dressed_spectrum(model);
  const SparseOp a = model.cavity_lowering();

  SimResult out;
  out.warnings = model.warnings;
  for (const auto& [i, j] : seq.overlaps()) {
    std::ostringstream os;
    os << "pulses " << i << " and " << j << " overlap";
    out.warnings.push_back(os.str());
  }

  std::vector<double> breaks;
  for (const auto& p : seq.pulses) {
    breaks.push_back(p.start);
    breaks.push_back(p.end());
    if (p.envelope == Envelope::flat_top) {
      const double r = std::min(p.shape.value_or(p.duration / 10.0), 0.5 * p.duration);
      breaks.push_back(p.start + r);
      breaks.push_back(p.end() - r);
    }
  }

  std::sort(breaks.begin(), breaks.end());
  Stepper stepper{gen, options.rtol, options.atol, options.trace_tolerance, options.max_steps, options.min_step};
  CMatrix rho = rho0;
  double t = options.t_start;
  out.populations.resize(static_cast<Eigen::Index>(t_grid.size()), model.n_transmon);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double target = t_grid[k];
    for (double b : breaks)
      if (b > t && b < target) {
        stepper.advance(rho, t, b);
        t = b;
      }
    stepper.advance(rho, t, target);
    t = target;

    const CMatrix rd = ds.vectors.adjoint() * rho * ds.vectors;
    for (int n = 0; n < model.n_transmon; ++n) out.populations(static_cast<Eigen::Index>(k), n) = 0.0;
    for (int s = 0; s < model.dim(); ++s)
      out.populations(static_cast<Eigen::Index>(k), level_of(model, ds.labels[s])) += rd(s, s).real();
    out.times.push_back(target);
    out.cavity_amplitude.push_back((a * rho).trace());
    if (options.keep_states) out.states.push_back(rho);
  }
  out.steps = stepper.steps;
  return out;
}

// ---- experiments -----------------------------------------------------------

RabiResult simulate_rabi(const LindbladModel& model, double omega_d, double amplitude,
                         const std::vector<double>& durations, Transition transition) {
  if (durations.size() < 8) throw UsageError("simulate_rabi needs at least 8 durations");
  if (!(amplitude > 0.0)) throw UsageError("simulate_rabi needs a positive amplitude");
  const int lower = transition == Transition::ge ? 0 : 1;
  const int upper = lower + 1;
  if (upper >= model.n_transmon) throw UsageError("transmon truncation too small for this transition");
  if (amplitude > 0.2 * std::abs(model.alpha))
    throw DomainError("simulate_rabi: amplitude must be well below the anharmonicity");

  std::vector<double> grid = durations;
  std::sort(grid.begin(), grid.end());
  PulseSequence seq;
  seq.pulses.push_back({omega_d, Envelope::square, amplitude, 0.0, grid.back() * (1.0 + 1e-12),
                        DriveTarget::transmon, std::nullopt});
  EvolveOptions opt;
  opt.frame = omega_d;
  const SimResult sim = evolve_lindblad(model, seq, dressed_density(model, lower), grid, opt);

  RabiResult r;
  r.durations = grid;
  for (std::size_t k = 0; k < grid.size(); ++k) r.population.push_back(sim.populations(static_cast<Eigen::Index>(k), upper));
  const double matrix_element = transition == Transition::ge ? 1.0 : std::sqrt(2.0);
  const double detuning = omega_d - dressed_frequency(model, lower, 0, upper, 0);
  const double guess = std::hypot(matrix_element * amplitude, detuning);
  const CosineFit fit = fit_damped_cosine(grid, r.population, guess);
  r.rabi_freq = fit.f;
  r.decay_time = fit.gamma > 0.0 ? 1.0 / fit.gamma : std::numeric_limits<double>::infinity();
  return r;
}

StarkResult simulate_stark_ramsey(const LindbladModel& model, double omega_d, double amplitude,
                                  double power_proxy) {
  if (!(amplitude >= 0.0)) throw UsageError("amplitude must be non-negative");
  if (!(power_proxy >= 0.0)) throw UsageError("power must be non-negative");
  if (model.n_transmon < 3) throw UsageError("Stark simulation needs the f level (n_transmon >= 3)");
  const double f_eg = dressed_frequency(model, 0, 0, 1, 0);
  const double f_fe = dressed_frequency(model, 1, 0, 2, 0);
  StarkResult out;
  const double nearest = std::min(std::abs(f_eg - omega_d), std::abs(f_fe - omega_d));
  out.precondition_ratio = amplitude > 0.0 ? nearest / amplitude : std::numeric_limits<double>::infinity();
  if (out.precondition_ratio < 2.0)
    throw DomainError("drive too strong for a perturbative Stark shift (detuning/amplitude < 2)");
  if (out.precondition_ratio < 5.0) out.warnings.push_back("detuning/amplitude below 5: perturbative formula degraded");

  const double estimate = std::abs(0.5 * amplitude * amplitude * (f_fe - f_eg) / ((f_eg - omega_d) * (f_fe - omega_d)));
  const double span = std::clamp(3.0 / std::max(estimate, 1e-300), 100e-9, 2e-6);
  const double ramp = std::max(20e-9, 20.0 / std::max(nearest, 1.0));
  const int samples = 400;

  auto measure = [&](double amp) {
    PulseSequence seq;
    if (amp > 0.0)
      seq.pulses.push_back({omega_d, Envelope::flat_top, amp, 0.0, 2.0 * (ramp + span), DriveTarget::transmon, ramp});
    const DressedSpectrum ds = dressed_spectrum(model);
    const CMatrix psi = (ds.dressed_state(model.index(0, 0)) + ds.dressed_state(model.index(1, 0))) / std::sqrt(2.0);
    std::vector<double> grid;
    for (int k = 0; k < samples; ++k) grid.push_back(ramp + span * k / (samples - 1));
    EvolveOptions opt;
    opt.frame = f_eg;
    opt.keep_states = true;
    const SimResult sim = evolve_lindblad(model, seq, psi * psi.adjoint(), grid, opt);
    const CMatrix vg = ds.dressed_state(model.index(0, 0)), ve = ds.dressed_state(model.index(1, 0));
    std::vector<double> phase;
    double prev = 0.0;
    for (const auto& rho : sim.states) {
      double p = std::arg((vg.adjoint() * rho * ve)(0, 0));
      if (!phase.empty()) p = prev + std::remainder(p - prev, 2.0 * std::numbers::pi);
      phase.push_back(p);
      prev = p;
    }
    // <g|rho|e> ~ exp(+i (E_e - E_g) t) in the frame.
    return slope_of(grid, phase) / (2.0 * std::numbers::pi);
  };
  const double driven = amplitude > 0.0 ? measure(amplitude) : 0.0;
  const double free = amplitude > 0.0 ? measure(0.0) : 0.0;
  out.stark_shift = driven - free;
  out.shift_per_watt = power_proxy > 0.0 ? out.stark_shift / power_proxy : std::numeric_limits<double>::quiet_NaN();
  return out;
}

SimResult simulate_probe_reflection(const LindbladModel& model, const ProbeSpec& probe, QubitBranch branch) {
  if (!(probe.duration >= 0.0) || !(probe.amplitude >= 0.0) || !(probe.carrier > 0.0))
    throw UsageError("probe needs a positive carrier and non-negative amplitude and duration");
  const int level = branch == QubitBranch::g ? 0 : 1;
  const double f_cav = dressed_frequency(model, level, 0, level, 1);
  const double kappa = to_angular(model.kappa_ex);
  const double sk = std::sqrt(kappa);
  const cplx lambda(kappa / 2.0, to_angular(f_cav - probe.carrier));
  const cplx alpha_ss = sk * probe.amplitude / lambda;
  const double until = probe.record_until > 0.0 ? probe.record_until : probe.duration + 10.0 / kappa;
  const int n = probe.samples > 1 ? probe.samples : static_cast<int>(std::ceil(until / 1e-9)) + 1;

  SimResult out;
  out.populations = Eigen::MatrixXd::Zero(n, model.n_transmon);
  const cplx alpha_end = alpha_ss * (1.0 - std::exp(-lambda * probe.duration));
  for (int k = 0; k < n; ++k) {
    const double t = until * k / (n - 1);
    const bool on = t < probe.duration;
    const cplx alpha = on ? alpha_ss * (1.0 - std::exp(-lambda * t)) : alpha_end * std::exp(-lambda * (t - probe.duration));
    const cplx in = on ? cplx(probe.amplitude, 0.0) : cplx(0.0, 0.0);
    out.times.push_back(t);
    out.populations(k, level) = 1.0;
    out.cavity_amplitude.push_back(alpha);
    out.output_records.push_back(in - sk * alpha);
  }
  return out;
}

PhotonNumbers steady_state_photons(const LindbladModel& model, double probe_amplitude, double detuning) {
  const double kappa = to_angular(model.kappa_ex);
  const double d = to_angular(detuning);
  const double delta = model.omega_eg - model.omega_r;
  if (model.g == 0.0) throw DomainError("critical photon number undefined for g = 0");
  return {kappa * probe_amplitude * probe_amplitude / (0.25 * kappa * kappa + d * d),
          delta * delta / (4.0 * model.g * model.g)};
}

double probe_amplitude_for_photons(const LindbladModel& model, double n_bar, double detuning) {
  if (!(n_bar >= 0.0)) throw UsageError("photon number must be non-negative");
  const double kappa = to_angular(model.kappa_ex);
  const double d = to_angular(detuning);
  return std::sqrt(n_bar * (0.25 * kappa * kappa + d * d) / kappa);
}

// ---- reset -----------------------------------------------------------------

namespace {

struct DrivenFrame {
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;
};

DrivenFrame driven_frame(const LindbladModel& model, double omega1, double amp1) {
  Eigen::MatrixXd h = Eigen::MatrixXd(model.hamiltonian(omega1).real());
  const Eigen::MatrixXd b = Eigen::MatrixXd(model.transmon_lowering().real());
  h += 0.5 * to_angular(amp1) * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  return {es.eigenvalues(), es.eigenvectors()};
}

struct Doublet {
  int i, j;
  double gap;
};

Doublet f0g1_doublet(const LindbladModel& model, const DressedSpectrum& ds, double omega1, double amp1) {
  const DrivenFrame fr = driven_frame(model, omega1, amp1);
  const Eigen::VectorXd f0 = ds.dressed_state(model.index(2, 0)).real();
  const Eigen::VectorXd g1 = ds.dressed_state(model.index(0, 1)).real();
  std::vector<std::pair<double, int>> w;
  for (int k = 0; k < model.dim(); ++k) {
    const double a = f0.dot(fr.vectors.col(k)), b = g1.dot(fr.vectors.col(k));
    w.emplace_back(a * a + b * b, k);
  }
  std::sort(w.begin(), w.end(), std::greater<>());
  const int i = w[0].second, j = w[1].second;
  return {i, j, std::abs(fr.energies[i] - fr.energies[j])};
}

}  // namespace

std::pair<ResetDrive, ResetDrive> calibrate_reset_drives(const LindbladModel& model, double f0g1_amplitude,
                                                         double e0f0_amplitude) {
  if (model.n_transmon < 3 || model.n_fock < 2) throw UsageError("reset needs n_transmon >= 3 and n_fock >= 2");
  if (!(f0g1_amplitude >= 0.0 && e0f0_amplitude >= 0.0)) throw UsageError("drive amplitudes must be >= 0");
  const DressedSpectrum ds = dressed_spectrum(model);
  auto e = [&](int n, int m) { return ds.energies[ds.state_of_label.at(model.index(n, m))]; };
  const double guess = to_hz(e(2, 0) - e(0, 1));
  const double nearest = std::abs(model.omega_eg - guess);

  // Grid search then golden section for the smallest doublet gap near `centre`.
  auto locate = [&](double amp, double centre, double window) {
    auto gap = [&](double w) { return f0g1_doublet(model, ds, w, amp).gap; };
    const int n = 201;
    double best_w = centre, best = gap(centre);
    for (int k = 0; k < n; ++k) {
      const double w = centre - window + 2.0 * window * k / (n - 1);
      const double v = gap(w);
      if (v < best) {
        best = v;
        best_w = w;
      }
    }
    double a = best_w - 2.0 * window / (n - 1), b = best_w + 2.0 * window / (n - 1);
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = gap(c), fd = gap(d);
    while (b - a > 1.0) {  // 1 Hz
      if (fc <= fd) {
        b = d; d = c; fd = fc; c = b - inv_phi * (b - a); fc = gap(c);
      } else {
        a = c; c = d; fc = fd; d = a + inv_phi * (b - a); fd = gap(d);
      }
    }
    return fc <= fd ? c : d;
  };
  // Follow the resonance up from a weak drive; strong drives open other
  // near-crossings of g1 far from it.
  constexpr double kStep = 100e6, kTrack = 100e6;
  const int steps = std::max(1, static_cast<int>(std::ceil(f0g1_amplitude / kStep)));
  double omega1 = guess, moved = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const double amp = f0g1_amplitude * k / steps;
    const double window = k == 1 ? 50e6 + 2.0 * amp * amp / std::max(nearest, 1.0) : std::max(kTrack, 3.0 * moved);
    const double next = locate(amp, omega1, window);
    moved = std::abs(next - omega1);
    omega1 = next;
  }

  const DrivenFrame fr = driven_frame(model, omega1, f0g1_amplitude);
  const Doublet dbl = f0g1_doublet(model, ds, omega1, f0g1_amplitude);
  const Eigen::VectorXd e0 = ds.dressed_state(model.index(1, 0)).real();
  int ke = -1;
  double we = -1.0;
  for (int k = 0; k < model.dim(); ++k) {
    if (k == dbl.i || k == dbl.j) continue;
    const double o = e0.dot(fr.vectors.col(k));
    if (o * o > we) {
      we = o * o;
      ke = k;
    }
  }
  const double mean = 0.5 * (fr.energies[dbl.i] + fr.energies[dbl.j]);
  const double omega2 = to_hz(mean - fr.energies[ke]) + omega1;
  return {{omega1, f0g1_amplitude}, {omega2, e0f0_amplitude}};
}

ResetCurve simulate_reset(const LindbladModel& model, const ResetDrive& f0g1, const ResetDrive& e0f0,
                          const std::vector<double>& durations, int initial_level, const ResetOptions& options) {
  if (model.n_transmon < 3 || model.n_fock < 3)
    throw UsageError("reset simulation needs n_transmon >= 3 and n_fock >= 3");
  if (initial_level < 0 || initial_level > 2) throw UsageError("initial state must be g, e or f");
  ResetCurve out;
  out.warnings = model.warnings;
  if (model.n_transmon < 4) out.warnings.push_back("n_transmon < 4: leakage to |h> is not represented");
  {
    const int top = model.n_transmon - 1;
    const double gap = std::abs(to_hz(transmon_energy(model, top) - transmon_energy(model, top - 1)) - f0g1.frequency);
    const double mix = std::sqrt(double(top)) * f0g1.amplitude / 2.0 / std::max(gap, 1.0);
    if (mix * mix > 1e-3) {
      std::ostringstream os;
      os << "transmon cutoff " << model.n_transmon << " may be too small for the f0-g1 drive: estimated leakage "
         << mix * mix;
      out.warnings.push_back(os.str());
    }
  }
  const DressedSpectrum ds = dressed_spectrum(model);
  const CMatrix g0 = ds.dressed_state(model.index(0, 0));
  const CMatrix psi = ds.dressed_state(model.index(initial_level, 0));
  const CMatrix rho0 = psi * psi.adjoint();
  EvolveOptions opt = options.evolve;
  opt.frame = f0g1.frequency;
  opt.keep_states = true;
  for (double d : durations)
    if (!(d >= 0.0) || !std::isfinite(d)) throw UsageError("durations must be non-negative");

  const bool driven = f0g1.amplitude > 0.0 || e0f0.amplitude > 0.0;
  const double ramp = options.ramp;
  auto tones = [&](double duration, double r) {
    PulseSequence seq;
    seq.pulses.push_back({f0g1.frequency, Envelope::flat_top, f0g1.amplitude, 0.0, duration, DriveTarget::transmon, r});
    seq.pulses.push_back({e0f0.frequency, Envelope::flat_top, e0f0.amplitude, 0.0, duration, DriveTarget::transmon, r});
    return seq;
  };
  // Every run shares the same ramp-up and plateau, so one held-drive
  // evolution supplies the state where each run's ramp-down begins.
  std::vector<double> starts;
  for (double d : durations) {
    if (!driven && d > 0.0) starts.push_back(d);
    if (driven && d >= 2.0 * ramp && ramp > 0.0) starts.push_back(d - ramp);
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::vector<CMatrix> at_start;
  if (!starts.empty()) {
    const double longest = *std::max_element(durations.begin(), durations.end());
    const PulseSequence held = driven ? tones(longest + ramp, ramp) : PulseSequence{};
    at_start = evolve_lindblad(model, held, rho0, starts, opt).states;
  }
  auto saved = [&](double t) {
    return at_start[static_cast<std::size_t>(std::lower_bound(starts.begin(), starts.end(), t) - starts.begin())];
  };

  for (double d : durations) {
    CMatrix rho = rho0;
    if (d > 0.0 && !driven) {
      rho = saved(d);
    } else if (d > 0.0 && d >= 2.0 * ramp && ramp > 0.0) {
      EvolveOptions tail = opt;
      tail.t_start = d - ramp;
      rho = evolve_lindblad(model, tones(d, ramp), saved(d - ramp), {d}, tail).states.back();
    } else if (d > 0.0) {
      rho = evolve_lindblad(model, tones(d, std::min(ramp, 0.5 * d)), rho0, {d}, opt).states.back();
    }
    out.durations.push_back(d);
    out.residual.push_back(1.0 - (g0.adjoint() * rho * g0)(0, 0).real());
  }
  return out;
}

}  // namespace purcell
