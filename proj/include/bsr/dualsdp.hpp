#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bsr/scene.hpp"
#include "bsr/types.hpp"

namespace bsr {

struct SolverOptions {
  double rho = 0.05;
  int max_iters = 5000;
  double tol_abs = 1e-6;
  double tol_rel = 1e-5;
  // Grid used for the post-solve feasibility check; 0 means 16 N.
  Index grid_check_size = 0;
  // Over-relaxation factor in (0, 2); 1 is plain ADMM.
  double relaxation = 1.6;
  // Residual balancing of rho; it is frozen after `adapt_until` iterations so
  // the tail of the run is a fixed-penalty ADMM.
  bool adaptive_rho = true;
  int adapt_until = 1000;
  int trace_stride = 25;
  // Weight mu of the term mu/2 |V|_F^2 (at unit data scale) subtracted from
  // the objective, mu = regularization + noise_regularization * sqrt(eta / |Y|).
  // Noiseless dual optima are not unique; the first part selects the
  // minimum-energy certificate. The second part scales with the noise level
  // and suppresses small noise-fitting atoms.
  double regularization = 1e-3;
  double noise_regularization = 0.05;

  void validate() const {
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
    if (!(tol_abs > 0.0) || !(tol_rel > 0.0)) throw ConfigError("tolerances must be positive");
    if (!(relaxation > 0.0 && relaxation < 2.0)) throw ConfigError("relaxation must be in (0, 2)");
    if (trace_stride < 1) throw ConfigError("trace_stride must be at least 1");
    if (!(regularization >= 0.0) || !(noise_regularization >= 0.0))
      throw ConfigError("regularization weights must be non-negative");
  }
};

struct DualProblem {
  CMatrix y_omega;
  std::vector<Index> omega;
  double eta = 0.0;
  Index n_antennas = 0;
  double delta_r = 0.5;
  SolverOptions options;

  static DualProblem from(const Observation& obs, const SolverOptions& options = {},
                          double delta_r = 0.5) {
    return {obs.y_omega, obs.omega, obs.eta, obs.n_antennas, delta_r, options};
  }
};

struct ResidualSample {
  int iteration = 0;
  double primal = 0.0;
  double dual = 0.0;
  // sqrt(|dS|^2 + |dU|^2) in the scaled form; the ADMM fixed-point residual.
  double combined = 0.0;
  double rho = 0.0;
};

struct SolverDiagnostics {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  double final_rho = 0.0;
  // Shift applied to restore exact feasibility of the returned certificate.
  double feasibility_shift = 0.0;
  double grid_dual_norm = 0.0;
  std::vector<ResidualSample> trace;
};

struct DualSolution {
  CMatrix v;       // N x T, zero off Omega
  CMatrix q_cert;  // N x N Hermitian
  double objective = 0.0;
  SolverDiagnostics diagnostics;

  bool converged() const { return diagnostics.converged; }
};

/// (T*(Z))_k = sum_i Z(i, i-k) for k = -(N-1)..(N-1); entry k lives at index k + N - 1.
inline CVector toeplitz_adjoint(const CMatrix& z) {
  if (z.rows() != z.cols()) throw DimensionError("toeplitz_adjoint needs a square matrix");
  const Index n = z.rows();
  CVector out = CVector::Zero(std::max<Index>(2 * n - 1, 0));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out[i - j + n - 1] += z(i, j);
  return out;
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
inline CMatrix psd_project(const CMatrix& h) {
  if (h.rows() != h.cols()) throw DimensionError("psd_project needs a square matrix");
  const CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(sym);
  if (eig.info() != Eigen::Success) throw SolverError("Hermitian eigensolver did not converge");
  const RVector& values = eig.eigenvalues();
  Index first = 0;
  while (first < values.size() && values[first] <= 0.0) ++first;
  const Index keep = values.size() - first;
  if (keep == 0) return CMatrix::Zero(h.rows(), h.cols());
  CMatrix basis = eig.eigenvectors().rightCols(keep);
  for (Index c = 0; c < keep; ++c) basis.col(c) *= std::sqrt(values[first + c]);
  CMatrix out = basis * basis.adjoint();
  return 0.5 * (out + out.adjoint());
}

inline double min_eigenvalue(const CMatrix& h) {
  const CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw SolverError("Hermitian eigensolver did not converge");
  return eig.eigenvalues()[0];
}

/// [[Q, V], [V^H, I_T]]
inline CMatrix lifted_block(const CMatrix& q, const CMatrix& v) {
  const Index n = q.rows();
  const Index t = v.cols();
  CMatrix block(n + t, n + t);
  block.topLeftCorner(n, n) = q;
  block.topRightCorner(n, t) = v;
  block.bottomLeftCorner(t, n) = v.adjoint();
  block.bottomRightCorner(t, t).setIdentity();
  return block;
}

/// |V^H a(theta)| for each spatial frequency in `freqs`.
inline RVector polynomial_norms(const CMatrix& v, std::span<const double> freqs) {
  const Index n = v.rows();
  RVector out(static_cast<Index>(freqs.size()));
  const CMatrix vc = v.conjugate();
  constexpr Index kChunk = 512;
  const Index total = static_cast<Index>(freqs.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index start = 0; start < total; start += kChunk) {
    const Index len = std::min(kChunk, total - start);
    CMatrix e(len, n);
    for (Index g = 0; g < len; ++g) {
      const double f = freqs[static_cast<std::size_t>(start + g)];
      for (Index i = 0; i < n; ++i) {
        const double phase = -2.0 * kPi * f * static_cast<double>(i);
        e(g, i) = cplx(scale * std::cos(phase), scale * std::sin(phase));
      }
    }
    const CMatrix q = e * vc;
    out.segment(start, len) = q.rowwise().norm();
  }
  return out;
}

inline double dual_polynomial_norm(const CMatrix& v, double theta, const ArrayGeometry& geometry) {
  const double f = geometry.frequency(theta);
  return polynomial_norms(v, std::span<const double>(&f, 1))[0];
}

/// max over `grid_size` uniformly spaced angles of |V^H a(theta)|.
inline double dual_norm_on_grid(const CMatrix& v, Index grid_size, const ArrayGeometry& geometry) {
  if (v.rows() != geometry.n_antennas) throw DimensionError("V must have N rows");
  if (grid_size < 4 * geometry.n_antennas) throw DomainError("grid_size must be at least 4N");
  if (v.size() == 0 || v.isZero(0.0)) return 0.0;
  std::vector<double> freqs(static_cast<std::size_t>(grid_size));
  for (Index g = 0; g < grid_size; ++g)
    freqs[static_cast<std::size_t>(g)] =
        geometry.frequency(kPi * (static_cast<double>(g) + 0.5) / static_cast<double>(grid_size));
  return polynomial_norms(v, freqs).maxCoeff();
}

namespace detail {

// Projection of G's upper-left block onto {Q Hermitian : T*(Q) = N e_0}:
// each diagonal is shifted by a constant so its sum hits the target.
inline void project_toeplitz_trace(CMatrix& q) {
  const Index n = q.rows();
  for (Index k = 0; k < n; ++k) {
    cplx sum = 0.0;
    for (Index j = 0; j + k < n; ++j) sum += q(j + k, j);
    const cplx target = k == 0 ? cplx(static_cast<double>(n), 0.0) : cplx(0.0, 0.0);
    const cplx shift = (sum - target) / static_cast<double>(n - k);
    for (Index j = 0; j + k < n; ++j) {
      q(j + k, j) -= shift;
      if (k > 0) q(j, j + k) = std::conj(q(j + k, j));
    }
    if (k == 0)
      for (Index j = 0; j < n; ++j) q(j, j) = q(j, j).real();
  }
}

// argmin_V  -Re<V_O, Y> + eta |V_O| + (mu/2) |V_O|^2 + rho |V - W|^2 over V
// supported on omega.
inline CMatrix update_v(const CMatrix& w, const CMatrix& y, std::span<const Index> omega,
                        double eta, double rho, double mu = 0.0) {
  CMatrix v = CMatrix::Zero(w.rows(), w.cols());
  CMatrix shifted(static_cast<Index>(omega.size()), w.cols());
  const double r = rho + 0.5 * mu;
  for (std::size_t i = 0; i < omega.size(); ++i)
    shifted.row(static_cast<Index>(i)) = (rho * w.row(omega[i]) + 0.5 * y.row(static_cast<Index>(i))) / r;
  const double norm = shifted.norm();
  const double tau = eta / (2.0 * r);
  const double keep = norm > tau ? 1.0 - tau / norm : 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i)
    v.row(omega[i]) = keep * shifted.row(static_cast<Index>(i));
  return v;
}

}  // namespace detail

/// Solves  max Re<V_O, Y_O> - eta |V_O|_F  s.t. [[Q, V], [V^H, I]] >= 0,
/// T*(Q) = T*(I_N), V zero off Omega, by ADMM on the lifted PSD block.
///
/// The returned (V, Q) is exactly feasible: the affine iterate is shifted by
/// its most negative eigenvalue and rescaled, which keeps T*(Q) fixed.
inline DualSolution solve_dual(const DualProblem& problem) {
  const SolverOptions& opt = problem.options;
  opt.validate();
  const Index n = problem.n_antennas;
  const Index m = problem.y_omega.rows();
  const Index t = problem.y_omega.cols();
  if (n < 2) throw DimensionError("need at least two antennas");
  if (m != static_cast<Index>(problem.omega.size()))
    throw DimensionError("y_omega rows must match |omega|");
  if (t < 1) throw DimensionError("need at least one snapshot");
  for (std::size_t r = 0; r < problem.omega.size(); ++r) {
    if (problem.omega[r] < 0 || problem.omega[r] >= n) throw DimensionError("omega index out of range");
    if (r > 0 && problem.omega[r] <= problem.omega[r - 1]) throw DimensionError("omega must be strictly ascending");
  }
  if (!(problem.eta >= 0.0)) throw DomainError("eta must be non-negative");

  DualSolution sol;
  const ArrayGeometry geometry{n, problem.delta_r};
  const double scale = problem.y_omega.norm();
  if (scale == 0.0) {
    sol.v = CMatrix::Zero(n, t);
    sol.q_cert = CMatrix::Identity(n, n);
    sol.diagnostics.converged = true;
    sol.diagnostics.final_rho = opt.rho;
    return sol;
  }
  // V is invariant to a common rescaling of (Y, eta); solve at unit scale.
  const CMatrix y = problem.y_omega / scale;
  const double eta = problem.eta / scale;
  const double mu = opt.regularization + opt.noise_regularization * std::sqrt(eta);

  const Index dim = n + t;
  double rho = opt.rho;
  CMatrix s = CMatrix::Identity(dim, dim);
  CMatrix u = CMatrix::Zero(dim, dim);
  CMatrix x(dim, dim);
  auto& diag = sol.diagnostics;

  for (int it = 1; it <= opt.max_iters; ++it) {
    const CMatrix g = s - u;
    CMatrix q = 0.5 * (g.topLeftCorner(n, n) + g.topLeftCorner(n, n).adjoint());
    detail::project_toeplitz_trace(q);
    const CMatrix w = 0.5 * (g.topRightCorner(n, t) + g.bottomLeftCorner(t, n).adjoint());
    const CMatrix v = detail::update_v(w, y, problem.omega, eta, rho, mu);
    x = lifted_block(q, v);

    const CMatrix x_hat = opt.relaxation * x + (1.0 - opt.relaxation) * s;
    const CMatrix s_next = psd_project(x_hat + u);
    const CMatrix du = x_hat - s_next;
    u += du;
    const double primal = (x - s_next).norm();
    const double ds = (s_next - s).norm();
    const double dual = rho * ds;
    s = s_next;

    diag.iterations = it;
    diag.primal_residual = primal;
    diag.dual_residual = dual;
    if (it % opt.trace_stride == 0)
      diag.trace.push_back({it, primal, dual, std::hypot(ds, du.norm()), rho});

    const double dimf = static_cast<double>(dim);
    const double eps_pri = dimf * opt.tol_abs + opt.tol_rel * std::max(x.norm(), s.norm());
    const double eps_dual = dimf * opt.tol_abs + opt.tol_rel * rho * u.norm();
    if (primal <= eps_pri && dual <= eps_dual) {
      diag.converged = true;
      break;
    }

    if (opt.adaptive_rho && it <= opt.adapt_until && it % 10 == 0) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (dual > 10.0 * primal) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  diag.final_rho = rho;

  CMatrix q = x.topLeftCorner(n, n);
  CMatrix v = x.topRightCorner(n, t);
  const double lambda = min_eigenvalue(lifted_block(q, v));
  if (lambda < 0.0) {
    const double shift = -lambda * (1.0 + 1e-9) + 1e-14;
    q = (q + shift * CMatrix::Identity(n, n)) / (1.0 + shift);
    v /= 1.0 + shift;
    diag.feasibility_shift = shift;
  }
  sol.q_cert = 0.5 * (q + q.adjoint());
  sol.v = v;

  const CMatrix v_omega = restrict_rows(v, problem.omega);
  sol.objective = (v_omega.cwiseProduct(problem.y_omega.conjugate())).sum().real() -
                  problem.eta * v_omega.norm();
  const Index grid = opt.grid_check_size > 0 ? opt.grid_check_size : 16 * n;
  diag.grid_dual_norm = dual_norm_on_grid(sol.v, std::max(grid, 4 * n), geometry);
  return sol;
}

}  // namespace bsr
