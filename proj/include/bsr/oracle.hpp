#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "bsr/scene.hpp"
#include "bsr/spectrum.hpp"

// Brute-force references. They are slow on purpose and share no code path
// with the ADMM solver beyond the steering vector.

namespace bsr {

struct GridPrimalOptions {
  int max_iters_per_stage = 3000;
  int max_total_iters = 200000;
  double stage_tol = 1e-12;
  double lambda_floor = 1e-10;  // relative to lambda_max, for eta = 0
  int bisection_steps = 40;
};

/// On-grid group-sparse solution; objective is the sum of row norms of an
/// exactly feasible point, so it upper-bounds the continuous atomic norm.
struct GridPrimalSolution {
  std::vector<double> grid;
  CMatrix coefficients;  // G x T, row g belongs to grid[g]
  double objective = 0.0;
  double residual = 0.0;
  bool converged = false;
};

/// Angles whose spatial frequencies are uniform on (-delta_r, delta_r], starting at
/// endfire theta = 0. Doubling grid_size keeps every old point.
inline std::vector<double> frequency_grid([[maybe_unused]] const ArrayGeometry& geometry, Index grid_size) {
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (Index g = 0; g < grid_size; ++g)
    grid[static_cast<std::size_t>(g)] =
        std::acos(1.0 - 2.0 * static_cast<double>(g) / static_cast<double>(grid_size));
  return grid;
}

namespace detail {

inline double group_norm_sum(const CMatrix& c) { return c.rowwise().norm().sum(); }

inline void group_shrink(CMatrix& c, double tau) {
  for (Index g = 0; g < c.rows(); ++g) {
    const double n = c.row(g).norm();
    if (n <= tau)
      c.row(g).setZero();
    else
      c.row(g) *= 1.0 - tau / n;
  }
}

// FISTA on 0.5 |Y - A C|^2 + lambda sum_g |C_g|, warm-started from c.
inline int fista(const CMatrix& a, const CMatrix& y, double lambda, double lipschitz, CMatrix& c,
                 int max_iters, double tol) {
  CMatrix z = c;
  CMatrix prev = c;
  double t = 1.0;
  const CMatrix ah = a.adjoint();
  int it = 0;
  for (; it < max_iters; ++it) {
    CMatrix next = z - (ah * (a * z - y)) / lipschitz;
    group_shrink(next, lambda / lipschitz);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - prev);
    const double change = (next - prev).norm();
    const double scale = std::max(next.norm(), 1e-300);
    prev = std::move(next);
    t = t_next;
    if (change <= tol * scale) {
      ++it;
      break;
    }
  }
  c = prev;
  return it;
}

// Moves C the minimum-norm distance that puts the residual on the eta-ball.
inline CMatrix restore_feasibility(const CMatrix& a, const CMatrix& y, const CMatrix& c, double eta) {
  const CMatrix r = y - a * c;
  const double rn = r.norm();
  if (rn <= eta) return c;
  const CMatrix excess = r * (1.0 - eta / rn);
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(a);
  return c + cod.solve(excess);
}

}  // namespace detail

/// min sum_g |C_g|_2  s.t.  |Y - A_Omega C|_F <= eta, by accelerated proximal
/// gradient on the Lagrangian with a continuation (and, for eta > 0, a
/// bisection) in lambda, followed by an exact feasibility correction.
inline GridPrimalSolution grid_primal(const CMatrix& y_omega, std::span<const Index> omega,
                                      const ArrayGeometry& geometry, double eta, Index grid_size,
                                      const GridPrimalOptions& opt = {}) {
  geometry.validate();
  if (grid_size < 8 * geometry.n_antennas) throw DomainError("grid_size must be at least 8N");
  if (y_omega.rows() != static_cast<Index>(omega.size())) throw DimensionError("y_omega rows must match |omega|");
  if (!(eta >= 0.0)) throw DomainError("eta must be non-negative");

  GridPrimalSolution sol;
  sol.grid = frequency_grid(geometry, grid_size);
  sol.coefficients = CMatrix::Zero(grid_size, y_omega.cols());
  const double ynorm = y_omega.norm();
  if (ynorm <= eta) {
    sol.residual = ynorm;
    sol.converged = true;
    return sol;
  }

  CMatrix a(static_cast<Index>(omega.size()), grid_size);
  for (Index g = 0; g < grid_size; ++g) {
    const double f = geometry.delta_r * std::cos(sol.grid[static_cast<std::size_t>(g)]);
    a.col(g) = restrict_rows(detail::steering_from_frequency(f, geometry.n_antennas), omega);
  }
  const CMatrix gram = a * a.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lipschitz = eig.eigenvalues().maxCoeff();
  const double lambda_max = (a.adjoint() * y_omega).rowwise().norm().maxCoeff();

  int total = 0;
  bool stalled = false;
  auto solve_at = [&](double lambda, CMatrix& c) {
    const int budget = std::min(opt.max_iters_per_stage, opt.max_total_iters - total);
    if (budget <= 0) {
      stalled = true;
      return;
    }
    const int used = detail::fista(a, y_omega, lambda, lipschitz, c, budget, opt.stage_tol);
    if (used >= budget) stalled = true;
    total += used;
  };

  CMatrix c = sol.coefficients;
  double lambda = lambda_max;
  if (eta == 0.0) {
    while (lambda > opt.lambda_floor * lambda_max && total < opt.max_total_iters) {
      lambda *= 0.5;
      solve_at(lambda, c);
    }
  } else {
    // Residual grows with lambda; walk down until it drops below eta, then bisect.
    double hi = lambda_max;
    double lo = lambda_max;
    CMatrix c_hi = c;
    while (lo > opt.lambda_floor * lambda_max) {
      lo *= 0.5;
      solve_at(lo, c);
      if ((y_omega - a * c).norm() <= eta) break;
      hi = lo;
      c_hi = c;
    }
    for (int step = 0; step < opt.bisection_steps && total < opt.max_total_iters; ++step) {
      const double mid = std::sqrt(lo * hi);
      CMatrix trial = c;
      solve_at(mid, trial);
      if ((y_omega - a * trial).norm() <= eta) {
        lo = mid;
        c = trial;
      } else {
        hi = mid;
      }
    }
  }

  CMatrix best = detail::restore_feasibility(a, y_omega, c, eta);
  double best_obj = detail::group_norm_sum(best);

  if (eta == 0.0) {
    // Least squares on the detected support when it pins Y down exactly.
    std::vector<Index> support;
    const double peak = c.rowwise().norm().maxCoeff();
    for (Index g = 0; g < c.rows(); ++g)
      if (c.row(g).norm() > 1e-6 * peak) support.push_back(g);
    if (!support.empty() && static_cast<Index>(support.size()) <= a.rows()) {
      CMatrix as(a.rows(), static_cast<Index>(support.size()));
      for (std::size_t s = 0; s < support.size(); ++s) as.col(static_cast<Index>(s)) = a.col(support[s]);
      Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(as);
      const CMatrix cs = cod.solve(y_omega);
      if ((y_omega - as * cs).norm() <= 1e-10 * ynorm) {
        CMatrix polished = CMatrix::Zero(c.rows(), c.cols());
        for (std::size_t s = 0; s < support.size(); ++s) polished.row(support[s]) = cs.row(static_cast<Index>(s));
        polished = detail::restore_feasibility(a, y_omega, polished, eta);
        const double obj = detail::group_norm_sum(polished);
        if (obj < best_obj) {
          best_obj = obj;
          best = std::move(polished);
        }
      }
    }
  }

  sol.coefficients = std::move(best);
  sol.objective = best_obj;
  sol.residual = (y_omega - a * sol.coefficients).norm();
  sol.converged = !stalled;
  return sol;
}

struct SingleAtomFit {
  double theta = 0.0;
  Index grid_index = -1;
  cplx c = 0.0;
  CVector phi;
  double residual = 0.0;
};

/// Best single atom a(theta_g) c phi^H over the grid. For unit-norm a the
/// optimal row c phi^H is a^H Y, so the residual is sqrt(|Y|^2 - |Y^H a|^2).
inline SingleAtomFit exhaustive_single_atom_fit(const CMatrix& y, const ArrayGeometry& geometry, Index grid_size) {
  geometry.validate();
  if (y.rows() != geometry.n_antennas) throw DimensionError("y must have N rows");
  if (grid_size < 8 * geometry.n_antennas) throw DomainError("grid_size must be at least 8N");
  const auto grid = frequency_grid(geometry, grid_size);
  SingleAtomFit best;
  best.phi = CVector::Zero(y.cols());
  double best_corr = -1.0;
  for (Index g = 0; g < grid_size; ++g) {
    const double f = geometry.delta_r * std::cos(grid[static_cast<std::size_t>(g)]);
    const CVector a = detail::steering_from_frequency(f, geometry.n_antennas);
    const CVector corr = y.adjoint() * a;  // = (a^H Y)^H
    const double energy = corr.squaredNorm();
    if (energy > best_corr) {
      best_corr = energy;
      best.grid_index = g;
      best.theta = grid[static_cast<std::size_t>(g)];
      const double mag = std::sqrt(energy);
      if (mag > 0.0) {
        best.phi = corr / mag;
        best.c = mag;
        // Same phase convention as the ALS output.
        const cplx sum = best.phi.sum();
        if (std::abs(sum) > 0.0) {
          const cplx rot = std::conj(sum / std::abs(sum));
          best.phi *= rot;
          best.c *= rot;
        }
      } else {
        best.phi.setZero();
        best.c = 0.0;
      }
    }
  }
  best.residual = std::sqrt(std::max(0.0, y.squaredNorm() - best_corr));
  return best;
}

}  // namespace bsr
