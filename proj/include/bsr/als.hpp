#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/QR>

#include "bsr/cluster.hpp"
#include "bsr/scene.hpp"

namespace bsr {

struct UserEstimate {
  std::vector<double> angles;
  CVector c;      // per-path gains, alpha scaled by |s| (= alpha for unit-norm data)
  CVector phi;    // unit-norm data signature
  CVector alpha;  // reported path gains; equal to c
  CVector h;      // A(angles) c over the full array
  bool flagged = false;
};

struct AlsReport {
  std::vector<double> residual_trace;
  int iterations_run = 0;
};

struct AlsOutput {
  std::vector<CVector> c;
  std::vector<CVector> phi;
  std::vector<bool> flagged;
  AlsReport report;
};

/// Initial data guesses: entries uniform on (0, 5], left unnormalized.
inline std::vector<CVector> init_phi(Index t, Index k_active, std::mt19937_64& rng) {
  if (t < 1) throw DomainError("need at least one snapshot");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<CVector> out;
  for (Index k = 0; k < k_active; ++k) {
    CVector phi(t);
    for (Index i = 0; i < t; ++i) phi[i] = cplx(5.0 * (1.0 - unit(rng)), 0.0);
    out.push_back(std::move(phi));
  }
  return out;
}

/// Y - sum_k A_k c_k phi_k^H
inline CMatrix als_residual(const CMatrix& y, std::span<const CMatrix> steering,
                            std::span<const CVector> cs, std::span<const CVector> phis) {
  CMatrix r = y;
  for (std::size_t k = 0; k < steering.size(); ++k) r -= steering[k] * cs[k] * phis[k].adjoint();
  return r;
}

/// Joint least squares for every user's gain vector given the data guesses.
/// vec(A c phi^H) = (conj(phi) kron A) c, so the users' blocks are stacked
/// side by side and solved with a minimum-norm complete orthogonal decomposition.
inline std::vector<CVector> c_step(const CMatrix& y, std::span<const CMatrix> steering,
                                   std::span<const CVector> phis) {
  if (steering.size() != phis.size()) throw DimensionError("one data vector per user is required");
  const Index m = y.rows();
  const Index t = y.cols();
  Index total = 0;
  for (std::size_t k = 0; k < steering.size(); ++k) {
    if (steering[k].rows() != m) throw DimensionError("steering rows must match Y");
    if (phis[k].size() != t) throw DimensionError("data length must match Y columns");
    total += steering[k].cols();
  }
  CMatrix stacked(m * t, total);
  Index col = 0;
  for (std::size_t k = 0; k < steering.size(); ++k) {
    const CMatrix& a = steering[k];
    for (Index s = 0; s < t; ++s)
      stacked.block(s * m, col, m, a.cols()) = std::conj(phis[k][s]) * a;
    col += a.cols();
  }
  if (total == 0 || stacked.isZero(0.0)) throw DegenerateInputError("c-step system matrix is identically zero");

  const CVector rhs = Eigen::Map<const CVector>(y.data(), y.size());
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(stacked);
  const CVector sol = cod.solve(rhs);

  std::vector<CVector> out;
  col = 0;
  for (const auto& a : steering) {
    out.emplace_back(sol.segment(col, a.cols()));
    col += a.cols();
  }
  return out;
}

struct PhiStepResult {
  std::vector<CVector> phi;  // unnormalized
  std::vector<bool> flagged;
};

/// Phi = B^+ Y with B = [A_1 c_1, ..., A_K c_K]; row k of Phi is phi_k^H.
/// A user whose column of B vanishes gets phi = 0 and is flagged.
inline PhiStepResult phi_step(const CMatrix& y, std::span<const CMatrix> steering,
                              std::span<const CVector> cs) {
  if (steering.size() != cs.size()) throw DimensionError("one gain vector per user is required");
  const Index k_users = static_cast<Index>(steering.size());
  CMatrix b(y.rows(), k_users);
  for (Index k = 0; k < k_users; ++k) {
    if (steering[static_cast<std::size_t>(k)].cols() != cs[static_cast<std::size_t>(k)].size())
      throw DimensionError("gain length must match steering columns");
    b.col(k) = steering[static_cast<std::size_t>(k)] * cs[static_cast<std::size_t>(k)];
  }

  PhiStepResult out;
  out.phi.assign(static_cast<std::size_t>(k_users), CVector::Zero(y.cols()));
  out.flagged.assign(static_cast<std::size_t>(k_users), false);
  std::vector<Index> live;
  const double scale = b.colwise().norm().maxCoeff();
  for (Index k = 0; k < k_users; ++k) {
    if (scale == 0.0 || b.col(k).norm() <= 1e-13 * scale)
      out.flagged[static_cast<std::size_t>(k)] = true;
    else
      live.push_back(k);
  }
  if (live.empty()) return out;

  CMatrix reduced(y.rows(), static_cast<Index>(live.size()));
  for (std::size_t j = 0; j < live.size(); ++j) reduced.col(static_cast<Index>(j)) = b.col(live[j]);
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(reduced);
  const CMatrix rows = cod.solve(y);
  for (std::size_t j = 0; j < live.size(); ++j)
    out.phi[static_cast<std::size_t>(live[j])] = rows.row(static_cast<Index>(j)).adjoint();
  return out;
}

/// Rotates (phi, c) by a common unit scalar so that sum_t phi(t) is real and
/// positive. The product c phi^H is unchanged.
inline void fix_phase(CVector& phi, CVector& c) {
  const cplx sum = phi.sum();
  if (std::abs(sum) == 0.0) return;
  const cplx rot = std::conj(sum / std::abs(sum));
  phi *= rot;
  c *= rot;
}

/// Alternates c-step and phi-step `maxiter` times, normalizing each phi and
/// absorbing its norm into c, then applies the phase convention.
inline AlsOutput run_als(const CMatrix& y, std::span<const CMatrix> steering, int maxiter,
                         std::mt19937_64& rng) {
  if (maxiter < 1) throw DomainError("maxiter must be at least 1");
  const std::size_t k_users = steering.size();
  AlsOutput out;
  out.phi = init_phi(y.cols(), static_cast<Index>(k_users), rng);
  out.flagged.assign(k_users, false);
  out.c.resize(k_users);
  for (std::size_t k = 0; k < k_users; ++k) out.c[k] = CVector::Zero(steering[k].cols());

  for (int it = 0; it < maxiter; ++it) {
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < k_users; ++k)
      if (!out.flagged[k]) live.push_back(k);
    if (live.empty()) break;

    std::vector<CMatrix> live_a;
    std::vector<CVector> live_phi;
    for (auto k : live) {
      live_a.push_back(steering[k]);
      live_phi.push_back(out.phi[k]);
    }
    const auto live_c = c_step(y, live_a, live_phi);
    for (std::size_t j = 0; j < live.size(); ++j) out.c[live[j]] = live_c[j];

    auto ps = phi_step(y, steering, out.c);
    for (std::size_t k = 0; k < k_users; ++k) {
      out.phi[k] = ps.phi[k];
      if (ps.flagged[k]) {
        out.flagged[k] = true;
        out.c[k].setZero();
      }
    }
    out.report.residual_trace.push_back(als_residual(y, steering, out.c, out.phi).norm());
    out.report.iterations_run = it + 1;

    for (std::size_t k = 0; k < k_users; ++k) {
      if (out.flagged[k]) continue;
      const double norm = out.phi[k].norm();
      if (norm == 0.0) continue;
      out.phi[k] /= norm;
      out.c[k] *= norm;
    }
  }
  for (std::size_t k = 0; k < k_users; ++k)
    if (!out.flagged[k]) fix_phase(out.phi[k], out.c[k]);
  if (out.report.iterations_run == 0) out.report.residual_trace.push_back(y.norm());
  return out;
}

inline std::vector<UserEstimate> make_user_estimates(const ClusterResult& clusters, const AlsOutput& als,
                                                     const ArrayGeometry& geometry) {
  if (clusters.members.size() != als.c.size()) throw DimensionError("cluster and ALS user counts differ");
  std::vector<UserEstimate> out;
  for (std::size_t k = 0; k < als.c.size(); ++k) {
    UserEstimate est;
    est.angles = clusters.members[k];
    est.c = als.c[k];
    est.alpha = als.c[k];
    est.phi = als.phi[k];
    est.flagged = als.flagged[k];
    est.h = steering_matrix(est.angles, geometry) * est.c;
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace bsr
