#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bsr/als.hpp"
#include "bsr/scene.hpp"

namespace bsr {

/// Minimum-cost injective assignment of rows to columns (rows <= cols is not
/// required). Returns, per row, the matched column or -1.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  std::vector<int> result(static_cast<std::size_t>(cost.rows()), -1);
  if (n == 0 || m == 0) return result;

  // Shortest augmenting path (Jonker-Volgenant style potentials), 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(m + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= m; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    if (transposed)
      result[static_cast<std::size_t>(j - 1)] = i - 1;
    else
      result[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return result;
}

/// Symmetric sum of nearest-neighbour distances between two angle sets.
inline double chamfer_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto one_way = [](std::span<const double> from, std::span<const double> to) {
    double total = 0.0;
    for (double x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (double y : to) best = std::min(best, std::abs(x - y));
      total += best;
    }
    return total;
  };
  return one_way(a, b) + one_way(b, a);
}

struct Alignment {
  // Per estimate: position in scene.active_set, or -1 when unmatched.
  std::vector<int> assignment;
  // Per true active user (same order as scene.active_set).
  std::vector<bool> matched;
  std::vector<double> cost;  // per estimate, Chamfer cost of its assignment
  double angle_tolerance = 0.035;

  std::size_t matched_count() const {
    return static_cast<std::size_t>(std::count(matched.begin(), matched.end(), true));
  }
};

struct TrialMetrics {
  double nmse_theta = std::numeric_limits<double>::quiet_NaN();
  double nmse_alpha = std::numeric_limits<double>::quiet_NaN();
  double nmse_phi = std::numeric_limits<double>::quiet_NaN();
  double nmse_h = std::numeric_limits<double>::quiet_NaN();
  double detection_rate = 0.0;
  // The difference-set count |S_u - S_u_hat|, i.e. K_a (1 - DR).
  int misses = 0;

  bool defined() const { return !std::isnan(nmse_theta); }
};

inline std::vector<double> true_angles(const Scene& scene, std::size_t active_pos) {
  return scene.users[static_cast<std::size_t>(scene.active_set[active_pos])].angles;
}

/// Matches estimated clusters to true active users by minimum total Chamfer
/// cost; a pair costing more than L_k * tolerance stays unmatched.
inline Alignment align(const Scene& scene, std::span<const UserEstimate> estimates, double tolerance) {
  Alignment out;
  out.angle_tolerance = tolerance;
  const std::size_t k_true = scene.active_set.size();
  out.matched.assign(k_true, false);
  out.assignment.assign(estimates.size(), -1);
  out.cost.assign(estimates.size(), std::numeric_limits<double>::infinity());
  if (estimates.empty() || k_true == 0) return out;

  Eigen::MatrixXd cost(static_cast<Index>(estimates.size()), static_cast<Index>(k_true));
  for (std::size_t j = 0; j < estimates.size(); ++j)
    for (std::size_t k = 0; k < k_true; ++k) {
      const double c = chamfer_distance(estimates[j].angles, true_angles(scene, k));
      // Empty angle sets never match; keep the solver finite.
      cost(static_cast<Index>(j), static_cast<Index>(k)) = std::isfinite(c) ? c : 1e6;
    }
  const auto pick = min_cost_assignment(cost);
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    const int k = pick[j];
    if (k < 0) continue;
    const double c = cost(static_cast<Index>(j), k);
    out.cost[j] = c;
    const double limit = static_cast<double>(true_angles(scene, static_cast<std::size_t>(k)).size()) * tolerance;
    if (c <= limit) {
      out.assignment[j] = k;
      out.matched[static_cast<std::size_t>(k)] = true;
    }
  }
  return out;
}

/// Path correspondence inside a matched user pair: sorted order when the
/// counts agree, otherwise a minimum total |dtheta| one-to-one matching.
/// Returns, per true path, the estimated path index or -1.
inline std::vector<int> match_paths(std::span<const double> truth, std::span<const double> est) {
  std::vector<int> out(truth.size(), -1);
  if (truth.size() == est.size()) {
    std::vector<std::size_t> ti(truth.size()), ei(est.size());
    for (std::size_t i = 0; i < ti.size(); ++i) ti[i] = ei[i] = i;
    std::sort(ti.begin(), ti.end(), [&](auto a, auto b) { return truth[a] < truth[b]; });
    std::sort(ei.begin(), ei.end(), [&](auto a, auto b) { return est[a] < est[b]; });
    for (std::size_t i = 0; i < ti.size(); ++i) out[ti[i]] = static_cast<int>(ei[i]);
    return out;
  }
  Eigen::MatrixXd cost(static_cast<Index>(truth.size()), static_cast<Index>(est.size()));
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = 0; j < est.size(); ++j)
      cost(static_cast<Index>(i), static_cast<Index>(j)) = std::abs(truth[i] - est[j]);
  return min_cost_assignment(cost);
}

/// Root-normalized errors over matched users, each estimate taken after the
/// phase convention. NaN when nothing matched.
inline TrialMetrics nmse_all(const Scene& scene, std::span<const UserEstimate> estimates,
                             const Alignment& alignment) {
  TrialMetrics m;
  const std::size_t k_true = scene.active_set.size();
  const std::size_t hits = alignment.matched_count();
  m.detection_rate = k_true == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(k_true);
  m.misses = static_cast<int>(k_true - hits);
  if (hits == 0) return m;

  double num_phi = 0, den_phi = 0, num_a = 0, den_a = 0, num_t = 0, den_t = 0, num_h = 0, den_h = 0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    const int k = alignment.assignment[j];
    if (k < 0) continue;
    const auto& user = scene.users[static_cast<std::size_t>(scene.active_set[static_cast<std::size_t>(k)])];
    const CVector& s = scene.data[static_cast<std::size_t>(k)];

    CVector phi = estimates[j].phi;
    CVector c = estimates[j].c;
    fix_phase(phi, c);

    num_phi += (s - phi).squaredNorm();
    den_phi += s.squaredNorm();

    const CVector h = user.channel(scene.geometry);
    const CVector h_hat = steering_matrix(estimates[j].angles, scene.geometry) * c;
    num_h += (h - h_hat).squaredNorm();
    den_h += h.squaredNorm();

    const auto pairs = match_paths(user.angles, estimates[j].angles);
    std::vector<bool> used(estimates[j].angles.size(), false);
    for (std::size_t i = 0; i < user.angles.size(); ++i) {
      const double th = user.angles[i];
      const cplx al = user.gains[i];
      den_t += th * th;
      den_a += std::norm(al);
      const int l = pairs[i];
      if (l >= 0) {
        used[static_cast<std::size_t>(l)] = true;
        const double d = th - estimates[j].angles[static_cast<std::size_t>(l)];
        num_t += d * d;
        num_a += std::norm(al - c[l]);
      } else {
        num_t += th * th;
        num_a += std::norm(al);
      }
    }
    for (std::size_t l = 0; l < used.size(); ++l) {
      if (used[l]) continue;
      num_t += estimates[j].angles[l] * estimates[j].angles[l];
      num_a += std::norm(c[static_cast<Index>(l)]);
    }
  }
  m.nmse_phi = std::sqrt(num_phi / den_phi);
  m.nmse_alpha = std::sqrt(num_a / den_a);
  m.nmse_theta = std::sqrt(num_t / den_t);
  m.nmse_h = std::sqrt(num_h / den_h);
  return m;
}

/// Fraction of true active users matched within tolerance (1 = all detected).
inline double detection_rate(const Scene& scene, const Alignment& alignment) {
  if (scene.active_set.empty()) return 0.0;
  return static_cast<double>(alignment.matched_count()) / static_cast<double>(scene.active_set.size());
}

}  // namespace bsr
