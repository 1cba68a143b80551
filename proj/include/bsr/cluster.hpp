#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bsr/scene.hpp"

namespace bsr {

struct KMeansResult {
  std::vector<int> labels;      // 0-based, clusters ordered by ascending center
  std::vector<double> centers;
  double inertia = 0.0;         // within-cluster sum of squares
};

struct ClusterResult {
  std::vector<int> labels;
  std::vector<double> centers;
  std::vector<std::vector<double>> members;  // ascending angles per cluster
  std::vector<CMatrix> steering;             // M x L_k, rows restricted to Omega

  std::size_t clusters() const { return centers.size(); }
};

namespace detail {

inline int nearest_center(double x, std::span<const double> centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = std::abs(x - centers[c]);
    // Strict comparison keeps the lower index on ties.
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

inline std::vector<double> kmeanspp_seed(std::span<const double> x, int k, std::mt19937_64& rng) {
  std::vector<double> centers;
  std::uniform_int_distribution<std::size_t> first(0, x.size() - 1);
  centers.push_back(x[first(rng)]);
  std::vector<double> d2(x.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // Fewer distinct points than k; any pick duplicates a center.
      centers.push_back(x[first(rng)]);
      continue;
    }
    double r = unit(rng) * total;
    std::size_t pick = x.size() - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      r -= d2[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(x[pick]);
  }
  return centers;
}

inline KMeansResult lloyd(std::span<const double> x, std::vector<double> centers, int max_iters = 300) {
  KMeansResult res;
  res.labels.assign(x.size(), 0);
  const std::size_t k = centers.size();
  for (int it = 0; it < max_iters; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int l = nearest_center(x[i], centers);
      if (l != res.labels[i]) changed = true;
      res.labels[i] = l;
    }
    std::vector<double> sum(k, 0.0);
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[static_cast<std::size_t>(res.labels[i])] += x[i];
      ++count[static_cast<std::size_t>(res.labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centers[c] = sum[c] / count[c];
    if (!changed) break;
  }
  res.centers = std::move(centers);
  res.inertia = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - res.centers[static_cast<std::size_t>(res.labels[i])];
    res.inertia += d * d;
  }
  return res;
}

// Relabels clusters by ascending center so equal partitions compare equal.
inline void canonicalize(KMeansResult& res) {
  std::vector<std::size_t> order(res.centers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.centers[a] < res.centers[b]; });
  std::vector<int> remap(order.size());
  std::vector<double> centers(order.size());
  for (std::size_t new_id = 0; new_id < order.size(); ++new_id) {
    remap[order[new_id]] = static_cast<int>(new_id);
    centers[new_id] = res.centers[order[new_id]];
  }
  for (auto& l : res.labels) l = remap[static_cast<std::size_t>(l)];
  res.centers = std::move(centers);
}

}  // namespace detail

/// 1-D k-means (Lloyd with k-means++ seeding), best of `restarts` by inertia.
inline KMeansResult kmeans_angles(std::span<const double> angles, int k, int restarts,
                                  std::mt19937_64& rng) {
  if (k < 1) throw DomainError("k must be at least 1");
  if (restarts < 1) throw DomainError("restarts must be at least 1");
  if (static_cast<int>(angles.size()) < k)
    throw UnderDetectionError("located fewer angles than expected active users");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult res = detail::lloyd(angles, detail::kmeanspp_seed(angles, k, rng));
    if (res.inertia < best.inertia) best = std::move(res);
  }
  detail::canonicalize(best);
  return best;
}

/// Per-cluster member lists and steering matrices restricted to Omega.
inline ClusterResult build_user_estimates(const KMeansResult& km, std::span<const double> angles,
                                          std::span<const Index> omega, const ArrayGeometry& geometry) {
  if (km.labels.size() != angles.size()) throw DimensionError("labels must cover every angle");
  ClusterResult out;
  out.labels = km.labels;
  out.centers = km.centers;
  out.members.assign(km.centers.size(), {});
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const int l = km.labels[i];
    if (l < 0 || l >= static_cast<int>(km.centers.size())) throw DimensionError("label out of range");
    out.members[static_cast<std::size_t>(l)].push_back(angles[i]);
  }
  for (auto& m : out.members) {
    if (m.empty()) throw ClusteringDegeneracyError("k-means produced an empty cluster");
    std::sort(m.begin(), m.end());
    out.steering.push_back(restrict_rows(steering_matrix(m, geometry), omega));
  }
  return out;
}

}  // namespace bsr
