#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "bsr/types.hpp"

namespace bsr {

/// Uniform linear array: `n_antennas` elements spaced `delta_r` wavelengths.
struct ArrayGeometry {
  Index n_antennas = 64;
  double delta_r = 0.5;

  void validate() const {
    if (n_antennas < 2) throw DomainError("array needs at least two antennas");
    if (!(delta_r > 0.0)) throw DomainError("antenna spacing must be positive");
  }

  /// Spatial frequency seen by the array for angle `theta`.
  double frequency(double theta) const { return delta_r * std::cos(theta); }
};

namespace detail {

// Unit-norm response for spatial frequency f, no domain check.
inline CVector steering_from_frequency(double f, Index n) {
  CVector a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < n; ++i) {
    const double phase = -2.0 * kPi * f * static_cast<double>(i);
    a[i] = cplx(scale * std::cos(phase), scale * std::sin(phase));
  }
  return a;
}

}  // namespace detail

/// Receive steering vector a_r(theta), entry n = exp(-j 2 pi delta_r n cos theta) / sqrt(N).
inline CVector steering_vector(double theta, const ArrayGeometry& geometry) {
  if (!(theta > 0.0 && theta < kPi))
    throw DomainError("angle of arrival must lie strictly inside (0, pi)");
  return detail::steering_from_frequency(geometry.frequency(theta), geometry.n_antennas);
}

inline CMatrix steering_matrix(std::span<const double> angles, const ArrayGeometry& geometry) {
  CMatrix a(geometry.n_antennas, static_cast<Index>(angles.size()));
  for (std::size_t l = 0; l < angles.size(); ++l)
    a.col(static_cast<Index>(l)) = steering_vector(angles[l], geometry);
  return a;
}

/// Keeps the rows listed in `omega` (ascending antenna indices).
inline CMatrix restrict_rows(const CMatrix& full, std::span<const Index> omega) {
  CMatrix out(static_cast<Index>(omega.size()), full.cols());
  for (std::size_t r = 0; r < omega.size(); ++r) out.row(static_cast<Index>(r)) = full.row(omega[r]);
  return out;
}

struct UserChannel {
  std::vector<double> angles;
  std::vector<cplx> gains;

  Index paths() const { return static_cast<Index>(angles.size()); }

  CVector gain_vector() const {
    return Eigen::Map<const CVector>(gains.data(), static_cast<Index>(gains.size()));
  }

  /// h = A alpha over the full array.
  CVector channel(const ArrayGeometry& geometry) const {
    return steering_matrix(angles, geometry) * gain_vector();
  }
};

struct SceneConfig {
  Index n_antennas = 64;
  Index n_observed = 30;
  Index n_users = 10;
  Index n_active = 3;
  Index snapshots = 2;
  Index l_min = 1;
  Index l_max = 3;
  double delta_r = 0.5;
  double angular_spread = 0.05;
  // Radians, compared in theta. Zero selects the default rule instead:
  // |cos a - cos b| >= 4 / (N delta_r), i.e. four Rayleigh cells.
  double min_center_separation = 0.0;
  // Minimum spacing of paths inside one cluster, in spatial-frequency
  // units scaled by N (so 1.0 is one Rayleigh cell). Zero disables it.
  double min_path_separation = 0.0;
  // +inf gives a noiseless observation.
  double snr_db = 10.0;
  std::uint64_t rng_seed = 0;

  ArrayGeometry geometry() const { return {n_antennas, delta_r}; }

  double center_separation() const {
    return min_center_separation > 0.0
               ? min_center_separation
               : 4.0 / (static_cast<double>(n_antennas) * delta_r);
  }

  void validate() const {
    geometry().validate();
    if (n_users < 1) throw ConfigError("n_users must be at least 1");
    if (n_active < 1 || n_active > n_users) throw ConfigError("n_active must be in [1, n_users]");
    if (n_observed < 1 || n_observed > n_antennas)
      throw ConfigError("n_observed must be in [1, n_antennas]");
    if (snapshots < 1) throw ConfigError("snapshots must be at least 1");
    if (l_max < 1 || l_min < 1 || l_min > l_max) throw ConfigError("need 1 <= l_min <= l_max");
    if (!(angular_spread >= 0.0)) throw ConfigError("angular_spread must be non-negative");
    if (!(center_separation() > 2.0 * angular_spread))
      throw ConfigError("min_center_separation must exceed twice the angular spread");
    if (!(min_path_separation >= 0.0)) throw ConfigError("min_path_separation must be non-negative");
    if (!(2.0 * angular_spread < kPi)) throw ConfigError("angular_spread too large");
    if (std::isnan(snr_db)) throw ConfigError("snr_db is NaN");
  }
};

/// Ground truth: every user's channel, the active subset and its data.
struct Scene {
  ArrayGeometry geometry;
  std::vector<UserChannel> users;
  // Sorted 0-based user indices; data[i] belongs to active_set[i].
  std::vector<Index> active_set;
  std::vector<CVector> data;

  Index snapshots() const { return data.empty() ? 0 : data.front().size(); }

  /// X = sum over active users of h_k s_k^H, N x T.
  CMatrix signal() const {
    CMatrix x = CMatrix::Zero(geometry.n_antennas, snapshots());
    for (std::size_t i = 0; i < active_set.size(); ++i)
      x += users[active_set[i]].channel(geometry) * data[i].adjoint();
    return x;
  }
};

struct Observation {
  CMatrix y_omega;
  std::vector<Index> omega;
  Index n_antennas = 0;
  double sigma = 0.0;
  double eta = 0.0;
  CMatrix noise;

  Index n_observed() const { return static_cast<Index>(omega.size()); }
  Index snapshots() const { return y_omega.cols(); }
};

inline cplx complex_gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {re * (std::numbers::sqrt2 / 2.0), im * (std::numbers::sqrt2 / 2.0)};
}

/// Uniform random m-subset of {0..n-1}, returned ascending.
inline std::vector<Index> random_subset(Index n, Index m, std::mt19937_64& rng) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
  }
  all.resize(static_cast<std::size_t>(m));
  std::sort(all.begin(), all.end());
  return all;
}

namespace detail {

inline constexpr int kCenterDrawBudget = 10000;
// Offset draws per candidate center before the center itself is rejected.
inline constexpr int kPathDrawBudget = 200;

inline bool centers_separated(const SceneConfig& config, double a, double b) {
  if (config.min_center_separation > 0.0) return std::abs(a - b) >= config.min_center_separation;
  return std::abs(std::cos(a) - std::cos(b)) >= config.center_separation();
}

// Path angles around `center`, pairwise at least min_path_separation / N
// apart in spatial frequency; empty when the budget runs out.
inline std::vector<double> draw_paths(const SceneConfig& config, double center, Index count,
                                      std::mt19937_64& rng) {
  const double spread = config.angular_spread;
  std::uniform_real_distribution<double> offset(-spread, spread);
  const double min_df = config.min_path_separation / static_cast<double>(config.n_antennas);
  std::vector<double> angles;
  int draws = 0;
  while (static_cast<Index>(angles.size()) < count) {
    if (++draws > kPathDrawBudget) return {};
    const double theta = spread > 0.0 ? center + offset(rng) : center;
    if (!(theta > 0.0 && theta < kPi)) continue;
    const double f = config.delta_r * std::cos(theta);
    const bool ok = std::all_of(angles.begin(), angles.end(), [&](double other) {
      return std::abs(config.delta_r * std::cos(other) - f) >= min_df;
    });
    if (ok) angles.push_back(theta);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

// Draws a center uniformly in (spread, pi - spread), separated from `taken`,
// together with `count` paths. Each candidate center spends one unit of
// `budget`; candidates whose paths cannot be placed are discarded.
inline std::optional<std::pair<double, std::vector<double>>> draw_cluster(
    const SceneConfig& config, Index count, std::span<const double> taken, int& budget,
    std::mt19937_64& rng, int attempts) {
  std::uniform_real_distribution<double> uniform(config.angular_spread, kPi - config.angular_spread);
  for (int a = 0; a < attempts; ++a) {
    if (--budget < 0) throw InfeasibleConfigError("could not place clusters with the requested separations");
    const double c = uniform(rng);
    if (!(c > 0.0 && c < kPi)) continue;
    if (!std::all_of(taken.begin(), taken.end(), [&](double o) { return centers_separated(config, o, c); }))
      continue;
    auto paths = draw_paths(config, c, count, rng);
    if (!paths.empty()) return std::pair{c, std::move(paths)};
  }
  return std::nullopt;
}

// Candidate centers per active user before the whole active layout restarts.
inline constexpr int kClusterAttempts = 100;

}  // namespace detail

/// Draws a clustered multi-user scene. Active users get separated cluster
/// centers; inactive users get unconstrained centers and no data. A layout
/// that jams is redrawn from scratch; 10^4 candidate centers in total.
inline Scene generate_scene(const SceneConfig& config, std::mt19937_64& rng) {
  config.validate();
  Scene scene;
  scene.geometry = config.geometry();

  scene.active_set = random_subset(config.n_users, config.n_active, rng);
  std::uniform_int_distribution<Index> path_count(config.l_min, config.l_max);
  std::vector<Index> paths(static_cast<std::size_t>(config.n_users));
  for (auto& l : paths) l = path_count(rng);

  scene.users.resize(static_cast<std::size_t>(config.n_users));
  int budget = detail::kCenterDrawBudget;
  for (bool placed = false; !placed;) {
    std::vector<double> centers;
    placed = true;
    for (Index k : scene.active_set) {
      auto cluster = detail::draw_cluster(config, paths[static_cast<std::size_t>(k)], centers, budget, rng,
                                          detail::kClusterAttempts);
      if (!cluster) {
        placed = false;
        break;
      }
      centers.push_back(cluster->first);
      scene.users[static_cast<std::size_t>(k)].angles = std::move(cluster->second);
    }
  }
  std::size_t next_active = 0;
  for (Index k = 0; k < config.n_users; ++k) {
    auto& user = scene.users[static_cast<std::size_t>(k)];
    if (next_active < scene.active_set.size() && scene.active_set[next_active] == k) {
      ++next_active;
    } else {
      std::optional<std::pair<double, std::vector<double>>> cluster;
      while (!cluster)
        cluster = detail::draw_cluster(config, paths[static_cast<std::size_t>(k)], {}, budget, rng,
                                       detail::kClusterAttempts);
      user.angles = std::move(cluster->second);
    }
  }
  for (auto& user : scene.users) {
    user.gains.resize(user.angles.size());
    for (auto& g : user.gains) g = complex_gaussian(rng);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < scene.active_set.size(); ++i) {
    CVector s(config.snapshots);
    // 1 - U[0,1) lies in (0, 1].
    for (Index t = 0; t < config.snapshots; ++t) s[t] = cplx(1.0 - unit(rng), 0.0);
    s /= s.norm();
    scene.data.push_back(std::move(s));
  }
  return scene;
}

/// Noise standard deviation per complex entry for a target SNR in dB.
inline double noise_sigma(double signal_energy, Index m, Index t, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  const double ratio = std::pow(10.0, snr_db / 10.0);
  return std::sqrt(signal_energy / (static_cast<double>(m * t) * ratio));
}

/// Partial noisy observation Y_Omega = P_Omega(X) + W with a fresh random Omega.
inline Observation synthesize(const Scene& scene, const SceneConfig& config, std::mt19937_64& rng) {
  if (scene.geometry.n_antennas != config.n_antennas)
    throw DimensionError("scene and config disagree on the array size");
  Observation obs;
  obs.n_antennas = config.n_antennas;
  obs.omega = random_subset(config.n_antennas, config.n_observed, rng);

  const CMatrix x_omega = restrict_rows(scene.signal(), obs.omega);
  obs.sigma = noise_sigma(x_omega.squaredNorm(), x_omega.rows(), x_omega.cols(), config.snr_db);
  obs.noise = CMatrix::Zero(x_omega.rows(), x_omega.cols());
  if (obs.sigma > 0.0) {
    for (Index j = 0; j < obs.noise.cols(); ++j)
      for (Index i = 0; i < obs.noise.rows(); ++i) obs.noise(i, j) = obs.sigma * complex_gaussian(rng);
  }
  obs.y_omega = x_omega + obs.noise;
  obs.eta = obs.noise.norm();
  return obs;
}

}  // namespace bsr
