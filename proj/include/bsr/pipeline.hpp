#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "bsr/als.hpp"
#include "bsr/cluster.hpp"
#include "bsr/dualsdp.hpp"
#include "bsr/metrics.hpp"
#include "bsr/scene.hpp"
#include "bsr/spectrum.hpp"

namespace bsr {

enum class SweepAxis { none, snr, antennas };

inline const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::snr: return "snr";
    case SweepAxis::antennas: return "antennas";
    default: return "none";
  }
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "snr") return SweepAxis::snr;
  if (s == "antennas") return SweepAxis::antennas;
  if (s == "none" || s.empty()) return SweepAxis::none;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

struct ExperimentConfig {
  SceneConfig scene;
  SolverOptions solver;
  Index grid_size = 0;  // 0: max(8192, 32 N)
  double peak_epsilon = 0.05;
  int kmeans_restarts = 50;
  int als_maxiter = 5;
  double detection_tolerance = 0.035;
  SweepAxis axis = SweepAxis::none;
  std::vector<double> sweep_values;
  int n_trials = 50;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  std::string out_dir = "out";

  void validate() const {
    scene.validate();
    solver.validate();
    if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (!(peak_epsilon > 0.0 && peak_epsilon < 1.0)) throw ConfigError("peak_epsilon must be in (0, 1)");
    if (kmeans_restarts < 1) throw ConfigError("kmeans_restarts must be at least 1");
    if (als_maxiter < 1) throw ConfigError("als_maxiter must be at least 1");
    if (!(detection_tolerance > 0.0)) throw ConfigError("detection_tolerance must be positive");
    for (std::size_t i = 1; i < sweep_values.size(); ++i)
      if (!(sweep_values[i] > sweep_values[i - 1])) throw ConfigError("sweep values must be strictly increasing");
    if (axis == SweepAxis::antennas)
      for (double v : sweep_values)
        if (v < 2 || v != std::floor(v)) throw ConfigError("antenna counts must be integers >= 2");
  }

  Index effective_grid_size() const {
    return grid_size > 0 ? grid_size : default_grid_size(scene.n_antennas);
  }
};

/// Scene config for one point of the sweep. An antenna sweep keeps the
/// observed fraction M/N of the base configuration.
inline SceneConfig scene_for_sweep(const ExperimentConfig& config, double value) {
  SceneConfig sc = config.scene;
  if (config.axis == SweepAxis::snr) {
    sc.snr_db = value;
  } else if (config.axis == SweepAxis::antennas) {
    const auto n = static_cast<Index>(value);
    const double ratio = static_cast<double>(config.scene.n_observed) / static_cast<double>(config.scene.n_antennas);
    sc.n_antennas = n;
    sc.n_observed = std::clamp<Index>(static_cast<Index>(std::lround(ratio * static_cast<double>(n))), 1, n);
  }
  return sc;
}

inline std::vector<double> sweep_points(const ExperimentConfig& config) {
  if (!config.sweep_values.empty()) return config.sweep_values;
  if (config.axis == SweepAxis::antennas) return {static_cast<double>(config.scene.n_antennas)};
  return {config.scene.snr_db};
}

enum Stage : std::size_t { kScene, kSynthesize, kDual, kSpectrum, kCluster, kAls, kMetrics, kStageCount };

inline constexpr std::array<const char*, kStageCount> kStageNames = {
    "scene", "synthesize", "dual", "spectrum", "cluster", "als", "metrics"};

struct TrialOutcome {
  Scene scene;
  Observation observation;
  DualSolution dual;
  DualSpectrum spectrum;
  PeakSet peaks;
  std::optional<ClusterResult> clusters;
  std::vector<UserEstimate> estimates;
  AlsReport als;
  Alignment alignment;
  TrialMetrics metrics;
  std::string failure;  // empty on success
  std::array<double, kStageCount> stage_ms{};
  double wall_ms = 0.0;

  bool failed() const { return !failure.empty(); }
};

/// Scene generation through metrics for one seeded trial. Numerical failures
/// are recorded in `failure`; only configuration errors propagate.
inline TrialOutcome run_pipeline(const ExperimentConfig& config, const SceneConfig& scene_config,
                                 std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  TrialOutcome out;
  const auto t_start = clock::now();
  auto tick = clock::now();
  auto lap = [&](Stage s) {
    const auto now = clock::now();
    out.stage_ms[s] += std::chrono::duration<double, std::milli>(now - tick).count();
    tick = now;
  };

  SceneConfig sc = scene_config;
  sc.rng_seed = seed;
  sc.validate();
  std::mt19937_64 scene_rng(derive_seed(seed, 1));
  std::mt19937_64 noise_rng(derive_seed(seed, 2));
  std::mt19937_64 cluster_rng(derive_seed(seed, 3));
  std::mt19937_64 als_rng(derive_seed(seed, 4));
  const ArrayGeometry geometry = sc.geometry();

  out.scene = generate_scene(sc, scene_rng);
  lap(kScene);
  out.observation = synthesize(out.scene, sc, noise_rng);
  lap(kSynthesize);

  try {
    out.dual = solve_dual(DualProblem::from(out.observation, config.solver, sc.delta_r));
    lap(kDual);
    if (!out.dual.converged()) out.failure = "solver did not converge";

    const Index grid = config.grid_size > 0 ? config.grid_size : default_grid_size(sc.n_antennas);
    out.spectrum = evaluate_spectrum(out.dual.v, geometry, grid);
    out.peaks = locate_peaks(out.spectrum, config.peak_epsilon);
    lap(kSpectrum);

    const auto km = kmeans_angles(out.peaks.angles, static_cast<int>(sc.n_active), config.kmeans_restarts,
                                  cluster_rng);
    out.clusters = build_user_estimates(km, out.peaks.angles, out.observation.omega, geometry);
    lap(kCluster);

    const auto als = run_als(out.observation.y_omega, out.clusters->steering, config.als_maxiter, als_rng);
    out.als = als.report;
    out.estimates = make_user_estimates(*out.clusters, als, geometry);
    lap(kAls);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    out.failure = e.what();
    lap(kAls);
  }

  out.alignment = align(out.scene, out.estimates, config.detection_tolerance);
  out.metrics = nmse_all(out.scene, out.estimates, out.alignment);
  lap(kMetrics);
  out.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t_start).count();
  return out;
}

struct TrialRow {
  std::size_t sweep_index = 0;
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  int detected_users = 0;
  TrialMetrics metrics;
  int solver_iters = 0;
  bool converged = false;
  double wall_ms = 0.0;
  std::array<double, kStageCount> stage_ms{};
  std::string failure;

  bool failed() const { return !failure.empty(); }
};

struct Moments {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

struct AggregateRow {
  double sweep_value = 0.0;
  int n_trials = 0;
  int n_failed = 0;
  Moments nmse_theta, nmse_alpha, nmse_phi, nmse_h, dr;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialRow> rows;  // sorted by (sweep index, trial)
  std::vector<AggregateRow> aggregates;
  std::array<double, kStageCount> stage_ms{};
  double total_wall_ms = 0.0;
};

inline TrialRow summarize(const TrialOutcome& o, std::size_t sweep_index, double sweep_value, int trial,
                          std::uint64_t seed) {
  TrialRow r;
  r.sweep_index = sweep_index;
  r.sweep_value = sweep_value;
  r.trial = trial;
  r.seed = seed;
  r.detected_users = static_cast<int>(o.alignment.matched_count());
  r.metrics = o.metrics;
  r.solver_iters = o.dual.diagnostics.iterations;
  r.converged = o.dual.diagnostics.converged;
  r.wall_ms = o.wall_ms;
  r.stage_ms = o.stage_ms;
  r.failure = o.failure;
  // Undefined metrics share the failed-row sentinel in the CSV, so they count as failures.
  if (!r.failed() && !o.metrics.defined()) r.failure = "no matched users";
  if (r.failed()) {
    const double inf = std::numeric_limits<double>::infinity();
    r.metrics.nmse_theta = r.metrics.nmse_alpha = r.metrics.nmse_phi = r.metrics.nmse_h = inf;
  }
  return r;
}

/// Mean and standard error over the finite entries of `values`, summed in order.
inline Moments moments(const std::vector<double>& values) {
  Moments m;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++m.count;
    }
  if (m.count == 0) return m;
  m.mean = sum / m.count;
  if (m.count < 2) {
    m.se = 0.0;
    return m;
  }
  double ss = 0.0;
  for (double v : values)
    if (std::isfinite(v)) ss += (v - m.mean) * (v - m.mean);
  m.se = std::sqrt(ss / (m.count - 1)) / std::sqrt(static_cast<double>(m.count));
  return m;
}

/// Aggregates rows per sweep point. Failed trials drop out of the NMSE
/// statistics but count toward the detection rate.
inline std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows, const std::vector<double>& points) {
  std::vector<AggregateRow> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    AggregateRow a;
    a.sweep_value = points[i];
    std::vector<double> th, al, ph, hh, dr;
    for (const auto& r : rows) {
      if (r.sweep_index != i) continue;
      ++a.n_trials;
      if (r.failed()) ++a.n_failed;
      const bool use = !r.failed();
      const double nan = std::numeric_limits<double>::quiet_NaN();
      th.push_back(use ? r.metrics.nmse_theta : nan);
      al.push_back(use ? r.metrics.nmse_alpha : nan);
      ph.push_back(use ? r.metrics.nmse_phi : nan);
      hh.push_back(use ? r.metrics.nmse_h : nan);
      dr.push_back(r.metrics.detection_rate);
    }
    a.nmse_theta = moments(th);
    a.nmse_alpha = moments(al);
    a.nmse_phi = moments(ph);
    a.nmse_h = moments(hh);
    a.dr = moments(dr);
    out.push_back(a);
  }
  return out;
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t sweep_index, int trial) {
  return derive_seed(master, static_cast<std::uint64_t>(sweep_index), static_cast<std::uint64_t>(trial));
}

/// Seeded Monte-Carlo over every sweep point. Trials run on up to
/// `config.jobs` threads; rows come back in (sweep index, trial) order.
inline ExperimentReport run_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto points = sweep_points(config);
  ExperimentReport report;
  report.config = config;

  struct Task {
    std::size_t sweep_index;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int t = 0; t < config.n_trials; ++t) tasks.push_back({i, t});
  std::vector<SceneConfig> scenes;
  for (double v : points) {
    scenes.push_back(scene_for_sweep(config, v));
    scenes.back().validate();
  }

  std::vector<TrialRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const auto& task = tasks[idx];
      const auto seed = trial_seed(config.master_seed, task.sweep_index, task.trial);
      const auto outcome = run_pipeline(config, scenes[task.sweep_index], seed);
      rows[idx] = summarize(outcome, task.sweep_index, points[task.sweep_index], task.trial, seed);
    }
  };
  const int n_threads = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < n_threads; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  report.total_wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  report.rows = std::move(rows);
  for (const auto& r : report.rows)
    for (std::size_t s = 0; s < kStageCount; ++s) report.stage_ms[s] += r.stage_ms[s];
  report.aggregates = aggregate(report.rows, points);
  return report;
}

/// Fixed experiment configurations. `exp1` is the single-point clustering
/// demo; `exp2` sweeps SNR with twelve active users.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "exp1") {
    c.scene.n_antennas = 64;
    c.scene.n_observed = 30;
    c.scene.n_users = 10;
    c.scene.n_active = 3;
    c.scene.snapshots = 2;
    c.scene.l_max = 3;
    c.scene.snr_db = 10.0;
    c.axis = SweepAxis::snr;
    c.sweep_values = {10.0};
    c.n_trials = 50;
    c.out_dir = "out/exp1";
  } else if (name == "exp2") {
    c.scene.n_antennas = 64;
    c.scene.n_observed = 64;
    c.scene.n_users = 40;
    c.scene.n_active = 12;
    c.scene.snapshots = 10;
    c.scene.l_max = 3;
    c.axis = SweepAxis::snr;
    c.sweep_values = {0.0, 5.0, 10.0, 15.0, 20.0};
    c.n_trials = 50;
    c.out_dir = "out/exp2";
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected exp1 or exp2)");
  }
  return c;
}

}  // namespace bsr
