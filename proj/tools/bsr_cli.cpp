#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsr/bsr.hpp"

namespace fs = std::filesystem;
using bsr::io::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::vector<double> snr;
  std::vector<double> antennas;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::string preset;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--trials", f.trials, "trials per sweep point")->check(CLI::PositiveNumber);
  app->add_option("--snr", f.snr, "SNR sweep in dB, comma separated")->delimiter(',');
  app->add_option("--antennas", f.antennas, "antenna-count sweep, comma separated")->delimiter(',');
  app->add_option("--jobs", f.jobs, "concurrent trials")->check(CLI::PositiveNumber);
  app->add_option("--out", f.out, "output directory");
  app->add_option("--preset", f.preset, "exp1 or exp2")->check(CLI::IsMember({"exp1", "exp2"}));
}

// Preset, then config file, then flags.
bsr::ExperimentConfig resolve(const CommonFlags& f) {
  bsr::ExperimentConfig c = f.preset.empty() ? bsr::ExperimentConfig{} : bsr::preset(f.preset);
  if (!f.config_path.empty()) bsr::io::merge(c, bsr::io::read_json_file(f.config_path));
  if (f.seed) c.master_seed = *f.seed;
  if (f.trials) c.n_trials = *f.trials;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.out) c.out_dir = *f.out;
  if (!f.snr.empty() && !f.antennas.empty()) throw bsr::ConfigError("--snr and --antennas are exclusive");
  if (!f.snr.empty()) {
    c.axis = bsr::SweepAxis::snr;
    c.sweep_values = f.snr;
  }
  if (!f.antennas.empty()) {
    c.axis = bsr::SweepAxis::antennas;
    c.sweep_values = f.antennas;
  }
  c.validate();
  return c;
}

std::string path_in(const bsr::ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void print_aggregates(const bsr::ExperimentReport& rep) {
  std::printf("%10s %6s %6s %12s %12s %12s %12s %8s\n", bsr::to_string(rep.config.axis), "trials", "failed",
              "nmse_theta", "nmse_alpha", "nmse_phi", "nmse_h", "dr");
  for (const auto& a : rep.aggregates)
    std::printf("%10g %6d %6d %12.4e %12.4e %12.4e %12.4e %8.3f\n", a.sweep_value, a.n_trials, a.n_failed,
                a.nmse_theta.mean, a.nmse_alpha.mean, a.nmse_phi.mean, a.nmse_h.mean, a.dr.mean);
}

int run_sweep_command(const bsr::ExperimentConfig& c) {
  if (c.axis == bsr::SweepAxis::none) throw bsr::ConfigError("sweep needs --snr, --antennas or a sweep_axis");
  const auto rep = bsr::run_sweep(c);
  bsr::io::write_text(path_in(c, "trials.csv"), bsr::io::trial_csv(rep.rows));
  bsr::io::write_text(path_in(c, "aggregate.csv"), bsr::io::aggregate_csv(rep.aggregates));
  bsr::io::write_text(path_in(c, "report.json"), bsr::io::report_json(rep).dump(2) + "\n");
  bsr::io::write_text(path_in(c, "nmse.svg"), bsr::plot::nmse_chart(rep));
  bsr::io::write_text(path_in(c, "dr.svg"), bsr::plot::dr_chart(rep));
  print_aggregates(rep);
  std::printf("wrote %s\n", c.out_dir.c_str());
  return 0;
}

// The first sweep point and trial 0 of the resolved config.
bsr::TrialOutcome single_trial(const bsr::ExperimentConfig& c, std::uint64_t& seed) {
  const auto points = bsr::sweep_points(c);
  seed = bsr::trial_seed(c.master_seed, 0, 0);
  return bsr::run_pipeline(c, bsr::scene_for_sweep(c, points.front()), seed);
}

int run_simulate(const bsr::ExperimentConfig& c) {
  std::uint64_t seed = 0;
  const auto o = single_trial(c, seed);
  json estimates = json::array();
  for (const auto& e : o.estimates) estimates.push_back(bsr::io::to_json(e));
  json stages = json::object();
  for (std::size_t s = 0; s < bsr::kStageCount; ++s) stages[bsr::kStageNames[s]] = o.stage_ms[s];
  json clusters = nullptr;
  if (o.clusters) clusters = {{"centers", o.clusters->centers}, {"members", o.clusters->members}};
  const json dump = {{"config", bsr::io::to_json(c)},
                     {"seed", seed},
                     {"scene", bsr::io::to_json(o.scene)},
                     {"observation", bsr::io::to_json(o.observation)},
                     {"dual",
                      {{"objective", o.dual.objective},
                       {"v", bsr::io::matrix(o.dual.v)},
                       {"diagnostics", bsr::io::to_json(o.dual.diagnostics)}}},
                     {"peaks", {{"angles", o.peaks.angles}, {"heights", o.peaks.heights}}},
                     {"clusters", clusters},
                     {"estimates", estimates},
                     {"als_residual_trace", o.als.residual_trace},
                     {"alignment", {{"assignment", o.alignment.assignment}, {"cost", o.alignment.cost}}},
                     {"metrics", bsr::io::to_json(o.metrics)},
                     {"failure", o.failure},
                     {"stage_ms", stages},
                     {"wall_ms", o.wall_ms}};
  bsr::io::write_text(path_in(c, "simulate.json"), dump.dump(2) + "\n");
  bsr::io::write_text(path_in(c, "spectrum.csv"), bsr::io::spectrum_csv(o.spectrum));
  std::printf("seed %llu: %zu peaks, DR %.3f, NMSE theta %.4e phi %.4e alpha %.4e, solver %d iters%s\n",
              static_cast<unsigned long long>(seed), o.peaks.size(), o.metrics.detection_rate,
              o.metrics.nmse_theta, o.metrics.nmse_phi, o.metrics.nmse_alpha, o.dual.diagnostics.iterations,
              o.dual.converged() ? "" : " (not converged)");
  if (o.failed()) std::printf("failure: %s\n", o.failure.c_str());
  std::printf("wrote %s\n", c.out_dir.c_str());
  return 0;
}

int run_spectrum(const bsr::ExperimentConfig& c) {
  std::uint64_t seed = 0;
  const auto o = single_trial(c, seed);
  bsr::io::write_text(path_in(c, "spectrum.csv"), bsr::io::spectrum_csv(o.spectrum));
  std::printf("%zu grid points, %zu peaks; wrote %s\n", o.spectrum.grid.size(), o.peaks.size(),
              path_in(c, "spectrum.csv").c_str());
  return 0;
}

// Solver objective against the on-grid primal and the certificate checks.
int run_oracle(const bsr::ExperimentConfig& c) {
  json rows = json::array();
  const auto points = bsr::sweep_points(c);
  const auto sc_base = bsr::scene_for_sweep(c, points.front());
  std::printf("%5s %14s %14s %12s %10s %12s\n", "trial", "dual_obj", "primal_obj", "gap", "grid_norm", "min_eig");
  for (int t = 0; t < c.n_trials; ++t) {
    const auto seed = bsr::trial_seed(c.master_seed, 0, t);
    auto sc = sc_base;
    sc.rng_seed = seed;
    std::mt19937_64 scene_rng(bsr::derive_seed(seed, 1));
    std::mt19937_64 noise_rng(bsr::derive_seed(seed, 2));
    const auto scene = bsr::generate_scene(sc, scene_rng);
    const auto obs = bsr::synthesize(scene, sc, noise_rng);
    const auto dual = bsr::solve_dual(bsr::DualProblem::from(obs, c.solver, sc.delta_r));
    const auto geometry = sc.geometry();
    const auto primal = bsr::grid_primal(obs.y_omega, obs.omega, geometry, obs.eta, 16 * sc.n_antennas);
    const double grid_norm = bsr::dual_norm_on_grid(dual.v, 16 * sc.n_antennas, geometry);
    const double min_eig = bsr::min_eigenvalue(bsr::lifted_block(dual.q_cert, dual.v));
    std::printf("%5d %14.6e %14.6e %12.4e %10.6f %12.4e\n", t, dual.objective, primal.objective,
                primal.objective - dual.objective, grid_norm, min_eig);
    rows.push_back({{"trial", t},
                    {"seed", seed},
                    {"dual_objective", dual.objective},
                    {"primal_objective", primal.objective},
                    {"dual_converged", dual.converged()},
                    {"primal_converged", primal.converged},
                    {"grid_dual_norm", grid_norm},
                    {"min_eigenvalue", min_eig}});
  }
  bsr::io::write_text(path_in(c, "oracle.json"), rows.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind super-resolution user detection and channel estimation"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto* simulate = app.add_subcommand("simulate", "one trial with a full JSON artifact dump");
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over SNR or antenna count");
  auto* spectrum = app.add_subcommand("spectrum", "dump the dual polynomial norm grid of one trial");
  auto* demo = app.add_subcommand("demo", "run a preset experiment");
  auto* oracle = app.add_subcommand("oracle", "cross-check the solver against the grid primal");
  for (auto* sub : {simulate, sweep, spectrum, demo, oracle}) add_common(sub, flags);
  CLI11_PARSE(app, argc, argv);

  try {
    if (demo->parsed() && flags.preset.empty()) throw bsr::ConfigError("demo needs --preset");
    const auto config = resolve(flags);
    if (simulate->parsed()) return run_simulate(config);
    if (spectrum->parsed()) return run_spectrum(config);
    if (oracle->parsed()) return run_oracle(config);
    return run_sweep_command(config);
  } catch (const bsr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
