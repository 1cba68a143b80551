#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsr/pipeline.hpp"

// JSON schema: complex scalars are [re, im]; complex matrices are arrays of
// rows; non-finite reals are the strings "inf", "-inf" or "nan".

namespace bsr::io {

using json = nlohmann::json;

inline json real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double real_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

inline json complex(cplx z) { return json::array({z.real(), z.imag()}); }

inline cplx complex_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("complex value must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json vector(const CVector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(complex(v[i]));
  return out;
}

inline CVector vector_from(const json& j) {
  CVector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = complex_from(j[i]);
  return v;
}

inline json matrix(const CMatrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

inline CMatrix matrix_from(const json& j) {
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows == 0 ? Index{0} : static_cast<Index>(j[0].size());
  CMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    if (static_cast<Index>(j[static_cast<std::size_t>(r)].size()) != cols) throw DimensionError("ragged matrix");
    for (Index c = 0; c < cols; ++c)
      m(r, c) = complex_from(j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
  return m;
}

inline json to_json(const Scene& s) {
  json users = json::array();
  for (const auto& u : s.users) {
    json gains = json::array();
    for (auto g : u.gains) gains.push_back(complex(g));
    users.push_back({{"angles", u.angles}, {"gains", gains}});
  }
  json data = json::array();
  for (const auto& d : s.data) data.push_back(vector(d));
  return {{"geometry", {{"n_antennas", s.geometry.n_antennas}, {"delta_r", s.geometry.delta_r}}},
          {"users", users},
          {"active_set", s.active_set},
          {"data", data}};
}

inline Scene scene_from(const json& j) {
  Scene s;
  s.geometry.n_antennas = j.at("geometry").at("n_antennas").get<Index>();
  s.geometry.delta_r = j.at("geometry").at("delta_r").get<double>();
  for (const auto& u : j.at("users")) {
    UserChannel ch;
    ch.angles = u.at("angles").get<std::vector<double>>();
    for (const auto& g : u.at("gains")) ch.gains.push_back(complex_from(g));
    s.users.push_back(std::move(ch));
  }
  s.active_set = j.at("active_set").get<std::vector<Index>>();
  for (const auto& d : j.at("data")) s.data.push_back(vector_from(d));
  return s;
}

inline json to_json(const Observation& o) {
  return {{"y_omega", matrix(o.y_omega)}, {"omega", o.omega},      {"n_antennas", o.n_antennas},
          {"sigma", real(o.sigma)},       {"eta", real(o.eta)},    {"noise", matrix(o.noise)}};
}

inline Observation observation_from(const json& j) {
  Observation o;
  o.y_omega = matrix_from(j.at("y_omega"));
  o.omega = j.at("omega").get<std::vector<Index>>();
  o.n_antennas = j.at("n_antennas").get<Index>();
  o.sigma = real_from(j.at("sigma"));
  o.eta = real_from(j.at("eta"));
  o.noise = matrix_from(j.at("noise"));
  return o;
}

inline json to_json(const SolverDiagnostics& d) {
  json trace = json::array();
  for (const auto& s : d.trace)
    trace.push_back({{"iteration", s.iteration},
                     {"primal", s.primal},
                     {"dual", s.dual},
                     {"combined", s.combined},
                     {"rho", s.rho}});
  return {{"iterations", d.iterations},
          {"primal_residual", d.primal_residual},
          {"dual_residual", d.dual_residual},
          {"converged", d.converged},
          {"final_rho", d.final_rho},
          {"feasibility_shift", d.feasibility_shift},
          {"grid_dual_norm", d.grid_dual_norm},
          {"trace", trace}};
}

inline json to_json(const TrialMetrics& m) {
  return {{"nmse_theta", real(m.nmse_theta)}, {"nmse_alpha", real(m.nmse_alpha)},
          {"nmse_phi", real(m.nmse_phi)},     {"nmse_h", real(m.nmse_h)},
          {"detection_rate", m.detection_rate}, {"misses", m.misses}};
}

inline json to_json(const UserEstimate& e) {
  return {{"angles", e.angles}, {"c", vector(e.c)}, {"phi", vector(e.phi)},
          {"alpha", vector(e.alpha)}, {"h", vector(e.h)}, {"flagged", e.flagged}};
}

inline json to_json(const SceneConfig& c) {
  return {{"n_antennas", c.n_antennas},
          {"n_observed", c.n_observed},
          {"n_users", c.n_users},
          {"n_active", c.n_active},
          {"snapshots", c.snapshots},
          {"l_min", c.l_min},
          {"l_max", c.l_max},
          {"delta_r", c.delta_r},
          {"angular_spread", c.angular_spread},
          {"min_center_separation", c.min_center_separation},
          {"min_path_separation", c.min_path_separation},
          {"snr_db", real(c.snr_db)},
          {"rng_seed", c.rng_seed}};
}

inline json to_json(const SolverOptions& s) {
  return {{"rho", s.rho},
          {"max_iters", s.max_iters},
          {"tol_abs", s.tol_abs},
          {"tol_rel", s.tol_rel},
          {"grid_check_size", s.grid_check_size},
          {"relaxation", s.relaxation},
          {"adaptive_rho", s.adaptive_rho},
          {"adapt_until", s.adapt_until},
          {"trace_stride", s.trace_stride},
          {"regularization", s.regularization},
          {"noise_regularization", s.noise_regularization}};
}

inline json to_json(const ExperimentConfig& c) {
  json values = json::array();
  for (double v : c.sweep_values) values.push_back(real(v));
  return {{"scene", to_json(c.scene)},
          {"solver", to_json(c.solver)},
          {"grid_size", c.grid_size},
          {"peak_epsilon", c.peak_epsilon},
          {"kmeans_restarts", c.kmeans_restarts},
          {"als_maxiter", c.als_maxiter},
          {"detection_tolerance", c.detection_tolerance},
          {"sweep_axis", to_string(c.axis)},
          {"sweep_values", values},
          {"n_trials", c.n_trials},
          {"master_seed", c.master_seed},
          {"jobs", c.jobs},
          {"out_dir", c.out_dir}};
}

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

inline void read_real_if(const json& j, const char* key, double& field) {
  if (j.contains(key)) field = real_from(j.at(key));
}

}  // namespace detail

/// Overlays the keys present in `j` onto `c`; absent keys keep their values.
inline void merge(ExperimentConfig& c, const json& j) {
  using detail::read_if;
  using detail::read_real_if;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    read_if(s, "n_antennas", c.scene.n_antennas);
    read_if(s, "n_observed", c.scene.n_observed);
    read_if(s, "n_users", c.scene.n_users);
    read_if(s, "n_active", c.scene.n_active);
    read_if(s, "snapshots", c.scene.snapshots);
    read_if(s, "l_min", c.scene.l_min);
    read_if(s, "l_max", c.scene.l_max);
    read_if(s, "delta_r", c.scene.delta_r);
    read_if(s, "angular_spread", c.scene.angular_spread);
    read_if(s, "min_center_separation", c.scene.min_center_separation);
    read_if(s, "min_path_separation", c.scene.min_path_separation);
    read_real_if(s, "snr_db", c.scene.snr_db);
    read_if(s, "rng_seed", c.scene.rng_seed);
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    read_if(s, "rho", c.solver.rho);
    read_if(s, "max_iters", c.solver.max_iters);
    read_if(s, "tol_abs", c.solver.tol_abs);
    read_if(s, "tol_rel", c.solver.tol_rel);
    read_if(s, "grid_check_size", c.solver.grid_check_size);
    read_if(s, "relaxation", c.solver.relaxation);
    read_if(s, "adaptive_rho", c.solver.adaptive_rho);
    read_if(s, "adapt_until", c.solver.adapt_until);
    read_if(s, "trace_stride", c.solver.trace_stride);
    read_if(s, "regularization", c.solver.regularization);
    read_if(s, "noise_regularization", c.solver.noise_regularization);
  }
  read_if(j, "grid_size", c.grid_size);
  read_if(j, "peak_epsilon", c.peak_epsilon);
  read_if(j, "kmeans_restarts", c.kmeans_restarts);
  read_if(j, "als_maxiter", c.als_maxiter);
  read_if(j, "detection_tolerance", c.detection_tolerance);
  if (j.contains("sweep_axis")) c.axis = parse_axis(j.at("sweep_axis").get<std::string>());
  if (j.contains("sweep_values")) {
    c.sweep_values.clear();
    for (const auto& v : j.at("sweep_values")) c.sweep_values.push_back(real_from(v));
  }
  read_if(j, "n_trials", c.n_trials);
  read_if(j, "master_seed", c.master_seed);
  read_if(j, "jobs", c.jobs);
  read_if(j, "out_dir", c.out_dir);
}

inline ExperimentConfig config_from(const json& j, ExperimentConfig base = {}) {
  merge(base, j);
  return base;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

/// Shortest text that reads back to the same double; non-finite values as "inf".
inline std::string number(double x) {
  if (!std::isfinite(x)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr const char* kTrialHeader =
    "sweep_value,trial,seed,detected_users,nmse_theta,nmse_alpha,nmse_phi,nmse_h,dr,solver_iters,converged,wall_ms";

inline std::string trial_csv(const std::vector<TrialRow>& rows) {
  std::ostringstream out;
  out << kTrialHeader << '\n';
  for (const auto& r : rows) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    out << number(r.sweep_value) << ',' << r.trial << ',' << r.seed << ',' << r.detected_users << ','
        << number(r.metrics.nmse_theta) << ',' << number(r.metrics.nmse_alpha) << ','
        << number(r.metrics.nmse_phi) << ',' << number(r.metrics.nmse_h) << ','
        << number(r.metrics.detection_rate) << ',' << r.solver_iters << ',' << (r.converged ? 1 : 0) << ','
        << wall << '\n';
  }
  return out.str();
}

inline constexpr const char* kAggregateHeader =
    "sweep_value,n_trials,n_failed,nmse_theta_mean,nmse_theta_se,nmse_alpha_mean,nmse_alpha_se,"
    "nmse_phi_mean,nmse_phi_se,nmse_h_mean,nmse_h_se,dr_mean,dr_se";

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    out << number(a.sweep_value) << ',' << a.n_trials << ',' << a.n_failed;
    for (const Moments* m : {&a.nmse_theta, &a.nmse_alpha, &a.nmse_phi, &a.nmse_h, &a.dr})
      out << ',' << number(m->mean) << ',' << number(m->se);
    out << '\n';
  }
  return out.str();
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  return std::stod(s);
}

/// Reads a per-trial CSV back; failed rows are those with "inf" NMSE.
inline std::vector<TrialRow> parse_trial_csv(const std::string& text, const std::vector<double>& points) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTrialHeader) throw ConfigError("unexpected per-trial CSV header");
  std::vector<TrialRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 12) throw ConfigError("per-trial CSV row has the wrong field count");
    TrialRow r;
    r.sweep_value = parse_number(f[0]);
    const auto it = std::find(points.begin(), points.end(), r.sweep_value);
    if (it == points.end()) throw ConfigError("sweep value not in the sweep");
    r.sweep_index = static_cast<std::size_t>(it - points.begin());
    r.trial = std::stoi(f[1]);
    r.seed = std::stoull(f[2]);
    r.detected_users = std::stoi(f[3]);
    r.metrics.nmse_theta = parse_number(f[4]);
    r.metrics.nmse_alpha = parse_number(f[5]);
    r.metrics.nmse_phi = parse_number(f[6]);
    r.metrics.nmse_h = parse_number(f[7]);
    r.metrics.detection_rate = parse_number(f[8]);
    r.solver_iters = std::stoi(f[9]);
    r.converged = f[10] == "1";
    r.wall_ms = std::stod(f[11]);
    if (std::isinf(r.metrics.nmse_theta)) r.failure = "failed";
    rows.push_back(r);
  }
  return rows;
}

inline json report_json(const ExperimentReport& rep) {
  json stages = json::object();
  for (std::size_t s = 0; s < kStageCount; ++s) stages[kStageNames[s]] = rep.stage_ms[s];
  json aggregates = json::array();
  for (const auto& a : rep.aggregates) {
    auto mom = [](const Moments& m) { return json{{"mean", real(m.mean)}, {"se", real(m.se)}, {"count", m.count}}; };
    aggregates.push_back({{"sweep_value", a.sweep_value},
                          {"n_trials", a.n_trials},
                          {"n_failed", a.n_failed},
                          {"nmse_theta", mom(a.nmse_theta)},
                          {"nmse_alpha", mom(a.nmse_alpha)},
                          {"nmse_phi", mom(a.nmse_phi)},
                          {"nmse_h", mom(a.nmse_h)},
                          {"dr", mom(a.dr)}});
  }
  json failures = json::array();
  for (const auto& r : rep.rows)
    if (r.failed())
      failures.push_back({{"sweep_value", r.sweep_value}, {"trial", r.trial}, {"reason", r.failure}});
  return {{"config", to_json(rep.config)},
          {"aggregates", aggregates},
          {"stage_ms", stages},
          {"total_wall_ms", rep.total_wall_ms},
          {"failures", failures}};
}

inline std::string spectrum_csv(const DualSpectrum& s) {
  std::ostringstream out;
  out << "theta_rad,q_norm\n";
  for (std::size_t g = 0; g < s.grid.size(); ++g) out << number(s.grid[g]) << ',' << number(s.values[g]) << '\n';
  return out.str();
}

}  // namespace bsr::io
