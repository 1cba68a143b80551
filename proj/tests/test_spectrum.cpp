#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace bsr;
using Catch::Matchers::WithinAbs;

namespace {

std::size_t nearest_grid(const DualSpectrum& s, double theta) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < s.grid.size(); ++g)
    if (std::abs(s.grid[g] - theta) < std::abs(s.grid[best] - theta)) best = g;
  return best;
}

double cell_width_at(const DualSpectrum& s, std::size_t g) {
  const std::size_t lo = g > 0 ? g - 1 : g;
  const std::size_t hi = g + 1 < s.grid.size() ? g + 1 : g;
  return (s.grid[hi] - s.grid[lo]) / static_cast<double>(hi - lo);
}

std::size_t local_maxima_above(const DualSpectrum& s, double level) {
  std::size_t count = 0;
  for (std::size_t g = 1; g + 1 < s.values.size(); ++g)
    if (s.values[g] > s.values[g - 1] && s.values[g] >= s.values[g + 1] && s.values[g] > level) ++count;
  return count;
}

}  // namespace

TEST_CASE("spectrum of the zero matrix") {
  const ArrayGeometry g{16, 0.5};
  const auto s = evaluate_spectrum(CMatrix::Zero(16, 2), g, 128);
  REQUIRE(s.values.size() == 128);
  for (double v : s.values) CHECK(v == 0.0);
  CHECK(locate_peaks(s, 0.5).empty());
}

TEST_CASE("spectrum grid is increasing in theta and uniform in frequency") {
  const ArrayGeometry g{16, 0.5};
  const auto s = evaluate_spectrum(CMatrix::Zero(16, 1), g, 256);
  for (std::size_t i = 1; i < s.grid.size(); ++i) {
    CHECK(s.grid[i] > s.grid[i - 1]);
    const double df = g.frequency(s.grid[i - 1]) - g.frequency(s.grid[i]);
    CHECK_THAT(df, WithinAbs(1.0 / 256, 1e-12));
  }
  CHECK(s.grid.front() > 0.0);
  CHECK(s.grid.back() < kPi);
}

TEST_CASE("single-atom spectrum peaks at the atom") {
  const ArrayGeometry g{16, 0.5};
  const double th0 = 1.234;
  CMatrix v = CMatrix::Zero(16, 2);
  v.col(0) = steering_vector(th0, g);
  const auto s = evaluate_spectrum(v, g, 1024);
  const auto top = static_cast<std::size_t>(std::max_element(s.values.begin(), s.values.end()) - s.values.begin());
  CHECK(top == nearest_grid(s, th0));
  CHECK(s.values[top] <= 1.0 + 1e-12);
  CHECK(s.values[top] >= 0.999);

  const auto peaks = locate_peaks(s, 0.01);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks.angles[0] - th0) <= cell_width_at(s, top));
  CHECK_THAT(peaks.heights[0], WithinAbs(1.0, 1e-9));
}

TEST_CASE("refinement never lowers a peak below its grid value") {
  std::mt19937_64 rng(13);
  const ArrayGeometry g{16, 0.5};
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix v = 0.4 * test::random_matrix(16, 2, rng);
    const auto s = evaluate_spectrum(v, g, 256);
    const double top = *std::max_element(s.values.begin(), s.values.end());
    // Threshold chosen so some peaks qualify.
    const auto peaks = locate_peaks(s, std::clamp(1.0 - 0.5 * top, 0.01, 0.99));
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      // The originating grid maximum lies within one cell of the refined angle.
      const auto j = nearest_grid(s, peaks.angles[i]);
      bool dominates = false;
      for (std::size_t g_idx = j > 0 ? j - 1 : 0; g_idx <= std::min(j + 1, s.values.size() - 1); ++g_idx) {
        const bool local_max = (g_idx == 0 || s.values[g_idx] > s.values[g_idx - 1]) &&
                               (g_idx + 1 == s.values.size() || s.values[g_idx] >= s.values[g_idx + 1]);
        if (local_max && peaks.heights[i] >= s.values[g_idx] - 1e-12) dominates = true;
      }
      CHECK(dominates);
      CHECK_THAT(peaks.heights[i], WithinAbs(s.evaluate(peaks.angles[i]), 1e-12));
    }
    CHECK(std::is_sorted(peaks.angles.begin(), peaks.angles.end()));
  }
}

TEST_CASE("locate_peaks validates epsilon and evaluate_spectrum the grid") {
  const ArrayGeometry g{16, 0.5};
  const auto s = evaluate_spectrum(CMatrix::Zero(16, 1), g, 128);
  CHECK_THROWS_AS(locate_peaks(s, 0.0), DomainError);
  CHECK_THROWS_AS(locate_peaks(s, 1.0), DomainError);
  CHECK_THROWS_AS(evaluate_spectrum(CMatrix::Zero(16, 1), g, 127), DomainError);
  CHECK_THROWS_AS(evaluate_spectrum(CMatrix::Zero(15, 1), g, 128), DimensionError);
}

TEST_CASE("two noiseless atoms six cells apart: two peaks near truth") {
  std::mt19937_64 rng(14);
  const ArrayGeometry g{32, 0.5};
  const double th1 = 1.3;
  // Six Rayleigh cells in spatial frequency.
  const double th2 = std::acos(std::cos(th1) - 6.0 / (32 * 0.5));
  const CMatrix y = steering_vector(th1, g) * test::unit_positive(3, rng).adjoint() +
                    1.5 * steering_vector(th2, g) * test::unit_positive(3, rng).adjoint();
  const auto sol = solve_dual(test::full_problem(y));
  REQUIRE(sol.converged());
  const auto s = evaluate_spectrum(sol.v, g, default_grid_size(32));
  CHECK(local_maxima_above(s, 0.99) == 2);
  const auto peaks = locate_peaks(s, 0.05);
  REQUIRE(peaks.size() == 2);
  CHECK(std::abs(peaks.angles[0] - std::min(th1, th2)) <= 1e-3);
  CHECK(std::abs(peaks.angles[1] - std::max(th1, th2)) <= 1e-3);
}

TEST_CASE("doubling the grid moves located angles by less than a cell") {
  std::mt19937_64 rng(15);
  const ArrayGeometry g{16, 0.5};
  const CMatrix y = steering_vector(0.9, g) * test::unit_positive(2, rng).adjoint() +
                    steering_vector(2.0, g) * test::unit_positive(2, rng).adjoint();
  const auto sol = solve_dual(test::full_problem(y));
  const auto s1 = evaluate_spectrum(sol.v, g, 256);
  const auto s2 = evaluate_spectrum(sol.v, g, 512);
  const auto p1 = locate_peaks(s1, 0.05);
  const auto p2 = locate_peaks(s2, 0.05);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(std::abs(p1.angles[i] - p2.angles[i]) < cell_width_at(s1, nearest_grid(s1, p1.angles[i])));
}

TEST_CASE("noiseless well-separated scenes give the exact path count") {
  SceneConfig c;
  c.n_antennas = 32;
  c.n_observed = 32;
  c.n_users = 10;
  c.n_active = 2;
  c.l_min = 2;
  c.l_max = 2;
  c.snapshots = 4;
  c.min_path_separation = 1.25;
  c.snr_db = std::numeric_limits<double>::infinity();
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(derive_seed(seed, 77));
    const Scene s = generate_scene(c, rng);
    const Observation o = synthesize(s, c, rng);
    const auto sol = solve_dual(DualProblem::from(o));
    const auto peaks = locate_peaks(evaluate_spectrum(sol.v, s.geometry, default_grid_size(32)), 0.05);
    if (peaks.size() == 4) ++exact;
  }
  CHECK(exact >= 48);
}
