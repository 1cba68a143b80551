#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bsr/dualsdp.hpp"
#include "bsr/scene.hpp"

namespace bsr {

/// |q(theta)| = |V^H a(theta)| sampled on a grid uniform in spatial frequency.
struct DualSpectrum {
  std::vector<double> grid;  // angles, strictly increasing
  std::vector<double> values;
  ArrayGeometry geometry;
  CMatrix v;  // polynomial coefficients, kept for continuous refinement

  double evaluate(double theta) const { return dual_polynomial_norm(v, theta, geometry); }
};

struct PeakSet {
  std::vector<double> angles;  // ascending
  std::vector<double> heights;

  std::size_t size() const { return angles.size(); }
  bool empty() const { return angles.empty(); }
};

inline Index default_grid_size(Index n_antennas) { return std::max<Index>(8192, 32 * n_antennas); }

inline DualSpectrum evaluate_spectrum(const CMatrix& v, const ArrayGeometry& geometry, Index grid_size) {
  geometry.validate();
  if (v.rows() != geometry.n_antennas) throw DimensionError("V must have N rows");
  if (grid_size < 8 * geometry.n_antennas) throw DomainError("grid_size must be at least 8N");

  DualSpectrum spec;
  spec.geometry = geometry;
  spec.v = v;
  // f runs from +delta_r down to -delta_r (open interval) so theta increases.
  std::vector<double> freqs(static_cast<std::size_t>(grid_size));
  spec.grid.resize(freqs.size());
  const double g_total = static_cast<double>(grid_size);
  for (Index g = 0; g < grid_size; ++g) {
    const double u = 1.0 - 2.0 * (static_cast<double>(g) + 0.5) / g_total;
    freqs[static_cast<std::size_t>(g)] = geometry.delta_r * u;
    spec.grid[static_cast<std::size_t>(g)] = std::acos(u);
  }
  const RVector norms = polynomial_norms(v, freqs);
  spec.values.assign(norms.data(), norms.data() + norms.size());
  return spec;
}

namespace detail {

// Golden-section maximization of a function unimodal on [lo, hi].
template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Grid-local maxima with height >= 1 - epsilon, each refined by golden-section
/// search inside its bracketing cells. The count estimates the total number of paths.
inline PeakSet locate_peaks(const DualSpectrum& spectrum, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  PeakSet peaks;
  const auto& vals = spectrum.values;
  const auto& grid = spectrum.grid;
  const std::size_t n = vals.size();
  if (n < 3) return peaks;
  const double threshold = 1.0 - epsilon;

  for (std::size_t g = 0; g < n; ++g) {
    const double left = g > 0 ? vals[g - 1] : -1.0;
    const double right = g + 1 < n ? vals[g + 1] : -1.0;
    // Strictly above the left neighbour, not below the right one: a flat pair
    // yields a single peak.
    if (!(vals[g] > left && vals[g] >= right) || vals[g] < threshold) continue;

    const double lo = g > 0 ? grid[g - 1] : 0.5 * grid[0];
    const double hi = g + 1 < n ? grid[g + 1] : 0.5 * (grid[g] + kPi);
    const double theta = detail::golden_section_max(
        [&](double th) { return spectrum.evaluate(th); }, lo, hi, 1e-10);
    const double height = spectrum.evaluate(theta);
    if (height >= vals[g]) {
      peaks.angles.push_back(theta);
      peaks.heights.push_back(height);
    } else {
      peaks.angles.push_back(grid[g]);
      peaks.heights.push_back(vals[g]);
    }
  }
  // Refinement can land two neighbouring grid maxima on the same point.
  PeakSet merged;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (!merged.empty() && std::abs(peaks.angles[i] - merged.angles.back()) < 1e-9) {
      if (peaks.heights[i] > merged.heights.back()) {
        merged.angles.back() = peaks.angles[i];
        merged.heights.back() = peaks.heights[i];
      }
      continue;
    }
    merged.angles.push_back(peaks.angles[i]);
    merged.heights.push_back(peaks.heights[i]);
  }
  return merged;
}

}  // namespace bsr
