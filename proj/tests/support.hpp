#pragma once

#include <random>
#include <vector>

#include "bsr/bsr.hpp"

namespace bsr::test {

inline CMatrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = complex_gaussian(rng);
  return m;
}

inline CVector unit_positive(Index t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  CVector s(t);
  for (Index i = 0; i < t; ++i) s[i] = unit(rng);
  return s / s.norm();
}

inline std::vector<Index> full_omega(Index n) {
  std::vector<Index> omega(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) omega[static_cast<std::size_t>(i)] = i;
  return omega;
}

/// Scene in which every listed user is active.
inline Scene make_scene(Index n, const std::vector<UserChannel>& users, const std::vector<CVector>& data) {
  Scene s;
  s.geometry = {n, 0.5};
  s.users = users;
  for (std::size_t k = 0; k < users.size(); ++k) s.active_set.push_back(static_cast<Index>(k));
  s.data = data;
  return s;
}

/// Estimate equal to the ground truth of active position k.
inline UserEstimate exact_estimate(const Scene& s, std::size_t k) {
  const auto& user = s.users[static_cast<std::size_t>(s.active_set[k])];
  UserEstimate e;
  e.angles = user.angles;
  e.c = user.gain_vector();
  e.alpha = e.c;
  e.phi = s.data[k];
  e.h = user.channel(s.geometry);
  return e;
}

inline DualProblem full_problem(const CMatrix& y, double eta = 0.0, SolverOptions opt = {}) {
  DualProblem p;
  p.y_omega = y;
  p.omega = full_omega(y.rows());
  p.eta = eta;
  p.n_antennas = y.rows();
  p.options = opt;
  return p;
}

}  // namespace bsr::test
