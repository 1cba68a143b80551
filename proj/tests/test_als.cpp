#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace bsr;
using Catch::Matchers::WithinAbs;

namespace {

struct Instance {
  std::vector<CMatrix> steering;
  std::vector<CVector> c;
  std::vector<CVector> phi;
  CMatrix y;
};

// K users with the given path counts, separated clusters, observed on omega.
Instance make_instance(const std::vector<Index>& paths, Index n, const std::vector<Index>& omega, Index t,
                       std::mt19937_64& rng) {
  const ArrayGeometry g{n, 0.5};
  Instance in;
  in.y = CMatrix::Zero(static_cast<Index>(omega.size()), t);
  const double width = 2.6 / static_cast<double>(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    std::vector<double> angles;
    for (Index l = 0; l < paths[k]; ++l)
      angles.push_back(0.3 + width * static_cast<double>(k) + 0.12 * static_cast<double>(l));
    CVector c(paths[k]);
    for (Index l = 0; l < paths[k]; ++l) c[l] = complex_gaussian(rng);
    const CVector phi = test::unit_positive(t, rng);
    in.steering.push_back(restrict_rows(steering_matrix(angles, g), omega));
    in.y += in.steering.back() * c * phi.adjoint();
    in.c.push_back(c);
    in.phi.push_back(phi);
  }
  return in;
}

}  // namespace

TEST_CASE("init_phi draws positive reals in (0, 5] reproducibly") {
  std::mt19937_64 r1(1), r2(1);
  const auto a = init_phi(6, 3, r1);
  const auto b = init_phi(6, 3, r2);
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a[k] == b[k]);
    for (Index t = 0; t < 6; ++t) {
      CHECK(a[k][t].imag() == 0.0);
      CHECK(a[k][t].real() > 0.0);
      CHECK(a[k][t].real() <= 5.0);
    }
  }
  std::mt19937_64 r3(2);
  const auto s = init_phi(1, 1, r3);
  REQUIRE(s[0].size() == 1);
  CHECK(s[0][0].real() > 0.0);
  CHECK(s[0][0].real() <= 5.0);
  CHECK_THROWS_AS(init_phi(0, 1, r3), DomainError);
}

TEST_CASE("c-step recovers a single user's gain exactly") {
  std::mt19937_64 rng(2);
  const auto in = make_instance({1}, 16, test::full_omega(16), 4, rng);
  const auto c = c_step(in.y, in.steering, in.phi);
  CHECK((c[0] - in.c[0]).norm() < 1e-10);
}

TEST_CASE("c-step on zero data returns zero gains") {
  std::mt19937_64 rng(3);
  const auto in = make_instance({2, 1}, 16, test::full_omega(16), 3, rng);
  const auto c = c_step(CMatrix::Zero(16, 3), in.steering, in.phi);
  for (const auto& ck : c) CHECK(ck.isZero(0.0));
}

TEST_CASE("c-step recovers two users' gains with true data") {
  std::mt19937_64 rng(4);
  const auto omega = random_subset(24, 18, rng);
  const auto in = make_instance({2, 3}, 24, omega, 4, rng);
  const auto c = c_step(in.y, in.steering, in.phi);
  for (std::size_t k = 0; k < 2; ++k) CHECK((c[k] - in.c[k]).norm() < 1e-8);
}

TEST_CASE("c-step rejects an all-zero system") {
  std::mt19937_64 rng(5);
  const auto in = make_instance({1}, 8, test::full_omega(8), 2, rng);
  const std::vector<CVector> zero = {CVector::Zero(2)};
  CHECK_THROWS_AS(c_step(in.y, in.steering, zero), DegenerateInputError);
}

TEST_CASE("phi-step with true gains returns the data direction") {
  std::mt19937_64 rng(6);
  const auto in = make_instance({2}, 16, test::full_omega(16), 5, rng);
  const auto r = phi_step(in.y, in.steering, in.c);
  CHECK_FALSE(r.flagged[0]);
  CHECK((r.phi[0] - in.phi[0]).norm() < 1e-10);
}

TEST_CASE("phi-step on zero data returns zero") {
  std::mt19937_64 rng(7);
  const auto in = make_instance({1, 2}, 16, test::full_omega(16), 3, rng);
  const auto r = phi_step(CMatrix::Zero(16, 3), in.steering, in.c);
  for (const auto& p : r.phi) CHECK(p.isZero(0.0));
}

TEST_CASE("phi-step recovers three users after normalization and phase fix") {
  std::mt19937_64 rng(8);
  const auto omega = random_subset(32, 20, rng);
  const auto in = make_instance({1, 2, 3}, 32, omega, 6, rng);
  // Scramble each gain by a unit phase and a scale; the fix undoes it.
  std::vector<CVector> cs;
  for (std::size_t k = 0; k < 3; ++k) cs.push_back(in.c[k] * std::polar(1.7, 0.4 * static_cast<double>(k + 1)));
  auto r = phi_step(in.y, in.steering, cs);
  for (std::size_t k = 0; k < 3; ++k) {
    CVector phi = r.phi[k] / r.phi[k].norm();
    CVector c = cs[k];
    fix_phase(phi, c);
    CHECK((phi - in.phi[k]).norm() < 1e-8);
  }
}

TEST_CASE("phi-step flags a zero-gain user and solves the rest") {
  std::mt19937_64 rng(9);
  const auto in = make_instance({2, 1}, 16, test::full_omega(16), 4, rng);
  const CMatrix y_one = in.steering[0] * in.c[0] * in.phi[0].adjoint();
  std::vector<CVector> cs = {in.c[0], CVector::Zero(1)};
  const auto r = phi_step(y_one, in.steering, cs);
  CHECK_FALSE(r.flagged[0]);
  CHECK(r.flagged[1]);
  CHECK(r.phi[1].isZero(0.0));
  CHECK((r.phi[0] - in.phi[0]).norm() < 1e-10);
}

TEST_CASE("phase fix makes the data sum real positive and keeps the product") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    CVector phi = test::random_matrix(5, 1, rng).col(0);
    CVector c = test::random_matrix(3, 1, rng).col(0);
    const CMatrix before = c * phi.adjoint();
    fix_phase(phi, c);
    CHECK(std::abs(phi.sum().imag()) < 1e-12);
    CHECK(phi.sum().real() > 0.0);
    CHECK((c * phi.adjoint() - before).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("run_als recovers a single noiseless user with exact angles") {
  std::mt19937_64 rng(11);
  const auto in = make_instance({2}, 16, test::full_omega(16), 4, rng);
  const auto out = run_als(in.y, in.steering, 5, rng);
  CHECK((out.phi[0] - in.phi[0]).norm() <= 1e-6);
  CHECK((out.c[0] - in.c[0]).norm() <= 1e-6);
}

TEST_CASE("more iterations never increase the final residual") {
  std::mt19937_64 rng(12);
  const auto omega = random_subset(24, 16, rng);
  const auto in = make_instance({2, 2}, 24, omega, 4, rng);
  std::mt19937_64 r1(5), r5(5);
  const auto one = run_als(in.y, in.steering, 1, r1);
  const auto five = run_als(in.y, in.steering, 5, r5);
  CHECK(five.report.residual_trace.back() <= one.report.residual_trace.back() + 1e-12);
}

TEST_CASE("run_als on zero data returns zero estimates") {
  std::mt19937_64 rng(13);
  const auto in = make_instance({1, 2}, 16, test::full_omega(16), 3, rng);
  const auto out = run_als(CMatrix::Zero(16, 3), in.steering, 5, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(out.c[k].isZero(0.0));
    CHECK(out.phi[k].isZero(0.0));
    CHECK(out.flagged[k]);
  }
  CHECK(out.report.residual_trace.back() == 0.0);
}

TEST_CASE("ALS invariants on random instances") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<Index> users(1, 4), paths(1, 3), snaps(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Index> l(static_cast<std::size_t>(users(rng)));
    for (auto& x : l) x = paths(rng);
    const Index t = snaps(rng);
    const auto omega = random_subset(32, 12 + trial % 20, rng);
    auto in = make_instance(l, 32, omega, t, rng);
    in.y += 0.05 * test::random_matrix(in.y.rows(), t, rng);
    const auto out = run_als(in.y, in.steering, 8, rng);
    const auto& tr = out.report.residual_trace;
    REQUIRE(tr.size() == 8);
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] + 1e-9);
    // The last trace entry is the residual of the returned estimates.
    CHECK_THAT(als_residual(in.y, in.steering, out.c, out.phi).norm(), WithinAbs(tr.back(), 1e-9 * (1 + tr.back())));
    for (std::size_t k = 0; k < l.size(); ++k) {
      if (out.flagged[k]) continue;
      CHECK_THAT(out.phi[k].norm(), WithinAbs(1.0, 1e-12));
      CHECK(std::abs(out.phi[k].sum().imag()) < 1e-12);
      CHECK(out.phi[k].sum().real() >= 0.0);
    }
  }
}

TEST_CASE("exact subspace in the identifiable regime fits to machine precision") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto omega = random_subset(32, 24, rng);
    const auto in = make_instance({2, 1, 3}, 32, omega, 4, rng);
    // M T = 96 >= sum L + K_a T = 18. Alternation converges linearly, so the
    // budget is generous.
    const auto out = run_als(in.y, in.steering, 200, rng);
    CHECK(out.report.residual_trace.back() <= 1e-8 * in.y.norm());
  }
}

TEST_CASE("user estimates assemble the full-array channel") {
  std::mt19937_64 rng(16);
  const ArrayGeometry g{16, 0.5};
  const auto in = make_instance({2}, 16, test::full_omega(16), 3, rng);
  ClusterResult cr;
  cr.members = {{0.3, 0.42}};
  cr.centers = {0.36};
  cr.steering = in.steering;
  const auto out = run_als(in.y, in.steering, 5, rng);
  const auto est = make_user_estimates(cr, out, g);
  REQUIRE(est.size() == 1);
  CHECK(est[0].alpha == est[0].c);
  CHECK((est[0].h - steering_matrix(cr.members[0], g) * est[0].c).norm() < 1e-14);
  CHECK((est[0].h - steering_matrix(cr.members[0], g) * in.c[0]).norm() < 1e-6);
}
