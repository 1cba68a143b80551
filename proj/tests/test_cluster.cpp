#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <set>

#include "support.hpp"

using namespace bsr;
using Catch::Matchers::WithinAbs;

namespace {

// Partition as a set of sets, independent of label values.
std::set<std::set<double>> partition(const std::vector<double>& x, const std::vector<int>& labels) {
  std::map<int, std::set<double>> groups;
  for (std::size_t i = 0; i < x.size(); ++i) groups[labels[i]].insert(x[i]);
  std::set<std::set<double>> out;
  for (auto& [l, g] : groups) out.insert(g);
  return out;
}

}  // namespace

TEST_CASE("two obvious clusters") {
  std::mt19937_64 rng(1);
  const std::vector<double> x = {0.50, 0.52, 1.50, 1.55};
  const auto km = kmeans_angles(x, 2, 50, rng);
  CHECK(km.labels == std::vector<int>{0, 0, 1, 1});
  CHECK_THAT(km.centers[0], WithinAbs(0.51, 1e-12));
  CHECK_THAT(km.centers[1], WithinAbs(1.525, 1e-12));
}

TEST_CASE("k = 1 puts everything in one cluster at the mean") {
  std::mt19937_64 rng(2);
  const std::vector<double> x = {0.3, 1.1, 2.7, 0.9, 1.4};
  const auto km = kmeans_angles(x, 1, 5, rng);
  for (int l : km.labels) CHECK(l == 0);
  CHECK_THAT(km.centers[0], WithinAbs(std::accumulate(x.begin(), x.end(), 0.0) / 5.0, 1e-14));
}

TEST_CASE("fewer angles than users is an under-detection error") {
  std::mt19937_64 rng(3);
  const std::vector<double> x = {0.3, 1.1};
  CHECK_THROWS_AS(kmeans_angles(x, 3, 5, rng), UnderDetectionError);
  CHECK_THROWS_AS(kmeans_angles(x, 0, 5, rng), DomainError);
}

TEST_CASE("sixty angles from three clusters are partitioned exactly") {
  std::mt19937_64 rng(4);
  const double centers[] = {0.6, 1.3, 2.4};
  std::uniform_real_distribution<double> off(-0.05, 0.05);
  std::vector<double> x;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 20; ++i) x.push_back(centers[k] + off(rng));
  std::shuffle(x.begin(), x.end(), rng);
  std::vector<int> truth;
  for (double v : x) truth.push_back(v < 0.95 ? 0 : (v < 1.85 ? 1 : 2));
  const auto km = kmeans_angles(x, 3, 50, rng);
  CHECK(km.labels == truth);
}

TEST_CASE("clusters separated by ten spreads are recovered in every trial") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const double spread = 0.03;
    std::uniform_real_distribution<double> off(-spread, spread);
    std::uniform_int_distribution<int> count(1, 4);
    std::vector<double> x;
    std::vector<int> truth;
    double c = 0.2;
    for (int k = 0; k < 4; ++k) {
      c += 10 * spread + 0.1 * std::uniform_real_distribution<double>(0, 1)(rng);
      const int l = count(rng);
      for (int i = 0; i < l; ++i) {
        x.push_back(c + off(rng));
        truth.push_back(k);
      }
      c += 2 * spread;
    }
    const auto km = kmeans_angles(x, 4, 50, rng);
    CHECK(partition(x, km.labels) == partition(x, truth));
  }
}

TEST_CASE("k-means is deterministic and labels follow ascending centers") {
  const std::vector<double> x = {2.0, 0.4, 1.2, 0.45, 2.05, 1.25};
  std::mt19937_64 r1(7), r2(7);
  const auto a = kmeans_angles(x, 3, 10, r1);
  const auto b = kmeans_angles(x, 3, 10, r2);
  CHECK(a.labels == b.labels);
  CHECK(a.centers == b.centers);
  CHECK(std::is_sorted(a.centers.begin(), a.centers.end()));
}

TEST_CASE("equidistant points go to the lower-indexed center") {
  const std::vector<double> centers = {1.0, 2.0};
  CHECK(detail::nearest_center(1.5, centers) == 0);
}

TEST_CASE("single angle cluster yields the restricted steering vector") {
  const ArrayGeometry g{16, 0.5};
  KMeansResult km;
  km.labels = {0};
  km.centers = {1.1};
  const std::vector<double> x = {1.1};
  const std::vector<Index> omega = {0, 3, 4, 9};
  const auto cr = build_user_estimates(km, x, omega, g);
  REQUIRE(cr.steering.size() == 1);
  CHECK(cr.steering[0] == restrict_rows(steering_vector(1.1, g), omega));
}

TEST_CASE("full observation gives unit-norm steering columns") {
  const ArrayGeometry g{20, 0.5};
  KMeansResult km;
  km.labels = {0, 1, 0, 1};
  km.centers = {0.8, 2.0};
  const std::vector<double> x = {0.82, 1.98, 0.78, 2.03};
  const auto cr = build_user_estimates(km, x, test::full_omega(20), g);
  for (const auto& a : cr.steering)
    for (Index j = 0; j < a.cols(); ++j) CHECK_THAT(a.col(j).norm(), WithinAbs(1.0, 1e-12));
  CHECK(cr.members[0] == std::vector<double>{0.78, 0.82});
  CHECK(cr.members[1] == std::vector<double>{1.98, 2.03});
}

TEST_CASE("steering columns match independent evaluation") {
  std::mt19937_64 rng(9);
  const ArrayGeometry g{24, 0.5};
  std::uniform_real_distribution<double> ang(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(7);
    for (auto& v : x) v = ang(rng);
    const auto km = kmeans_angles(x, 3, 10, rng);
    const auto omega = random_subset(24, 11, rng);
    const auto cr = build_user_estimates(km, x, omega, g);
    std::size_t total = 0;
    for (std::size_t k = 0; k < cr.clusters(); ++k) {
      REQUIRE(cr.steering[k].cols() == static_cast<Index>(cr.members[k].size()));
      total += cr.members[k].size();
      for (std::size_t l = 0; l < cr.members[k].size(); ++l) {
        const CVector a = steering_vector(cr.members[k][l], g);
        for (std::size_t r = 0; r < omega.size(); ++r)
          CHECK(cr.steering[k](static_cast<Index>(r), static_cast<Index>(l)) == a[omega[r]]);
      }
    }
    CHECK(total == x.size());
  }
}

TEST_CASE("relabeling leaves the member partition unchanged") {
  const ArrayGeometry g{16, 0.5};
  const std::vector<double> x = {0.5, 1.5, 0.55, 2.5, 1.45};
  KMeansResult a;
  a.labels = {0, 1, 0, 2, 1};
  a.centers = {0.525, 1.475, 2.5};
  KMeansResult b;
  b.labels = {2, 0, 2, 1, 0};
  b.centers = {1.475, 2.5, 0.525};
  const auto ca = build_user_estimates(a, x, test::full_omega(16), g);
  const auto cb = build_user_estimates(b, x, test::full_omega(16), g);
  const std::set<std::vector<double>> sa(ca.members.begin(), ca.members.end());
  const std::set<std::vector<double>> sb(cb.members.begin(), cb.members.end());
  CHECK(sa == sb);
}

TEST_CASE("empty cluster is a degeneracy error") {
  const ArrayGeometry g{16, 0.5};
  KMeansResult km;
  km.labels = {0, 0};
  km.centers = {1.0, 2.0};
  const std::vector<double> x = {1.0, 1.1};
  CHECK_THROWS_AS(build_user_estimates(km, x, test::full_omega(16), g), ClusteringDegeneracyError);
}

TEST_CASE("partial observation column energy is M/N on average") {
  const ArrayGeometry g{32, 0.5};
  std::mt19937_64 rng(10);
  KMeansResult km;
  km.labels = {0};
  km.centers = {1.0};
  const std::vector<double> x = {1.0};
  double sum = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    const auto omega = random_subset(32, 12, rng);
    sum += build_user_estimates(km, x, omega, g).steering[0].col(0).squaredNorm();
  }
  CHECK(std::abs(sum / draws - 12.0 / 32.0) <= 0.02 * 12.0 / 32.0);
}
