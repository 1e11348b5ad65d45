#include "doctest.h"
#include "wdropf/chance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

using namespace wdropf;

namespace {

// naive O(N) evaluation of h(sigma, lambda), used as the oracle
double h_naive(double sigma, const Eigen::VectorXd& d, double eps, double lambda) {
  double acc = 0.0;
  for (int k = 0; k < d.size(); ++k)
    acc += std::max(1.0 - lambda * std::max(sigma - d[k], 0.0), 0.0);
  return lambda * eps + acc / d.size();
}

Eigen::VectorXd abs_gauss_draws(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd d(n);
  for (int k = 0; k < n; ++k) d[k] = std::abs(g(rng));
  return d;
}

}  // namespace

TEST_CASE("worst-case violation, zero radius") {
  Eigen::VectorXd d(2);
  d << 0.5, 1.5;
  // empirical frequency of d_k >= sigma
  CHECK(worst_case_violation(1.0, d, 0.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(worst_case_violation(2.0, d, 0.0) == doctest::Approx(0.0).scale(1).epsilon(1e-9));
  CHECK(worst_case_violation(0.25, d, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("worst-case violation matches a dense grid search") {
  Eigen::VectorXd d = abs_gauss_draws(100, 51);
  const double sigma = 1.7, eps = 0.1;
  // two-stage grid over lambda
  double best = 1.0, best_lam = 0.0;
  for (double lam = 0.0; lam <= 100.0; lam += 0.01) {
    const double v = h_naive(sigma, d, eps, lam);
    if (v < best) {
      best = v;
      best_lam = lam;
    }
  }
  for (double lam = std::max(0.0, best_lam - 0.02); lam <= best_lam + 0.02; lam += 1e-5)
    best = std::min(best, h_naive(sigma, d, eps, lam));
  CHECK(worst_case_violation(sigma, d, eps) == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("h is convex in lambda and violation is monotone") {
  Eigen::VectorXd d = abs_gauss_draws(200, 53);
  std::mt19937 rng(57);
  std::uniform_real_distribution<double> ul(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    double a = ul(rng), b = ul(rng);
    if (a > b) std::swap(a, b);
    const double mid = 0.5 * (a + b);
    const double lhs = h_naive(1.3, d, 0.05, mid);
    const double rhs = 0.5 * (h_naive(1.3, d, 0.05, a) + h_naive(1.3, d, 0.05, b));
    CHECK(lhs <= rhs + 1e-12);
  }
  // non-increasing in sigma, non-decreasing in eps
  double prev = 2.0;
  for (double s = 0.0; s <= 4.0; s += 0.25) {
    const double v = worst_case_violation(s, d, 0.05);
    CHECK(v <= prev + 1e-9);
    prev = v;
  }
  prev = -1.0;
  for (double e = 0.0; e <= 0.5; e += 0.05) {
    const double v = worst_case_violation(1.5, d, e);
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("minimum cube side") {
  SUBCASE("rho = 1 gives a degenerate cube") {
    Eigen::VectorXd d = abs_gauss_draws(50, 59);
    HypercubeResult r = min_sigma(d, 0.3, 1.0, 10.0);
    REQUIRE(r.feasible);
    CHECK(r.sigma == doctest::Approx(0.0).scale(1).epsilon(1e-9));
  }
  SUBCASE("zero radius recovers the order statistic") {
    Eigen::VectorXd d = abs_gauss_draws(1000, 61);
    HypercubeResult r = min_sigma(d, 0.0, 0.05, 10.0);
    REQUIRE(r.feasible);
    std::vector<double> sorted(d.data(), d.data() + d.size());
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::abs(r.sigma - sorted[949]) <= 1e-3);
  }
  SUBCASE("result is certified on both sides") {
    for (unsigned seed : {63u, 67u, 71u}) {
      Eigen::VectorXd d = abs_gauss_draws(400, seed);
      HypercubeResult r = min_sigma(d, 0.02, 0.05, 10.0);
      REQUIRE(r.feasible);
      CHECK(worst_case_violation(r.sigma, d, 0.02) <= 0.05 + 1e-9);
      if (r.sigma > 0)
        CHECK(worst_case_violation(std::max(r.sigma - 2e-4, 0.0), d, 0.02) > 0.05);
    }
  }
  SUBCASE("huge radius is infeasible") {
    Eigen::VectorXd d = abs_gauss_draws(100, 73);
    HypercubeResult r = min_sigma(d, 1.0, 0.05, 10.0);
    CHECK(!r.feasible);
  }
}

TEST_CASE("uncertainty-set vertices") {
  SUBCASE("one dimension") {
    HypercubeResult r;
    r.feasible = true;
    r.sigma = 2.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Identity(1, 1);
    UncertaintySet u = build_uncertainty_set(r, mu, sq);
    REQUIRE(u.vertices.size() == 2);
    std::vector<double> xs = {u.vertices[0][0], u.vertices[1][0]};
    std::sort(xs.begin(), xs.end());
    CHECK(xs[0] == doctest::Approx(-2.0));
    CHECK(xs[1] == doctest::Approx(2.0));
  }
  SUBCASE("two dimensions, shifted") {
    HypercubeResult r;
    r.feasible = true;
    r.sigma = 1.0;
    Eigen::VectorXd mu(2);
    mu << 1.0, 0.0;
    UncertaintySet u = build_uncertainty_set(r, mu, Eigen::MatrixXd::Identity(2, 2));
    REQUIRE(u.vertices.size() == 4);
    std::vector<std::pair<double, double>> got, want = {{0, -1}, {0, 1}, {2, -1}, {2, 1}};
    for (const auto& v : u.vertices) got.push_back({v[0], v[1]});
    std::sort(got.begin(), got.end());
    for (int i = 0; i < 4; ++i) {
      CHECK(got[i].first == doctest::Approx(want[i].first));
      CHECK(got[i].second == doctest::Approx(want[i].second));
    }
  }
  SUBCASE("general map round-trips to the cube surface") {
    Eigen::MatrixXd xi(200, 2);
    std::mt19937 rng(79);
    std::normal_distribution<double> g;
    for (int k = 0; k < 200; ++k) {
      xi(k, 0) = 0.3 * g(rng);
      xi(k, 1) = 0.2 * xi(k, 0) + 0.1 * g(rng);
    }
    SampleSet s = make_sample_set(xi);
    HypercubeResult r;
    r.feasible = true;
    r.sigma = 1.75;
    UncertaintySet u = build_uncertainty_set(r, s.mean, s.sqrt_cov);
    for (const auto& v : u.vertices) {
      Eigen::VectorXd back = s.inv_sqrt_cov * (v - s.mean);
      CHECK(back.lpNorm<Eigen::Infinity>() == doctest::Approx(1.75).epsilon(1e-9));
    }
  }
}

TEST_CASE("vertex constraint records") {
  QuantityKey key{QuantityKind::Voltage, 8};
  CHECK(key.str() == "voltage:8");

  UncertaintySet degenerate;
  degenerate.vertices = {Eigen::VectorXd::Zero(2)};
  auto cs = emit_robust_constraints(key, degenerate, 0.94, 1.06);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].omega == 0.0);
  CHECK(cs[0].t == 0.0);
  CHECK(cs[0].lo == 0.94);

  HypercubeResult r;
  r.feasible = true;
  r.sigma = 0.4;
  UncertaintySet u1 =
      build_uncertainty_set(r, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  auto rs = emit_robust_constraints(QuantityKey{QuantityKind::Reserve, 2}, u1, -1.0, 1.0);
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].omega == doctest::Approx(-rs[1].omega));
  CHECK(rs[0].t == 0.0);
}

TEST_CASE("sigma cache persistence and invalidation") {
  const std::string path = "sigma_cache_tmp.json";
  SigmaCache cache;
  HypercubeResult r;
  r.feasible = true;
  r.sigma = 1.23;
  r.lambda = 4.5;
  r.level = 0.049;
  cache.store("voltage:8", 0.1, 0.05, 42u, r);
  cache.save(path);

  SigmaCache loaded;
  loaded.load(path);
  auto hit = loaded.lookup("voltage:8", 0.1, 0.05, 42u);
  REQUIRE(hit.has_value());
  CHECK(hit->sigma == doctest::Approx(1.23));
  CHECK(hit->lambda == doctest::Approx(4.5));
  CHECK(!loaded.lookup("voltage:8", 0.1, 0.05, 43u).has_value());  // new samples
  CHECK(!loaded.lookup("voltage:8", 0.2, 0.05, 42u).has_value());  // new radius
  CHECK(!loaded.lookup("voltage:9", 0.1, 0.05, 42u).has_value());
  std::remove(path.c_str());
}
