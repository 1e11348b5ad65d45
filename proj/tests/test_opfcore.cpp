#include "doctest.h"

#include <cmath>
#include <random>

#include "wdropf/acgrid.hpp"
#include "wdropf/opfcore.hpp"

using namespace wdropf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Network load(const char* name) {
  return parse_case_file(std::string(WDROPF_DATA_DIR) + "/" + name);
}

/// Truncated Laplace forecast errors, scale proportional to the forecast.
MatrixXd laplace_zeta(const Network& net, int n, unsigned seed, double scale_frac = 0.15) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u01(1e-12, 1.0 - 1e-12);
  MatrixXd z(n, net.n_wind());
  for (int i = 0; i < n; ++i)
    for (int w = 0; w < net.n_wind(); ++w) {
      const WindFarm& f = net.wind_farms[w];
      const double u = u01(rng) - 0.5;
      double e = -scale_frac * f.forecast * std::copysign(std::log(1 - 2 * std::abs(u)), u);
      e = std::min(std::max(e, -f.forecast), f.capacity - f.forecast);
      z(i, w) = e;
    }
  return z;
}

double balance_residual(const Network& net, const OperatingStrategy& s) {
  AdmittanceSet adm = build_admittance(net);
  SystemState st{s.theta, s.v};
  VectorXd P, Q;
  injections(st, adm, P, Q);
  VectorXd wp = net.wind_p(), wq = net.wind_q();
  double worst = 0.0;
  for (int i = 0; i < net.n_bus(); ++i) {
    double rp = P[i] + net.buses[i].pd - wp[i];
    double rq = Q[i] + net.buses[i].qd - wq[i];
    for (int g = 0; g < net.n_gen(); ++g)
      if (net.generators[g].bus == i) {
        rp -= s.pg[g];
        rq -= s.qg[g];
      }
    worst = std::max({worst, std::abs(rp), std::abs(rq)});
  }
  return worst;
}

}  // namespace

TEST_CASE("deterministic 14-bus optimal dispatch matches the published cost") {
  Network net = load("case14.m");
  SolveOutcome out = solve_deterministic(net);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.report.kkt < 1e-6);
  CHECK(out.report.feasibility < 1e-7);
  // recorded objective of the standard 14-bus OPF
  CHECK(out.report.objective.nominal == doctest::Approx(8081.53).epsilon(1e-3));
  CHECK(balance_residual(net, out.strategy) < 1e-7);
  for (int g = 0; g < net.n_gen(); ++g) {
    CHECK(out.strategy.pg[g] >= net.generators[g].pmin - 1e-7);
    CHECK(out.strategy.pg[g] <= net.generators[g].pmax + 1e-7);
    CHECK(out.strategy.r_up[g] == doctest::Approx(0.0).scale(1.0));
  }
  for (int i = 0; i < net.n_bus(); ++i) {
    CHECK(out.strategy.v[i] >= net.buses[i].vmin - 1e-7);
    CHECK(out.strategy.v[i] <= net.buses[i].vmax + 1e-7);
  }
}

TEST_CASE("wdro solve on the 14-bus wind case") {
  Network net = load("case14_wind.m");
  MatrixXd zeta = laplace_zeta(net, 300, 42);
  SolveConfig cfg;
  cfg.method = Method::Wdro;
  SolveOutcome out = solve_with_enforcement(net, zeta, cfg);
  REQUIRE(out.status == SolveStatus::Optimal);
  CHECK(out.report.kkt < 1e-6);
  CHECK(out.report.feasibility < 1e-7);
  CHECK(balance_residual(net, out.strategy) < 1e-7);

  double sum_alpha = 0.0;
  for (int g = 0; g < net.n_gen(); ++g) {
    CHECK(out.strategy.alpha[g] >= 0.0);
    CHECK(out.strategy.r_up[g] >= 0.0);
    CHECK(out.strategy.r_dn[g] >= 0.0);
    sum_alpha += out.strategy.alpha[g];
  }
  CHECK(sum_alpha == doctest::Approx(1.0).epsilon(1e-7));

  const ObjectiveBreakdown& ob = out.report.objective;
  CHECK(ob.bound >= ob.worst_case - 1e-7 * std::abs(ob.bound));
  CHECK(ob.worst_case >= ob.sample_average - 1e-7 * std::abs(ob.worst_case));
  CHECK(out.strategy.lambda >= -1e-10);

  SUBCASE("full enforcement reproduces the objective") {
    SolveConfig cfg2 = cfg;
    cfg2.enforce_all = true;
    SolveOutcome out2 = solve_with_enforcement(net, zeta, cfg2);
    REQUIRE(out2.status == SolveStatus::Optimal);
    CHECK(out2.report.objective.bound ==
          doctest::Approx(out.report.objective.bound).epsilon(1e-6));
  }

  SUBCASE("strategy JSON round trip") {
    std::string j = strategy_to_json(out.strategy, net);
    OperatingStrategy s2 = strategy_from_json(j);
    CHECK((s2.v - out.strategy.v).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((s2.theta - out.strategy.theta).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((s2.pg - out.strategy.pg).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((s2.alpha - out.strategy.alpha).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(s2.lambda == doctest::Approx(out.strategy.lambda));
  }
}

TEST_CASE("the exact AGC/AVR response honours wdro margins at sampled errors") {
  Network net = load("case14_wind.m");
  MatrixXd zeta = laplace_zeta(net, 300, 7);
  SolveConfig cfg;
  cfg.method = Method::Wdro;
  SolveOutcome out = solve_with_enforcement(net, zeta, cfg);
  REQUIRE(out.status == SolveStatus::Optimal);
  AdmittanceSet adm = build_admittance(net);
  OperatingPoint op{{out.strategy.theta, out.strategy.v}, out.strategy.pg, out.strategy.qg,
                    out.strategy.alpha};
  FastResponseEvaluator fast(net, adm, op);
  int volt_ok = 0, n_eval = 40;
  for (int t = 0; t < n_eval; ++t) {
    ResponseOutcome r = fast.evaluate(laplace_zeta(net, 1, 1000 + t).row(0).transpose());
    REQUIRE(r.converged);
    bool ok = true;
    for (int i = 0; i < net.n_bus(); ++i)
      if (r.state.v[i] < net.buses[i].vmin - 2e-3 || r.state.v[i] > net.buses[i].vmax + 2e-3)
        ok = false;
    volt_ok += ok;
  }
  CHECK(volt_ok >= n_eval - 2);  // allow for linearization error at the tails
}

TEST_CASE("benchmark methods solve the 14-bus wind case") {
  Network net = load("case14_wind.m");
  // moderate error scale: the robust support (sigma_max deviations) must stay
  // inside what the network can absorb, or the robust method is infeasible
  MatrixXd zeta = laplace_zeta(net, 300, 42, 0.06);
  std::map<Method, SolveOutcome> res;
  for (Method mth : {Method::Ro, Method::Mdro, Method::Gsp, Method::Dc}) {
    SolveConfig cfg;
    cfg.method = mth;
    SolveOutcome out = solve_with_enforcement(net, zeta, cfg);
    REQUIRE_MESSAGE(out.status == SolveStatus::Optimal, method_name(mth));
    CHECK(out.report.kkt < 1e-6);
    // benchmark objectives are empirical averages: no ball term
    CHECK(out.report.objective.bound ==
          doctest::Approx(out.report.objective.sample_average));
    CHECK(out.strategy.lambda == doctest::Approx(0.0).scale(1.0));
    res[mth] = out;
  }
  // DC pins voltages and reactive outputs
  const OperatingStrategy& dc = res[Method::Dc].strategy;
  CHECK((dc.v - VectorXd::Ones(net.n_bus())).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(dc.qg.lpNorm<Eigen::Infinity>() < 1e-8);
  // DC dispatch differs from the AC-based strategies
  CHECK((dc.pg - res[Method::Ro].strategy.pg).lpNorm<Eigen::Infinity>() > 1e-4);
}

TEST_CASE("vanishing wind uncertainty reduces to the deterministic dispatch") {
  Network net = load("case14_wind.m");
  for (auto& f : net.wind_farms) {
    f.capacity = 1e-8;
    f.forecast = 0.0;
  }
  MatrixXd zeta = MatrixXd::Zero(50, net.n_wind());
  SolveConfig cfg;
  cfg.method = Method::Wdro;
  SolveOutcome out = solve_with_enforcement(net, zeta, cfg);
  REQUIRE(out.status == SolveStatus::Optimal);
  SolveOutcome det = solve_deterministic(net);
  REQUIRE(det.status == SolveStatus::Optimal);
  CHECK(out.report.objective.bound ==
        doctest::Approx(det.report.objective.nominal).epsilon(1e-4));
}
