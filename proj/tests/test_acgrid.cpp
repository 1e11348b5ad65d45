#include "doctest.h"
#include "wdropf/acgrid.hpp"

#include <cmath>
#include <complex>
#include <random>

using namespace wdropf;

namespace {

Network load(const char* name) {
  return parse_case_file(std::string(WDROPF_DATA_DIR) + "/" + name);
}

// Independent oracle: S = diag(V) conj(Y V) with complex arithmetic.
void complex_injections(const SystemState& st, const AdmittanceSet& adm,
                        Eigen::VectorXd& P, Eigen::VectorXd& Q) {
  const int n = static_cast<int>(st.v.size());
  Eigen::VectorXcd V(n);
  for (int i = 0; i < n; ++i) V[i] = std::polar(st.v[i], st.theta[i]);
  Eigen::MatrixXcd Y = adm.G.cast<std::complex<double>>() +
                       std::complex<double>(0, 1) * adm.B.cast<std::complex<double>>();
  Eigen::VectorXcd S = V.array() * (Y * V).conjugate().array();
  P = S.real();
  Q = S.imag();
}

SystemState perturbed_state(const Network& net, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dth(-0.3, 0.3), dv(0.94, 1.08);
  SystemState st;
  st.theta.resize(net.n_bus());
  st.v.resize(net.n_bus());
  for (int i = 0; i < net.n_bus(); ++i) {
    st.theta[i] = dth(rng);
    st.v[i] = dv(rng);
  }
  return st;
}

}  // namespace

TEST_CASE("injections match the complex-power oracle") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  SystemState st = perturbed_state(net, 7);
  Eigen::VectorXd P, Q, Po, Qo;
  injections(st, adm, P, Q);
  complex_injections(st, adm, Po, Qo);
  CHECK((P - Po).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((Q - Qo).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("injection jacobian matches central differences") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  SystemState st = perturbed_state(net, 11);
  const int n = net.n_bus();
  Eigen::MatrixXd J = injection_jacobian(st, adm);
  const double h = 1e-6;
  Eigen::VectorXd Pp, Qp, Pm, Qm;
  for (int c = 0; c < 2 * n; ++c) {
    SystemState a = st, b = st;
    if (c < n) {
      a.theta[c] += h;
      b.theta[c] -= h;
    } else {
      a.v[c - n] += h;
      b.v[c - n] -= h;
    }
    injections(a, adm, Pp, Qp);
    injections(b, adm, Pm, Qm);
    for (int r = 0; r < n; ++r) {
      CHECK(J(r, c) == doctest::Approx((Pp[r] - Pm[r]) / (2 * h)).epsilon(1e-6).scale(1.0));
      CHECK(J(n + r, c) == doctest::Approx((Qp[r] - Qm[r]) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("weighted hessian matches central differences of the gradient") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  SystemState st = perturbed_state(net, 13);
  const int n = net.n_bus();
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dw(-1.0, 1.0);
  Eigen::VectorXd y(n), z(n);
  for (int i = 0; i < n; ++i) {
    y[i] = dw(rng);
    z[i] = dw(rng);
  }
  Eigen::MatrixXd H = injection_weighted_hessian(st, adm, y, z);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  auto grad = [&](const SystemState& s) -> Eigen::VectorXd {
    Eigen::MatrixXd J = injection_jacobian(s, adm);
    Eigen::VectorXd w(2 * n);
    w << y, z;
    return J.transpose() * w;
  };
  const double h = 1e-6;
  for (int c = 0; c < 2 * n; ++c) {
    SystemState a = st, b = st;
    if (c < n) {
      a.theta[c] += h;
      b.theta[c] -= h;
    } else {
      a.v[c - n] += h;
      b.v[c - n] -= h;
    }
    Eigen::VectorXd col = (grad(a) - grad(b)) / (2 * h);
    for (int r = 0; r < 2 * n; ++r)
      CHECK(H(r, c) == doctest::Approx(col[r]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("branch flow jacobian matches central differences") {
  Network net = load("case14.m");
  SystemState st = perturbed_state(net, 19);
  const int n = net.n_bus();
  Eigen::MatrixXd J = branch_flow_jacobian(st, net);
  const double h = 1e-6;
  for (int c = 0; c < 2 * n; ++c) {
    SystemState a = st, b = st;
    if (c < n) {
      a.theta[c] += h;
      b.theta[c] -= h;
    } else {
      a.v[c - n] += h;
      b.v[c - n] -= h;
    }
    Eigen::VectorXd col = (branch_flows(a, net) - branch_flows(b, net)) / (2 * h);
    for (int k = 0; k < net.n_branch(); ++k)
      CHECK(J(k, c) == doctest::Approx(col[k]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("two-bus lossless line has the textbook solution") {
  const char* text = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 100 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [ 1 0 0 100 -100 1.0 100 1 300 0; ];
mpc.branch = [ 1 2 0 0.1 0 0 0 0 0 0 1; ];
mpc.gencost = [ 2 0 0 3 0 10 0; ];
)";
  Network net = parse_case(text, CaseFormat::MatpowerM);
  AdmittanceSet adm = build_admittance(net);
  CHECK(adm.B(0, 1) == doctest::Approx(10.0));

  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(2);
  ctx.q = Eigen::VectorXd::Zero(2);
  ctx.p[1] = -1.0;
  ctx.v_setpoint = Eigen::VectorXd::Ones(2);
  NewtonResult nr = solve_newton(ctx, adm, net, flat_state(net, ctx));
  REQUIRE(nr.converged);
  // lossless: P1 = v1 v2 sin(th12)/x = 1.0; and P1 = -P2
  const double th12 = nr.state.theta[0] - nr.state.theta[1];
  CHECK(10.0 * nr.state.v[1] * std::sin(th12) == doctest::Approx(1.0).epsilon(1e-8));
  Eigen::VectorXd f = branch_flows(nr.state, net);
  CHECK(f[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("newton solve reproduces the recorded 14-bus power flow") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  // dispatch from the case file's Pg column and voltage setpoints
  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(14);
  ctx.q = Eigen::VectorXd::Zero(14);
  for (int i = 0; i < 14; ++i) {
    ctx.p[i] = -net.buses[i].pd;
    ctx.q[i] = -net.buses[i].qd;
  }
  ctx.p[net.bus_index(2)] += 0.40;  // only bus-2 unit has nonzero Pg besides the slack
  ctx.v_setpoint = Eigen::VectorXd::Ones(14);
  ctx.v_setpoint[net.bus_index(1)] = 1.06;
  ctx.v_setpoint[net.bus_index(2)] = 1.045;
  ctx.v_setpoint[net.bus_index(3)] = 1.01;
  ctx.v_setpoint[net.bus_index(6)] = 1.07;
  ctx.v_setpoint[net.bus_index(8)] = 1.09;

  NewtonResult nr = solve_newton(ctx, adm, net, flat_state(net, ctx));
  REQUIRE(nr.converged);
  CHECK(nr.iterations <= 6);

  const double deg = M_PI / 180.0;
  CHECK(nr.state.theta[net.bus_index(2)] == doctest::Approx(-4.98 * deg).epsilon(0.01));
  CHECK(nr.state.theta[net.bus_index(14)] == doctest::Approx(-16.04 * deg).epsilon(0.01));
  CHECK(nr.state.v[net.bus_index(4)] == doctest::Approx(1.019).epsilon(0.002));
  CHECK(nr.state.v[net.bus_index(9)] == doctest::Approx(1.056).epsilon(0.002));
  CHECK(nr.state.v[net.bus_index(14)] == doctest::Approx(1.036).epsilon(0.002));

  // slack output should match the recorded 232.4 MW
  Eigen::VectorXd P, Q;
  injections(nr.state, adm, P, Q);
  CHECK(P[net.bus_index(1)] == doctest::Approx(2.324).epsilon(0.002));
}

namespace {

OperatingPoint make_operating_point(const Network& net, const AdmittanceSet& adm) {
  OperatingPoint op;
  op.pg = Eigen::VectorXd::Zero(net.n_gen());
  op.pg << 0.8, 0.4, 0.3, 0.2, 0.2;
  op.alpha = Eigen::VectorXd::Zero(net.n_gen());
  op.alpha << 0.4, 0.3, 0.1, 0.1, 0.1;

  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(net.n_bus());
  ctx.q = Eigen::VectorXd::Zero(net.n_bus());
  Eigen::VectorXd pw = net.wind_p(), qw = net.wind_q();
  for (int i = 0; i < net.n_bus(); ++i) {
    ctx.p[i] = pw[i] - net.buses[i].pd;
    ctx.q[i] = qw[i] - net.buses[i].qd;
  }
  for (int g = 0; g < net.n_gen(); ++g) ctx.p[net.generators[g].bus] += op.pg[g];
  ctx.v_setpoint = Eigen::VectorXd::Ones(net.n_bus());
  ctx.v_setpoint[net.ref_bus] = 1.06;
  ctx.v_setpoint[net.bus_index(2)] = 1.045;
  ctx.v_setpoint[net.bus_index(3)] = 1.01;
  ctx.v_setpoint[net.bus_index(6)] = 1.07;
  ctx.v_setpoint[net.bus_index(8)] = 1.09;
  NewtonResult nr = solve_newton(ctx, adm, net, flat_state(net, ctx));
  REQUIRE(nr.converged);
  op.state = nr.state;
  op.qg = Eigen::VectorXd::Zero(net.n_gen());
  return op;
}

}  // namespace

TEST_CASE("agc/avr response honors the affine policy and power balance") {
  Network net = load("case14_wind.m");
  AdmittanceSet adm = build_admittance(net);
  OperatingPoint op = make_operating_point(net, adm);

  SUBCASE("zero disturbance reproduces the nominal point") {
    Eigen::VectorXd zeta = Eigen::VectorXd::Zero(4);
    ResponseOutcome out = agc_avr_response(net, adm, op, zeta);
    REQUIRE(out.converged);
    CHECK((out.state.theta - op.state.theta).lpNorm<Eigen::Infinity>() < 1e-7);
    CHECK((out.state.v - op.state.v).lpNorm<Eigen::Infinity>() < 1e-7);
    for (int g = 1; g < net.n_gen(); ++g)
      CHECK(out.pg_realized[g] == doctest::Approx(op.pg[g]));
  }

  SUBCASE("nonzero disturbance") {
    Eigen::VectorXd zeta(4);
    zeta << 0.05, -0.03, 0.02, -0.01;
    const double omega = zeta.sum();
    ResponseOutcome out = agc_avr_response(net, adm, op, zeta);
    REQUIRE(out.converged);
    // PV units follow the affine policy exactly
    for (int g = 1; g < net.n_gen(); ++g)
      CHECK(out.pg_realized[g] == doctest::Approx(op.pg[g] - omega * op.alpha[g]));
    // AVR holds the controlled voltages
    CHECK(out.state.v[net.ref_bus] == doctest::Approx(op.state.v[net.ref_bus]));
    CHECK(out.state.v[net.bus_index(2)] == doctest::Approx(op.state.v[net.bus_index(2)]));
    // system-wide active balance: generation + wind - load = losses
    Eigen::VectorXd P, Q;
    injections(out.state, adm, P, Q);
    double wind = 0, load = 0;
    for (const auto& w : net.wind_farms) wind += w.forecast;
    wind += zeta.sum();
    for (const auto& b : net.buses) load += b.pd;
    CHECK(out.pg_realized.sum() + wind - load == doctest::Approx(P.sum()).epsilon(1e-8));
    // reactive injections at controlled buses match the solved state
    CHECK(out.qg_bus[0] == doctest::Approx(Q[net.ref_bus] + net.buses[net.ref_bus].qd));
  }
}

TEST_CASE("fast evaluator agrees with the reference response") {
  Network net = load("case14_wind.m");
  AdmittanceSet adm = build_admittance(net);
  OperatingPoint op = make_operating_point(net, adm);
  FastResponseEvaluator fast(net, adm, op);

  std::mt19937 rng(23);
  std::normal_distribution<double> dz(0.0, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd zeta(4);
    for (int w = 0; w < 4; ++w) zeta[w] = dz(rng);
    ResponseOutcome a = agc_avr_response(net, adm, op, zeta);
    ResponseOutcome b = fast.evaluate(zeta);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK((a.state.theta - b.state.theta).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((a.state.v - b.state.v).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((a.pg_realized - b.pg_realized).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((a.qg_bus - b.qg_bus).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((a.flows - b.flows).lpNorm<Eigen::Infinity>() < 1e-6);
  }

  // a large excursion must still converge (full Newton fallback)
  Eigen::VectorXd big(4);
  big << 0.18, 0.18, 0.18, 0.18;
  ResponseOutcome out = fast.evaluate(big);
  CHECK(out.converged);
}

TEST_CASE("weighted flow hessian matches central differences") {
  Network net = load("case14.m");
  SystemState st = perturbed_state(net, 29);
  const int n = net.n_bus();
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> dw(-1.0, 1.0);
  Eigen::VectorXd y(net.n_branch());
  for (int k = 0; k < net.n_branch(); ++k) y[k] = dw(rng);
  Eigen::MatrixXd H = branch_flow_weighted_hessian(st, net, y);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const double h = 1e-6;
  for (int c = 0; c < 2 * n; ++c) {
    SystemState a = st, b = st;
    if (c < n) {
      a.theta[c] += h;
      b.theta[c] -= h;
    } else {
      a.v[c - n] += h;
      b.v[c - n] -= h;
    }
    Eigen::VectorXd col = (branch_flow_jacobian(a, net).transpose() * y -
                           branch_flow_jacobian(b, net).transpose() * y) /
                          (2 * h);
    for (int r = 0; r < 2 * n; ++r)
      CHECK(H(r, c) == doctest::Approx(col[r]).epsilon(1e-5).scale(1.0));
  }
}
