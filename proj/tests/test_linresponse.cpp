#include "doctest.h"
#include "wdropf/linresponse.hpp"

#include <algorithm>
#include <random>

using namespace wdropf;

namespace {

Network load(const char* name) {
  return parse_case_file(std::string(WDROPF_DATA_DIR) + "/" + name);
}

OperatingPoint nominal_point(const Network& net, const AdmittanceSet& adm) {
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
  ctx.v_setpoint[net.bus_index(1)] = 1.06;
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

struct Nominals {
  Eigen::VectorXd v_l, q_rs, flows;
};

Nominals nominal_quantities(const Network& net, const AdmittanceSet& adm,
                            const ResponseMatrices& rm, const OperatingPoint& op) {
  Nominals nom;
  Eigen::VectorXd P, Q;
  injections(op.state, adm, P, Q);
  Eigen::VectorXd qw = net.wind_q();
  nom.v_l.resize(rm.l_buses.size());
  for (std::size_t i = 0; i < rm.l_buses.size(); ++i) nom.v_l[i] = op.state.v[rm.l_buses[i]];
  nom.q_rs.resize(rm.rs_buses.size());
  for (std::size_t i = 0; i < rm.rs_buses.size(); ++i) {
    const int b = rm.rs_buses[i];
    nom.q_rs[i] = Q[b] + net.buses[b].qd - qw[b];
  }
  nom.flows = branch_flows(op.state, net);
  return nom;
}

}  // namespace

TEST_CASE("partition is a bijection on the stacked state") {
  Network net = load("case14_wind.m");
  Partition pt = make_partition(net);
  std::vector<int> all = pt.unknown_cols;
  all.insert(all.end(), pt.fixed_cols.begin(), pt.fixed_cols.end());
  std::sort(all.begin(), all.end());
  REQUIRE(static_cast<int>(all.size()) == 2 * net.n_bus());
  for (int i = 0; i < 2 * net.n_bus(); ++i) CHECK(all[i] == i);
  CHECK(pt.spec_rows.size() == pt.unknown_cols.size());
}

TEST_CASE("lpf with zero injections and flat setpoints is the flat state") {
  const char* text = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;
  2 2 0 0 0 0 1 1 0 0 1 1.1 0.9;
  3 1 0 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 100 -100 1.0 100 1 300 0;
  2 0 0 100 -100 1.0 100 1 300 0;
];
mpc.branch = [
  1 2 0.01 0.1 0 0 0 0 0 0 1;
  2 3 0.02 0.2 0 0 0 0 0 0 1;
];
mpc.gencost = [ 2 0 0 3 0 10 0; 2 0 0 3 0 10 0; ];
)";
  Network net = parse_case(text, CaseFormat::MatpowerM);
  AdmittanceSet adm = build_admittance(net);
  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(3);
  ctx.q = Eigen::VectorXd::Zero(3);
  ctx.v_setpoint = Eigen::VectorXd::Ones(3);
  SystemState st = lpf_solve(net, adm, ctx);
  CHECK(st.theta.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((st.v - Eigen::VectorXd::Ones(3)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("lpf solve matches a full dense linear oracle") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  const int n = net.n_bus();
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(n);
  ctx.q = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    ctx.p[i] = d(rng);
    ctx.q[i] = d(rng);
  }
  ctx.v_setpoint = Eigen::VectorXd::Ones(n);
  ctx.v_setpoint[net.ref_bus] = 1.05;
  for (int b : net.pv_buses) ctx.v_setpoint[b] = 1.03;
  ctx.theta_ref = 0.1;
  SystemState st = lpf_solve(net, adm, ctx);

  // oracle: assemble the full 2n system replacing fixed-state rows by identity
  Eigen::MatrixXd A(2 * n, 2 * n);
  A.topLeftCorner(n, n) = -adm.Bprime;
  A.topRightCorner(n, n) = adm.G;
  A.bottomLeftCorner(n, n) = -adm.G;
  A.bottomRightCorner(n, n) = -adm.B;
  Eigen::VectorXd b(2 * n);
  b << ctx.p, ctx.q;
  auto fix = [&](int col, double val) {
    A.row(col).setZero();
    A(col, col) = 1.0;
    b[col] = val;
  };
  fix(net.ref_bus, ctx.theta_ref);
  fix(n + net.ref_bus, ctx.v_setpoint[net.ref_bus]);
  for (int pv : net.pv_buses) fix(n + pv, ctx.v_setpoint[pv]);
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  CHECK((st.theta - x.head(n)).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((st.v - x.tail(n)).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("lpf voltage magnitudes land near the exact 14-bus solution") {
  Network net = load("case14.m");
  AdmittanceSet adm = build_admittance(net);
  const int n = net.n_bus();
  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(n);
  ctx.q = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    ctx.p[i] = -net.buses[i].pd;
    ctx.q[i] = -net.buses[i].qd;
  }
  ctx.p[net.bus_index(2)] += 0.40;
  ctx.v_setpoint = Eigen::VectorXd::Ones(n);
  ctx.v_setpoint[net.bus_index(1)] = 1.06;
  ctx.v_setpoint[net.bus_index(2)] = 1.045;
  ctx.v_setpoint[net.bus_index(3)] = 1.01;
  ctx.v_setpoint[net.bus_index(6)] = 1.07;
  ctx.v_setpoint[net.bus_index(8)] = 1.09;
  NewtonResult nr = solve_newton(ctx, adm, net, flat_state(net, ctx));
  REQUIRE(nr.converged);
  SystemState lin = lpf_solve(net, adm, ctx);
  for (int b : net.pq_buses) CHECK(std::abs(lin.v[b] - nr.state.v[b]) < 0.02);
}

TEST_CASE("tangent response matrices match finite differences of the exact model") {
  Network net = load("case14_wind.m");
  AdmittanceSet adm = build_admittance(net);
  OperatingPoint op = nominal_point(net, adm);
  ResponseMatrices rm = build_response(net, adm, CoefficientSource::Tangent, &op.state);

  const double h = 1e-4;
  auto fd_column = [&](const Eigen::VectorXd& alpha_gen, int w) {
    OperatingPoint o = op;
    o.alpha = alpha_gen;
    Eigen::VectorXd zp = Eigen::VectorXd::Zero(net.n_wind());
    zp[w] = h;
    ResponseOutcome a = agc_avr_response(net, adm, o, zp);
    zp[w] = -h;
    ResponseOutcome b = agc_avr_response(net, adm, o, zp);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    Eigen::VectorXd col(rm.l_buses.size() + rm.rs_buses.size() + net.n_branch());
    int r = 0;
    for (int lb : rm.l_buses) col[r++] = (a.state.v[lb] - b.state.v[lb]) / (2 * h);
    for (std::size_t i = 0; i < rm.rs_buses.size(); ++i)
      col[r++] = (a.qg_bus[i] - b.qg_bus[i]) / (2 * h);
    for (int k = 0; k < net.n_branch(); ++k) col[r++] = (a.flows[k] - b.flows[k]) / (2 * h);
    return col;
  };
  auto model_column = [&](const Eigen::VectorXd& alpha_gen, int w) {
    Eigen::VectorXd a = bus_alpha(net, alpha_gen);
    Eigen::VectorXd col(rm.l_buses.size() + rm.rs_buses.size() + net.n_branch());
    col << rm.Av * a + rm.Bv.col(w), rm.Aq * a + rm.Bq.col(w), rm.Af * a + rm.Bf.col(w);
    return col;
  };

  for (int w = 0; w < net.n_wind(); ++w) {
    // all-reference alpha isolates the B columns (A columns vanish at the slack)
    Eigen::VectorXd aref = Eigen::VectorXd::Zero(net.n_gen());
    aref[0] = 1.0;
    Eigen::VectorXd fd = fd_column(aref, w);
    Eigen::VectorXd mc = model_column(aref, w);
    for (int r = 0; r < fd.size(); ++r)
      CHECK(mc[r] == doctest::Approx(fd[r]).epsilon(1e-3).scale(1e-3));
  }
  for (int g = 1; g < net.n_gen(); ++g) {
    Eigen::VectorXd ag = Eigen::VectorXd::Zero(net.n_gen());
    ag[g] = 1.0;
    Eigen::VectorXd fd = fd_column(ag, 0);
    Eigen::VectorXd mc = model_column(ag, 0);
    for (int r = 0; r < fd.size(); ++r)
      CHECK(mc[r] == doctest::Approx(fd[r]).epsilon(1e-3).scale(1e-3));
  }
}

TEST_CASE("affine structure: linearity and exact alpha split") {
  Network net = load("case14_wind.m");
  AdmittanceSet adm = build_admittance(net);
  ResponseMatrices rm = build_response(net, adm, CoefficientSource::Lpf);
  Nominals zero;
  zero.v_l = Eigen::VectorXd::Zero(rm.l_buses.size());
  zero.q_rs = Eigen::VectorXd::Zero(rm.rs_buses.size());
  zero.flows = Eigen::VectorXd::Zero(net.n_branch());

  Eigen::VectorXd a1 = bus_alpha(net, (Eigen::VectorXd(5) << .4, .3, .1, .1, .1).finished());
  Eigen::VectorXd a2 = bus_alpha(net, (Eigen::VectorXd(5) << .2, .2, .2, .2, .2).finished());
  Eigen::VectorXd zeta(4);
  zeta << 0.05, -0.02, 0.04, 0.01;

  PredictedResponse r1 = predict_response(rm, a1, zeta, zero.v_l, zero.q_rs, zero.flows);
  PredictedResponse r2 = predict_response(rm, a1, 2 * zeta, zero.v_l, zero.q_rs, zero.flows);
  CHECK((r2.v_l - 2 * r1.v_l).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((r2.flows - 2 * r1.flows).lpNorm<Eigen::Infinity>() < 1e-14);

  PredictedResponse s1 = predict_response(rm, a1, zeta, zero.v_l, zero.q_rs, zero.flows);
  PredictedResponse s2 = predict_response(rm, a2, zeta, zero.v_l, zero.q_rs, zero.flows);
  const double omega = zeta.sum();
  Eigen::VectorXd diff = omega * (rm.Aq * (a1 - a2));
  CHECK((s1.q_rs - s2.q_rs - diff).lpNorm<Eigen::Infinity>() < 1e-14);

  // zero total error concentrated on PQ buses leaves only the B term
  Eigen::VectorXd z0(4);
  z0 << 0.03, -0.03, 0.0, 0.0;
  PredictedResponse p1 = predict_response(rm, a1, z0, zero.v_l, zero.q_rs, zero.flows);
  PredictedResponse p2 = predict_response(rm, a2, z0, zero.v_l, zero.q_rs, zero.flows);
  CHECK((p1.v_l - p2.v_l).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("prediction error is second order in the disturbance") {
  Network net = load("case14_wind.m");
  AdmittanceSet adm = build_admittance(net);
  OperatingPoint op = nominal_point(net, adm);
  ResponseMatrices rm = build_response(net, adm, CoefficientSource::Tangent, &op.state);
  Nominals nom = nominal_quantities(net, adm, rm, op);
  Eigen::VectorXd a = bus_alpha(net, op.alpha);

  std::mt19937 rng(41);
  std::normal_distribution<double> dz(0.0, 0.08);
  int in_range = 0, total = 0;
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::VectorXd zeta(4);
    for (int w = 0; w < 4; ++w) zeta[w] = dz(rng);
    auto err = [&](const Eigen::VectorXd& z) {
      ResponseOutcome ex = agc_avr_response(net, adm, op, z);
      REQUIRE(ex.converged);
      PredictedResponse pr = predict_response(rm, a, z, nom.v_l, nom.q_rs, nom.flows);
      double e = 0;
      for (std::size_t i = 0; i < rm.l_buses.size(); ++i)
        e = std::max(e, std::abs(pr.v_l[i] - ex.state.v[rm.l_buses[i]]));
      return e;
    };
    const double e1 = err(zeta), e2 = err(zeta / 2);
    if (e1 < 1e-12) continue;
    const double ratio = e1 / std::max(e2, 1e-300);
    ++total;
    if (ratio > 3.0 && ratio < 5.0) ++in_range;
  }
  CHECK(in_range >= total - 1);  // allow one off-ratio direction
  CHECK(total >= 4);
}
