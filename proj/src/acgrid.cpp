#include "wdropf/acgrid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wdropf {

void injections(const SystemState& state, const AdmittanceSet& adm,
                Eigen::VectorXd& P, Eigen::VectorXd& Q) {
  const int n = static_cast<int>(state.v.size());
  P.resize(n);
  Q.resize(n);
  for (int i = 0; i < n; ++i) {
    double pi = 0.0, qi = 0.0;
    for (int j = 0; j < n; ++j) {
      const double gij = adm.G(i, j), bij = adm.B(i, j);
      if (gij == 0.0 && bij == 0.0) continue;
      const double u = state.theta[i] - state.theta[j];
      const double w = state.v[i] * state.v[j];
      const double cu = std::cos(u), su = std::sin(u);
      pi += w * (gij * cu + bij * su);
      qi += w * (-bij * cu + gij * su);
    }
    P[i] = pi;
    Q[i] = qi;
  }
}

Eigen::MatrixXd injection_jacobian(const SystemState& state, const AdmittanceSet& adm) {
  const int n = static_cast<int>(state.v.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  // rows [0,n): P, rows [n,2n): Q; cols [0,n): theta, cols [n,2n): v
  for (int i = 0; i < n; ++i) {
    double dP_dti = 0, dP_dvi = 2.0 * state.v[i] * adm.G(i, i);
    double dQ_dti = 0, dQ_dvi = -2.0 * state.v[i] * adm.B(i, i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double gij = adm.G(i, j), bij = adm.B(i, j);
      if (gij == 0.0 && bij == 0.0) continue;
      const double u = state.theta[i] - state.theta[j];
      const double cu = std::cos(u), su = std::sin(u);
      const double a = gij * cu + bij * su;   // d(P_i)/d(v_j) / v_i
      const double c = gij * su - bij * cu;   // d(Q_i)/d(v_j) / v_i
      J(i, j) = state.v[i] * state.v[j] * c;          // dP_i/dth_j
      J(i, n + j) = state.v[i] * a;                   // dP_i/dv_j
      J(n + i, j) = -state.v[i] * state.v[j] * a;     // dQ_i/dth_j
      J(n + i, n + j) = state.v[i] * c;               // dQ_i/dv_j
      dP_dti += -state.v[i] * state.v[j] * c;
      dP_dvi += state.v[j] * a;
      dQ_dti += state.v[i] * state.v[j] * a;
      dQ_dvi += state.v[j] * c;
    }
    J(i, i) = dP_dti;
    J(i, n + i) = dP_dvi;
    J(n + i, i) = dQ_dti;
    J(n + i, n + i) = dQ_dvi;
  }
  return J;
}

Eigen::MatrixXd injection_weighted_hessian(const SystemState& state, const AdmittanceSet& adm,
                                           const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  const int n = static_cast<int>(state.v.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    H(n + i, n + i) += 2.0 * (y[i] * adm.G(i, i) - z[i] * adm.B(i, i));
    for (int j = i + 1; j < n; ++j) {
      const double gij = adm.G(i, j), bij = adm.B(i, j);
      if (gij == 0.0 && bij == 0.0) continue;
      const double u = state.theta[i] - state.theta[j];
      const double cu = std::cos(u), su = std::sin(u);
      // pair term v_i v_j f(u); f is a pure sinusoid so f'' = -f
      const double f = (y[i] + y[j]) * gij * cu + (y[i] - y[j]) * bij * su +
                       (z[i] - z[j]) * gij * su - (z[i] + z[j]) * bij * cu;
      const double fp = -(y[i] + y[j]) * gij * su + (y[i] - y[j]) * bij * cu +
                        (z[i] - z[j]) * gij * cu + (z[i] + z[j]) * bij * su;
      const double vi = state.v[i], vj = state.v[j];
      H(i, i) += -vi * vj * f;
      H(j, j) += -vi * vj * f;
      H(i, j) += vi * vj * f;
      H(j, i) += vi * vj * f;
      H(n + i, n + j) += f;
      H(n + j, n + i) += f;
      H(i, n + i) += vj * fp;
      H(n + i, i) += vj * fp;
      H(i, n + j) += vi * fp;
      H(n + j, i) += vi * fp;
      H(j, n + i) += -vj * fp;
      H(n + i, j) += -vj * fp;
      H(j, n + j) += -vi * fp;
      H(n + j, j) += -vi * fp;
    }
  }
  return H;
}

Eigen::VectorXd branch_flows(const SystemState& state, const Network& net) {
  const int nl = net.n_branch();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(nl);
  for (int k = 0; k < nl; ++k) {
    const auto& br = net.branches[k];
    if (!br.online) continue;
    const double denom = br.r * br.r + br.x * br.x;
    const double g = br.r / denom, b = -br.x / denom;
    const double t = br.tap;
    const int i = br.from, j = br.to;
    const double u = state.theta[i] - state.theta[j];
    f[k] = state.v[i] * state.v[i] * g / (t * t) -
           (state.v[i] * state.v[j] / t) * (g * std::cos(u) + b * std::sin(u));
  }
  return f;
}

Eigen::MatrixXd branch_flow_jacobian(const SystemState& state, const Network& net) {
  const int nl = net.n_branch();
  const int n = net.n_bus();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nl, 2 * n);
  for (int k = 0; k < nl; ++k) {
    const auto& br = net.branches[k];
    if (!br.online) continue;
    const double denom = br.r * br.r + br.x * br.x;
    const double g = br.r / denom, b = -br.x / denom;
    const double t = br.tap;
    const int i = br.from, j = br.to;
    const double u = state.theta[i] - state.theta[j];
    const double cu = std::cos(u), su = std::sin(u);
    const double vi = state.v[i], vj = state.v[j];
    const double dth = (vi * vj / t) * (g * su - b * cu);
    J(k, i) = dth;
    J(k, j) = -dth;
    J(k, n + i) = 2.0 * vi * g / (t * t) - (vj / t) * (g * cu + b * su);
    J(k, n + j) = -(vi / t) * (g * cu + b * su);
  }
  return J;
}

Eigen::MatrixXd branch_flow_weighted_hessian(const SystemState& state, const Network& net,
                                             const Eigen::VectorXd& y) {
  const int n = net.n_bus();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k < net.n_branch(); ++k) {
    const auto& br = net.branches[k];
    if (!br.online || y[k] == 0.0) continue;
    const double denom = br.r * br.r + br.x * br.x;
    const double g = br.r / denom, b = -br.x / denom;
    const double t = br.tap;
    const int i = br.from, j = br.to;
    const double u = state.theta[i] - state.theta[j];
    // f = v_i^2 g/t^2 - (v_i v_j / t) phi(u), phi = g cos u + b sin u
    const double phi = g * std::cos(u) + b * std::sin(u);
    const double phip = -g * std::sin(u) + b * std::cos(u);
    const double vi = state.v[i], vj = state.v[j];
    const double w = y[k];
    H(i, i) += w * (vi * vj / t) * phi;
    H(j, j) += w * (vi * vj / t) * phi;
    H(i, j) += -w * (vi * vj / t) * phi;
    H(j, i) += -w * (vi * vj / t) * phi;
    H(n + i, n + i) += w * 2.0 * g / (t * t);
    H(n + i, n + j) += -w * phi / t;
    H(n + j, n + i) += -w * phi / t;
    H(i, n + i) += -w * (vj / t) * phip;
    H(n + i, i) += -w * (vj / t) * phip;
    H(i, n + j) += -w * (vi / t) * phip;
    H(n + j, i) += -w * (vi / t) * phip;
    H(j, n + i) += w * (vj / t) * phip;
    H(n + i, j) += w * (vj / t) * phip;
    H(j, n + j) += w * (vi / t) * phip;
    H(n + j, j) += w * (vi / t) * phip;
  }
  return H;
}

SystemState flat_state(const Network& net, const DispatchContext& ctx) {
  SystemState st;
  st.theta = Eigen::VectorXd::Constant(net.n_bus(), ctx.theta_ref);
  st.v = Eigen::VectorXd::Ones(net.n_bus());
  st.v[net.ref_bus] = ctx.v_setpoint[net.ref_bus];
  for (int b : net.pv_buses) st.v[b] = ctx.v_setpoint[b];
  return st;
}

NewtonResult solve_newton(const DispatchContext& ctx, const AdmittanceSet& adm,
                          const Network& net, const SystemState& init,
                          const NewtonOptions& opt) {
  const int n = net.n_bus();
  NewtonResult res;
  res.state = init;
  res.state.theta[net.ref_bus] = ctx.theta_ref;
  res.state.v[net.ref_bus] = ctx.v_setpoint[net.ref_bus];
  for (int b : net.pv_buses) res.state.v[b] = ctx.v_setpoint[b];

  std::vector<int> th_idx, v_idx;  // buses with free angle / magnitude
  for (int i = 0; i < n; ++i)
    if (i != net.ref_bus) th_idx.push_back(i);
  v_idx = net.pq_buses;
  const int m = static_cast<int>(th_idx.size() + v_idx.size());

  Eigen::VectorXd P, Q, rhs(m);
  for (int it = 0; it < opt.max_iter; ++it) {
    injections(res.state, adm, P, Q);
    int r = 0;
    for (int i : th_idx) rhs[r++] = ctx.p[i] - P[i];
    for (int i : v_idx) rhs[r++] = ctx.q[i] - Q[i];
    res.mismatch = rhs.lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (res.mismatch < opt.tol) {
      res.converged = true;
      return res;
    }
    Eigen::MatrixXd Jfull = injection_jacobian(res.state, adm);
    Eigen::MatrixXd J(m, m);
    for (int a = 0; a < static_cast<int>(th_idx.size()); ++a) {
      for (int bb = 0; bb < static_cast<int>(th_idx.size()); ++bb)
        J(a, bb) = Jfull(th_idx[a], th_idx[bb]);
      for (int bb = 0; bb < static_cast<int>(v_idx.size()); ++bb)
        J(a, th_idx.size() + bb) = Jfull(th_idx[a], n + v_idx[bb]);
    }
    for (int a = 0; a < static_cast<int>(v_idx.size()); ++a) {
      for (int bb = 0; bb < static_cast<int>(th_idx.size()); ++bb)
        J(th_idx.size() + a, bb) = Jfull(n + v_idx[a], th_idx[bb]);
      for (int bb = 0; bb < static_cast<int>(v_idx.size()); ++bb)
        J(th_idx.size() + a, th_idx.size() + bb) = Jfull(n + v_idx[a], n + v_idx[bb]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < 1e-12)
      throw std::runtime_error("power flow Jacobian is singular");
    Eigen::VectorXd dx = lu.solve(rhs);
    int c = 0;
    for (int i : th_idx) res.state.theta[i] += dx[c++];
    for (int i : v_idx) res.state.v[i] += dx[c++];
  }
  // record final mismatch for diagnostics
  injections(res.state, adm, P, Q);
  int r = 0;
  for (int i : th_idx) rhs[r++] = ctx.p[i] - P[i];
  for (int i : v_idx) rhs[r++] = ctx.q[i] - Q[i];
  res.mismatch = rhs.lpNorm<Eigen::Infinity>();
  res.converged = res.mismatch < opt.tol;
  return res;
}

namespace {

// Per-farm perturbed wind injections aggregated to buses.
void perturbed_wind(const Network& net, const Eigen::VectorXd& zeta,
                    Eigen::VectorXd& pw, Eigen::VectorXd& qw) {
  pw = Eigen::VectorXd::Zero(net.n_bus());
  qw = Eigen::VectorXd::Zero(net.n_bus());
  for (int w = 0; w < net.n_wind(); ++w) {
    const auto& wf = net.wind_farms[w];
    const double p = wf.forecast + zeta[w];
    pw[wf.bus] += p;
    qw[wf.bus] += p * wf.sigma();
  }
}

DispatchContext response_context(const Network& net, const OperatingPoint& op,
                                 const Eigen::VectorXd& zeta) {
  const int n = net.n_bus();
  const double omega = zeta.sum();
  Eigen::VectorXd pw, qw;
  perturbed_wind(net, zeta, pw, qw);
  DispatchContext ctx;
  ctx.p = Eigen::VectorXd::Zero(n);
  ctx.q = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    ctx.p[i] = pw[i] - net.buses[i].pd;
    ctx.q[i] = qw[i] - net.buses[i].qd;
  }
  for (int g = 0; g < net.n_gen(); ++g) {
    if (!net.generators[g].online) continue;
    ctx.p[net.generators[g].bus] += op.pg[g] - omega * op.alpha[g];
  }
  ctx.v_setpoint = op.state.v;
  ctx.theta_ref = op.state.theta[net.ref_bus];
  return ctx;
}

ResponseOutcome finalize_response(const Network& net, const AdmittanceSet& adm,
                                  const OperatingPoint& op, const Eigen::VectorXd& zeta,
                                  const SystemState& st) {
  const double omega = zeta.sum();
  ResponseOutcome out;
  out.converged = true;
  out.state = st;
  Eigen::VectorXd P, Q;
  injections(st, adm, P, Q);
  Eigen::VectorXd pw, qw;
  perturbed_wind(net, zeta, pw, qw);

  out.pg_realized.resize(net.n_gen());
  for (int g = 0; g < net.n_gen(); ++g)
    out.pg_realized[g] = net.generators[g].online ? op.pg[g] - omega * op.alpha[g] : 0.0;
  // reference bus units absorb the residual (loss change); distribute by alpha
  auto ref_units = net.gens_at_bus(net.ref_bus);
  if (!ref_units.empty()) {
    const int rb = net.ref_bus;
    double needed = P[rb] + net.buses[rb].pd - pw[rb];
    double base = 0.0, asum = 0.0;
    for (int g : ref_units) {
      base += out.pg_realized[g];
      asum += op.alpha[g];
    }
    const double residual = needed - base;
    for (int g : ref_units) {
      const double share = asum > 0 ? op.alpha[g] / asum : 1.0 / ref_units.size();
      out.pg_realized[g] += residual * share;
    }
  }

  // bus reactive injections from generators at [ref, PV...] in that order
  const int nrs = 1 + static_cast<int>(net.pv_buses.size());
  out.qg_bus.resize(nrs);
  out.qg_bus[0] = Q[net.ref_bus] + net.buses[net.ref_bus].qd - qw[net.ref_bus];
  for (int k = 0; k < static_cast<int>(net.pv_buses.size()); ++k) {
    const int b = net.pv_buses[k];
    out.qg_bus[1 + k] = Q[b] + net.buses[b].qd - qw[b];
  }
  out.flows = branch_flows(st, net);
  return out;
}

}  // namespace

ResponseOutcome agc_avr_response(const Network& net, const AdmittanceSet& adm,
                                 const OperatingPoint& op, const Eigen::VectorXd& zeta,
                                 const NewtonOptions& opt) {
  DispatchContext ctx = response_context(net, op, zeta);
  NewtonResult nr = solve_newton(ctx, adm, net, op.state, opt);
  if (!nr.converged) {
    ResponseOutcome out;
    out.converged = false;
    return out;
  }
  return finalize_response(net, adm, op, zeta, nr.state);
}

FastResponseEvaluator::FastResponseEvaluator(const Network& net, const AdmittanceSet& adm,
                                             const OperatingPoint& op)
    : net_(net), adm_(adm), op_(op) {
  const int n = net.n_bus();
  nominal_ctx_ = response_context(net, op, Eigen::VectorXd::Zero(net.n_wind()));
  for (int i = 0; i < n; ++i)
    if (i != net.ref_bus) unknown_theta_.push_back(i);
  unknown_v_ = net.pq_buses;

  // factorize the nominal-state Jacobian once
  Eigen::MatrixXd Jfull = injection_jacobian(op.state, adm);
  const int nt = static_cast<int>(unknown_theta_.size());
  const int nv = static_cast<int>(unknown_v_.size());
  const int m = nt + nv;
  std::vector<Eigen::Triplet<double>> trip;
  auto row_of = [&](int r) { return r < nt ? unknown_theta_[r] : n + unknown_v_[r - nt]; };
  for (int r = 0; r < m; ++r) {
    const int fr = r < nt ? unknown_theta_[r] : n + unknown_v_[r - nt];
    (void)row_of;
    for (int c = 0; c < m; ++c) {
      const int fc = c < nt ? unknown_theta_[c] : n + unknown_v_[c - nt];
      const double val = Jfull(fr, fc);
      if (val != 0.0) trip.emplace_back(r, c, val);
    }
  }
  Eigen::SparseMatrix<double> Js(m, m);
  Js.setFromTriplets(trip.begin(), trip.end());
  lu_.compute(Js);
  if (lu_.info() != Eigen::Success)
    throw std::runtime_error("nominal Jacobian factorization failed");

  // sparse injection evaluation data from the admittance nonzero pattern
  gdiag_ = adm.G.diagonal();
  bdiag_ = adm.B.diagonal();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (adm.G(i, j) != 0.0 || adm.B(i, j) != 0.0)
        edges_.push_back({i, j, adm.G(i, j), adm.B(i, j)});
}

void FastResponseEvaluator::sparse_injections(const SystemState& st, Eigen::VectorXd& P,
                                              Eigen::VectorXd& Q) const {
  const int n = net_.n_bus();
  P.resize(n);
  Q.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v2 = st.v[i] * st.v[i];
    P[i] = v2 * gdiag_[i];
    Q[i] = -v2 * bdiag_[i];
  }
  for (const auto& e : edges_) {
    const double u = st.theta[e.i] - st.theta[e.j];
    const double w = st.v[e.i] * st.v[e.j];
    const double cu = std::cos(u), su = std::sin(u);
    P[e.i] += w * (e.gij * cu + e.bij * su);
    P[e.j] += w * (e.gij * cu - e.bij * su);
    Q[e.i] += w * (e.gij * su - e.bij * cu);
    Q[e.j] += w * (-e.gij * su - e.bij * cu);
  }
}

ResponseOutcome FastResponseEvaluator::evaluate(const Eigen::VectorXd& zeta) const {
  const double omega = zeta.sum();
  const int nt = static_cast<int>(unknown_theta_.size());
  const int nv = static_cast<int>(unknown_v_.size());
  const int m = nt + nv;

  // injection targets: nominal context plus the trial perturbation
  Eigen::VectorXd p = nominal_ctx_.p, q = nominal_ctx_.q;
  for (int w = 0; w < net_.n_wind(); ++w) {
    const auto& wf = net_.wind_farms[w];
    p[wf.bus] += zeta[w];
    q[wf.bus] += zeta[w] * wf.sigma();
  }
  for (int g = 0; g < net_.n_gen(); ++g)
    if (net_.generators[g].online)
      p[net_.generators[g].bus] -= omega * op_.alpha[g];

  SystemState st = op_.state;  // warm start at the nominal point
  Eigen::VectorXd P, Q, rhs(m), dx;
  double prev = std::numeric_limits<double>::infinity();
  const double tol = 1e-8;
  bool ok = false;
  for (int it = 0; it < 40; ++it) {
    sparse_injections(st, P, Q);
    for (int r = 0; r < nt; ++r) rhs[r] = p[unknown_theta_[r]] - P[unknown_theta_[r]];
    for (int r = 0; r < nv; ++r) rhs[nt + r] = q[unknown_v_[r]] - Q[unknown_v_[r]];
    const double mis = rhs.lpNorm<Eigen::Infinity>();
    if (mis < tol) {
      ok = true;
      break;
    }
    if (it > 3 && mis > 0.9 * prev) break;  // chord iteration stalling
    prev = mis;
    dx = lu_.solve(rhs);
    for (int r = 0; r < nt; ++r) st.theta[unknown_theta_[r]] += dx[r];
    for (int r = 0; r < nv; ++r) st.v[unknown_v_[r]] += dx[nt + r];
  }
  if (!ok) {
    // full Newton fallback (rare: large disturbances)
    DispatchContext ctx = nominal_ctx_;
    ctx.p = p;
    ctx.q = q;
    NewtonResult nr = solve_newton(ctx, adm_, net_, st);
    if (!nr.converged) {
      ResponseOutcome out;
      out.converged = false;
      return out;
    }
    st = nr.state;
  }
  return finalize_response(net_, adm_, op_, zeta, st);
}

}  // namespace wdropf
