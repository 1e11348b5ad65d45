#include "wdropf/simlab.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <thread>

#include "json.hpp"
#include "wdropf/acgrid.hpp"
#include "wdropf/linresponse.hpp"

namespace wdropf {

namespace {

using json = nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBoundTol = 1e-7;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double laplace_inv(double u, double b) {
  const double c = u - 0.5;
  return -b * std::copysign(std::log(1.0 - 2.0 * std::abs(c)), c);
}

// equal-weight mixture of N(-m, sd^2) and N(+m, sd^2)
double mixture_cdf(double x, double m, double sd) {
  return 0.5 * (normal_cdf((x - m) / sd) + normal_cdf((x + m) / sd));
}

double mixture_inv(double u, double m, double sd) {
  double lo = -m - 10 * sd, hi = m + 10 * sd;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(mid, m, sd) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
  if (name == "laplace") return Distribution::Laplace;
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "mixture") return Distribution::Mixture;
  throw parse_error("unknown distribution: " + name);
}

const char* distribution_name(Distribution d) {
  switch (d) {
    case Distribution::Laplace: return "laplace";
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Mixture: return "mixture";
  }
  return "?";
}

RngProtocol protocol_from_json(const std::string& text) {
  json j = json::parse(text);
  RngProtocol p;
  p.distribution = parse_distribution(j.value("distribution", "laplace"));
  p.scale_fraction = j.value("scale_fraction", 0.10);
  p.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("correlation") && !j["correlation"].is_null()) {
    const auto& rows = j["correlation"];
    const int n = static_cast<int>(rows.size());
    p.correlation.resize(n, n);
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(rows[r].size()) != n)
        throw parse_error("correlation matrix must be square");
      for (int c = 0; c < n; ++c) p.correlation(r, c) = rows[r][c].get<double>();
    }
  }
  if (!(p.scale_fraction >= 0.0)) throw validation_error("scale_fraction must be >= 0");
  return p;
}

std::string protocol_to_json(const RngProtocol& p) {
  json j;
  j["distribution"] = distribution_name(p.distribution);
  j["scale_fraction"] = p.scale_fraction;
  j["seed"] = p.seed;
  if (p.correlation.size()) {
    json rows = json::array();
    for (int r = 0; r < p.correlation.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < p.correlation.cols(); ++c) row.push_back(p.correlation(r, c));
      rows.push_back(row);
    }
    j["correlation"] = rows;
  }
  return j.dump(2);
}

VectorXd sample_trial(const RngProtocol& p, const Network& net, std::uint64_t trial) {
  const int nw = net.n_wind();
  std::mt19937_64 eng(splitmix64(p.seed ^ splitmix64(trial + 0x51AB1ull)));
  std::uniform_real_distribution<double> u01(1e-12, 1.0 - 1e-12);

  const bool correlated = p.correlation.size() > 0;
  VectorXd u(nw);
  if (correlated) {
    if (p.correlation.rows() != nw)
      throw validation_error("correlation dimension does not match the farm count");
    VectorXd z(nw);
    for (int w = 0; w < nw; ++w) z[w] = inverse_normal_cdf(u01(eng));
    Eigen::LLT<MatrixXd> llt(p.correlation);
    if (llt.info() != Eigen::Success)
      throw validation_error("correlation matrix is not positive definite");
    z = llt.matrixL() * z;
    for (int w = 0; w < nw; ++w) u[w] = normal_cdf(z[w]);
  } else {
    for (int w = 0; w < nw; ++w) u[w] = u01(eng);
  }

  VectorXd zeta(nw);
  for (int w = 0; w < nw; ++w) {
    const WindFarm& f = net.wind_farms[w];
    const double scale = p.scale_fraction * f.capacity;
    double e = 0.0;
    switch (p.distribution) {
      case Distribution::Laplace:
        e = laplace_inv(u[w], scale);
        break;
      case Distribution::Gaussian:
        e = scale * inverse_normal_cdf(u[w]);
        break;
      case Distribution::Mixture:
        if (correlated) {
          e = mixture_inv(u[w], scale, 0.5 * scale);
        } else {
          const double sgn = u01(eng) < 0.5 ? -1.0 : 1.0;
          e = sgn * scale + 0.5 * scale * inverse_normal_cdf(u[w]);
        }
        break;
    }
    zeta[w] = std::min(std::max(e, -f.forecast), f.capacity - f.forecast);
  }
  return zeta;
}

MatrixXd generate_samples(const RngProtocol& p, const Network& net, int n) {
  if (n < 1) throw validation_error("need at least one sample");
  MatrixXd z(n, net.n_wind());
  for (int i = 0; i < n; ++i) z.row(i) = sample_trial(p, net, i).transpose();
  return z;
}

ResponseModel parse_model(const std::string& name) {
  if (name == "full-ac") return ResponseModel::FullAc;
  if (name == "approx") return ResponseModel::Approx;
  if (name == "lpf") return ResponseModel::Lpf;
  if (name == "dc") return ResponseModel::Dc;
  throw parse_error("unknown response model: " + name);
}

const char* model_name(ResponseModel m) {
  switch (m) {
    case ResponseModel::FullAc: return "full-ac";
    case ResponseModel::Approx: return "approx";
    case ResponseModel::Lpf: return "lpf";
    case ResponseModel::Dc: return "dc";
  }
  return "?";
}

struct StrategyEvaluator::Impl {
  const Network& net;
  OperatingStrategy s;
  ResponseModel model;

  AdmittanceSet adm;
  VectorXd pd, qd, wp, wq;
  std::vector<int> rs;         // reference first, then PV buses
  std::vector<int> ref_units;  // online generators at the reference bus
  double fixed_cost = 0.0;     // reserve procurement, constant per trial

  // full-ac
  std::unique_ptr<FastResponseEvaluator> fast;
  // approx / lpf: partitioned linear solves, factorized once
  Partition part;
  MatrixXd J;  // tangent Jacobian (approx) at the nominal state
  Eigen::PartialPivLU<MatrixXd> lu_tan;
  VectorXd P0, Q0;  // exact injections at the nominal state
  VectorXd f0;      // exact branch flows at the nominal state
  MatrixXd Jf;      // flow gradient rows at the nominal state
  MatrixXd Phi;     // constant linear model (lpf)
  Eigen::PartialPivLU<MatrixXd> lu_lpf;
  MatrixXd H_lpf;  // spec rows x fixed cols
  VectorXd fixed_state;
  // dc
  MatrixXd Blin;
  std::vector<int> keep;
  Eigen::PartialPivLU<MatrixXd> lu_dc;

  Impl(const Network& n_, const OperatingStrategy& s_, ResponseModel m_)
      : net(n_), s(s_), model(m_) {}

  double gen_cost(const VectorXd& pg) const {
    double c = fixed_cost;
    for (int g = 0; g < net.n_gen(); ++g) {
      const Generator& gen = net.generators[g];
      if (!gen.online) continue;
      c += gen.c2 * pg[g] * pg[g] + gen.c1 * pg[g] + gen.c0;
    }
    return c;
  }

  void wind_disturbance(const VectorXd& zeta, VectorXd& zp, VectorXd& zq) const {
    zp = VectorXd::Zero(net.n_bus());
    zq = VectorXd::Zero(net.n_bus());
    for (int w = 0; w < net.n_wind(); ++w) {
      const WindFarm& f = net.wind_farms[w];
      zp[f.bus] += zeta[w];
      zq[f.bus] += f.sigma() * zeta[w];
    }
  }

  VectorXd base_response(double omega) const {
    VectorXd pg(net.n_gen());
    for (int g = 0; g < net.n_gen(); ++g)
      pg[g] = net.generators[g].online ? s.pg[g] - omega * s.alpha[g] : 0.0;
    return pg;
  }

  void absorb_residual(VectorXd& pg, double needed) const {
    double base = 0.0, asum = 0.0;
    for (int g : ref_units) {
      base += pg[g];
      asum += s.alpha[g];
    }
    const double residual = needed - base;
    for (int g : ref_units) {
      const double share = asum > 0 ? s.alpha[g] / asum : 1.0 / ref_units.size();
      pg[g] += residual * share;
    }
  }
};

StrategyEvaluator::StrategyEvaluator(const Network& net, const OperatingStrategy& s,
                                     ResponseModel model)
    : impl_(std::make_unique<Impl>(net, s, model)) {
  Impl& im = *impl_;
  const int nb = net.n_bus();
  im.pd.resize(nb);
  im.qd.resize(nb);
  for (int i = 0; i < nb; ++i) {
    im.pd[i] = net.buses[i].pd;
    im.qd[i] = net.buses[i].qd;
  }
  im.wp = net.wind_p();
  im.wq = net.wind_q();
  im.rs.push_back(net.ref_bus);
  for (int b : net.pv_buses) im.rs.push_back(b);
  for (int g : net.gens_at_bus(net.ref_bus))
    if (net.generators[g].online) im.ref_units.push_back(g);
  for (int g = 0; g < net.n_gen(); ++g) {
    const Generator& gen = net.generators[g];
    if (gen.online) im.fixed_cost += gen.cr_up * s.r_up[g] + gen.cr_dn * s.r_dn[g];
  }

  if (model == ResponseModel::Dc) {
    DcResponse dcr = build_dc_response(net);
    im.Blin = dcr.Blin;
    for (int i = 0; i < nb; ++i)
      if (i != net.ref_bus) im.keep.push_back(i);
    const int nr = static_cast<int>(im.keep.size());
    MatrixXd Bred(nr, nr);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nr; ++j) Bred(i, j) = dcr.Bdc(im.keep[i], im.keep[j]);
    im.lu_dc.compute(Bred);
    return;
  }

  im.adm = build_admittance(net);
  im.part = make_partition(net);
  SystemState st0{s.theta, s.v};

  if (model == ResponseModel::FullAc) {
    OperatingPoint op{st0, s.pg, s.qg, s.alpha};
    im.fast = std::make_unique<FastResponseEvaluator>(net, im.adm, op);
    return;
  }

  auto sub = [](const MatrixXd& A, const std::vector<int>& rows, const std::vector<int>& cols) {
    MatrixXd S(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) S(r, c) = A(rows[r], cols[c]);
    return S;
  };

  if (model == ResponseModel::Approx) {
    im.J = injection_jacobian(st0, im.adm);
    im.lu_tan.compute(sub(im.J, im.part.spec_rows, im.part.unknown_cols));
    injections(st0, im.adm, im.P0, im.Q0);
    im.f0 = branch_flows(st0, net);
    im.Jf = branch_flow_jacobian(st0, net);
  } else {  // Lpf
    im.Phi = lpf_matrix(net, im.adm);
    im.lu_lpf.compute(sub(im.Phi, im.part.spec_rows, im.part.unknown_cols));
    im.H_lpf = sub(im.Phi, im.part.spec_rows, im.part.fixed_cols);
    im.fixed_state.resize(im.part.fixed_cols.size());
    im.fixed_state[0] = s.theta[net.ref_bus];
    im.fixed_state[1] = s.v[net.ref_bus];
    for (std::size_t r = 0; r < im.part.S.size(); ++r)
      im.fixed_state[2 + r] = s.v[im.part.S[r]];
  }
}

StrategyEvaluator::~StrategyEvaluator() = default;
StrategyEvaluator::StrategyEvaluator(StrategyEvaluator&&) noexcept = default;

const std::vector<int>& StrategyEvaluator::rs_buses() const { return impl_->rs; }

StrategyEvaluator::Trial StrategyEvaluator::trial(const VectorXd& zeta) const {
  const Impl& im = *impl_;
  const Network& net = im.net;
  const int nb = net.n_bus();
  const double omega = zeta.sum();
  Trial t;
  t.pg = im.base_response(omega);

  if (im.model == ResponseModel::FullAc) {
    ResponseOutcome out = im.fast->evaluate(zeta);
    if (!out.converged) return t;
    t.converged = true;
    t.v = out.state.v;
    t.qg_bus = out.qg_bus;
    t.flows = out.flows;
    t.pg = out.pg_realized;
    t.cost = im.gen_cost(t.pg);
    return t;
  }

  VectorXd zp, zq;
  im.wind_disturbance(zeta, zp, zq);

  if (im.model == ResponseModel::Dc) {
    VectorXd pinj = VectorXd::Zero(nb);
    for (int g = 0; g < net.n_gen(); ++g)
      if (net.generators[g].online) pinj[net.generators[g].bus] += t.pg[g];
    pinj -= im.pd;
    pinj += im.wp + zp;
    const int nr = static_cast<int>(im.keep.size());
    VectorXd rhs(nr);
    for (int i = 0; i < nr; ++i) rhs[i] = pinj[im.keep[i]];
    VectorXd th_red = im.lu_dc.solve(rhs);
    VectorXd th = VectorXd::Zero(nb);
    for (int i = 0; i < nr; ++i) th[im.keep[i]] = th_red[i];
    t.converged = true;
    t.v = VectorXd::Ones(nb);
    t.qg_bus = VectorXd::Zero(im.rs.size());
    t.flows = im.Blin * th;
    t.cost = im.gen_cost(t.pg);
    return t;
  }

  SystemState st;
  VectorXd P, Q;
  if (im.model == ResponseModel::Approx) {
    // incremental tangent solve around the exact nominal state
    const auto& pt = im.part;
    VectorXd dspec(pt.spec_rows.size());
    VectorXd abus = bus_alpha(net, im.s.alpha);
    for (std::size_t r = 0; r < pt.spec_rows.size(); ++r) {
      const int row = pt.spec_rows[r];
      dspec[r] = row < nb ? -omega * abus[row] + zp[row] : zq[row - nb];
    }
    VectorXd du = im.lu_tan.solve(dspec);
    VectorXd dx = VectorXd::Zero(2 * nb);
    for (std::size_t c = 0; c < pt.unknown_cols.size(); ++c) dx[pt.unknown_cols[c]] = du[c];
    st.theta = im.s.theta + dx.head(nb);
    st.v = im.s.v + dx.tail(nb);
    P = im.P0 + im.J.topRows(nb) * dx;
    Q = im.Q0 + im.J.bottomRows(nb) * dx;
  } else {  // Lpf: absolute linear-model solve
    const auto& pt = im.part;
    VectorXd pinj = VectorXd::Zero(nb), qinj = VectorXd::Zero(nb);
    for (int g = 0; g < net.n_gen(); ++g) {
      const Generator& gen = net.generators[g];
      if (!gen.online) continue;
      pinj[gen.bus] += t.pg[g];
      qinj[gen.bus] += im.s.qg[g];
    }
    pinj += -im.pd + im.wp + zp;
    qinj += -im.qd + im.wq + zq;
    VectorXd inj(pt.spec_rows.size());
    for (std::size_t r = 0; r < pt.spec_rows.size(); ++r) {
      const int row = pt.spec_rows[r];
      inj[r] = row < nb ? pinj[row] : qinj[row - nb];
    }
    VectorXd u = im.lu_lpf.solve(inj - im.H_lpf * im.fixed_state);
    st.theta = VectorXd::Zero(nb);
    st.v = VectorXd::Zero(nb);
    for (std::size_t c = 0; c < pt.fixed_cols.size(); ++c) {
      const int col = pt.fixed_cols[c];
      (col < nb ? st.theta[col] : st.v[col - nb]) = im.fixed_state[c];
    }
    for (std::size_t c = 0; c < pt.unknown_cols.size(); ++c) {
      const int col = pt.unknown_cols[c];
      (col < nb ? st.theta[col] : st.v[col - nb]) = u[c];
    }
    VectorXd x(2 * nb);
    x << st.theta, st.v;
    P = im.Phi.topRows(nb) * x;
    Q = im.Phi.bottomRows(nb) * x;
  }

  t.converged = true;
  t.v = st.v;
  t.qg_bus.resize(im.rs.size());
  for (std::size_t k = 0; k < im.rs.size(); ++k) {
    const int b = im.rs[k];
    t.qg_bus[k] = Q[b] + im.qd[b] - im.wq[b] - zq[b];
  }
  const int rb = net.ref_bus;
  im.absorb_residual(t.pg, P[rb] + im.pd[rb] - im.wp[rb] - zp[rb]);
  if (im.model == ResponseModel::Approx) {
    VectorXd dz(2 * nb);
    dz.head(nb) = st.theta - im.s.theta;
    dz.tail(nb) = st.v - im.s.v;
    t.flows = im.f0 + im.Jf * dz;
  } else {
    t.flows = im.adm.Bl * st.theta - im.adm.Gl * st.v;
  }
  t.cost = im.gen_cost(t.pg);
  return t;
}

namespace {

/// Constraint bookkeeping shared by the evaluation drivers.
struct ConstraintSet {
  std::vector<std::string> keys;
  std::vector<int> gens;          // reserve constraints, per online generator
  std::vector<int> volt_buses;    // load buses
  std::vector<int> q_slots;       // indices into qg_bus
  std::vector<double> q_lo, q_hi; // aggregated generator bounds per slot
  std::vector<int> flow_branches; // rated branches

  ConstraintSet(const Network& net, const std::vector<int>& rs) {
    for (int g = 0; g < net.n_gen(); ++g)
      if (net.generators[g].online) {
        gens.push_back(g);
        keys.push_back("reserve:" + std::to_string(g));
      }
    Partition pt = make_partition(net);
    for (int b : pt.L) {
      volt_buses.push_back(b);
      keys.push_back("voltage:" + std::to_string(b));
    }
    for (std::size_t k = 0; k < rs.size(); ++k) {
      double lo = 0.0, hi = 0.0;
      bool any = false;
      for (int g : net.gens_at_bus(rs[k]))
        if (net.generators[g].online) {
          lo += net.generators[g].qmin;
          hi += net.generators[g].qmax;
          any = true;
        }
      if (!any) continue;
      q_slots.push_back(static_cast<int>(k));
      q_lo.push_back(lo);
      q_hi.push_back(hi);
      keys.push_back("qgen:" + std::to_string(rs[k]));
    }
    for (int k = 0; k < net.n_branch(); ++k)
      if (net.branches[k].online && net.branches[k].rate > 0) {
        flow_branches.push_back(k);
        keys.push_back("flow:" + std::to_string(k));
      }
  }

  int size() const { return static_cast<int>(keys.size()); }

  /// Marks violated constraints; returns via the flags vector (sized size()).
  void check(const Network& net, const OperatingStrategy& s, double omega,
             const StrategyEvaluator::Trial& t, std::vector<char>& violated) const {
    int c = 0;
    for (int g : gens) {
      const double dev = -omega * s.alpha[g];  // deployed regulation
      violated[c++] = dev > s.r_up[g] + kBoundTol || -dev > s.r_dn[g] + kBoundTol;
    }
    for (int b : volt_buses)
      violated[c++] =
          t.v[b] < net.buses[b].vmin - kBoundTol || t.v[b] > net.buses[b].vmax + kBoundTol;
    for (std::size_t i = 0; i < q_slots.size(); ++i) {
      const double q = t.qg_bus[q_slots[i]];
      violated[c++] = q < q_lo[i] - kBoundTol || q > q_hi[i] + kBoundTol;
    }
    for (int k : flow_branches)
      violated[c++] = std::abs(t.flows[k]) > net.branches[k].rate + kBoundTol;
  }
};

struct ChunkStats {
  std::vector<long> satisfied;
  long converged = 0;
  long failed = 0;
  double cost_sum = 0.0, cost_comp = 0.0;  // Kahan accumulators
  double sq_sum = 0.0, sq_comp = 0.0;
  std::vector<long> hist;

  void add_cost(double c) {
    double y = c - cost_comp;
    double t = cost_sum + y;
    cost_comp = (t - cost_sum) - y;
    cost_sum = t;
    y = c * c - sq_comp;
    t = sq_sum + y;
    sq_comp = (t - sq_sum) - y;
    sq_sum = t;
  }
};

EvaluationReport run_evaluation(const Network& net, const OperatingStrategy& s,
                                ResponseModel model, long n,
                                const std::function<VectorXd(long)>& draw, int jobs) {
  if (n < 1) throw validation_error("need at least one trial");
  jobs = std::max(1, jobs);
  std::vector<int> rs{net.ref_bus};
  for (int b : net.pv_buses) rs.push_back(b);
  ConstraintSet cs(net, rs);

  // reserve-deployment histogram over the physical omega range
  double w_lo = 0.0, w_hi = 0.0;
  for (const auto& f : net.wind_farms) {
    w_lo -= f.capacity - f.forecast;  // deployment -omega
    w_hi += f.forecast;
  }
  if (w_hi <= w_lo) w_hi = w_lo + 1.0;
  const int nbins = 64;

  const long chunk = (n + jobs - 1) / jobs;
  std::vector<ChunkStats> stats(jobs);
  auto work = [&](int j) {
    const long lo = j * chunk, hi = std::min<long>(n, lo + chunk);
    ChunkStats& st = stats[j];
    st.satisfied.assign(cs.size(), 0);
    st.hist.assign(nbins, 0);
    if (lo >= hi) return;
    StrategyEvaluator ev(net, s, model);
    std::vector<char> violated(cs.size());
    for (long i = lo; i < hi; ++i) {
      VectorXd zeta = draw(i);
      StrategyEvaluator::Trial t = ev.trial(zeta);
      if (!t.converged) {
        ++st.failed;
        continue;
      }
      ++st.converged;
      st.add_cost(t.cost);
      const double omega = zeta.sum();
      cs.check(net, s, omega, t, violated);
      for (int c = 0; c < cs.size(); ++c)
        if (!violated[c]) ++st.satisfied[c];
      const double use = -omega;
      int bin = static_cast<int>((use - w_lo) / (w_hi - w_lo) * nbins);
      st.hist[std::min(nbins - 1, std::max(0, bin))]++;
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(work, j);
    for (auto& t : threads) t.join();
  }

  EvaluationReport rep;
  std::vector<long> sat(cs.size(), 0);
  std::vector<long> hist(nbins, 0);
  long conv = 0;
  double cost = 0.0, comp = 0.0, sq = 0.0, sq_comp = 0.0;
  for (const auto& st : stats) {
    conv += st.converged;
    rep.failed_trials += st.failed;
    double y = st.cost_sum - comp;
    double t = cost + y;
    comp = (t - cost) - y;
    cost = t;
    y = st.sq_sum - sq_comp;
    t = sq + y;
    sq_comp = (t - sq) - y;
    sq = t;
    for (int c = 0; c < cs.size(); ++c) sat[c] += st.satisfied[c];
    for (int b = 0; b < nbins; ++b) hist[b] += st.hist[b];
  }
  rep.n_trials = n;
  rep.mean_cost = conv > 0 ? cost / conv : 0.0;
  if (conv > 1) {
    const double ss = sq - cost * cost / conv;  // centered sum of squares
    rep.cost_stddev = std::sqrt(std::max(0.0, ss) / (conv - 1));
  }
  rep.lowest_reliability = 1.0;
  for (int c = 0; c < cs.size(); ++c) {
    const double r = conv > 0 ? static_cast<double>(sat[c]) / conv : 0.0;
    rep.reliability[cs.keys[c]] = r;
    rep.lowest_reliability = std::min(rep.lowest_reliability, r);
  }
  rep.reserve_use_edges.resize(nbins + 1);
  for (int b = 0; b <= nbins; ++b)
    rep.reserve_use_edges[b] = w_lo + (w_hi - w_lo) * b / nbins;
  rep.reserve_use_counts = hist;
  return rep;
}

}  // namespace

EvaluationReport evaluate_strategy(const Network& net, const OperatingStrategy& s,
                                   const MatrixXd& zeta, ResponseModel model, int jobs) {
  return run_evaluation(net, s, model, zeta.rows(),
                        [&](long i) { return VectorXd(zeta.row(i).transpose()); }, jobs);
}

EvaluationReport evaluate_protocol(const Network& net, const OperatingStrategy& s,
                                   const RngProtocol& p, long n_mc, ResponseModel model,
                                   int jobs) {
  return run_evaluation(net, s, model, n_mc,
                        [&](long i) { return sample_trial(p, net, i); }, jobs);
}

double EvaluationReport::cost_se() const {
  const long conv = n_trials - failed_trials;
  return conv > 0 ? cost_stddev / std::sqrt(static_cast<double>(conv)) : 0.0;
}

double EvaluationReport::reliability_se(double p) const {
  const long conv = n_trials - failed_trials;
  return conv > 0 ? std::sqrt(p * (1.0 - p) / conv) : 0.0;
}

std::string report_to_json(const EvaluationReport& r) {
  json j;
  j["n_trials"] = r.n_trials;
  j["failed_trials"] = r.failed_trials;
  j["mean_cost"] = r.mean_cost;
  j["cost_stddev"] = r.cost_stddev;
  j["lowest_reliability"] = r.lowest_reliability;
  j["reliability"] = json::object();
  for (const auto& [k, v] : r.reliability) j["reliability"][k] = v;
  j["reserve_use_edges"] = r.reserve_use_edges;
  j["reserve_use_counts"] = r.reserve_use_counts;
  return j.dump(2);
}

std::vector<AccuracyRow> model_accuracy(const Network& net, const OperatingStrategy& s,
                                        const std::vector<double>& total_errors) {
  StrategyEvaluator ac(net, s, ResponseModel::FullAc);
  StrategyEvaluator approx(net, s, ResponseModel::Approx);
  StrategyEvaluator lpf(net, s, ResponseModel::Lpf);
  StrategyEvaluator dc(net, s, ResponseModel::Dc);

  double cap = 0.0;
  for (const auto& f : net.wind_farms) cap += f.capacity;
  if (cap <= 0) throw validation_error("model accuracy sweep needs wind farms");

  std::vector<AccuracyRow> rows;
  for (double e : total_errors) {
    VectorXd zeta(net.n_wind());
    for (int w = 0; w < net.n_wind(); ++w)
      zeta[w] = e * net.wind_farms[w].capacity / cap;
    auto ta = ac.trial(zeta);
    auto tx = approx.trial(zeta);
    auto tl = lpf.trial(zeta);
    auto td = dc.trial(zeta);
    if (!ta.converged) throw validation_error("full-AC response diverged in accuracy sweep");
    AccuracyRow r;
    r.total_error = e;
    r.cost_ac = ta.cost;
    r.cost_approx = tx.cost;
    r.cost_lpf = tl.cost;
    r.v_ac = ta.v;
    r.v_approx = tx.v;
    r.v_lpf = tl.v;
    r.q_ac = ta.qg_bus;
    r.q_approx = tx.qg_bus;
    r.q_lpf = tl.qg_bus;
    r.f_ac = ta.flows;
    r.f_approx = tx.flows;
    r.f_dc = td.flows;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string accuracy_to_csv(const std::vector<AccuracyRow>& rows, const Network& net) {
  std::string out =
      "total_error,cost_ac,cost_approx,cost_approx_err_pct,cost_lpf,cost_lpf_err_pct,"
      "max_v_err_approx,max_v_err_lpf,max_q_err_approx,max_q_err_lpf,"
      "max_f_err_approx,max_f_err_dc\n";
  char buf[320];
  for (const auto& r : rows) {
    const double ca = 100.0 * std::abs(r.cost_approx - r.cost_ac) / std::abs(r.cost_ac);
    const double cl = 100.0 * std::abs(r.cost_lpf - r.cost_ac) / std::abs(r.cost_ac);
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%.4f,%.6f,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.total_error, r.cost_ac, r.cost_approx, ca, r.cost_lpf, cl,
                  (r.v_approx - r.v_ac).lpNorm<Eigen::Infinity>(),
                  (r.v_lpf - r.v_ac).lpNorm<Eigen::Infinity>(),
                  (r.q_approx - r.q_ac).lpNorm<Eigen::Infinity>(),
                  (r.q_lpf - r.q_ac).lpNorm<Eigen::Infinity>(),
                  (r.f_approx - r.f_ac).lpNorm<Eigen::Infinity>(),
                  (r.f_dc - r.f_ac).lpNorm<Eigen::Infinity>());
    out += buf;
  }
  return out;
}

}  // namespace wdropf
