#include "wdropf/opfcore.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "json.hpp"
#include "wdropf/acgrid.hpp"
#include "wdropf/linresponse.hpp"

namespace wdropf {

namespace {

using json = nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kDegenerateTol = 1e-9;
constexpr double kViolationTol = 1e-6;
// tiny convex tie-break on the participation factors: keeps the dispatch
// well-posed when the uncertainty (and with it the alpha curvature) vanishes
constexpr double kAlphaReg = 1e-6;

struct Layout {
  int nb = 0, ng = 0, nx = 0;
  int th(int i) const { return i; }
  int vm(int i) const { return nb + i; }
  int pg(int g) const { return 2 * nb + g; }
  int qg(int g) const { return 2 * nb + ng + g; }
  int al(int g) const { return 2 * nb + 2 * ng + g; }
  int ru(int g) const { return 2 * nb + 3 * ng + g; }
  int rd(int g) const { return 2 * nb + 4 * ng + g; }
  int lam() const { return 2 * nb + 5 * ng; }
};

struct LinTerm {
  int var;
  double coeff;
};

struct LinRow {
  std::vector<LinTerm> terms;
  double cnst = 0.0;
};

double row_value(const LinRow& r, const VectorXd& x) {
  double v = r.cnst;
  for (const auto& t : r.terms) v += t.coeff * x[t.var];
  return v;
}

/// Scale a row to unit leading coefficient; keeps the interior-point merit
/// function and duals well conditioned.
LinRow normalized(LinRow r) {
  double big = 0.0;
  for (const auto& t : r.terms) big = std::max(big, std::abs(t.coeff));
  if (big > 1.0) {
    for (auto& t : r.terms) t.coeff /= big;
    r.cnst /= big;
  }
  return r;
}

/// One monitored quantity with its affine response to (omega, zeta).
struct Candidate {
  QuantityKey key;
  std::vector<LinTerm> nom_terms;  // nominal value as a linear expression
  double nom_cnst = 0.0;
  double lo = 0.0, hi = 0.0;
  VectorXd gen_coeff;  // per generator: response-row entry at the unit's bus
  // vertex methods (wdro / ro / dc):
  std::vector<VertexConstraint> vcs;
  std::vector<char> added;
  // moment methods (mdro / gsp):
  Eigen::Vector2d mu2 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2 = Eigen::Matrix2d::Zero();
};

struct Model {
  const Network* net = nullptr;
  Layout L;
  Method method = Method::Deterministic;
  bool ac = true;          // AC balance equations (vs DC)
  bool wdro_cost = false;  // lambda objective term + derivative rows

  std::shared_ptr<AdmittanceSet> adm;
  MatrixXd Bdc;                       // DC balance matrix when !ac
  std::vector<LinRow> lin_eqs;        // pins, theta_ref, sum alpha
  std::vector<LinRow> rows;           // linear inequalities
  double eps_omega = 0.0;
  double m1 = 0.0, m2 = 0.0;          // moments of the omega samples
  double omega_lo = 0.0, omega_hi = 0.0;

  std::vector<char> active;           // per generator: online & participating cost
  VectorXd pd, qd, wp, wq;

  int n_eq() const { return (ac ? 2 * L.nb : L.nb) + (int)lin_eqs.size(); }
  int n_in() const { return (int)rows.size() + (wdro_cost ? 2 : 0); }
};

void add_box(Model& m, int var, double lo, double hi) {
  if (std::isfinite(lo)) m.rows.push_back({{{var, 1.0}}, -lo});
  if (std::isfinite(hi)) m.rows.push_back({{{var, -1.0}}, hi});
}

void add_pin(Model& m, int var, double value) {
  m.lin_eqs.push_back({{{var, 1.0}}, -value});
}

Nlp make_nlp(const std::shared_ptr<Model>& mp) {
  const Model& m = *mp;
  const Layout L = m.L;
  const Network& net = *m.net;
  const int nb = L.nb, ng = L.ng;

  Nlp nlp;
  nlp.nx = L.nx;
  nlp.n_eq = m.n_eq();
  nlp.n_in = m.n_in();

  // generator cost vectors (inactive units contribute nothing)
  VectorXd c2(ng), c1(ng), c0(ng), cru(ng), crd(ng);
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    const bool on = m.active[g];
    c2[g] = on ? gen.c2 : 0.0;
    c1[g] = on ? gen.c1 : 0.0;
    c0[g] = on ? gen.c0 : 0.0;
    cru[g] = on ? gen.cr_up : 0.0;
    crd[g] = on ? gen.cr_dn : 0.0;
  }
  const double m1 = m.m1, m2 = m.m2, eps = m.wdro_cost ? m.eps_omega : 0.0;
  const double wlo = m.omega_lo, whi = m.omega_hi;

  // scale the two lambda-derivative rows to O(1) coefficients; per-unit cost
  // coefficients reach 1e3-1e4 and otherwise wreck the merit function
  double lrs = 1.0;
  if (m.wdro_cost) {
    double big = 1.0;
    const double wmax = std::max({1.0, std::abs(wlo), std::abs(whi)});
    for (int g = 0; g < ng; ++g)
      big = std::max(big, std::abs(c1[g]) + 2.0 * c2[g] * (1.0 + 2.0 * wmax));
    lrs = 1.0 / big;
  }

  nlp.f = [mp, c2, c1, c0, cru, crd, m1, m2, eps, L](const VectorXd& x) {
    double f = eps * x[L.lam()];
    for (int g = 0; g < L.ng; ++g) {
      const double p = x[L.pg(g)], a = x[L.al(g)];
      f += c2[g] * (m2 * a * a - 2 * m1 * p * a + p * p) + c1[g] * (p - m1 * a) + c0[g];
      f += kAlphaReg * a * a;
      f += cru[g] * x[L.ru(g)] + crd[g] * x[L.rd(g)];
    }
    return f;
  };

  nlp.grad = [c2, c1, cru, crd, m1, m2, eps, L](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(L.nx);
    g[L.lam()] = eps;
    for (int i = 0; i < L.ng; ++i) {
      const double p = x[L.pg(i)], a = x[L.al(i)];
      g[L.pg(i)] = 2 * c2[i] * (p - m1 * a) + c1[i];
      g[L.al(i)] = 2 * c2[i] * (m2 * a - m1 * p) - c1[i] * m1 + 2 * kAlphaReg * a;
      g[L.ru(i)] = cru[i];
      g[L.rd(i)] = crd[i];
    }
    return g;
  };

  nlp.eval_eq = [mp](const VectorXd& x, VectorXd& ce, MatrixXd& je) {
    const Model& m = *mp;
    const Layout L = m.L;
    const Network& net = *m.net;
    const int nb = L.nb;
    je.setZero();
    int base;
    if (m.ac) {
      SystemState st{x.head(nb), x.segment(nb, nb)};
      VectorXd P, Q;
      injections(st, *m.adm, P, Q);
      je.topLeftCorner(2 * nb, 2 * nb) = injection_jacobian(st, *m.adm);
      for (int i = 0; i < nb; ++i) {
        ce[i] = P[i] + m.pd[i] - m.wp[i];
        ce[nb + i] = Q[i] + m.qd[i] - m.wq[i];
      }
      for (int g = 0; g < L.ng; ++g) {
        const int b = net.generators[g].bus;
        ce[b] -= x[L.pg(g)];
        je(b, L.pg(g)) = -1.0;
        ce[nb + b] -= x[L.qg(g)];
        je(nb + b, L.qg(g)) = -1.0;
      }
      base = 2 * nb;
    } else {
      for (int i = 0; i < nb; ++i) {
        double s = m.pd[i] - m.wp[i];
        for (int j = 0; j < nb; ++j) {
          s += m.Bdc(i, j) * x[j];
          je(i, j) = m.Bdc(i, j);
        }
        ce[i] = s;
      }
      for (int g = 0; g < L.ng; ++g) {
        const int b = net.generators[g].bus;
        ce[b] -= x[L.pg(g)];
        je(b, L.pg(g)) = -1.0;
      }
      base = nb;
    }
    for (int r = 0; r < (int)m.lin_eqs.size(); ++r) {
      ce[base + r] = row_value(m.lin_eqs[r], x);
      for (const auto& t : m.lin_eqs[r].terms) je(base + r, t.var) = t.coeff;
    }
  };

  nlp.eval_in = [mp, c2, c1, wlo, whi, lrs](const VectorXd& x, VectorXd& ci, MatrixXd& ji) {
    const Model& m = *mp;
    const Layout L = m.L;
    ji.setZero();
    const int nr = (int)m.rows.size();
    for (int r = 0; r < nr; ++r) {
      ci[r] = row_value(m.rows[r], x);
      for (const auto& t : m.rows[r].terms) ji(r, t.var) = t.coeff;
    }
    if (m.wdro_cost) {
      // lambda >= eta'(omega_hi) and lambda >= -eta'(omega_lo), where
      // eta'(w) = 2 (sum c2 a^2) w - sum(2 c2 p a + c1 a)
      double sa2 = 0.0, s1 = 0.0;
      for (int g = 0; g < L.ng; ++g) {
        const double p = x[L.pg(g)], a = x[L.al(g)];
        sa2 += c2[g] * a * a;
        s1 += 2 * c2[g] * p * a + c1[g] * a;
      }
      ci[nr] = lrs * (x[L.lam()] - 2 * whi * sa2 + s1);
      ci[nr + 1] = lrs * (x[L.lam()] + 2 * wlo * sa2 - s1);
      ji(nr, L.lam()) = lrs;
      ji(nr + 1, L.lam()) = lrs;
      for (int g = 0; g < L.ng; ++g) {
        const double p = x[L.pg(g)], a = x[L.al(g)];
        ji(nr, L.al(g)) = lrs * (-4 * whi * c2[g] * a + 2 * c2[g] * p + c1[g]);
        ji(nr, L.pg(g)) = lrs * 2 * c2[g] * a;
        ji(nr + 1, L.al(g)) = lrs * (4 * wlo * c2[g] * a - 2 * c2[g] * p - c1[g]);
        ji(nr + 1, L.pg(g)) = -lrs * 2 * c2[g] * a;
      }
    }
  };

  nlp.hess = [mp, c2, m1, m2, wlo, whi, lrs](const VectorXd& x, const VectorXd& y,
                                        const VectorXd& w) {
    const Model& m = *mp;
    const Layout L = m.L;
    const int nb = L.nb;
    MatrixXd H = MatrixXd::Zero(L.nx, L.nx);
    for (int g = 0; g < L.ng; ++g) {
      H(L.pg(g), L.pg(g)) += 2 * c2[g];
      H(L.al(g), L.al(g)) += 2 * c2[g] * m2 + 2 * kAlphaReg;
      H(L.pg(g), L.al(g)) -= 2 * c2[g] * m1;
      H(L.al(g), L.pg(g)) -= 2 * c2[g] * m1;
    }
    if (m.ac) {
      SystemState st{x.head(nb), x.segment(nb, nb)};
      H.topLeftCorner(2 * nb, 2 * nb) -=
          injection_weighted_hessian(st, *m.adm, y.head(nb), y.segment(nb, nb));
    }
    if (m.wdro_cost) {
      const int nr = (int)m.rows.size();
      const double w1 = lrs * w[nr], w2 = lrs * w[nr + 1];
      for (int g = 0; g < L.ng; ++g) {
        // rows are quadratic in (p, a); subtract w * row Hessian
        H(L.al(g), L.al(g)) -= w1 * (-4 * whi * c2[g]) + w2 * (4 * wlo * c2[g]);
        const double cross = w1 * (2 * c2[g]) + w2 * (-2 * c2[g]);
        H(L.pg(g), L.al(g)) -= cross;
        H(L.al(g), L.pg(g)) -= cross;
      }
    }
    return H;
  };
  return nlp;
}

std::shared_ptr<Model> base_model(const Network& net, Method method,
                                  bool degenerate_omega = false) {
  auto mp = std::make_shared<Model>();
  Model& m = *mp;
  m.net = &net;
  m.method = method;
  m.ac = method != Method::Dc;
  // with a point-mass aggregate deviation the worst-case cost term collapses
  // to the sample average and the lambda machinery only destabilizes the solve
  m.wdro_cost = method == Method::Wdro && !degenerate_omega;
  const int nb = net.n_bus(), ng = net.n_gen();
  m.L.nb = nb;
  m.L.ng = ng;
  m.L.nx = 2 * nb + 5 * ng + 1;
  const Layout& L = m.L;

  if (m.ac) m.adm = std::make_shared<AdmittanceSet>(build_admittance(net));

  m.pd.resize(nb);
  m.qd.resize(nb);
  for (int i = 0; i < nb; ++i) {
    m.pd[i] = net.buses[i].pd;
    m.qd[i] = net.buses[i].qd;
  }
  m.wp = net.wind_p();
  m.wq = net.wind_q();

  m.active.resize(ng);
  for (int g = 0; g < ng; ++g) m.active[g] = net.generators[g].online;

  // reference angle
  add_pin(m, L.th(net.ref_bus), 0.0);

  const bool det = method == Method::Deterministic;
  std::vector<int> regulating;  // units with participation headroom
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    if (!m.active[g]) {
      add_pin(m, L.pg(g), 0.0);
      add_pin(m, L.qg(g), 0.0);
      add_pin(m, L.al(g), 0.0);
      add_pin(m, L.ru(g), 0.0);
      add_pin(m, L.rd(g), 0.0);
      continue;
    }
    const bool degenerate = gen.pmax - gen.pmin <= kDegenerateTol;
    if (degenerate)
      add_pin(m, L.al(g), 0.0);
    else
      regulating.push_back(g);
  }
  const int nreg = (int)regulating.size();
  if (nreg == 0) throw validation_error("no regulating generators");

  if (det) {
    for (int g : regulating) add_pin(m, L.al(g), 1.0 / nreg);
    for (int g = 0; g < ng; ++g) {
      if (!m.active[g]) continue;
      add_pin(m, L.ru(g), 0.0);
      add_pin(m, L.rd(g), 0.0);
    }
  } else {
    LinRow sum_alpha;
    for (int g : regulating) sum_alpha.terms.push_back({L.al(g), 1.0});
    sum_alpha.cnst = -1.0;
    m.lin_eqs.push_back(sum_alpha);
  }
  if (!m.wdro_cost) add_pin(m, L.lam(), 0.0);

  if (!m.ac) {
    for (int i = 0; i < nb; ++i) add_pin(m, L.vm(i), 1.0);
    for (int g = 0; g < ng; ++g)
      if (m.active[g]) add_pin(m, L.qg(g), 0.0);
    DcResponse dcr = build_dc_response(net);
    m.Bdc = dcr.Bdc;
  }

  // boxes
  if (m.ac)
    for (int i = 0; i < nb; ++i) add_box(m, L.vm(i), net.buses[i].vmin, net.buses[i].vmax);
  for (int g = 0; g < ng; ++g) {
    if (!m.active[g]) continue;
    const Generator& gen = net.generators[g];
    // pmin <= pg - r_dn, pg + r_up <= pmax
    m.rows.push_back({{{L.pg(g), 1.0}, {L.rd(g), -1.0}}, -gen.pmin});
    m.rows.push_back({{{L.pg(g), -1.0}, {L.ru(g), -1.0}}, gen.pmax});
    if (m.ac) add_box(m, L.qg(g), gen.qmin, gen.qmax);
    add_box(m, L.al(g), 0.0, std::numeric_limits<double>::infinity());
    add_box(m, L.ru(g), 0.0, std::numeric_limits<double>::infinity());
    add_box(m, L.rd(g), 0.0, std::numeric_limits<double>::infinity());
  }
  if (m.wdro_cost) add_box(m, L.lam(), 0.0, std::numeric_limits<double>::infinity());
  return mp;
}

/// Nominal flow expression of branch k as a linear row (LPF map for the AC
/// modes, theta-only susceptance for DC).
LinRow flow_expr(const Model& m, const MatrixXd& Bl, const MatrixXd& Gl, int k) {
  const Layout& L = m.L;
  LinRow r;
  for (int i = 0; i < L.nb; ++i) {
    const double bt = Bl(k, i);
    if (bt != 0.0) r.terms.push_back({L.th(i), bt});
    if (m.ac && Gl(k, i) != 0.0) r.terms.push_back({L.vm(i), -Gl(k, i)});
  }
  return r;
}

/// Rating rows |flow_k| <= rate at the nominal point for every rated branch.
void add_flow_limit_rows(Model& m, const MatrixXd& Bl, const MatrixXd& Gl) {
  const Network& net = *m.net;
  for (int k = 0; k < net.n_branch(); ++k) {
    const auto& br = net.branches[k];
    if (!br.online || br.rate <= 0.0) continue;
    LinRow fe = flow_expr(m, Bl, Gl, k);
    LinRow up = fe, dn = fe;
    for (auto& t : up.terms) t.coeff = -t.coeff;
    up.cnst = br.rate;
    dn.cnst = br.rate;
    m.rows.push_back(normalized(up));
    m.rows.push_back(normalized(dn));
  }
}

VectorXd gen_coeff_from_bus_row(const Network& net, const Eigen::RowVectorXd& a_bus) {
  VectorXd g = VectorXd::Zero(net.n_gen());
  for (int i = 0; i < net.n_gen(); ++i) g[i] = a_bus[net.generators[i].bus];
  return g;
}

void append_vertex_rows(Model& m, const Candidate& c, const VertexConstraint& vc) {
  const Layout& L = m.L;
  // lo <= nom + omega_v * (gen_coeff . alpha) + t <= hi
  LinRow up, dn;
  for (const auto& t : c.nom_terms) {
    up.terms.push_back({t.var, -t.coeff});
    dn.terms.push_back({t.var, t.coeff});
  }
  for (int g = 0; g < L.ng; ++g) {
    if (c.gen_coeff[g] == 0.0) continue;
    up.terms.push_back({L.al(g), -vc.omega * c.gen_coeff[g]});
    dn.terms.push_back({L.al(g), vc.omega * c.gen_coeff[g]});
  }
  up.cnst = vc.hi - c.nom_cnst - vc.t;
  dn.cnst = c.nom_cnst + vc.t - vc.lo;
  m.rows.push_back(normalized(up));
  m.rows.push_back(normalized(dn));
}

double vertex_violation(const Model& m, const Candidate& c, const VertexConstraint& vc,
                        const VectorXd& x) {
  const Layout& L = m.L;
  double sa = 0.0;
  for (int g = 0; g < L.ng; ++g) sa += c.gen_coeff[g] * x[L.al(g)];
  double val = c.nom_cnst + vc.t + vc.omega * sa;
  for (const auto& t : c.nom_terms) val += t.coeff * x[t.var];
  return std::max(val - vc.hi, vc.lo - val);
}

/// Tangent cut of the moment margin at the current point; returns the number
/// of rows appended.
int moment_cut(Model& m, const Candidate& c, double k, const VectorXd& x) {
  const Layout& L = m.L;
  double sa = 0.0;
  for (int g = 0; g < L.ng; ++g) sa += c.gen_coeff[g] * x[L.al(g)];
  double nom = c.nom_cnst;
  for (const auto& t : c.nom_terms) nom += t.coeff * x[t.var];
  Eigen::Vector2d cv(sa, 1.0);
  const Eigen::Vector2d sc = c.cov2 * cv;
  const double stdv = std::sqrt(std::max(cv.dot(sc), 1e-16));
  const double mean_term = cv.dot(c.mu2);
  const double grad_sa = sc[0] / stdv;  // d std / d sa
  int added = 0;
  const double up_viol = nom + mean_term + k * stdv - c.hi;
  const double dn_viol = c.lo - (nom + mean_term - k * stdv);
  // cut: nom + sa*mu0 + mu1 +/- k*(std0 + grad*(sa - sa0)) within [lo, hi]
  auto make_cut = [&](double sgn) {
    // sgn=+1 enforces the hi side, -1 the lo side
    LinRow r;
    const double coef_sa = c.mu2[0] + sgn * k * grad_sa;
    for (const auto& t : c.nom_terms) r.terms.push_back({t.var, -sgn * t.coeff});
    for (int g = 0; g < L.ng; ++g)
      if (c.gen_coeff[g] != 0.0) r.terms.push_back({L.al(g), -sgn * coef_sa * c.gen_coeff[g]});
    const double margin_cnst = c.mu2[1] + sgn * k * (stdv - grad_sa * sa);
    r.cnst = sgn > 0 ? (c.hi - c.nom_cnst - margin_cnst)
                     : (-c.lo + c.nom_cnst + margin_cnst);
    m.rows.push_back(normalized(r));
    ++added;
  };
  if (up_viol > kViolationTol) make_cut(+1.0);
  if (dn_viol > kViolationTol) make_cut(-1.0);
  return added;
}

VectorXd initial_det_point(const Network& net, const Model& m) {
  const Layout& L = m.L;
  VectorXd x = VectorXd::Zero(L.nx);
  for (int i = 0; i < L.nb; ++i) x[L.vm(i)] = 1.0;
  int nreg = 0;
  for (int g = 0; g < L.ng; ++g)
    if (m.active[g] && net.generators[g].pmax - net.generators[g].pmin > kDegenerateTol)
      ++nreg;
  for (int g = 0; g < L.ng; ++g) {
    if (!m.active[g]) continue;
    const Generator& gen = net.generators[g];
    x[L.pg(g)] = 0.5 * (gen.pmin + gen.pmax);
    x[L.qg(g)] = 0.5 * (gen.qmin + gen.qmax);
    if (gen.pmax - gen.pmin > kDegenerateTol) x[L.al(g)] = 1.0 / nreg;
  }
  return x;
}

OperatingStrategy extract_strategy(const Model& m, const VectorXd& x) {
  const Layout& L = m.L;
  OperatingStrategy s;
  s.theta = x.head(L.nb);
  s.v = x.segment(L.nb, L.nb);
  s.pg.resize(L.ng);
  s.qg.resize(L.ng);
  s.alpha.resize(L.ng);
  s.r_up.resize(L.ng);
  s.r_dn.resize(L.ng);
  for (int g = 0; g < L.ng; ++g) {
    s.pg[g] = x[L.pg(g)];
    s.qg[g] = x[L.qg(g)];
    s.alpha[g] = std::max(0.0, x[L.al(g)]);
    s.r_up[g] = std::max(0.0, x[L.ru(g)]);
    s.r_dn[g] = std::max(0.0, x[L.rd(g)]);
  }
  s.lambda = x[L.lam()];
  return s;
}

struct IpmRun {
  IpmResult res;
  bool usable = false;
};

IpmRun run_ipm(const std::shared_ptr<Model>& mp, VectorXd& x, double mu_init, bool verbose) {
  Nlp nlp = make_nlp(mp);
  IpmOptions opt;
  opt.mu_init = mu_init;
  opt.verbose = verbose;
  IpmRun run;
  run.res = solve_ipm(nlp, x, opt);
  // accept near-converged iterates that still meet the reporting tolerances
  run.usable = run.res.status == IpmStatus::Converged ||
               (run.res.status == IpmStatus::MaxIterations && run.res.kkt < 1e-6 &&
                run.res.feas < 1e-7);
  if (run.usable) x = run.res.x;
  return run;
}

}  // namespace

SolveOutcome solve_deterministic(const Network& net, bool verbose) {
  SolveOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  auto mp = base_model(net, Method::Deterministic);
  add_flow_limit_rows(*mp, mp->adm->Bl, mp->adm->Gl);
  VectorXd x = initial_det_point(net, *mp);
  IpmRun run = run_ipm(mp, x, 1e-1, verbose);
  out.report.ipm_iterations = run.res.iterations;
  out.report.kkt = run.res.kkt;
  out.report.feasibility = run.res.feas;
  out.report.rounds = 1;
  if (!run.usable) {
    out.status = run.res.status == IpmStatus::Infeasible ? SolveStatus::Infeasible
                                                         : SolveStatus::SolverFailure;
    out.report.status = out.status;
    return out;
  }
  out.status = SolveStatus::Optimal;
  out.strategy = extract_strategy(*mp, x);
  CostAggregate agg = cost_coeffs(net, out.strategy.pg, out.strategy.alpha,
                                  out.strategy.r_up, out.strategy.r_dn);
  const double cost = eta(agg, 0.0);
  out.report.objective = {cost, cost, cost, cost};
  out.report.status = out.status;
  out.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SolveOutcome solve_with_enforcement(const Network& net, const Eigen::MatrixXd& zeta,
                                    const SolveConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  if (cfg.method == Method::Deterministic) return solve_deterministic(net, cfg.verbose);

  SolveOutcome out;
  auto fail = [&](SolveStatus st, const std::string& msg) {
    out.status = st;
    out.report.status = st;
    out.report.log.push_back(msg);
    out.report.seconds = elapsed();
    return out;
  };

  if (zeta.cols() != net.n_wind())
    throw validation_error("sample dimension does not match wind farm count");
  if (zeta.rows() < 2) throw validation_error("need at least 2 samples");

  // 1. deterministic warm start
  SolveOutcome det = solve_deterministic(net, false);
  if (det.status != SolveStatus::Optimal)
    return fail(det.status, "deterministic warm-start solve failed");
  out.report.log.push_back("warm start: deterministic cost " +
                           std::to_string(det.report.objective.nominal));

  // 2. scalar omega machinery (cost + reserves)
  const MatrixXd omega_m = project_total(zeta);
  SampleSet ss_w = make_sample_set(omega_m);
  AmbiguitySpec amb_w = make_ambiguity(ss_w, cfg.beta, cfg.sigma_max);
  const double sc_w = amb_w.support.sqrt_cov(0, 0);
  const double mu_w = ss_w.mean[0];
  const double sup_lo = mu_w - cfg.sigma_max * sc_w, sup_hi = mu_w + cfg.sigma_max * sc_w;
  OmegaSamples os = make_omega_samples(omega_m.col(0), sup_lo, sup_hi,
                                       cfg.method == Method::Wdro ? amb_w.epsilon : 0.0);

  SigmaCache cache;
  const std::string cache_path =
      cfg.cache_dir.empty() ? std::string() : cfg.cache_dir + "/sigma.json";
  if (!cache_path.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.cache_dir, ec);
    cache.load(cache_path);
  }
  const std::uint64_t zhash = fnv1a(std::string(
      reinterpret_cast<const char*>(zeta.data()), sizeof(double) * zeta.size()));

  auto sized_cube = [&](const std::string& key, const VectorXd& d,
                        double eps) -> HypercubeResult {
    if (!cache_path.empty()) {
      auto hit = cache.lookup(key, eps, cfg.rho, zhash);
      if (hit) {
        ++out.report.cache_hits;
        return *hit;
      }
    }
    HypercubeResult r = min_sigma(d, eps, cfg.rho, cfg.sigma_max);
    if (!cache_path.empty()) cache.store(key, eps, cfg.rho, zhash, r);
    return r;
  };

  // reserve interval endpoints per method
  const bool vertex_method = cfg.method == Method::Wdro || cfg.method == Method::Ro ||
                             cfg.method == Method::Dc;
  double res_lo, res_hi;
  if (cfg.method == Method::Wdro || cfg.method == Method::Dc) {
    HypercubeResult hr = sized_cube(QuantityKey{QuantityKind::Reserve, 0}.str(), ss_w.d,
                                    amb_w.epsilon);
    if (!hr.feasible) {
      if (!cache_path.empty()) cache.save(cache_path);
      return fail(SolveStatus::Infeasible, "reserve hypercube sizing infeasible");
    }
    res_lo = mu_w - hr.sigma * sc_w;
    res_hi = mu_w + hr.sigma * sc_w;
  } else if (cfg.method == Method::Ro) {
    res_lo = sup_lo;
    res_hi = sup_hi;
  } else {
    const double k = moment_margin(cfg.method, cfg.rho);
    const double sd = std::sqrt(ss_w.cov(0, 0));
    res_lo = mu_w - k * sd;
    res_hi = mu_w + k * sd;
  }

  // 3. model skeleton
  auto mp = base_model(net, cfg.method, os.hi - os.lo <= kDegenerateTol);
  Model& m = *mp;
  const Layout& L = m.L;
  m.eps_omega = os.eps;
  m.m1 = os.m1;
  m.m2 = os.m2;
  m.omega_lo = os.lo;
  m.omega_hi = os.hi;

  // reserve rows: for each interval endpoint w, -w*alpha <= r_up, w*alpha <= r_dn
  for (int g = 0; g < L.ng; ++g) {
    if (!m.active[g]) continue;
    if (net.generators[g].pmax - net.generators[g].pmin <= kDegenerateTol) continue;
    m.rows.push_back({{{L.ru(g), 1.0}, {L.al(g), res_lo}}, 0.0});
    m.rows.push_back({{{L.rd(g), 1.0}, {L.al(g), -res_lo}}, 0.0});
    if (res_hi - res_lo > kDegenerateTol) {  // avoid duplicate rows
      m.rows.push_back({{{L.ru(g), 1.0}, {L.al(g), res_hi}}, 0.0});
      m.rows.push_back({{{L.rd(g), 1.0}, {L.al(g), -res_hi}}, 0.0});
    }
  }

  // response matrices around the deterministic nominal state
  ResponseMatrices rm;
  DcResponse dcr;
  MatrixXd Bl, Gl;  // nominal flow maps
  if (m.ac) {
    SystemState nominal{det.strategy.theta, det.strategy.v};
    rm = build_response(net, *m.adm, CoefficientSource::Tangent, &nominal);
    Bl = m.adm->Bl;
    Gl = m.adm->Gl;
  } else {
    dcr = build_dc_response(net);
    Bl = dcr.Blin;
  }

  // nominal flow rows for rated branches
  std::vector<int> rated;
  for (int k = 0; k < net.n_branch(); ++k)
    if (net.branches[k].online && net.branches[k].rate > 0.0) rated.push_back(k);
  add_flow_limit_rows(m, Bl, Gl);
  const int base_rows = (int)m.rows.size();

  // 4. candidate robust quantities
  const double k_margin =
      (cfg.method == Method::Mdro || cfg.method == Method::Gsp)
          ? moment_margin(cfg.method, cfg.rho)
          : 0.0;
  std::vector<Candidate> cands;
  auto add_candidate = [&](QuantityKey key, std::vector<LinTerm> nom_terms, double nom_cnst,
                           double lo, double hi, const Eigen::RowVectorXd& a_bus,
                           const Eigen::RowVectorXd& b_row) -> bool {
    Candidate c;
    c.key = key;
    c.nom_terms = std::move(nom_terms);
    c.nom_cnst = nom_cnst;
    c.lo = lo;
    c.hi = hi;
    c.gen_coeff = gen_coeff_from_bus_row(net, a_bus);
    MatrixXd pair = project_pair(zeta, b_row.transpose());
    SampleSet ss2 = make_sample_set(pair);
    if (vertex_method) {
      UncertaintySet u;
      if (cfg.method == Method::Ro) {
        u = support_vertices(estimate_support(ss2, cfg.sigma_max));
      } else {
        AmbiguitySpec amb2 = make_ambiguity(ss2, cfg.beta, cfg.sigma_max);
        HypercubeResult hr = sized_cube(key.str(), ss2.d, amb2.epsilon);
        if (!hr.feasible) return false;
        u = build_uncertainty_set(hr, ss2.mean, ss2.sqrt_cov);
      }
      c.vcs = emit_robust_constraints(key, u, lo, hi);
      c.added.assign(c.vcs.size(), 0);
    } else {
      c.mu2 = ss2.mean;
      c.cov2 = ss2.cov;
    }
    cands.push_back(std::move(c));
    return true;
  };

  bool sizing_ok = true;
  if (m.ac) {
    for (int r = 0; r < (int)rm.l_buses.size() && sizing_ok; ++r) {
      const int b = rm.l_buses[r];
      sizing_ok = add_candidate({QuantityKind::Voltage, b}, {{L.vm(b), 1.0}}, 0.0,
                                net.buses[b].vmin, net.buses[b].vmax, rm.Av.row(r),
                                rm.Bv.row(r));
    }
    for (int r = 0; r < (int)rm.rs_buses.size() && sizing_ok; ++r) {
      const int b = rm.rs_buses[r];
      double qlo = 0.0, qhi = 0.0;
      std::vector<LinTerm> terms;
      for (int g : net.gens_at_bus(b)) {
        if (!m.active[g]) continue;
        terms.push_back({L.qg(g), 1.0});
        qlo += net.generators[g].qmin;
        qhi += net.generators[g].qmax;
      }
      if (terms.empty()) continue;
      sizing_ok = add_candidate({QuantityKind::GenReactive, b}, std::move(terms), 0.0, qlo,
                                qhi, rm.Aq.row(r), rm.Bq.row(r));
    }
  }
  for (int idx = 0; idx < (int)rated.size() && sizing_ok; ++idx) {
    const int k = rated[idx];
    LinRow fe = flow_expr(m, Bl, Gl, k);
    sizing_ok = add_candidate({QuantityKind::Flow, k}, fe.terms, 0.0, -net.branches[k].rate,
                              net.branches[k].rate, m.ac ? rm.Af.row(k) : dcr.Af.row(k),
                              m.ac ? rm.Bf.row(k) : dcr.Bf.row(k));
  }
  if (!cache_path.empty()) cache.save(cache_path);
  if (!sizing_ok) return fail(SolveStatus::Infeasible, "hypercube sizing infeasible");

  if (cfg.enforce_all && vertex_method) {
    for (auto& c : cands)
      for (int v = 0; v < (int)c.vcs.size(); ++v) {
        append_vertex_rows(m, c, c.vcs[v]);
        c.added[v] = 1;
      }
  }

  // 5. initial point from the deterministic solution
  VectorXd x = VectorXd::Zero(L.nx);
  x.head(L.nb) = det.strategy.theta;
  x.segment(L.nb, L.nb) = m.ac ? det.strategy.v : VectorXd::Ones(L.nb);
  int nreg = 0;
  for (int g = 0; g < L.ng; ++g)
    if (m.active[g] && net.generators[g].pmax - net.generators[g].pmin > kDegenerateTol)
      ++nreg;
  for (int g = 0; g < L.ng; ++g) {
    if (!m.active[g]) continue;
    x[L.pg(g)] = det.strategy.pg[g];
    x[L.qg(g)] = m.ac ? det.strategy.qg[g] : 0.0;
    if (net.generators[g].pmax - net.generators[g].pmin > kDegenerateTol)
      x[L.al(g)] = 1.0 / nreg;
    x[L.ru(g)] = 0.02;
    x[L.rd(g)] = 0.02;
  }
  if (m.wdro_cost) {
    CostAggregate agg0 = cost_coeffs(net, det.strategy.pg, extract_strategy(m, x).alpha,
                                     VectorXd::Zero(L.ng), VectorXd::Zero(L.ng));
    x[L.lam()] = std::max(
        std::abs(agg0.c1) + 2 * agg0.c2 * std::max(std::abs(os.lo), std::abs(os.hi)), 1.0);
  }

  // 6. enforcement loop
  const int round_limit =
      (cfg.method == Method::Mdro || cfg.method == Method::Gsp) ? std::max(cfg.max_rounds, 50)
                                                                : cfg.max_rounds;
  IpmRun run;
  bool clean = false;
  int round = 0;
  for (; round < round_limit; ++round) {
    run = run_ipm(mp, x, 1e-2, cfg.verbose);
    out.report.ipm_iterations += run.res.iterations;
    if (!run.usable) {
      SolveStatus st = run.res.status == IpmStatus::Infeasible ? SolveStatus::Infeasible
                                                               : SolveStatus::SolverFailure;
      return fail(st, "round " + std::to_string(round + 1) + ": solver " +
                          (st == SolveStatus::Infeasible ? "infeasible" : "failure"));
    }
    int added = 0;
    for (auto& c : cands) {
      if (vertex_method) {
        for (int v = 0; v < (int)c.vcs.size(); ++v) {
          if (c.added[v]) continue;
          if (vertex_violation(m, c, c.vcs[v], x) > kViolationTol) {
            append_vertex_rows(m, c, c.vcs[v]);
            c.added[v] = 1;
            ++added;
          }
        }
      } else {
        added += moment_cut(m, c, k_margin, x);
      }
    }
    out.report.log.push_back("round " + std::to_string(round + 1) + ": added " +
                             std::to_string(added) + " rows");
    if (added == 0) {
      clean = true;
      break;
    }
  }
  out.report.rounds = round + (clean ? 1 : 0);
  out.report.robust_rows = (int)m.rows.size() - base_rows;
  if (!clean)
    return fail(SolveStatus::SolverFailure, "enforcement loop did not converge");

  // 7. report
  out.status = SolveStatus::Optimal;
  out.strategy = extract_strategy(m, x);
  out.report.status = out.status;
  out.report.kkt = run.res.kkt;
  out.report.feasibility = run.res.feas;
  CostAggregate agg = cost_coeffs(net, out.strategy.pg, out.strategy.alpha,
                                  out.strategy.r_up, out.strategy.r_dn);
  ObjectiveBreakdown& ob = out.report.objective;
  ob.sample_average = sample_average_cost(agg, os);
  ob.nominal = eta(agg, 0.0);
  if (m.wdro_cost) {
    ob.bound = out.strategy.lambda * os.eps + ob.sample_average;
    ob.worst_case = worst_case_cost_exact(agg, os);
  } else {
    ob.bound = ob.sample_average;
    ob.worst_case = ob.sample_average;
  }
  out.report.seconds = elapsed();
  return out;
}

std::string strategy_to_json(const OperatingStrategy& s, const Network& net) {
  json j;
  j["base_mva"] = net.base_mva;
  j["lambda"] = s.lambda;
  j["per_bus"] = json::array();
  for (int i = 0; i < net.n_bus(); ++i)
    j["per_bus"].push_back({{"id", net.buses[i].id}, {"v", s.v[i]}, {"theta", s.theta[i]}});
  j["per_generator"] = json::array();
  for (int g = 0; g < net.n_gen(); ++g)
    j["per_generator"].push_back({{"bus", net.buses[net.generators[g].bus].id},
                                  {"pg", s.pg[g]},
                                  {"qg", s.qg[g]},
                                  {"alpha", s.alpha[g]},
                                  {"r_up", s.r_up[g]},
                                  {"r_dn", s.r_dn[g]}});
  return j.dump(2);
}

OperatingStrategy strategy_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("bad strategy JSON: ") + e.what());
  }
  OperatingStrategy s;
  try {
    const auto& pb = j.at("per_bus");
    const auto& pgn = j.at("per_generator");
    const int nb = (int)pb.size(), ng = (int)pgn.size();
    s.v.resize(nb);
    s.theta.resize(nb);
    for (int i = 0; i < nb; ++i) {
      s.v[i] = pb[i].at("v").get<double>();
      s.theta[i] = pb[i].at("theta").get<double>();
    }
    s.pg.resize(ng);
    s.qg.resize(ng);
    s.alpha.resize(ng);
    s.r_up.resize(ng);
    s.r_dn.resize(ng);
    for (int g = 0; g < ng; ++g) {
      s.pg[g] = pgn[g].at("pg").get<double>();
      s.qg[g] = pgn[g].at("qg").get<double>();
      s.alpha[g] = pgn[g].at("alpha").get<double>();
      s.r_up[g] = pgn[g].at("r_up").get<double>();
      s.r_dn[g] = pgn[g].at("r_dn").get<double>();
    }
    s.lambda = j.value("lambda", 0.0);
  } catch (const json::exception& e) {
    throw parse_error(std::string("bad strategy JSON: ") + e.what());
  }
  return s;
}

std::string outcome_to_json(const SolveOutcome& o, const Network& net, Method method) {
  json j = json::parse(strategy_to_json(o.strategy, net));
  j["method"] = method_name(method);
  switch (o.status) {
    case SolveStatus::Optimal: j["status"] = "optimal"; break;
    case SolveStatus::Infeasible: j["status"] = "infeasible"; break;
    case SolveStatus::SolverFailure: j["status"] = "solver_failure"; break;
  }
  j["objective"] = {{"bound", o.report.objective.bound},
                    {"worst_case", o.report.objective.worst_case},
                    {"sample_average", o.report.objective.sample_average},
                    {"nominal", o.report.objective.nominal}};
  j["rounds"] = o.report.rounds;
  j["robust_rows"] = o.report.robust_rows;
  j["kkt"] = o.report.kkt;
  j["feasibility"] = o.report.feasibility;
  j["ipm_iterations"] = o.report.ipm_iterations;
  j["seconds"] = o.report.seconds;
  j["cache_hits"] = o.report.cache_hits;
  j["log"] = o.report.log;
  return j.dump(2);
}

}  // namespace wdropf
