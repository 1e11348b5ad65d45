#include "wdropf/nlp.hpp"

#include <cmath>
#include <cstdio>

namespace wdropf {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

}  // namespace

IpmResult solve_ipm(const Nlp& nlp, const Eigen::VectorXd& x0, const IpmOptions& opt) {
  const int nx = nlp.nx, ne = nlp.n_eq, ni = nlp.n_in;
  IpmResult res;
  res.x = x0;
  res.y = Eigen::VectorXd::Zero(ne);

  Eigen::VectorXd cE(ne), cI(ni);
  Eigen::MatrixXd JE(ne, nx), JI(ni, nx);
  nlp.eval_eq(res.x, cE, JE);
  nlp.eval_in(res.x, cI, JI);

  double mu = opt.mu_init;
  // keep the floor small: a large floor fabricates slack infeasibility at
  // warm starts sitting on their active set and drags the iterate off it
  res.s = cI.cwiseMax(1e-6);
  res.w = (mu * res.s.cwiseInverse()).cwiseMin(1e4).cwiseMax(1e-8);

  // least-squares dual estimate: min || grad f - JE'y - JI'w ||
  if (ne + ni > 0) {
    Eigen::MatrixXd Jt(nx, ne + ni);
    if (ne) Jt.leftCols(ne) = JE.transpose();
    if (ni) Jt.rightCols(ni) = JI.transpose();
    Eigen::VectorXd yw = Jt.colPivHouseholderQr().solve(nlp.grad(res.x));
    if (yw.allFinite() && inf_norm(yw) < 1e8) {
      if (ne) res.y = yw.head(ne);
      if (ni) res.w = yw.tail(ni).cwiseMax(res.w);
    }
  }

  double nu = 10.0;        // l1 penalty weight in the merit function
  int stalled = 0;
  double delta = 0.0;      // Hessian shift, escalated on bad factorizations

  auto merit = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& s, double mu_) {
    Eigen::VectorXd ce(ne), ci(ni);
    Eigen::MatrixXd je(ne, nx), ji(ni, nx);
    nlp.eval_eq(x, ce, je);
    nlp.eval_in(x, ci, ji);
    double m = nlp.f(x);
    for (int i = 0; i < ni; ++i) m -= mu_ * std::log(std::max(s[i], 1e-300));
    m += nu * (ce.lpNorm<1>() + (ci - s).lpNorm<1>());
    return m;
  };

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    Eigen::VectorXd g = nlp.grad(res.x);
    nlp.eval_eq(res.x, cE, JE);
    nlp.eval_in(res.x, cI, JI);

    Eigen::VectorXd rd = g;
    if (ne) rd -= JE.transpose() * res.y;
    if (ni) rd -= JI.transpose() * res.w;
    Eigen::VectorXd rI = cI - res.s;
    Eigen::VectorXd comp = res.s.cwiseProduct(res.w);

    const double scale =
        std::max(1.0, (inf_norm(res.y) + inf_norm(res.w)) / 100.0);
    res.kkt = std::max(inf_norm(rd) / scale, inf_norm(comp));
    res.feas = std::max(inf_norm(cE), inf_norm(rI));
    const double err0 = std::max(res.kkt, res.feas);
    if (opt.verbose)
      std::printf("ipm %3d mu=%9.2e kkt=%9.2e feas=%9.2e f=%.8e d=%8.1e\n", it, mu, res.kkt,
                  res.feas, nlp.f(res.x), delta);
    if (err0 <= opt.tol_kkt && res.feas <= opt.tol_feas) {
      res.status = IpmStatus::Converged;
      return res;
    }
    // barrier reduction when the mu-perturbed system is solved well enough
    const double err_mu =
        std::max({inf_norm(rd) / scale, res.feas,
                  inf_norm((comp.array() - mu).matrix())});
    if (err_mu <= 10.0 * mu) mu = std::max(mu / 10.0, 1e-13);

    Eigen::VectorXd rC = comp.array() - mu;

    // condensed system
    Eigen::VectorXd Sigma =
        ni ? Eigen::VectorXd(res.w.cwiseQuotient(res.s)) : Eigen::VectorXd();
    Eigen::MatrixXd H = nlp.hess(res.x, res.y, res.w);
    Eigen::MatrixXd A = H;
    if (ni) A += JI.transpose() * Sigma.asDiagonal() * JI;

    Eigen::VectorXd rhs1 = -rd;
    if (ni)
      rhs1 -= JI.transpose() *
              (rC.cwiseQuotient(res.s) + Sigma.cwiseProduct(rI));

    Eigen::VectorXd dx(nx), dy = Eigen::VectorXd::Zero(ne);
    bool solved = false;
    // shift scale from the plain Lagrangian Hessian: the barrier terms in A
    // can reach 1/mu and would make the smallest shift absurdly large
    const double hscale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    // null-space basis of the equality Jacobian, for the inertia test
    Eigen::MatrixXd Z;
    if (ne) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(JE.transpose());
      const int rank = (int)qr.rank();
      Eigen::MatrixXd Q = qr.householderQ();
      Z = Q.rightCols(nx - rank);
    } else {
      Z = Eigen::MatrixXd::Identity(nx, nx);
    }
    double dshift = delta;
    for (int attempt = 0; attempt < 12 && !solved; ++attempt) {
      Eigen::MatrixXd At = A;
      if (dshift > 0) At += dshift * Eigen::MatrixXd::Identity(nx, nx);
      // inertia control: regularize until the condensed block is positive
      // definite on the null space of JE (descent along feasible directions)
      if (Z.cols() > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(
            Eigen::MatrixXd(Z.transpose() * At * Z));
        if (llt.info() != Eigen::Success) {
          dshift = (dshift == 0) ? 1e-8 * hscale : dshift * 50.0;
          continue;
        }
      }
      Eigen::MatrixXd M(nx + ne, nx + ne);
      M.topLeftCorner(nx, nx) = At;
      if (ne) {
        M.topRightCorner(nx, ne) = JE.transpose();
        M.bottomLeftCorner(ne, nx) = JE;
        M.bottomRightCorner(ne, ne) = -1e-10 * Eigen::MatrixXd::Identity(ne, ne);
      }
      Eigen::VectorXd rhs(nx + ne);
      rhs.head(nx) = rhs1;
      if (ne) rhs.tail(ne) = -cE;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
      Eigen::VectorXd sol = lu.solve(rhs);
      if (sol.allFinite())
        for (int ref = 0; ref < 2; ++ref) sol += lu.solve(rhs - M * sol);
      const double resid = sol.allFinite()
                               ? (M * sol - rhs).lpNorm<Eigen::Infinity>() /
                                     std::max(1.0, rhs.lpNorm<Eigen::Infinity>())
                               : 1e300;
      if (!sol.allFinite() || resid > 1e-6) {
        dshift = (dshift == 0) ? 1e-8 * hscale : dshift * 50.0;
        continue;
      }
      dx = sol.head(nx);
      if (ne) dy = -sol.tail(ne);
      solved = true;
      delta = dshift / 3.0;  // warm-start the shift, decaying on clean solves
      if (delta < 1e-12 * hscale) delta = 0.0;
    }
    if (!solved) {
      res.status = IpmStatus::LinearAlgebraFailure;
      return res;
    }

    Eigen::VectorXd ds, dw;
    if (ni) {
      ds = JI * dx + rI;
      dw = -(rC.cwiseQuotient(res.s)) - Sigma.cwiseProduct(ds);
    }

    // fraction-to-boundary
    double ap = 1.0, ad = 1.0;
    for (int i = 0; i < ni; ++i) {
      if (ds[i] < 0) ap = std::min(ap, -opt.tau * res.s[i] / ds[i]);
      if (dw[i] < 0) ad = std::min(ad, -opt.tau * res.w[i] / dw[i]);
    }

    // l1 merit line search on the primal step
    nu = std::max(nu, 2.0 * (inf_norm(res.y) + inf_norm(res.w)));
    const double m0 = merit(res.x, res.s, mu);
    double alpha = ap;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::VectorXd xt = res.x + alpha * dx;
      Eigen::VectorXd st = ni ? Eigen::VectorXd(res.s + alpha * ds) : res.s;
      if (merit(xt, st, mu) <= m0 - 1e-10 * alpha * alpha || alpha < 1e-10) {
        res.x = xt;
        res.s = st;
        accepted = alpha >= 1e-10;
        break;
      }
      alpha *= 0.5;
    }
    stalled = accepted ? 0 : stalled + 1;
    res.y += alpha * dy;
    if (ni) res.w += ad * dw;
    if (ni) res.w = res.w.cwiseMax(1e-14);

    if (stalled >= 8) {
      res.status = res.feas > 1e-6 ? IpmStatus::Infeasible : IpmStatus::MaxIterations;
      return res;
    }
  }
  res.status = res.feas > 1e-6 ? IpmStatus::Infeasible : IpmStatus::MaxIterations;
  return res;
}

}  // namespace wdropf
