#include "wdropf/costdro.hpp"

#include <cmath>

namespace wdropf {

double eta(const CostAggregate& a, double omega) {
  return a.c2 * omega * omega - a.c1 * omega + a.c0;
}

CostAggregate cost_coeffs(const Network& net, const Eigen::VectorXd& pg,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& r_up,
                          const Eigen::VectorXd& r_dn) {
  CostAggregate a;
  for (int g = 0; g < net.n_gen(); ++g) {
    const auto& gen = net.generators[g];
    if (!gen.online) continue;
    a.c2 += gen.c2 * alpha[g] * alpha[g];
    a.c1 += 2.0 * gen.c2 * pg[g] * alpha[g] + gen.c1 * alpha[g];
    a.c0 += gen.c2 * pg[g] * pg[g] + gen.c1 * pg[g] + gen.c0;
    a.c0 += gen.cr_up * r_up[g] + gen.cr_dn * r_dn[g];
  }
  return a;
}

OmegaSamples make_omega_samples(const Eigen::VectorXd& omega, double lo, double hi,
                                double eps) {
  OmegaSamples s;
  s.omega = omega;
  s.lo = std::min(lo, omega.minCoeff());
  s.hi = std::max(hi, omega.maxCoeff());
  s.eps = eps;
  s.m1 = omega.mean();
  s.m2 = omega.squaredNorm() / omega.size();
  return s;
}

double sample_average_cost(const CostAggregate& a, const OmegaSamples& s) {
  return a.c2 * s.m2 - a.c1 * s.m1 + a.c0;
}

double worst_case_cost_exact(const CostAggregate& a, const OmegaSamples& s) {
  const double elo = eta(a, s.lo), ehi = eta(a, s.hi);
  auto obj = [&](double lam) {
    double acc = 0.0;
    for (int k = 0; k < s.n(); ++k) {
      const double w = s.omega[k];
      const double t = std::max(std::max(elo + lam * (s.lo - w), ehi - lam * (s.hi - w)),
                                eta(a, w));
      acc += t;
    }
    return lam * s.eps + acc / s.n();
  };
  // convex in lambda (pointwise max of affine pieces)
  const double lam = golden_min_extend(obj, 0.0, 1.0, 1e12, 1e-10);
  double best = obj(lam);
  for (double mult : {2.0, 8.0}) best = std::min(best, obj(lam * mult));
  return best;
}

double worst_case_cost_ub(const CostAggregate& a, const OmegaSamples& s,
                          double* lambda_out) {
  const double lam =
      std::max(2.0 * a.c2 * s.hi - a.c1, -(2.0 * a.c2 * s.lo - a.c1));
  if (lambda_out) *lambda_out = lam;
  return lam * s.eps + sample_average_cost(a, s);
}

}  // namespace wdropf
