#pragma once

#include "wdropf/case_io.hpp"

namespace wdropf {

/// Aggregate cost as a quadratic in the total forecast error omega:
///   eta(omega) = c2*omega^2 - c1*omega + c0.
struct CostAggregate {
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

double eta(const CostAggregate& a, double omega);

/// Aggregate a dispatch into (c2, c1, c0); includes reserve procurement cost.
CostAggregate cost_coeffs(const Network& net, const Eigen::VectorXd& pg,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& r_up,
                          const Eigen::VectorXd& r_dn);

/// Projected scalar samples omega_k = 1'zeta_k with their support interval,
/// ball radius, and cached first two moments.
struct OmegaSamples {
  Eigen::VectorXd omega;
  double lo = 0.0, hi = 0.0;  // support [lo, hi], contains all samples
  double eps = 0.0;
  double m1 = 0.0, m2 = 0.0;  // mean and mean square

  int n() const { return static_cast<int>(omega.size()); }
};

OmegaSamples make_omega_samples(const Eigen::VectorXd& omega, double lo, double hi,
                                double eps);

/// Sample-average cost, N-independent through the cached moments:
/// c2*m2 - c1*m1 + c0.
double sample_average_cost(const CostAggregate& a, const OmegaSamples& s);

/// Exact worst-case expected cost over the Wasserstein ball:
/// inf_{lambda>=0} lambda*eps +
///   (1/N) sum_k max{eta(lo)+lambda(lo-w_k), eta(hi)-lambda(hi-w_k), eta(w_k)}.
double worst_case_cost_exact(const CostAggregate& a, const OmegaSamples& s);

/// Closed-form upper bound: lambda* = max{eta'(hi), -eta'(lo)} and
/// value = lambda* eps + sample average. Returns the multiplier through
/// lambda_out when requested.
double worst_case_cost_ub(const CostAggregate& a, const OmegaSamples& s,
                          double* lambda_out = nullptr);

}  // namespace wdropf
