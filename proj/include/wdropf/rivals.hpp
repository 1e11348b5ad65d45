#pragma once

#include "wdropf/chance.hpp"
#include "wdropf/linresponse.hpp"

namespace wdropf {

enum class Method { Wdro, Ro, Mdro, Gsp, Dc, Deterministic };

Method parse_method(const std::string& name);  // throws parse_error on unknown
std::string method_name(Method m);

/// Standard normal quantile, accurate to ~1e-14.
double inverse_normal_cdf(double p);

/// Margin multiplier k on the standard deviation of the random term:
/// Chebyshev sqrt(1/rho) for moment-based DRO, Phi^{-1}(1 - rho/2) for
/// Gaussian stochastic programming.
double moment_margin(Method m, double rho);

/// Support-box corners used as the vertex set by robust optimization.
UncertaintySet support_vertices(const SupportBox& box);

/// DC counterpart of the affine system response. Flows respond as
///   f = f0 + omega * Af a + Bf zeta,  f0 = Blin theta,
/// with Bdc the nodal susceptance matrix of the balance equations.
struct DcResponse {
  Eigen::MatrixXd Bdc;      // n_b x n_b
  Eigen::MatrixXd Blin;     // n_l x n_b, theta -> flows
  Eigen::MatrixXd Af, Bf;   // n_l x n_b, n_l x n_w
};

DcResponse build_dc_response(const Network& net);

}  // namespace wdropf
