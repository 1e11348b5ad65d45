#include "wdropf/rivals.hpp"

#include <cmath>

namespace wdropf {

Method parse_method(const std::string& name) {
  if (name == "wdro") return Method::Wdro;
  if (name == "ro") return Method::Ro;
  if (name == "mdro") return Method::Mdro;
  if (name == "gsp") return Method::Gsp;
  if (name == "dc") return Method::Dc;
  if (name == "det" || name == "deterministic") return Method::Deterministic;
  throw parse_error("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Wdro: return "wdro";
    case Method::Ro: return "ro";
    case Method::Mdro: return "mdro";
    case Method::Gsp: return "gsp";
    case Method::Dc: return "dc";
    case Method::Deterministic: return "det";
  }
  return "?";
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw validation_error("quantile argument must be in (0,1)");
  // Acklam's rational approximation, then Newton refinement via erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int i = 0; i < 2; ++i) {
    const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf > 0) x -= (cdf - p) / pdf;
  }
  return x;
}

double moment_margin(Method m, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw validation_error("rho must be in (0,1)");
  if (m == Method::Mdro) return std::sqrt(1.0 / rho);
  if (m == Method::Gsp) return inverse_normal_cdf(1.0 - rho / 2.0);
  throw validation_error("moment margin only defined for mdro/gsp");
}

UncertaintySet support_vertices(const SupportBox& box) {
  UncertaintySet u;
  u.vertices = box.vertices;
  return u;
}

DcResponse build_dc_response(const Network& net) {
  const int nb = net.n_bus(), nl = net.n_branch(), nw = net.n_wind();
  DcResponse dc;
  dc.Bdc = Eigen::MatrixXd::Zero(nb, nb);
  dc.Blin = Eigen::MatrixXd::Zero(nl, nb);
  for (int k = 0; k < nl; ++k) {
    const Branch& br = net.branches[k];
    if (!br.online) continue;
    const double y = 1.0 / (br.x * br.tap);
    dc.Blin(k, br.from) = y;
    dc.Blin(k, br.to) = -y;
    dc.Bdc(br.from, br.from) += y;
    dc.Bdc(br.to, br.to) += y;
    dc.Bdc(br.from, br.to) -= y;
    dc.Bdc(br.to, br.from) -= y;
  }
  // reduced system without the reference bus; consistency (zero net
  // disturbance) holds because participation factors sum to one
  std::vector<int> keep;
  keep.reserve(nb - 1);
  for (int i = 0; i < nb; ++i)
    if (i != net.ref_bus) keep.push_back(i);
  const int nr = (int)keep.size();
  Eigen::MatrixXd Bred(nr, nr);
  for (int a = 0; a < nr; ++a)
    for (int b = 0; b < nr; ++b) Bred(a, b) = dc.Bdc(keep[a], keep[b]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Bred);

  auto flows_from_injection = [&](const Eigen::VectorXd& dp_red) {
    Eigen::VectorXd th_red = lu.solve(dp_red);
    Eigen::VectorXd th = Eigen::VectorXd::Zero(nb);
    for (int a = 0; a < nr; ++a) th[keep[a]] = th_red[a];
    return Eigen::VectorXd(dc.Blin * th);
  };

  dc.Af = Eigen::MatrixXd::Zero(nl, nb);
  for (int a = 0; a < nr; ++a) {
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(nr);
    dp[a] = -1.0;  // unit participation at this bus withdraws omega
    dc.Af.col(keep[a]) = flows_from_injection(dp);
  }
  dc.Bf = Eigen::MatrixXd::Zero(nl, nw);
  for (int w = 0; w < nw; ++w) {
    const int bus = net.wind_farms[w].bus;
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(nr);
    for (int a = 0; a < nr; ++a)
      if (keep[a] == bus) dp[a] = 1.0;
    dc.Bf.col(w) = flows_from_injection(dp);
  }
  return dc;
}

}  // namespace wdropf
