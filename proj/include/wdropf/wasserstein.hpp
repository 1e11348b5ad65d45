#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wdropf/util.hpp"

namespace wdropf {

/// A projected sample set (1 or 2 dimensions) with its standardization.
struct SampleSet {
  Eigen::MatrixXd xi;            // N x m raw samples
  Eigen::VectorXd mean;          // m
  Eigen::MatrixXd cov;           // m x m, regularized to be positive definite
  Eigen::MatrixXd sqrt_cov;      // principal square root
  Eigen::MatrixXd inv_sqrt_cov;
  Eigen::MatrixXd standardized;  // N x m, rows theta_k = inv_sqrt_cov * (xi_k - mean)
  Eigen::VectorXd d;             // per-sample infinity norms of the standardized rows

  int n() const { return static_cast<int>(xi.rows()); }
  int m() const { return static_cast<int>(xi.cols()); }
};

SampleSet make_sample_set(const Eigen::MatrixXd& xi);

/// Box support {xi : -sigma_max <= inv_sqrt_cov (xi - mean) <= sigma_max}.
struct SupportBox {
  double sigma_max = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd sqrt_cov, inv_sqrt_cov;
  std::vector<Eigen::VectorXd> vertices;  // 2^m points in original coordinates

  bool contains(const Eigen::VectorXd& xi, double tol = 1e-9) const;
};

SupportBox estimate_support(const SampleSet& s, double sigma_max = 10.0);

/// Data-driven constant C = 2 inf_{a>0} sqrt((1/2a)(1 + ln mean_k exp(a |xi_k - mean|_1^2))).
double estimate_C(const SampleSet& s);

/// l1 diameter of the sample cloud (exact).
double l1_diameter(const SampleSet& s);

/// Ball radius eps(N) = C sqrt(log(1/(1-beta)) / N).
double radius(int n_samples, double beta, double C);

/// Conservative fallback eps(N) = D sqrt(2 log(1/(1-beta)) / N).
double radius_fallback(int n_samples, double beta, double diameter);

/// Ambiguity set parameters attached to one monitored quantity.
struct AmbiguitySpec {
  double epsilon = 0.0;
  double beta = 0.0;
  double C = 0.0;
  SupportBox support;
};

AmbiguitySpec make_ambiguity(const SampleSet& s, double beta, double sigma_max = 10.0);

/// Projections of raw wind-error samples (N x n_w): the scalar totals
/// omega_k = 1'zeta_k, and the pair (omega_k, b'zeta_k) for a response row b.
Eigen::MatrixXd project_total(const Eigen::MatrixXd& zeta);
Eigen::MatrixXd project_pair(const Eigen::MatrixXd& zeta, const Eigen::VectorXd& row);

/// Sample CSV: header row of wind-farm bus ids, then one row per observation,
/// values in p.u. forecast error.
Eigen::MatrixXd read_samples_csv(const std::string& path, std::vector<int>* bus_ids = nullptr);
void write_samples_csv(const std::string& path, const std::vector<int>& bus_ids,
                       const Eigen::MatrixXd& zeta);

}  // namespace wdropf
