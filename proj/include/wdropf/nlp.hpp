#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace wdropf {

/// Dense nonlinear program
///   min f(x)  s.t.  c_E(x) = 0,  c_I(x) >= 0.
/// Callbacks fill preallocated outputs; Jacobians are dense.
struct Nlp {
  int nx = 0, n_eq = 0, n_in = 0;
  std::function<double(const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> eval_eq;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> eval_in;
  /// Hessian of the Lagrangian f - y'c_E - w'c_I.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w)>
      hess;
};

struct IpmOptions {
  double tol_kkt = 1e-8;
  double tol_feas = 1e-9;
  int max_iter = 300;
  double mu_init = 1e-1;
  double tau = 0.995;  // fraction-to-boundary
  bool verbose = false;
};

enum class IpmStatus { Converged, Infeasible, MaxIterations, LinearAlgebraFailure };

struct IpmResult {
  IpmStatus status = IpmStatus::MaxIterations;
  Eigen::VectorXd x, y, w, s;  // primal, equality duals, inequality duals, slacks
  double kkt = 1e300;          // stationarity + complementarity residual
  double feas = 1e300;         // primal feasibility residual
  int iterations = 0;
};

/// Primal-dual interior-point method with slacked inequalities, monotone
/// barrier reduction, fraction-to-boundary steps, and inertia-free
/// regularization by diagonal shifts.
IpmResult solve_ipm(const Nlp& nlp, const Eigen::VectorXd& x0, const IpmOptions& opt = {});

}  // namespace wdropf
