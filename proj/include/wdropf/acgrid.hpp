#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <optional>

#include "wdropf/case_io.hpp"

namespace wdropf {

struct SystemState {
  Eigen::VectorXd theta;  // rad, reference bus at 0
  Eigen::VectorXd v;      // p.u.
};

/// Bus injections of the exact AC equations at a given state.
/// P_i = v_i sum_j v_j (G_ij cos th_ij + B_ij sin th_ij), analogously Q.
void injections(const SystemState& state, const AdmittanceSet& adm,
                Eigen::VectorXd& P, Eigen::VectorXd& Q);

/// Jacobian of [P; Q] with respect to [theta; v], dense 2n x 2n.
Eigen::MatrixXd injection_jacobian(const SystemState& state, const AdmittanceSet& adm);

/// Hessian of y' P + z' Q with respect to [theta; v] for given weight vectors.
Eigen::MatrixXd injection_weighted_hessian(const SystemState& state, const AdmittanceSet& adm,
                                           const Eigen::VectorXd& y, const Eigen::VectorXd& z);

/// Exact from-side MW flow of every in-service branch (pi model with taps).
Eigen::VectorXd branch_flows(const SystemState& state, const Network& net);

/// Gradient rows of branch_flows with respect to [theta; v], n_l x 2n.
Eigen::MatrixXd branch_flow_jacobian(const SystemState& state, const Network& net);

/// Hessian of y' branch_flows with respect to [theta; v] for a weight vector.
Eigen::MatrixXd branch_flow_weighted_hessian(const SystemState& state, const Network& net,
                                             const Eigen::VectorXd& y);

struct DispatchContext {
  Eigen::VectorXd p;            // specified net injection, used at PV+PQ buses
  Eigen::VectorXd q;            // specified net injection, used at PQ buses
  Eigen::VectorXd v_setpoint;   // used at reference + PV buses
  double theta_ref = 0.0;
};

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 30;
};

struct NewtonResult {
  SystemState state;
  bool converged = false;
  int iterations = 0;
  double mismatch = 0.0;
};

NewtonResult solve_newton(const DispatchContext& ctx, const AdmittanceSet& adm,
                          const Network& net, const SystemState& init,
                          const NewtonOptions& opt = {});

SystemState flat_state(const Network& net, const DispatchContext& ctx);

/// Dispatch decisions needed to evaluate the exact system response.
struct OperatingPoint {
  SystemState state;           // nominal AC state
  Eigen::VectorXd pg;          // per-generator active output, p.u.
  Eigen::VectorXd qg;          // per-generator reactive output, p.u.
  Eigen::VectorXd alpha;       // per-generator participation factors
};

struct ResponseOutcome {
  bool converged = false;
  SystemState state;
  Eigen::VectorXd pg_realized;   // per-generator, reference units absorb losses
  Eigen::VectorXd qg_bus;        // bus reactive injections at reference + PV buses order
  Eigen::VectorXd flows;         // exact from-side MW flows, p.u.
};

/// Exact AGC/AVR response: PV units move by -omega*alpha, wind adds zeta,
/// AVR holds voltage setpoints, the reference bus absorbs the residual.
ResponseOutcome agc_avr_response(const Network& net, const AdmittanceSet& adm,
                                 const OperatingPoint& op, const Eigen::VectorXd& zeta,
                                 const NewtonOptions& opt = {});

/// Precomputed machinery for evaluating many AGC/AVR responses quickly:
/// the nominal Jacobian is factorized once (sparse LU) and each trial runs
/// chord iterations from a warm start, falling back to full Newton solves
/// when the chord iteration stalls.
class FastResponseEvaluator {
 public:
  FastResponseEvaluator(const Network& net, const AdmittanceSet& adm, const OperatingPoint& op);

  /// Same contract as agc_avr_response.
  ResponseOutcome evaluate(const Eigen::VectorXd& zeta) const;

 private:
  const Network& net_;
  const AdmittanceSet& adm_;
  OperatingPoint op_;
  DispatchContext nominal_ctx_;
  std::vector<int> unknown_theta_;  // bus indices with free angle
  std::vector<int> unknown_v_;      // bus indices with free magnitude
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  // sparse evaluation data: per in-service branch
  struct Edge { int i, j; double gij, bij; };
  std::vector<Edge> edges_;
  Eigen::VectorXd gdiag_, bdiag_;

  void sparse_injections(const SystemState& st, Eigen::VectorXd& P, Eigen::VectorXd& Q) const;
  friend class FastResponseTestPeer;
};

}  // namespace wdropf
