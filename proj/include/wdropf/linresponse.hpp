#pragma once

#include "wdropf/acgrid.hpp"

namespace wdropf {

/// Bus partition used to arrange the linearized equations:
/// R = reference, S = voltage-controlled generator buses, L = the rest.
/// States stack as (theta_R, theta_S, theta_L, v_R, v_S, v_L); the fixed
/// entries are theta_R, v_R, v_S (AVR holds controlled voltages).
struct Partition {
  std::vector<int> R, S, L;       // bus indices
  std::vector<int> unknown_cols;  // columns into the stacked [theta; v] vector
  std::vector<int> fixed_cols;
  std::vector<int> spec_rows;     // p at S, p at L, q at L (rows into [P; Q])
  std::vector<int> out_rows;      // q at R, q at S
};

Partition make_partition(const Network& net);

/// Which linearization supplies the coefficient matrix:
///  - Tangent: AC power-flow Jacobian at the nominal state (exact first-order
///    sensitivities of the full model).
///  - Lpf: the constant linear power-flow matrix [p;q] = [-B' G; -G -B][theta;v],
///    state independent but less accurate.
enum class CoefficientSource { Tangent, Lpf };

/// Constant matrices mapping forecast errors zeta and bus-aggregated
/// participation factors a to quantity deviations, with omega = 1'zeta:
///   v_L   = v_L0   + omega * Av a + Bv zeta
///   q_RS  = q_RS0  + omega * Aq a + Bq zeta
///   flows = flows0 + omega * Af a + Bf zeta
struct ResponseMatrices {
  Eigen::MatrixXd H, N, M, L;  // partial-inversion blocks (rows/cols per Partition)
  Eigen::MatrixXd Av, Bv;      // |L| x n_b, |L| x n_w
  Eigen::MatrixXd Aq, Bq;      // |R u S| x n_b, |R u S| x n_w
  Eigen::MatrixXd Af, Bf;      // n_l x n_b, n_l x n_w
  Partition part;
  std::vector<int> l_buses;    // bus index per Av/Bv row
  std::vector<int> rs_buses;   // bus index per Aq/Bq row: reference first, then S
};

/// Build the response matrices. `nominal` is required for the Tangent source
/// and ignored for Lpf.
ResponseMatrices build_response(const Network& net, const AdmittanceSet& adm,
                                CoefficientSource src,
                                const SystemState* nominal = nullptr);

/// Solve the linear power-flow model for the unknown states given specified
/// injections (ctx.p at S and L, ctx.q at L) and fixed setpoints.
SystemState lpf_solve(const Network& net, const AdmittanceSet& adm,
                      const DispatchContext& ctx);

/// The constant coefficient matrix of the linear model: [p; q] = Phi [theta; v].
Eigen::MatrixXd lpf_matrix(const Network& net, const AdmittanceSet& adm);

struct PredictedResponse {
  Eigen::VectorXd v_l;    // per l_buses
  Eigen::VectorXd q_rs;   // per rs_buses
  Eigen::VectorXd flows;  // per branch
};

/// Evaluate the affine response around given nominal values.
PredictedResponse predict_response(const ResponseMatrices& rm,
                                   const Eigen::VectorXd& alpha_bus,
                                   const Eigen::VectorXd& zeta,
                                   const Eigen::VectorXd& v_l_nom,
                                   const Eigen::VectorXd& q_rs_nom,
                                   const Eigen::VectorXd& flows_nom);

/// Aggregate per-generator participation factors to buses.
Eigen::VectorXd bus_alpha(const Network& net, const Eigen::VectorXd& alpha_gen);

/// Write Av/Bv/Aq/Bq/Af/Bf as CSV files "<prefix><name>.csv" for inspection.
void dump_response_csv(const ResponseMatrices& rm, const std::string& prefix);

}  // namespace wdropf
