#pragma once

#include "wdropf/costdro.hpp"
#include "wdropf/nlp.hpp"
#include "wdropf/rivals.hpp"

namespace wdropf {

/// Complete dispatch strategy: nominal operating point, participation
/// factors, and procured reserves.
struct OperatingStrategy {
  Eigen::VectorXd v, theta;                    // per bus
  Eigen::VectorXd pg, qg, alpha, r_up, r_dn;   // per generator
  double lambda = 0.0;                         // worst-case cost multiplier
};

enum class SolveStatus { Optimal, Infeasible, SolverFailure };

struct ObjectiveBreakdown {
  double bound = 0.0;           // solver objective (multiplier upper bound)
  double worst_case = 0.0;      // exact worst-case expectation, post-solve
  double sample_average = 0.0;  // empirical average cost
  double nominal = 0.0;         // cost at zero forecast error
};

struct SolveConfig {
  Method method = Method::Wdro;
  double rho = 0.05;        // per-constraint violation level
  double beta = 0.9;        // ball confidence
  double sigma_max = 10.0;  // support box half width, standardized units
  std::string cache_dir;    // empty disables the sigma cache
  bool enforce_all = false; // add every candidate robust row up front
  int max_rounds = 20;      // enforcement rounds (50 for cutting planes)
  bool verbose = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::SolverFailure;
  ObjectiveBreakdown objective;
  int rounds = 0;
  int robust_rows = 0;  // inequality rows added by enforcement
  double kkt = 0.0, feasibility = 0.0;
  int ipm_iterations = 0;  // total across rounds
  double seconds = 0.0;
  int cache_hits = 0;
  std::vector<std::string> log;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::SolverFailure;
  OperatingStrategy strategy;
  SolveReport report;
};

/// Deterministic AC-OPF: no uncertainty, uniform participation pinned,
/// zero reserves. Also serves as the warm start of the stochastic solves.
SolveOutcome solve_deterministic(const Network& net, bool verbose = false);

/// Full solve with the successive constraint-enforcement outer loop.
/// zeta holds N x n_w historical forecast-error samples in p.u.
SolveOutcome solve_with_enforcement(const Network& net, const Eigen::MatrixXd& zeta,
                                    const SolveConfig& cfg);

/// Strategy serialization (self-contained JSON document).
std::string strategy_to_json(const OperatingStrategy& s, const Network& net);
OperatingStrategy strategy_from_json(const std::string& text);

/// Full result document: strategy plus method tag and report.
std::string outcome_to_json(const SolveOutcome& o, const Network& net, Method method);

}  // namespace wdropf
