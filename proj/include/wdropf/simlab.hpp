#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wdropf/opfcore.hpp"

namespace wdropf {

enum class Distribution { Laplace, Gaussian, Mixture };

Distribution parse_distribution(const std::string& name);
const char* distribution_name(Distribution d);

/// Sampling protocol for synthetic forecast errors. Draws are truncated so
/// forecast + error stays within [0, capacity] per farm; the per-farm scale
/// parameter is scale_fraction * capacity. An optional correlation matrix
/// couples farms through a Gaussian copula.
struct RngProtocol {
  Distribution distribution = Distribution::Laplace;
  double scale_fraction = 0.10;
  std::uint64_t seed = 1;
  Eigen::MatrixXd correlation;  // empty = independent farms
};

RngProtocol protocol_from_json(const std::string& text);
std::string protocol_to_json(const RngProtocol& p);

/// One forecast-error vector per row; trial i is a pure function of
/// (protocol, i), so any subrange can be regenerated independently.
Eigen::MatrixXd generate_samples(const RngProtocol& p, const Network& net, int n);
Eigen::VectorXd sample_trial(const RngProtocol& p, const Network& net, std::uint64_t trial);

/// Which response model evaluates a trial:
///  - FullAc: exact AGC/AVR power-flow response.
///  - Approx: exact nominal point + tangent-linear incremental response.
///  - Lpf: the constant linear power-flow model solved in absolute terms.
///  - Dc: theta-only lossless model, voltages pinned at 1.
enum class ResponseModel { FullAc, Approx, Lpf, Dc };

ResponseModel parse_model(const std::string& name);
const char* model_name(ResponseModel m);

struct EvaluationReport {
  std::map<std::string, double> reliability;  // per constraint key
  double lowest_reliability = 1.0;
  double mean_cost = 0.0;
  double cost_stddev = 0.0;  // sample standard deviation over converged trials
  long n_trials = 0;
  long failed_trials = 0;
  // histogram of the total reserve deployment -omega (positive = upward)
  std::vector<double> reserve_use_edges;
  std::vector<long> reserve_use_counts;

  /// Monte Carlo standard error of mean_cost.
  double cost_se() const;
  /// Monte Carlo standard error of an estimated reliability p.
  double reliability_se(double p) const;
};

std::string report_to_json(const EvaluationReport& r);

/// Per-trial system response under one model for a fixed strategy. Safe to
/// build one instance per thread; trial() is const and reentrant.
class StrategyEvaluator {
 public:
  StrategyEvaluator(const Network& net, const OperatingStrategy& s, ResponseModel model);
  ~StrategyEvaluator();
  StrategyEvaluator(StrategyEvaluator&&) noexcept;

  struct Trial {
    bool converged = false;
    Eigen::VectorXd v;       // all buses
    Eigen::VectorXd qg_bus;  // reference first, then PV buses
    Eigen::VectorXd flows;   // per branch
    Eigen::VectorXd pg;      // realized per generator
    double cost = 0.0;
  };
  Trial trial(const Eigen::VectorXd& zeta) const;

  const std::vector<int>& rs_buses() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

EvaluationReport evaluate_strategy(const Network& net, const OperatingStrategy& s,
                                   const Eigen::MatrixXd& zeta, ResponseModel model,
                                   int jobs = 1);

/// Streaming variant: trials are generated from the protocol on the fly, so
/// n_mc can be large without materializing the sample matrix.
EvaluationReport evaluate_protocol(const Network& net, const OperatingStrategy& s,
                                   const RngProtocol& p, long n_mc, ResponseModel model,
                                   int jobs = 1);

/// One accuracy-comparison row: every model evaluated at the same total
/// forecast error, spread over farms proportionally to capacity.
struct AccuracyRow {
  double total_error = 0.0;  // p.u.
  double cost_ac = 0.0, cost_approx = 0.0, cost_lpf = 0.0;
  Eigen::VectorXd v_ac, v_approx, v_lpf;      // all buses
  Eigen::VectorXd q_ac, q_approx, q_lpf;      // rs order
  Eigen::VectorXd f_ac, f_approx, f_dc;       // per branch
};

std::vector<AccuracyRow> model_accuracy(const Network& net, const OperatingStrategy& s,
                                        const std::vector<double>& total_errors);

std::string accuracy_to_csv(const std::vector<AccuracyRow>& rows, const Network& net);

}  // namespace wdropf
