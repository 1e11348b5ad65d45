#pragma once

#include "wdropf/wasserstein.hpp"

#include <map>
#include <optional>

namespace wdropf {

/// Result of sizing the standardized hypercube for one monitored quantity.
struct HypercubeResult {
  bool feasible = false;
  double sigma = 0.0;    // side length in standardized coordinates
  double lambda = 0.0;   // certifying multiplier
  double level = 1.0;    // achieved worst-case violation probability
};

/// Worst-case probability (over the Wasserstein ball of radius eps around the
/// empirical distribution) of falling outside the cube of side sigma:
///   inf_{lambda >= 0} lambda*eps + (1/N) sum_k (1 - lambda*(sigma - d_k)+)+
/// where d_k are the per-sample standardized infinity norms.
double worst_case_violation(double sigma, const Eigen::VectorXd& d, double eps);

/// Smallest cube side (to 1e-4) whose worst-case violation is at most rho;
/// nested bisection, outer on sigma in [0, sigma_max], inner 1-D minimization
/// over the multiplier.
HypercubeResult min_sigma(const Eigen::VectorXd& d, double eps, double rho,
                          double sigma_max);

/// The sized cube mapped back to original coordinates.
struct UncertaintySet {
  std::vector<Eigen::VectorXd> vertices;  // 2^m points
};

UncertaintySet build_uncertainty_set(const HypercubeResult& r, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& sqrt_cov);

/// What a monitored quantity is, for constraint bookkeeping and cache keys.
enum class QuantityKind { Reserve, Voltage, GenReactive, Flow };

struct QuantityKey {
  QuantityKind kind;
  int index;  // generator / L-bus row / RS row / branch, per kind
  std::string str() const;
};

/// One linear inequality emitted for a vertex of the uncertainty set. The
/// monitored quantity responds as nominal(x) + omega * (A_row . alpha) + t,
/// which must stay within [lo, hi].
struct VertexConstraint {
  QuantityKey key;
  double omega = 0.0;
  double t = 0.0;
  double lo = 0.0, hi = 0.0;
};

/// Expand an uncertainty set in (omega, t) coordinates into per-vertex records.
/// 1-D sets carry t = 0.
std::vector<VertexConstraint> emit_robust_constraints(const QuantityKey& key,
                                                      const UncertaintySet& u,
                                                      double lo, double hi);

/// Persistent memo for sigma results: quantity key -> result, valid only while
/// (epsilon, rho, sample hash) are unchanged.
class SigmaCache {
 public:
  void load(const std::string& path);          // missing file = empty cache
  void save(const std::string& path) const;
  std::optional<HypercubeResult> lookup(const std::string& key, double eps, double rho,
                                        std::uint64_t sample_hash) const;
  void store(const std::string& key, double eps, double rho, std::uint64_t sample_hash,
             const HypercubeResult& r);

 private:
  struct Entry {
    double eps, rho;
    std::uint64_t hash;
    HypercubeResult result;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace wdropf
