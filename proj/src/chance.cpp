#include "wdropf/chance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"

namespace wdropf {

namespace {

// Sorted slack values e_k = (sigma - d_k)+ with prefix sums, for O(log N)
// evaluation of h(sigma, lambda) and its minimization over lambda.
struct SlackProfile {
  std::vector<double> e;       // ascending
  std::vector<double> prefix;  // prefix[i] = sum of e[0..i)
  int n = 0;

  SlackProfile(double sigma, const Eigen::VectorXd& d) {
    n = static_cast<int>(d.size());
    e.resize(n);
    for (int k = 0; k < n; ++k) e[k] = std::max(sigma - d[k], 0.0);
    std::sort(e.begin(), e.end());
    prefix.resize(n + 1, 0.0);
    for (int k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + e[k];
  }

  // h(lambda) = lambda*eps + (1/N) sum_k (1 - lambda e_k)+
  double h(double lambda, double eps) const {
    if (lambda <= 0.0) return 1.0;
    const double thresh = 1.0 / lambda;
    const int idx = static_cast<int>(
        std::lower_bound(e.begin(), e.end(), thresh) - e.begin());
    return lambda * eps + (idx - lambda * prefix[idx]) / n;
  }
};

double minimize_h(const SlackProfile& sp, double eps, double* lambda_out) {
  // convex piecewise-linear in lambda; golden-section on the paper's [0, 100]
  // bracket, doubled while the right end still descends
  auto f = [&](double lam) { return sp.h(lam, eps); };
  const double lam = golden_min_extend(f, 0.0, 100.0, 1e12, 1e-9);
  if (lambda_out) *lambda_out = lam;
  // the tail can be flat; probe a few larger multipliers to nail the infimum
  double best = f(lam);
  for (double mult : {2.0, 8.0, 64.0}) best = std::min(best, f(lam * mult));
  return best;
}

}  // namespace

double worst_case_violation(double sigma, const Eigen::VectorXd& d, double eps) {
  SlackProfile sp(sigma, d);
  return std::min(1.0, minimize_h(sp, eps, nullptr));
}

HypercubeResult min_sigma(const Eigen::VectorXd& d, double eps, double rho,
                          double sigma_max) {
  if (!(rho > 0.0 && rho <= 1.0)) throw validation_error("rho must be in (0,1]");
  HypercubeResult res;
  if (worst_case_violation(sigma_max, d, eps) > rho) {
    res.feasible = false;
    return res;
  }
  double lo = 0.0, hi = sigma_max;
  if (worst_case_violation(0.0, d, eps) <= rho) hi = 0.0;  // rho = 1 corner
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (worst_case_violation(mid, d, eps) <= rho)
      hi = mid;
    else
      lo = mid;
  }
  res.feasible = true;
  res.sigma = hi;
  SlackProfile sp(hi, d);
  res.level = std::min(1.0, minimize_h(sp, eps, &res.lambda));
  return res;
}

UncertaintySet build_uncertainty_set(const HypercubeResult& r, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& sqrt_cov) {
  const int m = static_cast<int>(mean.size());
  UncertaintySet u;
  for (int mask = 0; mask < (1 << m); ++mask) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = (mask & (1 << i)) ? r.sigma : -r.sigma;
    u.vertices.push_back(sqrt_cov * v + mean);
  }
  return u;
}

std::string QuantityKey::str() const {
  const char* tag = "?";
  switch (kind) {
    case QuantityKind::Reserve: tag = "reserve"; break;
    case QuantityKind::Voltage: tag = "voltage"; break;
    case QuantityKind::GenReactive: tag = "qgen"; break;
    case QuantityKind::Flow: tag = "flow"; break;
  }
  return std::string(tag) + ":" + std::to_string(index);
}

std::vector<VertexConstraint> emit_robust_constraints(const QuantityKey& key,
                                                      const UncertaintySet& u,
                                                      double lo, double hi) {
  std::vector<VertexConstraint> out;
  for (const auto& v : u.vertices) {
    VertexConstraint c;
    c.key = key;
    c.omega = v[0];
    c.t = v.size() > 1 ? v[1] : 0.0;
    c.lo = lo;
    c.hi = hi;
    out.push_back(c);
  }
  return out;
}

using json = nlohmann::json;

void SigmaCache::load(const std::string& path) {
  entries_.clear();
  std::ifstream in(path);
  if (!in) return;
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return;  // corrupt cache is just a miss
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      Entry e;
      e.eps = it.value().at("epsilon").get<double>();
      e.rho = it.value().at("rho").get<double>();
      e.hash = it.value().at("sample_hash").get<std::uint64_t>();
      e.result.feasible = it.value().at("feasible").get<bool>();
      e.result.sigma = it.value().at("sigma").get<double>();
      e.result.lambda = it.value().at("lambda").get<double>();
      e.result.level = it.value().at("level").get<double>();
      entries_[it.key()] = e;
    } catch (const json::exception&) {
      // skip malformed entries
    }
  }
}

void SigmaCache::save(const std::string& path) const {
  json j = json::object();
  for (const auto& [key, e] : entries_) {
    j[key] = {{"epsilon", e.eps},          {"rho", e.rho},
              {"sample_hash", e.hash},     {"feasible", e.result.feasible},
              {"sigma", e.result.sigma},   {"lambda", e.result.lambda},
              {"level", e.result.level}};
  }
  std::ofstream out(path);
  if (out) out << j.dump(1);
}

std::optional<HypercubeResult> SigmaCache::lookup(const std::string& key, double eps,
                                                  double rho,
                                                  std::uint64_t sample_hash) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  const Entry& e = it->second;
  if (e.eps != eps || e.rho != rho || e.hash != sample_hash) return std::nullopt;
  return e.result;
}

void SigmaCache::store(const std::string& key, double eps, double rho,
                       std::uint64_t sample_hash, const HypercubeResult& r) {
  entries_[key] = Entry{eps, rho, sample_hash, r};
}

}  // namespace wdropf
