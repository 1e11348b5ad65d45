#include "wdropf/wasserstein.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace wdropf {

SampleSet make_sample_set(const Eigen::MatrixXd& xi) {
  if (xi.rows() < 2) throw validation_error("need at least 2 samples");
  SampleSet s;
  s.xi = xi;
  const int N = s.n(), m = s.m();
  s.mean = xi.colwise().mean();
  Eigen::MatrixXd centered = xi.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / double(N - 1);
  // regularize: projected samples can be nearly collinear
  const double delta = 1e-8 * std::max(s.cov.trace(), 1e-12) / m;
  s.cov += delta * Eigen::MatrixXd::Identity(m, m);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  s.sqrt_cov = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  s.inv_sqrt_cov =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  s.standardized = centered * s.inv_sqrt_cov.transpose();
  s.d = s.standardized.cwiseAbs().rowwise().maxCoeff();
  return s;
}

bool SupportBox::contains(const Eigen::VectorXd& xi, double tol) const {
  Eigen::VectorXd t = inv_sqrt_cov * (xi - mean);
  return t.lpNorm<Eigen::Infinity>() <= sigma_max + tol;
}

namespace {

// Vertices of the standardized cube [-sigma, sigma]^m mapped affinely.
std::vector<Eigen::VectorXd> cube_vertices(double sigma, const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& sqrt_cov) {
  const int m = static_cast<int>(mean.size());
  std::vector<Eigen::VectorXd> out;
  for (int mask = 0; mask < (1 << m); ++mask) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = (mask & (1 << i)) ? sigma : -sigma;
    out.push_back(sqrt_cov * v + mean);
  }
  return out;
}

}  // namespace

SupportBox estimate_support(const SampleSet& s, double sigma_max) {
  SupportBox box;
  box.sigma_max = sigma_max;
  box.mean = s.mean;
  box.sqrt_cov = s.sqrt_cov;
  box.inv_sqrt_cov = s.inv_sqrt_cov;
  box.vertices = cube_vertices(sigma_max, s.mean, s.sqrt_cov);
  return box;
}

double estimate_C(const SampleSet& s) {
  Eigen::VectorXd sq(s.n());
  for (int k = 0; k < s.n(); ++k)
    sq[k] = std::pow((s.xi.row(k).transpose() - s.mean).lpNorm<1>(), 2);
  const double smax = sq.maxCoeff();
  if (smax < 1e-300) return 1e-12;  // all samples identical

  // g(a) = (1/2a)(1 + ln mean_k exp(a sq_k)), evaluated with log-sum-exp
  auto g = [&](double loga) {
    const double a = std::exp(loga);
    double acc = 0.0;
    for (int k = 0; k < s.n(); ++k) acc += std::exp(a * (sq[k] - smax));
    const double lme = a * smax + std::log(acc / s.n());
    return (1.0 + lme) / (2.0 * a);
  };
  const double lo = std::log(1e-6), hi = std::log(1e6);
  const double loga = golden_min(g, lo, hi, 1e-9);
  return 2.0 * std::sqrt(std::max(g(loga), 1e-24));
}

double l1_diameter(const SampleSet& s) {
  // the l1 norm in 1 or 2 dimensions is a max of linear functionals, so the
  // diameter is a max-minus-min over those functionals
  if (s.m() == 1) return s.xi.col(0).maxCoeff() - s.xi.col(0).minCoeff();
  if (s.m() == 2) {
    Eigen::VectorXd u = s.xi.col(0) + s.xi.col(1);
    Eigen::VectorXd w = s.xi.col(0) - s.xi.col(1);
    return std::max(u.maxCoeff() - u.minCoeff(), w.maxCoeff() - w.minCoeff());
  }
  // general fallback
  double best = 0.0;
  for (int i = 0; i < s.n(); ++i)
    for (int j = i + 1; j < s.n(); ++j)
      best = std::max(best, (s.xi.row(i) - s.xi.row(j)).lpNorm<1>());
  return best;
}

double radius(int n_samples, double beta, double C) {
  if (!(beta > 0.0 && beta < 1.0)) throw validation_error("beta must be in (0,1)");
  if (n_samples < 1) throw validation_error("need at least one sample");
  return C * std::sqrt(std::log(1.0 / (1.0 - beta)) / n_samples);
}

double radius_fallback(int n_samples, double beta, double diameter) {
  if (!(beta > 0.0 && beta < 1.0)) throw validation_error("beta must be in (0,1)");
  if (n_samples < 1) throw validation_error("need at least one sample");
  return diameter * std::sqrt(2.0 * std::log(1.0 / (1.0 - beta)) / n_samples);
}

AmbiguitySpec make_ambiguity(const SampleSet& s, double beta, double sigma_max) {
  AmbiguitySpec spec;
  spec.beta = beta;
  spec.C = estimate_C(s);
  spec.epsilon = radius(s.n(), beta, spec.C);
  spec.support = estimate_support(s, sigma_max);
  return spec;
}

Eigen::MatrixXd project_total(const Eigen::MatrixXd& zeta) {
  Eigen::MatrixXd out(zeta.rows(), 1);
  out.col(0) = zeta.rowwise().sum();
  return out;
}

Eigen::MatrixXd project_pair(const Eigen::MatrixXd& zeta, const Eigen::VectorXd& row) {
  Eigen::MatrixXd out(zeta.rows(), 2);
  out.col(0) = zeta.rowwise().sum();
  out.col(1) = zeta * row;
  return out;
}

Eigen::MatrixXd read_samples_csv(const std::string& path, std::vector<int>* bus_ids) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open sample file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty sample file: " + path);
  auto header = split_csv_line(line);
  std::vector<int> ids;
  for (const auto& h : header) {
    try {
      ids.push_back(std::stoi(h));
    } catch (...) {
      throw parse_error("sample header must be wind-farm bus ids, got '" + h + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != ids.size())
      throw parse_error("sample line " + std::to_string(lineno) + ": expected " +
                        std::to_string(ids.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (...) {
        throw parse_error("sample line " + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    rows.push_back(row);
  }
  Eigen::MatrixXd out(rows.size(), ids.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < ids.size(); ++c) out(r, c) = rows[r][c];
  if (bus_ids) *bus_ids = ids;
  return out;
}

void write_samples_csv(const std::string& path, const std::vector<int>& bus_ids,
                       const Eigen::MatrixXd& zeta) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot write sample file: " + path);
  for (std::size_t i = 0; i < bus_ids.size(); ++i) out << (i ? "," : "") << bus_ids[i];
  out << "\n";
  out.precision(12);
  for (int r = 0; r < zeta.rows(); ++r) {
    for (int c = 0; c < zeta.cols(); ++c) out << (c ? "," : "") << zeta(r, c);
    out << "\n";
  }
}

}  // namespace wdropf
