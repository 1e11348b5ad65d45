#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdropf {

/// Error raised on malformed input files (case files, CSVs, JSON configs).
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// Error raised when parsed data violates a model invariant.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Minimize a unimodal scalar function on [a, b] by golden-section search.
/// Returns the argmin; stops when the bracket is below xtol.
double golden_min(const std::function<double(double)>& f, double a, double b,
                  double xtol = 1e-10, int max_iter = 200);

/// Minimize f over [a, +inf): doubles the right end of the bracket until the
/// minimum is interior (or the cap is hit), then golden-section.
double golden_min_extend(const std::function<double(double)>& f, double a, double b0,
                         double cap = 1e12, double xtol = 1e-10);

/// FNV-1a hash of a byte string; used for cache keys.
std::uint64_t fnv1a(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Split a CSV line on commas, trimming surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace wdropf
