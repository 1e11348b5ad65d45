#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wdropf/util.hpp"

namespace wdropf {

// Bus categories follow the usual power-flow convention: the reference bus
// fixes angle and voltage, PV buses fix active power and voltage, PQ buses
// fix both injections.
enum class BusKind { Reference, PV, PQ };

struct Bus {
  int id = 0;           // external id as it appears in the case file
  double pd = 0.0;      // active load, p.u.
  double qd = 0.0;      // reactive load, p.u.
  double gs = 0.0;      // shunt conductance, p.u.
  double bs = 0.0;      // shunt susceptance, p.u.
  double vmin = 0.94;   // p.u.
  double vmax = 1.06;   // p.u.
};

struct Branch {
  int from = 0;  // internal bus index
  int to = 0;    // internal bus index
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;      // total line charging susceptance
  double rate = 0.0;   // MW flow limit, p.u.; 0 means unlimited
  double tap = 1.0;    // off-nominal tap ratio, folded into the pi model
  bool online = true;
};

struct Generator {
  int bus = 0;  // internal bus index
  double pmin = 0.0, pmax = 0.0;  // p.u.
  double qmin = 0.0, qmax = 0.0;  // p.u.
  // Quadratic cost f(p) = c2*p^2 + c1*p + c0 with p in p.u., cost in $/h.
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
  // Reserve prices, $/p.u./h.
  double cr_up = 0.0, cr_dn = 0.0;
  bool online = true;
};

struct WindFarm {
  int bus = 0;            // internal bus index
  double capacity = 0.0;  // p.u.
  double forecast = 0.0;  // p.u.
  double power_factor = 1.0;
  // Reactive coupling sigma = tan(phi); zero at unity power factor.
  double sigma() const;
};

/// Immutable parsed network. Buses are stored in file order; all cross
/// references use internal indices 0..n_b-1.
struct Network {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<WindFarm> wind_farms;

  int ref_bus = -1;              // internal index
  std::vector<int> pv_buses;     // internal indices, ascending
  std::vector<int> pq_buses;     // internal indices, ascending

  int n_bus() const { return static_cast<int>(buses.size()); }
  int n_branch() const { return static_cast<int>(branches.size()); }
  int n_gen() const { return static_cast<int>(generators.size()); }
  int n_wind() const { return static_cast<int>(wind_farms.size()); }

  BusKind bus_kind(int bus_index) const;
  /// Internal index for an external bus id; throws if unknown.
  int bus_index(int external_id) const;

  /// Generators attached to a bus (internal index).
  std::vector<int> gens_at_bus(int bus_index) const;

  /// Nominal wind injections aggregated per bus (p.u.).
  Eigen::VectorXd wind_p() const;
  Eigen::VectorXd wind_q() const;
};

enum class CaseFormat { MatpowerM, NativeJson };

/// Parse case text in the given format into a validated Network.
Network parse_case(const std::string& text, CaseFormat format);

/// Parse from file; format chosen by extension (.m or .json).
Network parse_case_file(const std::string& path);

/// Serialize to the native JSON schema (lossless round trip).
std::string to_native_json(const Network& net);

struct AdmittanceSet {
  Eigen::MatrixXd G, B;     // bus admittance Y = G + jB
  Eigen::MatrixXd Bprime;   // susceptance matrix without shunt elements
  Eigen::MatrixXd Gl, Bl;   // n_l x n_b line maps (G^l_{ki} = -G^l_{kj} = G_ij)
};

/// Standard pi-model assembly. Requires a connected in-service branch graph.
AdmittanceSet build_admittance(const Network& net);

}  // namespace wdropf
