#include "wdropf/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include "json.hpp"
#include <queue>
#include <sstream>

namespace wdropf {

using json = nlohmann::json;

double WindFarm::sigma() const {
  double c = power_factor;
  return std::sqrt(std::max(0.0, 1.0 - c * c)) / c;
}

BusKind Network::bus_kind(int bus_index) const {
  if (bus_index == ref_bus) return BusKind::Reference;
  if (std::binary_search(pv_buses.begin(), pv_buses.end(), bus_index)) return BusKind::PV;
  return BusKind::PQ;
}

int Network::bus_index(int external_id) const {
  for (int i = 0; i < n_bus(); ++i)
    if (buses[i].id == external_id) return i;
  throw validation_error("unknown bus id " + std::to_string(external_id));
}

std::vector<int> Network::gens_at_bus(int bus_index) const {
  std::vector<int> out;
  for (int g = 0; g < n_gen(); ++g)
    if (generators[g].online && generators[g].bus == bus_index) out.push_back(g);
  return out;
}

Eigen::VectorXd Network::wind_p() const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_bus());
  for (const auto& w : wind_farms) p[w.bus] += w.forecast;
  return p;
}

Eigen::VectorXd Network::wind_q() const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n_bus());
  for (const auto& w : wind_farms) q[w.bus] += w.forecast * w.sigma();
  return q;
}

namespace {

// ---------------------------------------------------------------------------
// MATPOWER .m subset
// ---------------------------------------------------------------------------

struct Matrix {
  std::vector<std::vector<double>> rows;
};

// Extract "mpc.<name> = [ ... ];" numeric blocks and scalar assignments.
class MFile {
 public:
  explicit MFile(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::string pending_name;
    Matrix pending;
    bool in_matrix = false;
    while (std::getline(in, line)) {
      ++lineno;
      auto pct = line.find('%');
      if (pct != std::string::npos) line = line.substr(0, pct);
      if (!in_matrix) {
        auto eq = line.find('=');
        auto mpc = line.find("mpc.");
        if (mpc == std::string::npos || eq == std::string::npos) continue;
        std::string name = trim(line.substr(mpc + 4, eq - mpc - 4));
        std::string rhs = trim(line.substr(eq + 1));
        if (rhs.empty()) continue;
        if (rhs[0] == '[') {
          pending_name = name;
          pending = Matrix{};
          in_matrix = true;
          rhs = rhs.substr(1);
          in_matrix = !consume_rows(rhs, pending, lineno);
          if (!in_matrix) matrices_[pending_name] = pending;
        } else {
          // scalar like "mpc.baseMVA = 100;"
          std::string num = rhs;
          if (!num.empty() && num.back() == ';') num.pop_back();
          try {
            scalars_[name] = std::stod(num);
          } catch (...) {
            // non-numeric assignment (e.g. mpc.version = '2'); ignore
          }
        }
      } else {
        in_matrix = !consume_rows(line, pending, lineno);
        if (!in_matrix) matrices_[pending_name] = pending;
      }
    }
    if (in_matrix)
      throw parse_error("unterminated matrix 'mpc." + pending_name + "'");
  }

  bool has(const std::string& name) const { return matrices_.count(name) > 0; }
  const Matrix& matrix(const std::string& name) const {
    auto it = matrices_.find(name);
    if (it == matrices_.end()) throw parse_error("missing required block 'mpc." + name + "'");
    return it->second;
  }
  double scalar(const std::string& name) const {
    auto it = scalars_.find(name);
    if (it == scalars_.end()) throw parse_error("missing scalar 'mpc." + name + "'");
    return it->second;
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
  }

  // Append numbers from a line to the matrix; returns true when ']' was seen.
  static bool consume_rows(std::string line, Matrix& m, int lineno) {
    bool closed = false;
    auto close = line.find(']');
    if (close != std::string::npos) {
      line = line.substr(0, close);
      closed = true;
    }
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> row;
    auto flush = [&]() {
      if (!row.empty()) {
        m.rows.push_back(row);
        row.clear();
      }
    };
    while (ls >> tok) {
      bool ends_row = false;
      if (!tok.empty() && tok.back() == ';') {
        tok.pop_back();
        ends_row = true;
      }
      if (!tok.empty()) {
        try {
          row.push_back(std::stod(tok));
        } catch (...) {
          throw parse_error("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
        }
      }
      if (ends_row) flush();
    }
    flush();
    return closed;
  }

  std::map<std::string, Matrix> matrices_;
  std::map<std::string, double> scalars_;
};

Network parse_matpower(const std::string& text) {
  MFile mf(text);
  Network net;
  net.base_mva = mf.scalar("baseMVA");
  if (net.base_mva <= 0) throw validation_error("baseMVA must be positive");
  const double S = net.base_mva;

  std::map<int, int> id2idx;
  std::vector<int> bus_type;
  for (const auto& row : mf.matrix("bus").rows) {
    if (row.size() < 13)
      throw parse_error("bus row has " + std::to_string(row.size()) + " columns, need 13");
    Bus b;
    b.id = static_cast<int>(row[0]);
    b.pd = row[2] / S;
    b.qd = row[3] / S;
    b.gs = row[4] / S;
    b.bs = row[5] / S;
    b.vmax = row[11];
    b.vmin = row[12];
    if (!(b.vmin > 0 && b.vmin <= b.vmax))
      throw validation_error("bus " + std::to_string(b.id) + ": need 0 < vmin <= vmax");
    if (id2idx.count(b.id)) throw validation_error("duplicate bus id " + std::to_string(b.id));
    id2idx[b.id] = net.n_bus();
    bus_type.push_back(static_cast<int>(row[1]));
    net.buses.push_back(b);
  }

  auto need_bus = [&](double id_d, const std::string& ctx) {
    int id = static_cast<int>(id_d);
    auto it = id2idx.find(id);
    if (it == id2idx.end())
      throw validation_error(ctx + " references unknown bus " + std::to_string(id));
    return it->second;
  };

  for (const auto& row : mf.matrix("branch").rows) {
    if (row.size() < 11) throw parse_error("branch row needs at least 11 columns");
    Branch br;
    br.from = need_bus(row[0], "branch");
    br.to = need_bus(row[1], "branch");
    br.r = row[2];
    br.x = row[3];
    br.b = row[4];
    br.rate = row[5] / S;
    br.tap = (row[8] == 0.0) ? 1.0 : row[8];
    if (row[9] != 0.0)
      throw validation_error("branch " + std::to_string(net.buses[br.from].id) + "-" +
                             std::to_string(net.buses[br.to].id) +
                             ": phase shifters are not supported");
    br.online = row[10] != 0.0;
    if (br.x == 0.0) throw validation_error("branch with zero reactance");
    net.branches.push_back(br);
  }

  const auto& genm = mf.matrix("gen");
  for (const auto& row : genm.rows) {
    if (row.size() < 10) throw parse_error("gen row needs at least 10 columns");
    Generator g;
    g.bus = need_bus(row[0], "gen");
    g.qmax = row[3] / S;
    g.qmin = row[4] / S;
    g.online = row[7] != 0.0;
    g.pmax = row[8] / S;
    g.pmin = row[9] / S;
    if (g.pmin > g.pmax) throw validation_error("gen: pmin > pmax");
    net.generators.push_back(g);
  }

  const auto& costm = mf.matrix("gencost");
  if (costm.rows.size() != net.generators.size())
    throw validation_error("gencost rows must match gen rows");
  for (std::size_t i = 0; i < costm.rows.size(); ++i) {
    const auto& row = costm.rows[i];
    if (row.size() < 4 || row[0] != 2)
      throw parse_error("gencost: only polynomial (model 2) costs are supported");
    int ncoef = static_cast<int>(row[3]);
    if (row.size() < 4 + static_cast<std::size_t>(ncoef))
      throw parse_error("gencost row too short");
    // Coefficients are highest order first, in $/MW^k h; convert to p.u.
    double c2 = 0, c1 = 0, c0 = 0;
    if (ncoef == 3) {
      c2 = row[4];
      c1 = row[5];
      c0 = row[6];
    } else if (ncoef == 2) {
      c1 = row[4];
      c0 = row[5];
    } else {
      throw parse_error("gencost: need 2 or 3 polynomial coefficients");
    }
    if (c2 < 0 || c1 < 0 || c0 < 0)
      throw validation_error("gencost: coefficients must be nonnegative");
    net.generators[i].c2 = c2 * S * S;
    net.generators[i].c1 = c1 * S;
    net.generators[i].c0 = c0;
  }

  if (mf.has("reserve_cost")) {
    const auto& rm = mf.matrix("reserve_cost");
    if (rm.rows.size() != net.generators.size())
      throw validation_error("reserve_cost rows must match gen rows");
    for (std::size_t i = 0; i < rm.rows.size(); ++i) {
      if (rm.rows[i].size() < 2) throw parse_error("reserve_cost row needs 2 columns");
      net.generators[i].cr_up = rm.rows[i][0] * S;
      net.generators[i].cr_dn = rm.rows[i][1] * S;
    }
  }

  if (mf.has("wind")) {
    for (const auto& row : mf.matrix("wind").rows) {
      if (row.size() < 4) throw parse_error("wind row needs 4 columns: bus cap_mw fcst_mw pf");
      WindFarm w;
      w.bus = need_bus(row[0], "wind");
      w.capacity = row[1] / S;
      w.forecast = row[2] / S;
      w.power_factor = row[3];
      net.wind_farms.push_back(w);
    }
  }

  // Partition: reference bus from type 3; PV = other buses with in-service
  // generators; PQ = the rest (regardless of the declared bus type).
  int n_ref = 0;
  for (int i = 0; i < net.n_bus(); ++i)
    if (bus_type[i] == 3) {
      net.ref_bus = i;
      ++n_ref;
    }
  if (n_ref != 1)
    throw validation_error("need exactly one reference bus, found " + std::to_string(n_ref));
  for (int i = 0; i < net.n_bus(); ++i) {
    if (i == net.ref_bus) continue;
    if (!net.gens_at_bus(i).empty())
      net.pv_buses.push_back(i);
    else
      net.pq_buses.push_back(i);
  }
  return net;
}

// ---------------------------------------------------------------------------
// Native JSON schema
// ---------------------------------------------------------------------------

Network parse_native_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("JSON parse error: ") + e.what());
  }
  Network net;
  try {
    net.base_mva = j.at("base_mva").get<double>();
    const double S = net.base_mva;
    std::map<int, int> id2idx;
    int ref_id = j.at("reference_bus").get<int>();
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      b.pd = jb.at("pd_mw").get<double>() / S;
      b.qd = jb.at("qd_mvar").get<double>() / S;
      b.gs = jb.value("gs_mw", 0.0) / S;
      b.bs = jb.value("bs_mvar", 0.0) / S;
      b.vmin = jb.at("vmin").get<double>();
      b.vmax = jb.at("vmax").get<double>();
      if (!(b.vmin > 0 && b.vmin <= b.vmax))
        throw validation_error("bus " + std::to_string(b.id) + ": need 0 < vmin <= vmax");
      if (id2idx.count(b.id)) throw validation_error("duplicate bus id");
      id2idx[b.id] = net.n_bus();
      net.buses.push_back(b);
    }
    auto idx = [&](int id, const char* ctx) {
      auto it = id2idx.find(id);
      if (it == id2idx.end())
        throw validation_error(std::string(ctx) + " references unknown bus " + std::to_string(id));
      return it->second;
    };
    for (const auto& jb : j.at("branches")) {
      Branch br;
      br.from = idx(jb.at("from").get<int>(), "branch");
      br.to = idx(jb.at("to").get<int>(), "branch");
      br.r = jb.at("r").get<double>();
      br.x = jb.at("x").get<double>();
      br.b = jb.value("b", 0.0);
      br.rate = jb.value("rate_mw", 0.0) / S;
      br.tap = jb.value("tap", 1.0);
      if (br.tap == 0.0) br.tap = 1.0;
      if (jb.value("shift_deg", 0.0) != 0.0)
        throw validation_error("phase shifters are not supported");
      br.online = jb.value("online", true);
      if (br.x == 0.0) throw validation_error("branch with zero reactance");
      net.branches.push_back(br);
    }
    for (const auto& jg : j.at("generators")) {
      Generator g;
      g.bus = idx(jg.at("bus").get<int>(), "generator");
      g.pmin = jg.at("pmin_mw").get<double>() / S;
      g.pmax = jg.at("pmax_mw").get<double>() / S;
      g.qmin = jg.at("qmin_mvar").get<double>() / S;
      g.qmax = jg.at("qmax_mvar").get<double>() / S;
      g.c2 = jg.at("cost_c2").get<double>() * S * S;  // $/MW^2 h in the file
      g.c1 = jg.at("cost_c1").get<double>() * S;
      g.c0 = jg.at("cost_c0").get<double>();
      g.cr_up = jg.value("reserve_price_up", 0.0) * S;
      g.cr_dn = jg.value("reserve_price_dn", 0.0) * S;
      g.online = jg.value("online", true);
      if (g.c2 < 0 || g.c1 < 0 || g.c0 < 0)
        throw validation_error("generator cost coefficients must be nonnegative");
      if (g.pmin > g.pmax) throw validation_error("generator: pmin > pmax");
      net.generators.push_back(g);
    }
    for (const auto& jw : j.value("wind_farms", json::array())) {
      WindFarm w;
      w.bus = idx(jw.at("bus").get<int>(), "wind farm");
      w.capacity = jw.at("capacity_mw").get<double>() / S;
      w.forecast = jw.at("forecast_mw").get<double>() / S;
      w.power_factor = jw.value("power_factor", 1.0);
      net.wind_farms.push_back(w);
    }
    net.ref_bus = idx(ref_id, "reference_bus");
    for (int i = 0; i < net.n_bus(); ++i) {
      if (i == net.ref_bus) continue;
      if (!net.gens_at_bus(i).empty())
        net.pv_buses.push_back(i);
      else
        net.pq_buses.push_back(i);
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("JSON schema error: ") + e.what());
  }
  return net;
}

void validate(const Network& net) {
  if (net.n_bus() == 0) throw validation_error("empty network");
  if (net.ref_bus < 0) throw validation_error("no reference bus");
  if (net.gens_at_bus(net.ref_bus).empty())
    throw validation_error("reference bus has no in-service generator");
  for (const auto& w : net.wind_farms) {
    if (!(w.forecast >= 0 && w.forecast <= w.capacity))
      throw validation_error("wind farm at bus " + std::to_string(net.buses[w.bus].id) +
                             ": need 0 <= forecast <= capacity");
    if (!(w.power_factor > 0 && w.power_factor <= 1.0))
      throw validation_error("wind farm power factor must be in (0, 1]");
  }
  for (const auto& br : net.branches)
    if (br.online && br.rate < 0) throw validation_error("negative branch rating");
  // Connectivity over in-service branches.
  std::vector<std::vector<int>> adj(net.n_bus());
  for (const auto& br : net.branches)
    if (br.online) {
      adj[br.from].push_back(br.to);
      adj[br.to].push_back(br.from);
    }
  std::vector<bool> seen(net.n_bus(), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
  }
  if (count != net.n_bus()) throw validation_error("branch graph is not connected");
}

}  // namespace

Network parse_case(const std::string& text, CaseFormat format) {
  Network net = (format == CaseFormat::MatpowerM) ? parse_matpower(text) : parse_native_json(text);
  validate(net);
  return net;
}

Network parse_case_file(const std::string& path) {
  CaseFormat fmt;
  if (path.size() > 2 && path.substr(path.size() - 2) == ".m")
    fmt = CaseFormat::MatpowerM;
  else if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
    fmt = CaseFormat::NativeJson;
  else
    throw parse_error("unrecognized case file extension: " + path);
  return parse_case(read_file(path), fmt);
}

std::string to_native_json(const Network& net) {
  const double S = net.base_mva;
  json j;
  j["base_mva"] = S;
  j["reference_bus"] = net.buses[net.ref_bus].id;
  j["buses"] = json::array();
  for (const auto& b : net.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"pd_mw", b.pd * S},
                          {"qd_mvar", b.qd * S},
                          {"gs_mw", b.gs * S},
                          {"bs_mvar", b.bs * S},
                          {"vmin", b.vmin},
                          {"vmax", b.vmax}});
  }
  j["branches"] = json::array();
  for (const auto& br : net.branches) {
    j["branches"].push_back({{"from", net.buses[br.from].id},
                             {"to", net.buses[br.to].id},
                             {"r", br.r},
                             {"x", br.x},
                             {"b", br.b},
                             {"rate_mw", br.rate * S},
                             {"tap", br.tap},
                             {"online", br.online}});
  }
  j["generators"] = json::array();
  for (const auto& g : net.generators) {
    j["generators"].push_back({{"bus", net.buses[g.bus].id},
                               {"pmin_mw", g.pmin * S},
                               {"pmax_mw", g.pmax * S},
                               {"qmin_mvar", g.qmin * S},
                               {"qmax_mvar", g.qmax * S},
                               {"cost_c2", g.c2 / (S * S)},
                               {"cost_c1", g.c1 / S},
                               {"cost_c0", g.c0},
                               {"reserve_price_up", g.cr_up / S},
                               {"reserve_price_dn", g.cr_dn / S},
                               {"online", g.online}});
  }
  j["wind_farms"] = json::array();
  for (const auto& w : net.wind_farms) {
    j["wind_farms"].push_back({{"bus", net.buses[w.bus].id},
                               {"capacity_mw", w.capacity * S},
                               {"forecast_mw", w.forecast * S},
                               {"power_factor", w.power_factor}});
  }
  return j.dump(2);
}

AdmittanceSet build_admittance(const Network& net) {
  const int nb = net.n_bus();
  const int nl = net.n_branch();
  AdmittanceSet adm;
  adm.G = Eigen::MatrixXd::Zero(nb, nb);
  adm.B = Eigen::MatrixXd::Zero(nb, nb);
  adm.Bprime = Eigen::MatrixXd::Zero(nb, nb);
  adm.Gl = Eigen::MatrixXd::Zero(nl, nb);
  adm.Bl = Eigen::MatrixXd::Zero(nl, nb);

  for (int k = 0; k < nl; ++k) {
    const auto& br = net.branches[k];
    if (!br.online) continue;
    const double denom = br.r * br.r + br.x * br.x;
    const double g = br.r / denom;
    const double b = -br.x / denom;
    const double t = br.tap;
    const int i = br.from, j = br.to;
    // pi model with off-nominal tap on the from side
    adm.G(i, i) += g / (t * t);
    adm.B(i, i) += (b + br.b / 2.0) / (t * t);
    adm.G(j, j) += g;
    adm.B(j, j) += b + br.b / 2.0;
    adm.G(i, j) += -g / t;
    adm.B(i, j) += -b / t;
    adm.G(j, i) += -g / t;
    adm.B(j, i) += -b / t;
    // series-only susceptance (no charging, no shunts)
    adm.Bprime(i, i) += b / (t * t);
    adm.Bprime(j, j) += b;
    adm.Bprime(i, j) += -b / t;
    adm.Bprime(j, i) += -b / t;
    // line maps carry the off-diagonal admittance entries
    adm.Gl(k, i) = -g / t;
    adm.Gl(k, j) = g / t;
    adm.Bl(k, i) = -b / t;
    adm.Bl(k, j) = b / t;
  }
  for (int i = 0; i < nb; ++i) {
    adm.G(i, i) += net.buses[i].gs;
    adm.B(i, i) += net.buses[i].bs;
  }
  return adm;
}

}  // namespace wdropf
