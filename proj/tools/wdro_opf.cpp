// Command line front end: case inspection, dispatch solves, Monte Carlo
// evaluation, benchmark sweeps, and synthetic sample generation.
//
// Exit codes: 0 success, 2 infeasible, 3 solver failure, 4 input error.
#include "CLI11.hpp"
#include "json.hpp"
#include "wdropf/simlab.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

using namespace wdropf;
using nlohmann::json;

namespace {

Eigen::MatrixXd load_samples(const std::string& path, int n_wind) {
  Eigen::MatrixXd z = read_samples_csv(path);
  if (z.cols() != n_wind)
    throw parse_error(path + ": expected " + std::to_string(n_wind) + " columns, got " +
                      std::to_string(z.cols()));
  return z;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shared command-line state; one struct keeps the flag set identical
/// across subcommands.
struct Options {
  std::string case_path, samples_path, protocol_path, method = "wdro";
  double rho = 0.05, beta = 0.9, sigma_max = 10.0;
  long n_mc = 10000;
  std::uint64_t seed = 1;
  std::string cache_dir, out_dir = ".";
  int jobs = 1;
  std::string strategy_path;  // evaluate only

  void add_common(CLI::App* cmd, bool with_method = true) {
    cmd->add_option("--case", case_path, "Network case file (.m or .json)")->required();
    cmd->add_option("--samples", samples_path, "Historical forecast-error CSV");
    cmd->add_option("--protocol", protocol_path, "Sampling protocol JSON");
    if (with_method)
      cmd->add_option("--method", method,
                      "Solution method: wdro | ro | mdro | gsp | dc (sweep: comma list)");
    cmd->add_option("--rho", rho, "Per-constraint violation level");
    cmd->add_option("--beta", beta, "Ambiguity ball confidence level");
    cmd->add_option("--sigma-max", sigma_max, "Support box half width, standardized");
    cmd->add_option("--n-mc", n_mc, "Monte Carlo trials / generated samples");
    cmd->add_option("--seed", seed, "Sampling seed (overrides the protocol's)");
    cmd->add_option("--cache-dir", cache_dir, "Hypercube sizing cache directory");
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--jobs", jobs, "Parallel workers");
  }

  std::string effective_cache() const {
    const char* env = std::getenv("WDRO_OPF_CACHE");
    return env && *env ? std::string(env) : cache_dir;
  }

  RngProtocol load_protocol() const {
    RngProtocol p;
    if (!protocol_path.empty()) p = protocol_from_json(read_file(protocol_path));
    p.seed = seed;
    return p;
  }

  /// Extra keys read straight from the protocol file (the RngProtocol
  /// parser ignores them): training-sample count and sweep grid.
  json protocol_extras() const {
    if (protocol_path.empty()) return json::object();
    return json::parse(read_file(protocol_path));
  }
};

/// Hash tying artifacts to the network and solve settings.
std::uint64_t config_hash(const Options& o, const std::string& method) {
  std::string key = read_file(o.case_path);
  char buf[160];
  std::snprintf(buf, sizeof buf, "|%s|%.12g|%.12g|%.12g", method.c_str(), o.rho, o.beta,
                o.sigma_max);
  key += buf;
  return fnv1a(key);
}

int status_code(SolveStatus s) {
  if (s == SolveStatus::Optimal) return 0;
  return s == SolveStatus::Infeasible ? 2 : 3;
}

Eigen::MatrixXd training_samples(const Options& o, const Network& net) {
  if (!o.samples_path.empty()) return load_samples(o.samples_path, net.n_wind());
  if (o.protocol_path.empty())
    throw parse_error("either --samples or --protocol is required");
  const json extras = o.protocol_extras();
  const int n = extras.value("n_samples", 100);
  return generate_samples(o.load_protocol(), net, n);
}

void write_outputs(const Options& o, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(o.out_dir);
  write_file(o.out_dir + "/" + name, text);
}

int cmd_solve(const Options& o) {
  Network net = parse_case_file(o.case_path);
  Eigen::MatrixXd zeta = training_samples(o, net);
  SolveConfig cfg;
  cfg.method = parse_method(o.method);
  cfg.rho = o.rho;
  cfg.beta = o.beta;
  cfg.sigma_max = o.sigma_max;
  cfg.cache_dir = o.effective_cache();
  SolveOutcome out = solve_with_enforcement(net, zeta, cfg);
  if (out.report.cache_hits > 0)
    std::printf("cache hit: %d hypercube sizings skipped\n", out.report.cache_hits);

  json j = json::parse(outcome_to_json(out, net, cfg.method));
  j["config_hash"] = hex64(config_hash(o, o.method));
  j["case_hash"] = hex64(fnv1a(read_file(o.case_path)));
  j["n_samples"] = zeta.rows();
  write_outputs(o, "strategy.json", j.dump(2));

  std::ostringstream sum;
  sum << "method: " << o.method << "\nstatus: " << j["status"].get<std::string>() << "\n";
  if (out.status == SolveStatus::Optimal) {
    double rup = 0, rdn = 0;
    for (int g = 0; g < net.n_gen(); ++g) {
      rup += out.strategy.r_up[g];
      rdn += out.strategy.r_dn[g];
    }
    char line[256];
    std::snprintf(line, sizeof line,
                  "objective bound: %.4f $/h\nnominal cost: %.4f $/h\n"
                  "reserves up/down: %.4f / %.4f p.u.\n"
                  "rounds: %d  robust rows: %d  ipm iterations: %d\n"
                  "kkt: %.3g  solve time: %.2f s\n",
                  out.report.objective.bound, out.report.objective.nominal, rup, rdn,
                  out.report.rounds, out.report.robust_rows, out.report.ipm_iterations,
                  out.report.kkt, out.report.seconds);
    sum << line;
  }
  write_outputs(o, "summary.txt", sum.str());
  std::printf("%s\n", sum.str().c_str());
  return status_code(out.status);
}

int cmd_evaluate(const Options& o) {
  Network net = parse_case_file(o.case_path);
  json sj = json::parse(read_file(o.strategy_path));
  if (sj.value("status", "") != "optimal")
    throw validation_error("strategy artifact is not an optimal solve");
  const std::string want = hex64(fnv1a(read_file(o.case_path)));
  if (sj.value("case_hash", want) != want)
    throw validation_error("strategy was solved on a different case file");
  OperatingStrategy s = strategy_from_json(sj.dump());

  EvaluationReport rep;
  if (!o.samples_path.empty()) {
    Eigen::MatrixXd z = load_samples(o.samples_path, net.n_wind());
    rep = evaluate_strategy(net, s, z, ResponseModel::FullAc, o.jobs);
  } else {
    rep = evaluate_protocol(net, s, o.load_protocol(), o.n_mc, ResponseModel::FullAc, o.jobs);
  }

  json j = json::parse(report_to_json(rep));
  j["cost_se"] = rep.cost_se();
  j["config_hash"] = sj.value("config_hash", "");
  write_outputs(o, "report.json", j.dump(2));

  std::string hist = "deployment_lo,deployment_hi,count\n";
  for (std::size_t b = 0; b + 1 < rep.reserve_use_edges.size(); ++b) {
    char line[96];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%ld\n", rep.reserve_use_edges[b],
                  rep.reserve_use_edges[b + 1], rep.reserve_use_counts[b]);
    hist += line;
  }
  write_outputs(o, "reserve_use.csv", hist);
  std::printf("trials: %ld  failed: %ld\nmean cost: %.4f +- %.4f $/h\n"
              "lowest reliability: %.5f\n",
              rep.n_trials, rep.failed_trials, rep.mean_cost, rep.cost_se(),
              rep.lowest_reliability);
  return 0;
}

struct SweepCell {
  std::string method;
  int n_samples = 0;
  std::string status = "Error";
  double bound = 0, cost = 0, cost_se = 0, rup = 0, rdn = 0, low_rel = 0;
  double t_solve = 0, t_eval = 0;
};

int cmd_sweep(const Options& o) {
  Network net = parse_case_file(o.case_path);
  if (o.protocol_path.empty()) throw parse_error("sweep needs --protocol");
  const json extras = o.protocol_extras();
  std::vector<int> sizes;
  if (extras.contains("sample_sizes"))
    for (const auto& v : extras["sample_sizes"]) sizes.push_back(v.get<int>());
  else
    sizes = {100, 1000, 10000};

  std::vector<std::string> methods;
  {
    std::stringstream ss(o.method);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) methods.push_back(tok);
  }
  std::vector<SweepCell> cells;
  for (const auto& m : methods)
    for (int n : sizes) cells.push_back({m, n});

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      SweepCell& c = cells[i];
      try {
        RngProtocol p = o.load_protocol();
        SolveConfig cfg;
        cfg.method = parse_method(c.method);
        cfg.rho = o.rho;
        cfg.beta = o.beta;
        cfg.sigma_max = o.sigma_max;
        cfg.cache_dir = o.effective_cache();
        SolveOutcome out =
            solve_with_enforcement(net, generate_samples(p, net, c.n_samples), cfg);
        c.t_solve = out.report.seconds;
        if (out.status != SolveStatus::Optimal) {
          c.status = out.status == SolveStatus::Infeasible ? "Infeasible" : "Error";
          continue;
        }
        RngProtocol truth = p;
        truth.seed = p.seed + 0x5EEDu;  // out-of-sample draw
        const auto t0 = std::chrono::steady_clock::now();
        EvaluationReport rep =
            evaluate_protocol(net, out.strategy, truth, o.n_mc, ResponseModel::FullAc);
        c.t_eval = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        c.status = "Optimal";
        c.bound = out.report.objective.bound;
        c.cost = rep.mean_cost;
        c.cost_se = rep.cost_se();
        c.low_rel = rep.lowest_reliability;
        for (int g = 0; g < net.n_gen(); ++g) {
          c.rup += out.strategy.r_up[g];
          c.rdn += out.strategy.r_dn[g];
        }
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep cell %s/%d: %s\n", c.method.c_str(), c.n_samples,
                     e.what());
        c.status = "Error";
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(o.jobs, cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::string csv =
      "method,n_samples,status,objective_bound,simulated_cost,cost_se,"
      "reserve_up,reserve_dn,lowest_reliability,solve_s,eval_s\n";
  for (const auto& c : cells) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%d,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.5f,%.2f,%.2f\n",
                  c.method.c_str(), c.n_samples, c.status.c_str(), c.bound, c.cost,
                  c.cost_se, c.rup, c.rdn, c.low_rel, c.t_solve, c.t_eval);
    csv += line;
  }
  write_outputs(o, "sweep.csv", csv);
  std::printf("%s", csv.c_str());
  return 0;
}

int cmd_gen_samples(const Options& o) {
  Network net = parse_case_file(o.case_path);
  Eigen::MatrixXd z = generate_samples(o.load_protocol(), net, o.n_mc);
  std::vector<int> bus_ids;
  for (const auto& f : net.wind_farms) bus_ids.push_back(net.buses[f.bus].id);
  std::filesystem::create_directories(o.out_dir);
  write_samples_csv(o.out_dir + "/samples.csv", bus_ids, z);
  std::printf("wrote %ld samples for %d farms\n", static_cast<long>(z.rows()), net.n_wind());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust chance-constrained AC-OPF"};
  app.require_subcommand(1);

  Options opt;
  auto* info = app.add_subcommand("info", "Print a summary of a case file");
  info->add_option("--case", opt.case_path, "Network case file (.m or .json)")->required();

  auto* solve = app.add_subcommand("solve", "Compute a dispatch strategy");
  opt.add_common(solve);

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo validation of a strategy");
  opt.add_common(evaluate, false);
  evaluate->add_option("strategy", opt.strategy_path, "strategy.json from solve")->required();

  auto* sweep = app.add_subcommand("sweep", "Benchmark methods across sample sizes");
  opt.add_common(sweep);

  auto* gen = app.add_subcommand("gen-samples", "Write synthetic forecast-error samples");
  opt.add_common(gen, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (info->parsed()) {
      auto net = parse_case_file(opt.case_path);
      std::printf("buses=%d branches=%d generators=%d wind_farms=%d base=%g MVA\n",
                  net.n_bus(), net.n_branch(), net.n_gen(), net.n_wind(), net.base_mva);
      return 0;
    }
    if (solve->parsed()) return cmd_solve(opt);
    if (evaluate->parsed()) return cmd_evaluate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (gen->parsed()) return cmd_gen_samples(opt);
  } catch (const parse_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 4;
  } catch (const validation_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
