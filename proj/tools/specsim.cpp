// specsim: command-line front end for the speculative-decoding simulator.
//
//   specsim run     --config run.json [--set key=value]... [--seed N] [--out DIR]
//                   [--emit-trace] [--acceptance NAME] [--trace FILE] [--lenient] [--verbose]
//   specsim sweep   --config sweep.json [--out DIR] [--jobs N] [--seed N] [--lenient] [--verbose]
//   specsim oracle  --alpha A --c C [--gamma-max G]
//   specsim profiles
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "specsim/acceptance.hpp"
#include "specsim/cost.hpp"
#include "specsim/model.hpp"
#include "specsim/sim.hpp"
#include "specsim/sweep.hpp"

namespace fs = std::filesystem;
using namespace specsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SPECSIM_OUT"); env && *env) return env;
  return "specsim-out";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string acceptance;
  std::string trace;
  bool emit_trace = false;
  bool lenient = false;
  bool verbose = false;
};

int cmd_run(const RunOptions& o) {
  json doc = read_json_file(o.config);
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (o.seed) doc["seed"] = *o.seed;
  if (!o.acceptance.empty()) {
    const bool same = doc.contains("acceptance") && doc["acceptance"].is_object() &&
                      doc["acceptance"].value("name", "") == o.acceptance;
    if (!same) doc["acceptance"] = {{"name", o.acceptance}, {"params", json::object()}};
  }
  if (!o.trace.empty()) {
    if (!doc.contains("acceptance") || !doc["acceptance"].is_object())
      doc["acceptance"] = {{"name", "replay"}, {"params", json::object()}};
    doc["acceptance"]["params"]["path"] = o.trace;
  }

  SimulationConfig config = parse_config(doc, {o.lenient});
  if (config.acceptance.kind == AcceptanceKind::replay && o.trace.empty()) {
    fs::path trace(config.acceptance.trace_path);
    if (trace.is_relative() && !fs::exists(trace))
      config.acceptance.trace_path = (fs::path(o.config).parent_path() / trace).string();
  }

  if (o.verbose) std::cout << "# config " << to_json(config).dump() << '\n';

  const sim::EpisodeReport report = sim::run_episode(config);
  const sim::SummaryRow row = sim::summarize(config, report);

  const fs::path dir = output_dir(o.out);
  ensure_dir(dir);
  json doc_out = {{"config", to_json(config)}, {"report", sim::to_json(report)}};
  write_file(dir / "report.json", doc_out.dump(2) + "\n");
  write_file(dir / "summary.csv", sim::summary_csv_header() + "\n" + sim::summary_csv_row(row) + "\n");
  if (o.emit_trace) acceptance::write_trace(dir / "trace.jsonl", sim::to_trace(report));

  std::printf("throughput_tps=%.6f tokens=%lld steps=%lld total_ms=%.6f%s\n", row.throughput,
              static_cast<long long>(row.total_tokens), static_cast<long long>(row.steps), row.total_ms,
              row.truncated ? " (trace exhausted)" : "");
  return 0;
}

struct SweepOptions {
  std::string config;
  std::string out;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  bool lenient = false;
  bool verbose = false;
};

int cmd_sweep(const SweepOptions& o) {
  sweep::SweepSpec spec = sweep::load_sweep(o.config, {o.lenient});
  if (o.seed) spec.seed = *o.seed;

  if (o.verbose) {
    std::cout << "# sweep: " << spec.policies.size() << " policies x " << spec.profiles.size()
              << " profiles x " << spec.tasks.size() << " tasks x " << spec.initial_gammas.size()
              << " initial gammas x " << spec.replicates << " replicates, N=" << spec.target_tokens
              << ", seed=" << spec.seed << '\n';
    for (const auto& p : spec.policies) std::cout << "# policy " << p.label << ' ' << to_json(p.spec).dump() << '\n';
    for (const auto& t : spec.tasks)
      std::cout << "# task " << t.label << ' ' << to_json(t.acceptance).dump() << '\n';
  }

  const sweep::SweepResult result = sweep::run_sweep(spec, o.jobs);
  const std::string table = sweep::format_table(spec, result.aggregates);

  const fs::path dir = output_dir(o.out);
  ensure_dir(dir);
  write_file(dir / "sweep_cells.csv", sweep::cells_csv(spec, result.cells));
  write_file(dir / "sweep_summary.csv", sweep::summary_csv(result.aggregates));
  write_file(dir / "sweep_table.txt", table);
  std::cout << table;
  return 0;
}

int cmd_oracle(double alpha, double c, int gamma_max) {
  const int best = cost::optimal_fixed_gamma(alpha, c, gamma_max);
  std::printf("# cost per generated token in units of T_draft: (c + gamma) / (alpha * gamma + 1)\n");
  std::printf("# alpha=%g c=%g gamma_max=%d\n", alpha, c, gamma_max);
  std::printf("%5s  %14s  %14s  %14s\n", "gamma", "tokens/step", "exact", "cost/token");
  for (int g = 1; g <= gamma_max; ++g) {
    const cost::CostBreakdown b = cost::expected_cost(alpha, g, c, 1.0);
    const double exact = alpha < 1.0 ? cost::exact_expected_accepted(alpha, g) : g + 1.0;
    std::printf("%5d  %14.6f  %14.6f  %14.6f%s\n", g, cost::linear_expected_accepted(alpha, g), exact,
                b.total_cost, g == best ? "  <- argmin" : "");
  }
  std::printf("argmin_gamma=%d\n", best);
  return 0;
}

int cmd_profiles() {
  std::printf("%-30s  %12s  %12s  %10s\n", "name", "t_target_ms", "t_draft_ms", "c");
  for (const auto& [name, p] : builtin_profiles())
    std::printf("%-30s  %12.2f  %12.2f  %10.4f\n", name.c_str(), p.t_target_ms, p.t_draft_ms,
                cost::speedup_factor(p));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for speculative-decoding window controllers"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Simulate one episode");
  run_cmd->add_option("--config", run.config, "Run configuration (JSON)")->required();
  run_cmd->add_option("--set", run.overrides, "Dotted-path override key=value (repeatable)");
  run_cmd->add_option("--seed", run.seed, "Override the seed");
  run_cmd->add_option("--out", run.out, "Output directory (default: $SPECSIM_OUT or ./specsim-out)");
  run_cmd->add_option("--acceptance", run.acceptance, "Acceptance process name (iid, regime, replay)");
  run_cmd->add_option("--trace", run.trace, "Trace file for replay");
  run_cmd->add_flag("--emit-trace", run.emit_trace, "Also write trace.jsonl");
  run_cmd->add_flag("--lenient", run.lenient, "Ignore unknown config fields");
  run_cmd->add_flag("--verbose", run.verbose, "Print the resolved configuration");

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a policy x profile x initial-gamma sweep");
  sweep_cmd->add_option("--config", sw.config, "Sweep specification (JSON)")->required();
  sweep_cmd->add_option("--out", sw.out, "Output directory (default: $SPECSIM_OUT or ./specsim-out)");
  sweep_cmd->add_option("--jobs", sw.jobs, "Worker threads (0 = hardware concurrency)");
  sweep_cmd->add_option("--seed", sw.seed, "Override the master seed");
  sweep_cmd->add_flag("--lenient", sw.lenient, "Ignore unknown config fields");
  sweep_cmd->add_flag("--verbose", sw.verbose, "Print the resolved sweep");

  double alpha = 0.0;
  double c = 0.0;
  int gamma_max = 24;
  auto* oracle_cmd = app.add_subcommand("oracle", "Tabulate the analytic cost model over gamma");
  oracle_cmd->add_option("--alpha", alpha, "Per-token acceptance rate in (0, 1]")->required();
  oracle_cmd->add_option("-c,--c", c, "Target/draft latency ratio")->required();
  oracle_cmd->add_option("--gamma-max", gamma_max, "Largest window considered");

  app.add_subcommand("profiles", "List builtin latency profiles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) {
      if (sw.jobs == 0) sw.jobs = std::max(1u, std::thread::hardware_concurrency());
      return cmd_sweep(sw);
    }
    if (*oracle_cmd) return cmd_oracle(alpha, c, gamma_max);
    return cmd_profiles();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
