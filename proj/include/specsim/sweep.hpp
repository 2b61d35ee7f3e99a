#pragma once

// Grid runs over policy x profile x task x initial gamma x replicate, and the
// aggregation into mean +- std across initial gamma values normalized by the
// fixed-window baseline.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specsim/model.hpp"
#include "specsim/sim.hpp"

namespace specsim::sweep {

struct PolicyEntry {
  std::string label;
  PolicySpec spec;
};

/// One acceptance spec; the sweep averages uniformly over tasks.
struct TaskEntry {
  std::string label;
  AcceptanceSpec acceptance;
};

inline const std::vector<int> kDefaultInitialGammas = {1, 2, 3, 4, 5, 6, 7, 8, 12, 16, 20, 24};

struct SweepSpec {
  std::vector<int> initial_gammas = kDefaultInitialGammas;
  std::vector<PolicyEntry> policies;
  std::vector<LatencyProfile> profiles;
  std::vector<TaskEntry> tasks;
  int replicates = 1;
  std::int64_t target_tokens = 20000;
  std::uint64_t seed = 0;
  bool charge_probe = false;

  /// Throws ConfigError when a list is empty or a value is out of range.
  void validate() const;
};

SweepSpec parse_sweep(const json& j, ParseOptions opts = {});
SweepSpec load_sweep(const std::filesystem::path& path, ParseOptions opts = {});

struct CellKey {
  std::size_t policy = 0;
  std::size_t profile = 0;
  std::size_t task = 0;
  std::size_t gamma = 0;  // index into initial_gammas
  int replicate = 0;
};

/// Seed of one cell. The policy is deliberately not part of the key, so all
/// policies in a cell see the same random stream.
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& profile, const std::string& task,
                        int initial_gamma, int replicate);

SimulationConfig cell_config(const SweepSpec& spec, const CellKey& key);

struct CellResult {
  CellKey key;
  sim::SummaryRow row;
};

struct Aggregate {
  std::string policy;
  std::string profile;
  std::vector<double> per_gamma;  // mean throughput per initial gamma
  double mean = 0.0;              // mean across initial gamma
  double std_dev = 0.0;           // sample std across initial gamma
  std::optional<double> speedup;  // mean / baseline mean
  std::optional<double> speedup_std;
};

struct SweepResult {
  std::vector<CellResult> cells;       // ordered by cell coordinates
  std::vector<Aggregate> aggregates;   // policy-major, then profile
};

std::vector<CellKey> enumerate_cells(const SweepSpec& spec);

sim::SummaryRow run_cell(const SweepSpec& spec, const CellKey& key);

/// Runs every cell on `jobs` worker threads; the result does not depend on
/// the thread count.
SweepResult run_sweep(const SweepSpec& spec, unsigned jobs = 1);

std::vector<Aggregate> aggregate(const SweepSpec& spec, const std::vector<CellResult>& cells);

std::string cells_csv(const SweepSpec& spec, const std::vector<CellResult>& cells);
std::string summary_csv(const std::vector<Aggregate>& aggregates);
/// Policies x profiles table of "x.xx +- y.yy x" speedups (raw throughput
/// when no fixed baseline is part of the sweep).
std::string format_table(const SweepSpec& spec, const std::vector<Aggregate>& aggregates);

}  // namespace specsim::sweep
