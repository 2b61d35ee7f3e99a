#pragma once

// The speculative-decoding episode loop and its reports.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "specsim/acceptance.hpp"
#include "specsim/model.hpp"
#include "specsim/policy.hpp"

namespace specsim::sim {

struct EpisodeReport {
  std::int64_t total_tokens = 0;
  double total_ms = 0.0;
  double throughput_tokens_per_s = 0.0;
  std::vector<StepOutcome> steps;
  double mean_gamma = 0.0;     // mean offered window per step
  double mean_accepted = 0.0;  // mean accepted draft tokens per step
  std::int64_t calls_target = 0;
  std::int64_t calls_draft = 0;  // draft forward passes, charged probes included
  bool truncated = false;        // replayed trace ran out before target_tokens

  bool operator==(const EpisodeReport&) const = default;
};

/// Runs one episode with the acceptance process described by the config.
EpisodeReport run_episode(const SimulationConfig& config);

/// Runs one episode against a caller-supplied process (which is consumed).
EpisodeReport run_episode(const SimulationConfig& config, acceptance::AcceptanceProcess& process);

/// Flat per-run summary for CSV emission.
struct SummaryRow {
  std::string policy;
  std::string profile;
  std::string acceptance;
  int initial_gamma = 0;
  std::uint64_t seed = 0;
  std::int64_t target_tokens = 0;
  std::int64_t total_tokens = 0;
  std::int64_t steps = 0;
  std::int64_t calls_target = 0;
  std::int64_t calls_draft = 0;
  double total_ms = 0.0;
  double throughput = 0.0;
  double mean_gamma = 0.0;
  double mean_accepted = 0.0;
  bool truncated = false;
};

SummaryRow summarize(const SimulationConfig& config, const EpisodeReport& report);

/// Bumped whenever the summary column set or order changes.
inline constexpr int kSummaryCsvVersion = 1;

std::string summary_csv_header();
std::string summary_csv_row(const SummaryRow& row);

json to_json(const EpisodeReport& report, bool include_steps = true);

/// Per-step verdicts in the trace-file schema; replaying them with the same
/// fixed window reproduces the episode's accepted counts.
std::vector<acceptance::TraceRecord> to_trace(const EpisodeReport& report);

}  // namespace specsim::sim
