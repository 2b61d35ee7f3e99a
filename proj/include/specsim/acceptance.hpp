#pragma once

// Sources of per-token accept/reject verdicts and draft confidences.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include "specsim/model.hpp"

namespace specsim::acceptance {

struct Verdict {
  bool accepted = false;
  double confidence = 0.0;

  bool operator==(const Verdict&) const = default;
};

/// One recorded speculative step: raw verdicts per drafted position.
struct TraceRecord {
  std::int64_t step_index = 0;
  std::vector<bool> accepts;
  std::vector<double> confidences;

  bool operator==(const TraceRecord&) const = default;
};

/// Row-stochastic check: every row sums to 1 within 1e-9 and has no negative
/// entries. Throws ConfigError.
void validate_regime_spec(const AcceptanceSpec& spec);

/// Stationary distribution of a row-stochastic matrix (power iteration).
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition);

/// A process is consumed step by step: begin_step() once per speculative
/// step, then next_verdict() once per drafted (or probed) position.
class AcceptanceProcess {
 public:
  virtual ~AcceptanceProcess() = default;

  /// False when a replayed trace is exhausted; the episode ends there.
  virtual bool begin_step() = 0;
  virtual Verdict next_verdict() = 0;
};

/// Independent Bernoulli(alpha) verdicts with Beta-distributed confidences.
/// In correlated mode the sampled confidence is the acceptance probability.
class IidProcess final : public AcceptanceProcess {
 public:
  IidProcess(double alpha, double mean_confidence, double concentration, bool correlated,
             std::uint64_t seed);

  bool begin_step() override { return true; }
  Verdict next_verdict() override;

 private:
  double alpha_;
  double mean_confidence_;
  double concentration_;
  bool correlated_;
  std::mt19937_64 rng_;
};

/// Markov-switching regimes. The regime advances once per step; the first
/// regime is drawn from the stationary distribution.
class RegimeProcess final : public AcceptanceProcess {
 public:
  RegimeProcess(std::vector<Regime> regimes, std::vector<std::vector<double>> transition,
                double concentration, bool correlated, std::uint64_t seed);

  bool begin_step() override;
  Verdict next_verdict() override;

  /// Regime of the current step (valid after the first begin_step()).
  std::size_t current_regime() const noexcept { return current_; }

 private:
  std::vector<Regime> regimes_;
  std::vector<std::discrete_distribution<std::size_t>> rows_;
  std::discrete_distribution<std::size_t> initial_;
  double concentration_;
  bool correlated_;
  std::mt19937_64 rng_;
  std::size_t current_ = 0;
  bool started_ = false;
};

/// Replays recorded steps in order. Positions past the recorded window are
/// rejected with zero confidence.
class ReplayProcess final : public AcceptanceProcess {
 public:
  explicit ReplayProcess(std::vector<TraceRecord> records);

  bool begin_step() override;
  Verdict next_verdict() override;

  std::size_t steps_replayed() const noexcept { return next_record_; }

 private:
  std::vector<TraceRecord> records_;
  std::size_t next_record_ = 0;
  const TraceRecord* current_ = nullptr;
  std::size_t position_ = 0;
};

std::unique_ptr<AcceptanceProcess> make_process(const AcceptanceSpec& spec, std::uint64_t seed);

/// Confidence sample: Beta(k * mean, k * (1 - mean)); degenerate at 0 and 1.
double sample_confidence(std::mt19937_64& rng, double mean, double concentration);

/// Seeded engine; the seed is expanded through splitmix64.
std::mt19937_64 make_engine(std::uint64_t seed);

// --- trace files (JSON lines) -------------------------------------------

TraceRecord parse_trace_record(const json& j, std::size_t line_number);
json to_json(const TraceRecord& record);

/// Throws IoError when the file cannot be opened and ConfigError naming the
/// line on malformed content. Blank lines are skipped.
std::vector<TraceRecord> load_trace(const std::filesystem::path& path);
std::vector<TraceRecord> read_trace(std::istream& in, const std::string& source = "<stream>");

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

}  // namespace specsim::acceptance
