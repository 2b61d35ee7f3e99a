#pragma once

// Domain types shared by every part of the simulator: latency profiles, the
// per-step outcome record, and the validated run configuration.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace specsim {

using json = nlohmann::json;

/// Configuration problem. `field()` is the dotted path of the offending
/// field ("policy.params.eta"), empty when the problem is not field-specific.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)),
        message_(message) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// Filesystem problem (missing or unwritable file).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draft/target latencies of one model pair, in milliseconds.
///
/// One target forward pass costs `t_target_ms` whether it generates a single
/// token or verifies a whole drafted window. `verify_ms_per_token` is an
/// optional linear surcharge per verified draft token (zero by default).
struct LatencyProfile {
  std::string name;
  double t_draft_ms = 1.0;
  double t_target_ms = 1.0;
  double verify_ms_per_token = 0.0;

  /// Throws ConfigError("non-positive latency") if a latency is not > 0.
  void validate(const std::string& field = "profile") const;

  /// Target-to-draft latency ratio.
  double speedup_factor() const noexcept { return t_target_ms / t_draft_ms; }

  bool operator==(const LatencyProfile&) const = default;
};

/// Result of one speculative step.
struct StepOutcome {
  int gamma = 0;    // window the controller offered for this step
  int drafted = 0;  // draft tokens actually produced
  int accepted = 0; // leading run of accepted draft tokens
  bool bonus = true;
  std::vector<bool> verdicts;       // raw per-position accept/reject
  std::vector<double> confidences;  // draft top-token probabilities
  int charged_probes = 0;           // discarded look-ahead tokens that were billed
  double elapsed_ms = 0.0;

  int emitted() const noexcept { return accepted + (bonus ? 1 : 0); }

  bool operator==(const StepOutcome&) const = default;
};

// --- policy and acceptance specs ------------------------------------------

enum class PolicyKind { fixed, hf_heuristic, assistant_threshold, gammatune, gammatune_plus };

std::string_view to_string(PolicyKind kind);
/// Throws ConfigError on unknown identifiers.
PolicyKind parse_policy_kind(std::string_view name, const std::string& field = "policy.name");

enum class ExpansionMode {
  augmented,  // full acceptance feeds (accepted + delta) into the EWMA
  literal     // gamma <- accepted + delta, immediately overwritten by ceil(gamma_bar)
};

struct PolicyParams {
  double eta = 0.25;
  int delta = 2;
  int gamma_min = 1;
  int gamma_max = 24;
  double tau = 0.4;
  ExpansionMode expansion_mode = ExpansionMode::augmented;
  int hf_increment = 2;
  int hf_decrement = 1;

  bool operator==(const PolicyParams&) const = default;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::fixed;
  PolicyParams params;

  bool operator==(const PolicySpec&) const = default;
};

enum class AcceptanceKind { iid, regime, replay };

std::string_view to_string(AcceptanceKind kind);
AcceptanceKind parse_acceptance_kind(std::string_view name,
                                     const std::string& field = "acceptance.name");

struct Regime {
  std::string name;
  double alpha = 0.5;
  double mean_confidence = 0.5;

  bool operator==(const Regime&) const = default;
};

struct AcceptanceSpec {
  AcceptanceKind kind = AcceptanceKind::iid;
  // iid
  double alpha = 0.7;
  double mean_confidence = 0.5;
  // regime
  std::vector<Regime> regimes;
  std::vector<std::vector<double>> transition;
  // shared by iid and regime
  double concentration = 10.0;
  bool correlated = false;
  // replay
  std::string trace_path;

  bool operator==(const AcceptanceSpec&) const = default;
};

/// Easy / moderate / difficult regimes with 0.9 self-transition.
AcceptanceSpec default_regime_spec();

struct SimulationConfig {
  LatencyProfile profile;
  PolicySpec policy;
  AcceptanceSpec acceptance;
  std::int64_t target_tokens = 1000;
  int initial_gamma = 4;
  std::uint64_t seed = 0;
  bool charge_probe = false;

  bool operator==(const SimulationConfig&) const = default;
};

inline constexpr int kConfigSchema = 1;

// --- catalog ----------------------------------------------------------------

/// The four measured model pairs (target/draft), keyed by name.
const std::map<std::string, LatencyProfile>& builtin_profiles();

/// Throws ConfigError("unknown profile") for names not in the catalog.
const LatencyProfile& find_profile(std::string_view name);

// --- config ingestion -------------------------------------------------------

struct ParseOptions {
  bool lenient = false;  // ignore unknown fields instead of rejecting them
};

LatencyProfile parse_profile(const json& j, const std::string& field, ParseOptions opts = {});
PolicySpec parse_policy(const json& j, const std::string& field, ParseOptions opts = {});
AcceptanceSpec parse_acceptance(const json& j, const std::string& field, ParseOptions opts = {});

SimulationConfig parse_config(const json& j, ParseOptions opts = {});
SimulationConfig load_config(const std::filesystem::path& path, ParseOptions opts = {});

/// Reads and parses a JSON document, throwing IoError / ConfigError.
json read_json_file(const std::filesystem::path& path);

json to_json(const LatencyProfile& profile);
json to_json(const PolicySpec& policy);
json to_json(const AcceptanceSpec& acceptance);
json to_json(const SimulationConfig& config);

/// Applies `key=value` with a dotted key path to a JSON document. The value
/// is parsed as JSON when possible, otherwise taken as a string.
void apply_override(json& doc, std::string_view assignment);

}  // namespace specsim
