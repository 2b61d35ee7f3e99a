#pragma once

// Speculation-length controllers. Each controller is a plain value: the
// simulator asks it whether to keep drafting, then feeds it the step outcome
// and keeps the returned state.

#include <optional>

#include "specsim/model.hpp"

namespace specsim::policy {

struct ControllerState {
  PolicyKind kind = PolicyKind::fixed;
  int gamma = 1;           // current window
  double gamma_bar = 1.0;  // EWMA window estimate (GammaTune family)
  PolicyParams params;

  bool operator==(const ControllerState&) const = default;
};

struct DraftDecision {
  bool continue_drafting = false;
};

/// How a policy consults draft confidences.
enum class ConfidenceGate {
  none,
  after_token,  // stop once the last drafted token fell below tau
  before_token  // drop the candidate token itself when it falls below tau
};

ConfidenceGate confidence_gate(PolicyKind kind) noexcept;

bool is_gammatune_family(PolicyKind kind) noexcept;

/// Validates parameters (ConfigError on violation) and clamps the initial
/// window into [gamma_min, gamma_max].
ControllerState controller_init(const PolicySpec& spec, int initial_gamma);
ControllerState controller_init(PolicyKind kind, const PolicyParams& params, int initial_gamma);

/// Pure transition: the state after absorbing one step.
ControllerState observe_step(const ControllerState& state, const StepOutcome& outcome);

/// `last_confidence` is the confidence relevant to the policy's gate (the
/// last drafted token for after_token, the candidate for before_token);
/// absent means no confidence has been seen, which never stops drafting.
DraftDecision should_continue_draft(const ControllerState& state, int drafted_so_far,
                                    std::optional<double> last_confidence);

/// The accepted count the EWMA consumes, with the expansion offset applied on
/// full-window acceptance.
int effective_accepted(const ControllerState& state, const StepOutcome& outcome) noexcept;

}  // namespace specsim::policy
