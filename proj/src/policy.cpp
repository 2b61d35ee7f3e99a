#include "specsim/policy.hpp"

#include <algorithm>
#include <cmath>

namespace specsim::policy {

ConfidenceGate confidence_gate(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::assistant_threshold: return ConfidenceGate::after_token;
    case PolicyKind::gammatune_plus: return ConfidenceGate::before_token;
    default: return ConfidenceGate::none;
  }
}

bool is_gammatune_family(PolicyKind kind) noexcept {
  return kind == PolicyKind::gammatune || kind == PolicyKind::gammatune_plus;
}

ControllerState controller_init(const PolicySpec& spec, int initial_gamma) {
  return controller_init(spec.kind, spec.params, initial_gamma);
}

ControllerState controller_init(PolicyKind kind, const PolicyParams& params, int initial_gamma) {
  if (!(params.eta > 0.0 && params.eta <= 1.0)) throw ConfigError("policy.params.eta", "must lie in (0, 1]");
  if (params.delta < 0) throw ConfigError("policy.params.delta", "must be >= 0");
  if (params.gamma_min < 1) throw ConfigError("policy.params.gamma_min", "must be >= 1");
  if (params.gamma_min > params.gamma_max)
    throw ConfigError("policy.params.gamma_max", "gamma_min exceeds gamma_max");
  if (!(params.tau >= 0.0 && params.tau <= 1.0)) throw ConfigError("policy.params.tau", "must lie in [0, 1]");
  if (initial_gamma < 1) throw ConfigError("initial_gamma", "must be >= 1");

  ControllerState s;
  s.kind = kind;
  s.params = params;
  s.gamma = std::clamp(initial_gamma, params.gamma_min, params.gamma_max);
  s.gamma_bar = s.gamma;
  return s;
}

int effective_accepted(const ControllerState& state, const StepOutcome& outcome) noexcept {
  const bool full_window = outcome.drafted == state.gamma && outcome.accepted == state.gamma;
  return full_window ? outcome.accepted + state.params.delta : outcome.accepted;
}

ControllerState observe_step(const ControllerState& state, const StepOutcome& outcome) {
  ControllerState next = state;
  const PolicyParams& p = state.params;

  switch (state.kind) {
    case PolicyKind::fixed:
    case PolicyKind::assistant_threshold:
      break;

    case PolicyKind::hf_heuristic:
      if (outcome.accepted == outcome.drafted)
        next.gamma = state.gamma + p.hf_increment;
      else
        next.gamma = std::max(1, state.gamma - p.hf_decrement);
      next.gamma = std::clamp(next.gamma, p.gamma_min, p.gamma_max);
      break;

    case PolicyKind::gammatune:
    case PolicyKind::gammatune_plus: {
      double observed = outcome.accepted;
      if (p.expansion_mode == ExpansionMode::augmented) {
        observed = effective_accepted(state, outcome);
      } else if (outcome.accepted == state.gamma) {
        // Taken literally, the expansion only assigns gamma, and the ceiling
        // below overwrites it before it is ever read.
        next.gamma = outcome.accepted + p.delta;
      }
      const double blended = (1.0 - p.eta) * state.gamma_bar + p.eta * observed;
      next.gamma_bar = std::min<double>(p.gamma_max, std::max<double>(p.gamma_min, blended));
      next.gamma = static_cast<int>(std::ceil(next.gamma_bar));
      break;
    }
  }
  return next;
}

DraftDecision should_continue_draft(const ControllerState& state, int drafted_so_far,
                                    std::optional<double> last_confidence) {
  if (drafted_so_far >= state.gamma) return {false};
  if (confidence_gate(state.kind) != ConfidenceGate::none && last_confidence &&
      *last_confidence < state.params.tau)
    return {false};
  return {true};
}

}  // namespace specsim::policy
