#pragma once

// Analytic cost of fixed-window speculative decoding. Costs are expressed in
// units of one draft-token time, so only the latency ratio c matters.

#include <stdexcept>

#include "specsim/model.hpp"

namespace specsim::cost {

struct CostBreakdown {
  double n_steps = 0.0;       // expected decoding iterations
  double calls_target = 0.0;  // == n_steps
  double calls_draft = 0.0;   // == gamma * n_steps
  double total_cost = 0.0;    // == n_steps * (c + gamma)
};

/// c = t_target / t_draft.
double speedup_factor(const LatencyProfile& profile) noexcept;

/// Linear model: each step yields alpha * gamma + 1 tokens on average.
/// Requires 0 < alpha <= 1, gamma >= 1, c > 0, n >= 1; throws std::domain_error.
CostBreakdown expected_cost(double alpha, int gamma, double c, double n);

/// argmin of expected_cost over gamma in [1, gamma_max]; ties go to the
/// smaller gamma. Independent of n.
int optimal_fixed_gamma(double alpha, double c, int gamma_max);

/// Exact expected tokens per step (leading run plus bonus) under i.i.d.
/// per-token acceptance: (1 - alpha^(gamma+1)) / (1 - alpha).
/// Requires 0 < alpha < 1; for alpha == 1 the answer is simply gamma + 1.
double exact_expected_accepted(double alpha, int gamma);

/// alpha * gamma + 1.
double linear_expected_accepted(double alpha, int gamma);

}  // namespace specsim::cost
