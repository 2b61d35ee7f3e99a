#include "specsim/cost.hpp"

#include <cmath>
#include <string>

namespace specsim::cost {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::domain_error("alpha must lie in (0, 1], got " + std::to_string(alpha));
}

void check_gamma(int gamma) {
  if (gamma < 1) throw std::domain_error("gamma must be >= 1, got " + std::to_string(gamma));
}

}  // namespace

double speedup_factor(const LatencyProfile& profile) noexcept {
  return profile.t_target_ms / profile.t_draft_ms;
}

CostBreakdown expected_cost(double alpha, int gamma, double c, double n) {
  check_alpha(alpha);
  check_gamma(gamma);
  if (!(c > 0.0)) throw std::domain_error("c must be > 0");
  if (!(n >= 1.0)) throw std::domain_error("n must be >= 1");

  CostBreakdown b;
  b.n_steps = n / (alpha * gamma + 1.0);
  b.calls_target = b.n_steps;
  b.calls_draft = gamma * b.n_steps;
  b.total_cost = b.n_steps * (c + gamma);
  return b;
}

// Costs closer than this (relative) count as ties. Exact ties occur whenever
// alpha * c == 1, where every window has the same cost.
constexpr double kTieTolerance = 1e-12;

int optimal_fixed_gamma(double alpha, double c, int gamma_max) {
  check_gamma(gamma_max);
  int best = 1;
  double best_cost = expected_cost(alpha, 1, c, 1.0).total_cost;
  for (int g = 2; g <= gamma_max; ++g) {
    const double cost = expected_cost(alpha, g, c, 1.0).total_cost;
    if (cost < best_cost * (1.0 - kTieTolerance)) {
      best = g;
      best_cost = cost;
    }
  }
  return best;
}

double exact_expected_accepted(double alpha, int gamma) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("alpha must lie in (0, 1) for the exact law, got " + std::to_string(alpha));
  check_gamma(gamma);
  return (1.0 - std::pow(alpha, gamma + 1)) / (1.0 - alpha);
}

double linear_expected_accepted(double alpha, int gamma) { return alpha * gamma + 1.0; }

}  // namespace specsim::cost
