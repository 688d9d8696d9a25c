#pragma once

#include <vector>

#include "team/attack_result.hpp"
#include "team/metrics.hpp"
#include "team/quadratic.hpp"

namespace team {

/// Budget sweep configuration. The constraint is |d|_p^2 <= C, so the L2
/// ball has radius sqrt(C) and the L-infinity box half-width sqrt(C).
struct TeamConfig {
  ObjectiveSpec objective;
  Norm norm = Norm::l2;
  double c_start = 0.01;
  double c_step = 0.01;
  double c_max = 10.0;
  int rebuild_every = 0;  // 0: one surrogate per attack
  int l0_budget = 20;
  double l0_magnitude = 1.0;
  int linf_iters = kDefaultLinfIterations;
  std::ptrdiff_t hessian_cap = kDefaultHessianCap;

  /// Throws ConfigError on an invalid sweep or norm.
  void validate() const;
  /// Number of budgets visited: floor((c_max - c_start) / c_step) + 1.
  int steps() const;
  /// k-th budget, c_start + k c_step.
  double budget(int k) const;
};

/// Sweeps C upward and returns at the first budget whose clamped solution
/// changes the true model's decision (untargeted: label != m, targeted:
/// label == t). On exhaustion returns the last attempt with success = false
/// and c_used = last swept budget. `iterations` counts budgets tried.
///
/// Throws PreconditionError if x is not classified as the objective's
/// correct class.
AttackResult team_attack(const Model& model, const Image& x, const TeamConfig& cfg);

/// team_attack for every target t != m. `cfg.objective` must be a targeted
/// objective; its target is replaced per run.
std::vector<AttackResult> team_targeted_sweep(const Model& model, const Image& x,
                                              const TeamConfig& cfg);

struct SweepPoint {
  double c = 0.0;
  double primal_value = 0.0;  // surrogate minimum (minimization sign)
  double dual_value = 0.0;    // Lagrangian dual at the optimal multiplier
  double true_network_loss = 0.0;  // cross-entropy wrt m at clamp(x + d)
};

/// Full sweep over every budget without early stopping (L2 only).
std::vector<SweepPoint> c_sweep_trace(const Model& model, const Image& x, const TeamConfig& cfg);

}  // namespace team
