#pragma once

#include "team/attack_result.hpp"

namespace team {

/// Damped Gauss-Newton attack on the scalar residual r = F_y(x + d):
///
///   untargeted, logits:   r = z_m - max_{i != m} z_i + margin
///   untargeted, softmax:  r = f_m
///   targeted (any mode):  r = max_{i != t} F_i - F_t + margin   (F = z or f)
///
/// Each iteration solves (v v^T + Delta + mu I) d = -v r with v = grad r,
/// Delta = -lambda_min(v v^T) I, via Sherman-Morrison, and takes an Armijo
/// step on r^2 / 2 evaluated at the clamped point. Pixels on a bound whose
/// step would leave [0,1] are held fixed for that iteration.
struct GnConfig {
  ObjectiveSpec objective;
  double alpha0 = 1.0;
  double backtrack = 0.5;
  double armijo_c = 1e-4;
  double levenberg_mu = 1e-3;
  int max_iters = 200;
  double norm_cap = 10.0;  // L2 bound on the total perturbation
  double margin = 0.1;
  int max_backtracks = 40;

  void validate() const;
};

/// Residual and its input gradient at a point.
struct GnResidual {
  double r = 0.0;
  Vector v;
};

GnResidual gn_residual(const Model& model, const Vector& x, const GnConfig& cfg);

/// Direction -(v v^T + Delta + mu I)^{-1} v r by Sherman-Morrison.
Vector gn_direction(const Vector& v, double r, double mu);

struct GnStepOutcome {
  Vector delta;
  double alpha = 0.0;  // 0 when no step was accepted
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/// One iteration from `delta_k`. The returned delta keeps x + delta inside
/// [0,1]; it equals the clamped delta_k when v = 0 or when backtracking finds
/// no decrease.
GnStepOutcome gn_step(const Model& model, const Image& x, const Vector& delta_k,
                      const GnConfig& cfg);

/// Per-iteration observer: (iteration, loss r^2/2 after the step).
using GnObserver = std::function<void(int, double)>;

/// Requires x to be classified as the objective's correct class.
AttackResult gn_attack(const Model& model, const Image& x, const GnConfig& cfg,
                       const GnObserver& observe = {});

/// Same iteration from an arbitrary start image (e.g. an all-black image);
/// the correct class is taken to be the start's current label. A targeted
/// run whose target is already the start label succeeds immediately.
AttackResult gn_attack_from(const Model& model, const Image& start, const GnConfig& cfg,
                            const GnObserver& observe = {});

}  // namespace team
