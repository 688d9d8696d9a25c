#pragma once

#include <chrono>
#include <optional>

#include "team/image.hpp"
#include "team/metrics.hpp"
#include "team/network.hpp"
#include "team/objective.hpp"

namespace team {

/// Outcome of one attack on one image, shared by every attack in the library.
///
/// x_adv is always inside [0,1]; delta = x_adv - x; the norms are computed from
/// delta; success is re-evaluated against the true model.
struct AttackResult {
  Image x_adv;
  Vector delta;
  bool success = false;
  int final_label = -1;
  int true_label = -1;
  std::optional<int> target;
  double norm_l0 = 0.0;
  double norm_l1 = 0.0;
  double norm_l2 = 0.0;
  double norm_linf = 0.0;
  double c_used = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  double wall_time_ms = 0.0;

  double norm(Norm p) const;
};

/// Clamps `candidate` into [0,1], queries the model and fills every derived
/// field. Diagnostics (c_used, lambda, iterations, wall time) are left to the
/// caller.
AttackResult make_attack_result(const Model& model, const Image& x, const Vector& candidate,
                                int true_label, std::optional<int> target = {});

/// Same, with labels taken from an objective.
AttackResult make_attack_result(const Model& model, const Image& x, const Vector& candidate,
                                const ObjectiveSpec& obj);

/// Small RAII stopwatch reporting elapsed milliseconds.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Throws PreconditionError unless the model classifies `x` as `label`.
void require_correctly_classified(const Model& model, const Image& x, int label);

}  // namespace team
