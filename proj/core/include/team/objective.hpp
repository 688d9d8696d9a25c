#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "team/image.hpp"
#include "team/network.hpp"

namespace team {

enum class OutputLayer { logits, softmax };
enum class ObjectiveMode { correct_class, target_class, target_margin };
enum class Direction { minimize, maximize };

/// One of the six scalar attack objectives, T1..T6:
///
///   T1 = z_m            T4 = f_m              (untargeted, minimized)
///   T2 = z_t            T5 = f_t              (targeted, maximized)
///   T3 = z_t - max z_i  T6 = f_t - max f_i    (targeted margin over i != t)
///
/// where z are logits and f = softmax(z).
struct ObjectiveSpec {
  OutputLayer layer = OutputLayer::logits;
  ObjectiveMode mode = ObjectiveMode::correct_class;
  int correct_class = 0;
  std::optional<int> target_class;

  /// Builds T1..T6 by number. `target` is required for 2, 3, 5, 6.
  static ObjectiveSpec numbered(int index, int correct, std::optional<int> target = {});
  /// Parses "T1".."T6" (case-insensitive).
  static ObjectiveSpec parse(std::string_view name, int correct, std::optional<int> target = {});

  /// 1..6
  int index() const;
  bool targeted() const { return mode != ObjectiveMode::correct_class; }
  std::string name() const { return "T" + std::to_string(index()); }

  /// Throws ConfigError unless the objective is well formed for `class_count` classes.
  void validate(int class_count) const;
};

double eval_objective(const Model& model, const Vector& x, const ObjectiveSpec& obj);
double eval_objective(const Model& model, const Image& x, const ObjectiveSpec& obj);

/// Objective value from precomputed logits.
double objective_from_logits(const Vector& z, const ObjectiveSpec& obj);

/// d(objective)/d(logits) at `z`. The margin's competitor index is recomputed
/// from `z` with the lowest-index tie-break.
Vector objective_logit_seed(const Vector& z, const ObjectiveSpec& obj);

Direction attack_direction(const ObjectiveSpec& obj);

/// Untargeted: predicted label != m. Targeted: predicted label == t.
bool success_predicate(const ObjectiveSpec& obj, const Model& model, const Image& x_adv);
bool success_for_label(const ObjectiveSpec& obj, int predicted);

}  // namespace team
