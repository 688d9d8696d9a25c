#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "team/baselines.hpp"
#include "team/gauss_newton.hpp"
#include "team/team_attack.hpp"

namespace team {

enum class InnerAttack { identity, team, gauss_newton, fgsm, pgd };
InnerAttack parse_inner_attack(std::string_view name);
std::string_view to_string(InnerAttack a);

/// An attack used as an inner maximizer or for robustness evaluation. The
/// objective's classes are filled in per sample (T1/T4-style untargeted).
struct InnerAttackSpec {
  InnerAttack kind = InnerAttack::team;
  TeamConfig team = default_team();
  GnConfig gn = default_gn();
  BaselineConfig baseline;

  /// TEAM over the L-infinity box of half-width 0.1 (C = 0.01), one budget,
  /// 20 projected-gradient iterations.
  static TeamConfig default_team();
  /// Softmax residual of the true class.
  static GnConfig default_gn();
};

/// Runs the attack on one correctly classified sample. `seed` drives any
/// randomness (pgd start). TEAM falls back to Gauss-Newton when the input is
/// larger than its Hessian cap. Throws PreconditionError if x is
/// misclassified.
AttackResult run_inner_attack(const Model& model, const Image& x, int y, const InnerAttackSpec& spec,
                              std::uint64_t seed);

struct AdvTrainConfig {
  InnerAttackSpec attack;
  int epochs = 3;
  int batch_size = 32;
  double learning_rate = 0.1;
  double mix_clean = 0.5;  // leading fraction of each batch kept clean
  std::uint64_t seed = 1;
  unsigned workers = 0;  // attack threads per batch, 0 = hardware concurrency

  void validate() const;
};

struct AdvEpochStats {
  int epoch = 0;
  double loss = 0.0;              // mean training loss over all samples
  double adversarial_loss = 0.0;  // mean cross-entropy at the attacked inputs
  std::size_t attacked = 0;
  std::size_t fallbacks = 0;  // samples trained clean because the attack threw
};

using AdvEpochCallback = std::function<void(const AdvEpochStats&)>;

/// Mini-batch SGD where the trailing (1 - mix_clean) share of every batch is
/// replaced by adversarial examples generated against the current weights.
/// Batching and shuffling match train_sgd, so the identity attack reproduces
/// it exactly. Attacks within a batch run in parallel against a snapshot of
/// the current weights; each sample has its own derived seed, so the result
/// does not depend on the worker count. A sample whose attack throws (for instance because the
/// current model misclassifies it) trains as clean.
Model adversarial_train(const Model& model, const Dataset& data, const AdvTrainConfig& cfg,
                        const AdvEpochCallback& on_epoch = {});

/// Fraction of samples that are correctly classified and stay so after the
/// attack.
double robust_accuracy(const Model& model, const Dataset& data, const InnerAttackSpec& spec,
                       std::uint64_t seed = 0);

}  // namespace team
