#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "team/advtrain.hpp"
#include "team/errors.hpp"

using namespace team;

namespace {

Dataset blobs(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> xs;
  std::vector<int> ys;
  for (int i = 0; i < n; ++i) {
    const int y = i % 3;
    Vector v(6);
    for (int j = 0; j < 6; ++j) v[j] = std::clamp(0.3 + 0.4 * (j % 3 == y) + rng.uniform(-0.15, 0.15), 0.0, 1.0);
    xs.push_back(oracle::row_image(v));
    ys.push_back(y);
  }
  return Dataset(std::move(xs), std::move(ys), 3);
}

AdvTrainConfig small_cfg(InnerAttack kind) {
  AdvTrainConfig c;
  c.attack.kind = kind;
  c.epochs = 3;
  c.batch_size = 8;
  c.learning_rate = 0.2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(InnerAttack, Names) {
  EXPECT_EQ(parse_inner_attack("team"), InnerAttack::team);
  EXPECT_EQ(parse_inner_attack("gn"), InnerAttack::gauss_newton);
  EXPECT_EQ(to_string(InnerAttack::pgd), "pgd");
  EXPECT_THROW(parse_inner_attack("bim"), ConfigError);
}

TEST(AdvTrain, IdentityAttackReproducesPlainTraining) {
  const Dataset d = blobs(60, 1);
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  const AdvTrainConfig c = small_cfg(InnerAttack::identity);
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.seed = c.seed;
  EXPECT_TRUE(adversarial_train(init, d, c) == train_sgd(init, d, t));
}

TEST(AdvTrain, AllCleanMixReproducesPlainTraining) {
  const Dataset d = blobs(40, 3);
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  AdvTrainConfig c = small_cfg(InnerAttack::team);
  c.mix_clean = 1.0;
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.seed = c.seed;
  EXPECT_TRUE(adversarial_train(init, d, c) == train_sgd(init, d, t));
}

TEST(AdvTrain, ZeroEpochsIsIdentity) {
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  AdvTrainConfig c = small_cfg(InnerAttack::team);
  c.epochs = 0;
  EXPECT_TRUE(adversarial_train(init, blobs(10, 1), c) == init);
}

TEST(AdvTrain, Validation) {
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  AdvTrainConfig c = small_cfg(InnerAttack::fgsm);
  EXPECT_THROW(adversarial_train(init, Dataset{}, c), EmptyInputError);
  c.mix_clean = 1.5;
  EXPECT_THROW(adversarial_train(init, blobs(10, 1), c), ConfigError);
  c = small_cfg(InnerAttack::fgsm);
  c.batch_size = 0;
  EXPECT_THROW(adversarial_train(init, blobs(10, 1), c), ConfigError);
}

TEST(AdvTrain, ReportsAttackedAndFallbackCounts) {
  const Dataset d = blobs(48, 4);
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  for (InnerAttack kind : {InnerAttack::team, InnerAttack::gauss_newton, InnerAttack::fgsm, InnerAttack::pgd}) {
    AdvTrainConfig c = small_cfg(kind);
    c.attack.team.linf_iters = 5;
    std::vector<AdvEpochStats> stats;
    const Model out = adversarial_train(init, d, c, [&](const AdvEpochStats& s) { stats.push_back(s); });
    ASSERT_EQ(stats.size(), 3u) << to_string(kind);
    for (const AdvEpochStats& s : stats) {
      // mix 0.5 of batch 8 leaves 4 attacked slots per batch, 6 batches.
      EXPECT_EQ(s.attacked + s.fallbacks, 24u) << to_string(kind);
      EXPECT_GE(s.adversarial_loss, 0.0);
    }
    AdvTrainConfig again = c;
    EXPECT_TRUE(adversarial_train(init, d, again) == out) << to_string(kind);
  }
}

TEST(RobustAccuracy, IdentityEqualsCleanAccuracy) {
  const Dataset d = blobs(30, 6);
  const Model m = Model::random({6, 5, 3}, Activation::tanh, 7);
  InnerAttackSpec s;
  s.kind = InnerAttack::identity;
  EXPECT_DOUBLE_EQ(robust_accuracy(m, d, s), accuracy(m, d));
  s.kind = InnerAttack::fgsm;
  EXPECT_LE(robust_accuracy(m, d, s), accuracy(m, d));
}

TEST(AdvTrain, WorkerCountDoesNotChangeResult) {
  const Dataset d = blobs(40, 8);
  const Model init = Model::random({6, 5, 3}, Activation::tanh, 2);
  AdvTrainConfig c = small_cfg(InnerAttack::pgd);
  c.workers = 1;
  const Model one = adversarial_train(init, d, c);
  c.workers = 3;
  EXPECT_TRUE(adversarial_train(init, d, c) == one);
}

TEST(InnerAttack, TeamAboveHessianCapUsesGaussNewton) {
  const Model m = Model::random({6, 5, 3}, Activation::tanh, 2);
  const Image x = oracle::row_image(Vector::Constant(6, 0.5));
  const int y = predict(m, x);
  InnerAttackSpec s;
  s.team.hessian_cap = 4;
  const AttackResult viaTeam = run_inner_attack(m, x, y, s, 0);
  s.kind = InnerAttack::gauss_newton;
  EXPECT_EQ(viaTeam.x_adv, run_inner_attack(m, x, y, s, 0).x_adv);
}

TEST(InnerAttack, DefaultTeamRespectsBox) {
  const Model m = Model::random({6, 5, 3}, Activation::tanh, 2);
  const Image x = oracle::row_image(Vector::Constant(6, 0.5));
  const AttackResult r = run_inner_attack(m, x, predict(m, x), InnerAttackSpec{}, 0);
  EXPECT_LE(r.norm_linf, 0.1 + 1e-9);
}
