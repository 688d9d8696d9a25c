#include <gtest/gtest.h>

#include "oracles.hpp"
#include "team/errors.hpp"
#include "team/objective.hpp"

using namespace team;

TEST(Objective, NumberingMatchesLayerAndMode) {
  struct Row {
    int index;
    OutputLayer layer;
    ObjectiveMode mode;
  };
  const Row rows[] = {{1, OutputLayer::logits, ObjectiveMode::correct_class},
                      {2, OutputLayer::logits, ObjectiveMode::target_class},
                      {3, OutputLayer::logits, ObjectiveMode::target_margin},
                      {4, OutputLayer::softmax, ObjectiveMode::correct_class},
                      {5, OutputLayer::softmax, ObjectiveMode::target_class},
                      {6, OutputLayer::softmax, ObjectiveMode::target_margin}};
  for (const Row& r : rows) {
    const auto o = ObjectiveSpec::numbered(r.index, 0, r.mode == ObjectiveMode::correct_class
                                                           ? std::optional<int>{}
                                                           : std::optional<int>{1});
    EXPECT_EQ(o.layer, r.layer);
    EXPECT_EQ(o.mode, r.mode);
    EXPECT_EQ(o.index(), r.index);
    EXPECT_EQ(ObjectiveSpec::parse(o.name(), 0, o.target_class).index(), r.index);
  }
}

TEST(Objective, DirectRead) {
  const Vector z{{1.0, 4.0, 2.0}};
  EXPECT_DOUBLE_EQ(objective_from_logits(z, ObjectiveSpec::numbered(1, 1)), 4.0);
  EXPECT_DOUBLE_EQ(objective_from_logits(z, ObjectiveSpec::numbered(2, 1, 2)), 2.0);
  EXPECT_DOUBLE_EQ(objective_from_logits(z, ObjectiveSpec::numbered(3, 1, 0)), -3.0);
}

TEST(Objective, UniformLogitsMarginIsZero) {
  for (int t = 0; t < 4; ++t) {
    const int m = (t + 1) % 4;
    EXPECT_DOUBLE_EQ(objective_from_logits(Vector::Constant(4, 0.3), ObjectiveSpec::numbered(6, m, t)), 0.0);
  }
}

TEST(Objective, MissingOrBadTargetThrows) {
  EXPECT_THROW(ObjectiveSpec::numbered(2, 1), ConfigError);
  EXPECT_THROW(ObjectiveSpec::numbered(3, 1, 1), ConfigError);
  EXPECT_THROW(ObjectiveSpec::numbered(7, 1), ConfigError);
  EXPECT_THROW(ObjectiveSpec::parse("T9", 1), ConfigError);
  EXPECT_THROW(ObjectiveSpec::numbered(2, 1, 5).validate(3), ConfigError);
  EXPECT_THROW(ObjectiveSpec::numbered(1, 3).validate(3), ConfigError);
}

TEST(Objective, Directions) {
  EXPECT_EQ(attack_direction(ObjectiveSpec::numbered(1, 0)), Direction::minimize);
  EXPECT_EQ(attack_direction(ObjectiveSpec::numbered(4, 0)), Direction::minimize);
  for (int k : {2, 3, 5, 6}) EXPECT_EQ(attack_direction(ObjectiveSpec::numbered(k, 0, 1)), Direction::maximize);
}

TEST(Objective, SuccessPredicate) {
  const auto untargeted = ObjectiveSpec::numbered(1, 4);
  EXPECT_FALSE(success_for_label(untargeted, 4));
  EXPECT_TRUE(success_for_label(untargeted, 2));
  const auto targeted = ObjectiveSpec::numbered(2, 4, 7);
  EXPECT_TRUE(success_for_label(targeted, 7));
  EXPECT_FALSE(success_for_label(targeted, 3));
}

TEST(Objective, SuccessPredicateUsesModel) {
  DenseLayer l;
  l.weight = Matrix::Identity(3, 3);
  l.bias = Vector::Zero(3);
  const Model m({l});
  const Image x = oracle::row_image(Vector{{0.1, 0.2, 0.9}});
  EXPECT_TRUE(success_predicate(ObjectiveSpec::numbered(1, 0), m, x));
  EXPECT_TRUE(success_predicate(ObjectiveSpec::numbered(5, 0, 2), m, x));
  EXPECT_FALSE(success_predicate(ObjectiveSpec::numbered(5, 0, 1), m, x));
}

TEST(Objective, MarginSignMatchesArgmax) {
  Rng rng(1);
  for (int k = 0; k < 500; ++k) {
    const Vector z = oracle::random_vector(rng, 6, 3.0);
    const int t = static_cast<int>(rng.below(6));
    const int m = (t + 1) % 6;
    const double t3 = objective_from_logits(z, ObjectiveSpec::numbered(3, m, t));
    const double t6 = objective_from_logits(z, ObjectiveSpec::numbered(6, m, t));
    EXPECT_EQ(t3 >= 0.0, argmax(z) == t);
    EXPECT_EQ(t6 >= 0.0, argmax(z) == t);
  }
}

TEST(Objective, T4IsSoftmaxOfForward) {
  const Model m = Model::random({5, 4, 3}, Activation::tanh, 2);
  const Image x = oracle::row_image(Vector::Constant(5, 0.6));
  EXPECT_EQ(eval_objective(m, x, ObjectiveSpec::numbered(4, 2)), softmax(forward(m, x))[2]);
}

TEST(Objective, MarginShiftInvariant) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const Vector z = oracle::random_vector(rng, 5, 2.0);
    const auto o = ObjectiveSpec::numbered(3, 0, 3);
    EXPECT_NEAR(objective_from_logits(z, o), objective_from_logits((z.array() + 7.5).matrix(), o), 1e-12);
  }
}

TEST(Objective, LogitSeedMatchesFiniteDifferences) {
  Rng rng(3);
  for (int k = 1; k <= 6; ++k) {
    const auto o = ObjectiveSpec::numbered(k, 1, k == 1 || k == 4 ? std::optional<int>{} : std::optional<int>{3});
    const Vector z = oracle::random_vector(rng, 5, 1.0);
    const Vector seed = objective_logit_seed(z, o);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return objective_from_logits(v, o); }, z, 1e-6);
    EXPECT_LE((seed - fd).cwiseAbs().maxCoeff(), 1e-7) << o.name();
  }
}
