#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "team/image.hpp"
#include "team/rng.hpp"

namespace team {

enum class Activation { identity, tanh, softplus, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// True when the activation is twice continuously differentiable.
bool is_smooth(Activation a);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  std::ptrdiff_t in() const { return weight.cols(); }
  std::ptrdiff_t out() const { return weight.rows(); }
};

/// Feedforward stack of dense layers. The last layer's output is the logit
/// vector; it must use the identity activation.
///
/// All parameters are held at binary32 precision (rounded on construction) so
/// that a checkpoint round trip reproduces forward outputs bit for bit.
class Model {
 public:
  Model() = default;
  Model(std::vector<DenseLayer> layers, std::uint64_t seed = 0);

  /// Glorot-uniform weights, zero biases. `sizes` = {in, hidden..., classes};
  /// hidden layers use `hidden`, the readout is identity.
  static Model random(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::ptrdiff_t input_size() const { return layers_.front().in(); }
  int class_count() const { return static_cast<int>(layers_.back().out()); }
  std::uint64_t seed() const { return seed_; }
  bool smooth() const;

  /// Logits for one unclamped input vector.
  Vector logits(const Vector& x) const;
  /// Logits for a batch of inputs stored as columns.
  Matrix logits_batch(const Matrix& xs) const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Rounds to the nearest binary32 value.
double round_to_float(double v);

Vector forward(const Model& model, const Image& x);

/// Max-subtracted softmax. Throws NumericError on non-finite input.
Vector softmax(const Vector& z);

/// Argmax, ties to the lowest index.
int argmax(const Vector& v);
/// Argmax over all indices except `excluded`, ties to the lowest index.
int argmax_excluding(const Vector& v, int excluded);

int predict(const Model& model, const Image& x);
int predict(const Model& model, const Vector& x);

/// -log softmax(z)[label].
double cross_entropy(const Vector& z, int label);

/// Reverse-mode input gradients for a batch. `output_seed` maps the logits
/// matrix (classes x batch) to dL/dlogits of the same shape; the return value
/// holds dL/dx for every column.
Matrix input_backprop(const Model& model, const Matrix& xs,
                      const std::function<Matrix(const Matrix&)>& output_seed);

/// Jacobian of the logits with respect to the input (classes x n).
Matrix logit_jacobian(const Model& model, const Vector& x);

/// Gradient of cross_entropy(logits(x), label) with respect to x.
Vector cross_entropy_input_gradient(const Model& model, const Vector& x, int label);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

/// Optional per-epoch observer: (epoch index, mean training loss).
using EpochCallback = std::function<void(int, double)>;

/// Mini-batch SGD on mean cross-entropy. Deterministic for a fixed seed.
Model train_sgd(const Model& model, const Dataset& data, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {});

/// Stateful SGD engine shared by train_sgd and adversarial training. Keeps
/// double-precision master weights; `snapshot` rounds them into a Model.
class SgdTrainer {
 public:
  SgdTrainer(const Model& init, double learning_rate);

  /// One SGD step on the columns of `xs`. Returns the mean loss before the step.
  double step(const Matrix& xs, const std::vector<int>& labels);
  Model snapshot() const;

 private:
  std::vector<DenseLayer> layers_;
  double lr_;
  std::uint64_t seed_;
};

/// Epoch permutation used by every trainer: one Rng per run seeded with
/// `seed`, reshuffled each epoch.
class EpochOrder {
 public:
  EpochOrder(std::size_t n, std::uint64_t seed);
  const std::vector<std::size_t>& next();

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
};

double accuracy(const Model& model, const Dataset& data);

}  // namespace team
