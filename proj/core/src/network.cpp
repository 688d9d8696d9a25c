#include "team/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "team/errors.hpp"

namespace team {
namespace {

Matrix activate(const Matrix& a, Activation act) {
  switch (act) {
    case Activation::identity:
      return a;
    case Activation::tanh:
      return a.array().tanh().matrix();
    case Activation::softplus:
      // log(1 + e^a) without overflow: max(a,0) + log1p(e^-|a|)
      return (a.array().max(0.0) + (-a.array().abs()).exp().log1p()).matrix();
    case Activation::relu:
      return a.array().max(0.0).matrix();
  }
  return a;
}

// Derivative of the activation evaluated from pre-activation `a` and output `h`.
Matrix activation_slope(const Matrix& a, const Matrix& h, Activation act) {
  switch (act) {
    case Activation::identity:
      return Matrix::Ones(a.rows(), a.cols());
    case Activation::tanh:
      return (1.0 - h.array().square()).matrix();
    case Activation::softplus:
      return (1.0 / (1.0 + (-a.array()).exp())).matrix();
    case Activation::relu:
      return (a.array() > 0.0).cast<double>().matrix();
  }
  return Matrix::Ones(a.rows(), a.cols());
}

struct ForwardTrace {
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // post[0] = input, post[i+1] = output of layer i
};

ForwardTrace trace_forward(const std::vector<DenseLayer>& layers, const Matrix& xs) {
  ForwardTrace t;
  t.pre.reserve(layers.size());
  t.post.reserve(layers.size() + 1);
  t.post.push_back(xs);
  for (const DenseLayer& l : layers) {
    Matrix a = l.weight * t.post.back();
    a.colwise() += l.bias;
    t.post.push_back(activate(a, l.activation));
    t.pre.push_back(std::move(a));
  }
  return t;
}

void check_input(const Model& model, std::ptrdiff_t rows) {
  if (model.layers().empty()) throw ConfigError("model has no layers");
  if (rows != model.input_size()) {
    throw ShapeError("input has " + std::to_string(rows) + " values, model expects " +
                     std::to_string(model.input_size()));
  }
}

void validate_layers(const std::vector<DenseLayer>& layers) {
  if (layers.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0) throw ShapeError("empty weight matrix");
    if (l.bias.size() != l.weight.rows()) throw ShapeError("bias length != layer output size");
    if (i + 1 < layers.size() && layers[i + 1].weight.cols() != l.weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " output does not chain into layer " +
                       std::to_string(i + 1));
    }
  }
  if (layers.back().activation != Activation::identity) {
    throw ConfigError("the readout layer must use the identity activation");
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::softplus:
      return "softplus";
    case Activation::relu:
      return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (Activation a :
       {Activation::identity, Activation::tanh, Activation::softplus, Activation::relu}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

bool is_smooth(Activation a) { return a != Activation::relu; }

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

Model::Model(std::vector<DenseLayer> layers, std::uint64_t seed)
    : layers_(std::move(layers)), seed_(seed) {
  validate_layers(layers_);
  for (DenseLayer& l : layers_) {
    l.weight = l.weight.unaryExpr(&round_to_float);
    l.bias = l.bias.unaryExpr(&round_to_float);
  }
}

Model Model::random(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed) {
  if (sizes.size() < 2) throw ConfigError("need at least input and output sizes");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i], out = sizes[i + 1];
    if (in <= 0 || out <= 0) throw ConfigError("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    }
    l.bias = Vector::Zero(out);
    l.activation = (i + 2 == sizes.size()) ? Activation::identity : hidden;
    layers.push_back(std::move(l));
  }
  return Model(std::move(layers), seed);
}

bool Model::smooth() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& l) { return is_smooth(l.activation); });
}

Vector Model::logits(const Vector& x) const {
  check_input(*this, x.size());
  Vector h = x;
  for (const DenseLayer& l : layers_) {
    Vector a = l.weight * h + l.bias;
    h = activate(a, l.activation);
  }
  return h;
}

Matrix Model::logits_batch(const Matrix& xs) const {
  check_input(*this, xs.rows());
  Matrix h = xs;
  for (const DenseLayer& l : layers_) {
    Matrix a = l.weight * h;
    a.colwise() += l.bias;
    h = activate(a, l.activation);
  }
  return h;
}

bool operator==(const Model& a, const Model& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const DenseLayer& x = a.layers_[i];
    const DenseLayer& y = b.layers_[i];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
        x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

Vector forward(const Model& model, const Image& x) { return model.logits(x.pixels()); }

Vector softmax(const Vector& z) {
  if (!z.allFinite()) throw NumericError("softmax of non-finite logits");
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  return e / e.sum();
}

int argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

int argmax_excluding(const Vector& v, int excluded) {
  int best = -1;
  for (int i = 0; i < v.size(); ++i) {
    if (i == excluded) continue;
    if (best < 0 || v[i] > v[best]) best = i;
  }
  return best;
}

int predict(const Model& model, const Image& x) { return argmax(forward(model, x)); }
int predict(const Model& model, const Vector& x) { return argmax(model.logits(x)); }

double cross_entropy(const Vector& z, int label) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return lse - z[label];
}

Matrix input_backprop(const Model& model, const Matrix& xs,
                      const std::function<Matrix(const Matrix&)>& output_seed) {
  check_input(model, xs.rows());
  const auto& layers = model.layers();
  ForwardTrace t = trace_forward(layers, xs);
  Matrix grad = output_seed(t.post.back());
  if (grad.rows() != t.post.back().rows() || grad.cols() != xs.cols()) {
    throw ShapeError("output seed has the wrong shape");
  }
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (layers[i].activation != Activation::identity) {
      grad.array() *= activation_slope(t.pre[i], t.post[i + 1], layers[i].activation).array();
    }
    grad = layers[i].weight.transpose() * grad;
  }
  if (!grad.allFinite()) throw NumericError("non-finite input gradient");
  return grad;
}

Matrix logit_jacobian(const Model& model, const Vector& x) {
  const int k = model.class_count();
  Matrix xs = x.replicate(1, k);
  Matrix g = input_backprop(model, xs, [k](const Matrix&) { return Matrix(Matrix::Identity(k, k)); });
  return g.transpose();
}

Vector cross_entropy_input_gradient(const Model& model, const Vector& x, int label) {
  Matrix g = input_backprop(model, x, [label](const Matrix& z) {
    Matrix seed = softmax(z.col(0));
    seed(label, 0) -= 1.0;
    return seed;
  });
  return g.col(0);
}

SgdTrainer::SgdTrainer(const Model& init, double learning_rate)
    : layers_(init.layers()), lr_(learning_rate), seed_(init.seed()) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

double SgdTrainer::step(const Matrix& xs, const std::vector<int>& labels) {
  const std::ptrdiff_t b = xs.cols();
  if (b == 0) return 0.0;
  ForwardTrace t = trace_forward(layers_, xs);
  const Matrix& z = t.post.back();

  // d(mean CE)/dz = (softmax - onehot) / b
  Matrix grad(z.rows(), b);
  double loss = 0.0;
  for (std::ptrdiff_t j = 0; j < b; ++j) {
    const Vector col = z.col(j);
    const Vector p = softmax(col);
    loss += cross_entropy(col, labels[j]);
    grad.col(j) = p;
    grad(labels[j], j) -= 1.0;
  }
  grad /= static_cast<double>(b);
  loss /= static_cast<double>(b);

  for (std::size_t i = layers_.size(); i-- > 0;) {
    DenseLayer& l = layers_[i];
    if (l.activation != Activation::identity) {
      grad.array() *= activation_slope(t.pre[i], t.post[i + 1], l.activation).array();
    }
    Matrix down;
    if (i > 0) down = l.weight.transpose() * grad;
    l.weight.noalias() -= lr_ * grad * t.post[i].transpose();
    l.bias.noalias() -= lr_ * grad.rowwise().sum();
    if (i > 0) grad = std::move(down);
  }
  return loss;
}

Model SgdTrainer::snapshot() const { return Model(layers_, seed_); }

EpochOrder::EpochOrder(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

const std::vector<std::size_t>& EpochOrder::next() {
  rng_.shuffle(order_.begin(), order_.end());
  return order_;
}

Model train_sgd(const Model& model, const Dataset& data, const TrainConfig& cfg,
                const EpochCallback& on_epoch) {
  if (data.empty()) throw EmptyInputError("cannot train on an empty dataset");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (cfg.epochs == 0) return model;

  SgdTrainer trainer(model, cfg.learning_rate);
  EpochOrder order(data.size(), cfg.seed);
  const std::ptrdiff_t n = model.input_size();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto& idx = order.next();
    double total = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(idx.size(), start + cfg.batch_size);
      Matrix xs(n, static_cast<std::ptrdiff_t>(end - start));
      std::vector<int> labels;
      labels.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        xs.col(static_cast<std::ptrdiff_t>(j - start)) = data.image(idx[j]).pixels();
        labels.push_back(data.label(idx[j]));
      }
      total += trainer.step(xs, labels) * static_cast<double>(end - start);
    }
    if (on_epoch) on_epoch(epoch, total / static_cast<double>(idx.size()));
  }
  return trainer.snapshot();
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.empty()) throw EmptyInputError("accuracy of an empty dataset");
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    Matrix xs(model.input_size(), static_cast<std::ptrdiff_t>(end - start));
    for (std::size_t j = start; j < end; ++j) {
      xs.col(static_cast<std::ptrdiff_t>(j - start)) = data.image(j).pixels();
    }
    const Matrix z = model.logits_batch(xs);
    for (std::size_t j = start; j < end; ++j) {
      if (argmax(z.col(static_cast<std::ptrdiff_t>(j - start))) == data.label(j)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace team
