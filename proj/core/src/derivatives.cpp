#include "team/derivatives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "team/errors.hpp"

namespace team {
namespace {

Matrix objective_gradients(const Model& model, const Matrix& xs, const ObjectiveSpec& obj) {
  obj.validate(model.class_count());
  return input_backprop(model, xs, [&obj](const Matrix& z) {
    Matrix seed(z.rows(), z.cols());
    for (std::ptrdiff_t j = 0; j < z.cols(); ++j) seed.col(j) = objective_logit_seed(z.col(j), obj);
    return seed;
  });
}

}  // namespace

Vector input_gradient(const Model& model, const Vector& x, const ObjectiveSpec& obj) {
  return objective_gradients(model, x, obj).col(0);
}

Vector input_gradient(const Model& model, const Image& x, const ObjectiveSpec& obj) {
  return input_gradient(model, x.pixels(), obj);
}

Matrix finite_difference_hessian(const BatchGradient& gradient, const Vector& x, double step) {
  const std::ptrdiff_t n = x.size();
  Matrix probes(n, 2 * n);
  Vector h(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    h[i] = step * std::max(1.0, std::abs(x[i]));
    probes.col(2 * i) = x;
    probes(i, 2 * i) += h[i];
    probes.col(2 * i + 1) = x;
    probes(i, 2 * i + 1) -= h[i];
  }
  const Matrix g = gradient(probes);
  if (g.rows() != n || g.cols() != 2 * n) throw ShapeError("gradient callback returned wrong shape");
  Matrix H(n, n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    H.col(i) = (g.col(2 * i) - g.col(2 * i + 1)) / (2.0 * h[i]);
  }
  Matrix sym = 0.5 * (H + H.transpose());
  return sym;
}

Matrix input_hessian(const Model& model, const Vector& x, const ObjectiveSpec& obj,
                     std::ptrdiff_t cap) {
  if (!model.smooth()) {
    throw UnsupportedError("input Hessian needs smooth activations; the model uses relu");
  }
  if (x.size() > cap) {
    throw ResourceError("input dimension " + std::to_string(x.size()) + " exceeds Hessian cap " +
                        std::to_string(cap));
  }
  obj.validate(model.class_count());
  return finite_difference_hessian(
      [&](const Matrix& xs) { return objective_gradients(model, xs, obj); }, x);
}

Matrix input_hessian(const Model& model, const Image& x, const ObjectiveSpec& obj,
                     std::ptrdiff_t cap) {
  return input_hessian(model, x.pixels(), obj, cap);
}

}  // namespace team
