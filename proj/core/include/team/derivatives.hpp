#pragma once

#include <functional>

#include "team/image.hpp"
#include "team/network.hpp"
#include "team/objective.hpp"

namespace team {

/// Largest input dimension for which a dense Hessian is formed.
inline constexpr std::ptrdiff_t kDefaultHessianCap = 1024;

/// Exact reverse-mode gradient of the objective with respect to the pixels.
Vector input_gradient(const Model& model, const Vector& x, const ObjectiveSpec& obj);
Vector input_gradient(const Model& model, const Image& x, const ObjectiveSpec& obj);

/// Batched gradient callback: columns of `xs` in, gradient columns out.
using BatchGradient = std::function<Matrix(const Matrix& xs)>;

/// Hessian by central differences of an exact gradient, column by column:
///   H(:,i) = (grad(x + h_i e_i) - grad(x - h_i e_i)) / (2 h_i),
///   h_i = step * max(1, |x_i|),
/// followed by H <- (H + H^T) / 2. All 2n probes are evaluated as one batch.
Matrix finite_difference_hessian(const BatchGradient& gradient, const Vector& x,
                                 double step = 1e-3);

/// Input Hessian of the objective. Requires smooth activations and
/// n <= cap; throws UnsupportedError / ResourceError otherwise.
Matrix input_hessian(const Model& model, const Vector& x, const ObjectiveSpec& obj,
                     std::ptrdiff_t cap = kDefaultHessianCap);
Matrix input_hessian(const Model& model, const Image& x, const ObjectiveSpec& obj,
                     std::ptrdiff_t cap = kDefaultHessianCap);

}  // namespace team
