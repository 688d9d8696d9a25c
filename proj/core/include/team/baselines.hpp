#pragma once

#include <cstdint>
#include <string_view>

#include "team/attack_result.hpp"

namespace team {

struct BaselineConfig {
  double epsilon = 0.1;  // L-infinity budget of fgsm, pgd and mdi2
  double alpha = 0.01;   // per-iteration step of pgd and mdi2
  int iters = 40;
  bool random_start = true;  // pgd only
  std::uint64_t seed = 0;

  double cw_c = 1.0;  // initial trade-off constant
  double cw_k = 0.0;  // confidence
  double cw_lr = 0.01;
  int cw_binary_steps = 9;
  int cw_iters = 200;

  double jsma_theta = 1.0;
  int jsma_max_pixels = 200;

  double momentum = 1.0;
  double diversity_p = 0.5;
  double resize_min = 0.9;

  double deepfool_overshoot = 0.02;
  int deepfool_iters = 50;
  bool deepfool_unsquared = false;  // step |f| / |w| * w instead of |f| / |w|^2 * w

  void validate() const;
};

/// x + epsilon sign(grad_x CE(z(x), y)), clamped. sign(0) = 0.
AttackResult fgsm(const Model& model, const Image& x, int y, const BaselineConfig& cfg);

/// Signed steps of size alpha projected onto the epsilon box around x and
/// [0,1], from a seeded uniform start in the box (or x). Runs all iterations.
AttackResult pgd(const Model& model, const Image& x, int y, const BaselineConfig& cfg);

/// Multiclass Deepfool: steps to the nearest linearized boundary
/// z_k - z_y = 0 until the label changes; the accumulated perturbation is
/// scaled by (1 + overshoot).
AttackResult deepfool(const Model& model, const Image& x, int y, const BaselineConfig& cfg);

/// Saliency from a logit Jacobian (classes x n): zero where dz_t/dx_i < 0 or
/// sum_{j != t} dz_j/dx_i > 0, otherwise dz_t/dx_i * |sum_{j != t} dz_j/dx_i|.
Vector saliency_from_jacobian(const Matrix& jacobian, int t);
Vector jsma_saliency(const Model& model, const Image& x, int t);

/// Raises the most salient unsaturated pixel by theta (clamped) until the
/// label is t or jsma_max_pixels pixels were changed.
AttackResult jsma_attack(const Model& model, const Image& x, int t, const BaselineConfig& cfg);

/// Carlini-Wagner L2 with the tanh change of variables, Adam on
/// |d|^2 + c max(max_{i != t} z_i - z_t, -k), and bisection on c.
AttackResult cw_l2(const Model& model, const Image& x, int t, const BaselineConfig& cfg);

/// g <- mu g + grad / |grad|_1
Vector momentum_update(const Vector& g, const Vector& grad, double mu);

/// Random resize to a factor in [resize_min, 1] (bilinear) followed by zero
/// padding back to the original size at a random offset. Linear in the
/// input, so its gradient is the transpose map.
class DiversityTransform {
 public:
  DiversityTransform(int height, int width, int channels, double factor, int top, int left);
  static DiversityTransform sample(int height, int width, int channels, double resize_min, Rng& rng);
  static DiversityTransform identity(int height, int width, int channels);

  Vector apply(const Vector& x) const;
  Vector transpose_apply(const Vector& g) const;

 private:
  struct Tap {
    std::ptrdiff_t out, in;
    double weight;
  };
  std::ptrdiff_t size_ = 0;
  std::vector<Tap> taps_;
};

/// Momentum iterative FGSM on diversity-transformed inputs: the transform is
/// applied with probability p per iteration, gradients are L1-normalized and
/// accumulated with momentum mu, and each step adds alpha sign(g) then clips
/// to the epsilon box and [0,1].
AttackResult mdi2_fgsm(const Model& model, const Image& x, int y, const BaselineConfig& cfg);

enum class BaselineKind { fgsm, pgd, deepfool, jsma, cw_l2, mdi2_fgsm };
BaselineKind parse_baseline(std::string_view name);
std::string_view to_string(BaselineKind kind);
bool is_targeted(BaselineKind kind);

/// Dispatch by kind; `target` is required for jsma and cw_l2.
AttackResult run_baseline(BaselineKind kind, const Model& model, const Image& x, int y,
                          std::optional<int> target, const BaselineConfig& cfg);

}  // namespace team
