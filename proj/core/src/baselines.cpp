#include "team/baselines.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "team/errors.hpp"

namespace team {

void BaselineConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (iters < 1) throw ConfigError("iters must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(diversity_p >= 0.0 && diversity_p <= 1.0)) throw ConfigError("diversity_p must be in [0,1]");
  if (!(resize_min > 0.0 && resize_min <= 1.0)) throw ConfigError("resize_min must be in (0,1]");
  if (!(cw_c > 0.0) || !(cw_lr > 0.0) || cw_binary_steps < 1 || cw_iters < 1) {
    throw ConfigError("invalid C&W parameters");
  }
  if (jsma_max_pixels < 0) throw ConfigError("jsma_max_pixels must be >= 0");
  if (deepfool_iters < 1 || deepfool_overshoot < 0.0) throw ConfigError("invalid Deepfool parameters");
}

namespace {

Vector sign(const Vector& v) {
  return v.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
}

Vector project_box(const Vector& v, const Vector& x, double eps) {
  return clamp_unit(v.cwiseMax((x.array() - eps).matrix()).cwiseMin((x.array() + eps).matrix()));
}

void require_target(const Model& model, int t, int y) {
  if (t < 0 || t >= model.class_count()) throw ConfigError("target class out of range");
  if (t == y) throw PreconditionError("target class equals the current label");
}

}  // namespace

AttackResult fgsm(const Model& model, const Image& x, int y, const BaselineConfig& cfg) {
  cfg.validate();
  require_correctly_classified(model, x, y);
  const Stopwatch clock;
  const Vector g = cross_entropy_input_gradient(model, x.pixels(), y);
  AttackResult r = make_attack_result(model, x, x.pixels() + cfg.epsilon * sign(g), y);
  r.c_used = cfg.epsilon;
  r.iterations = 1;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

AttackResult pgd(const Model& model, const Image& x, int y, const BaselineConfig& cfg) {
  cfg.validate();
  require_correctly_classified(model, x, y);
  const Stopwatch clock;
  const Vector& x0 = x.pixels();
  Vector xa = x0;
  if (cfg.random_start) {
    Rng rng(cfg.seed);
    for (Eigen::Index i = 0; i < xa.size(); ++i) xa[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
    xa = project_box(xa, x0, cfg.epsilon);
  }
  for (int it = 0; it < cfg.iters; ++it) {
    const Vector g = cross_entropy_input_gradient(model, xa, y);
    xa = project_box(xa + cfg.alpha * sign(g), x0, cfg.epsilon);
  }
  AttackResult r = make_attack_result(model, x, xa, y);
  r.c_used = cfg.epsilon;
  r.iterations = cfg.iters;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

AttackResult deepfool(const Model& model, const Image& x, int y, const BaselineConfig& cfg) {
  cfg.validate();
  require_correctly_classified(model, x, y);
  const Stopwatch clock;
  const Vector& x0 = x.pixels();
  Vector total = Vector::Zero(x0.size());
  Vector xa = x0;
  int it = 0;
  for (; it < cfg.deepfool_iters; ++it) {
    const Vector z = model.logits(xa);
    if (argmax(z) != y) break;
    const Matrix J = logit_jacobian(model, xa);
    double best = std::numeric_limits<double>::infinity();
    Vector step;
    for (int k = 0; k < model.class_count(); ++k) {
      if (k == y) continue;
      const Vector w = J.row(k) - J.row(y);
      const double f = z[k] - z[y];
      const double wn = w.norm();
      if (wn == 0.0) continue;
      const double dist = std::abs(f) / wn;
      if (dist < best) {
        best = dist;
        const double scale = cfg.deepfool_unsquared ? (std::abs(f) + 1e-4) / wn
                                                    : (std::abs(f) + 1e-4) / (wn * wn);
        step = scale * w;
      }
    }
    if (step.size() == 0) break;
    total += step;
    xa = clamp_unit(x0 + (1.0 + cfg.deepfool_overshoot) * total);
  }
  AttackResult r = make_attack_result(model, x, xa, y);
  r.iterations = it;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

Vector saliency_from_jacobian(const Matrix& jacobian, int t) {
  if (t < 0 || t >= jacobian.rows()) throw ConfigError("target class out of range");
  const Vector a = jacobian.row(t).transpose();
  const Vector b = jacobian.colwise().sum().transpose() - a;
  Vector s(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    s[i] = (a[i] < 0.0 || b[i] > 0.0) ? 0.0 : a[i] * std::abs(b[i]);
  }
  return s;
}

Vector jsma_saliency(const Model& model, const Image& x, int t) {
  require_target(model, t, predict(model, x));
  return saliency_from_jacobian(logit_jacobian(model, x.pixels()), t);
}

AttackResult jsma_attack(const Model& model, const Image& x, int t, const BaselineConfig& cfg) {
  cfg.validate();
  const int y = predict(model, x);
  require_target(model, t, y);
  const Stopwatch clock;
  Vector xa = x.pixels();
  std::vector<char> used(static_cast<std::size_t>(xa.size()), 0);
  int changed = 0;
  int it = 0;
  while (changed < cfg.jsma_max_pixels && predict(model, xa) != t) {
    Vector s = saliency_from_jacobian(logit_jacobian(model, xa), t);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const bool saturated = cfg.jsma_theta > 0.0 ? xa[i] >= 1.0 : xa[i] <= 0.0;
      if (saturated) s[i] = 0.0;
    }
    Eigen::Index best = 0;
    const double top = s.maxCoeff(&best);
    if (!(top > 0.0)) break;
    xa[best] = std::clamp(xa[best] + cfg.jsma_theta, 0.0, 1.0);
    if (!used[static_cast<std::size_t>(best)]) {
      used[static_cast<std::size_t>(best)] = 1;
      ++changed;
    }
    ++it;
  }
  AttackResult r = make_attack_result(model, x, xa, y, t);
  r.iterations = it;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

namespace {

struct CwOutcome {
  Vector x_adv;
  bool success = false;
};

CwOutcome cw_optimize(const Model& model, const Vector& x0, int t, double c, const BaselineConfig& cfg) {
  const Eigen::Index n = x0.size();
  constexpr double kShrink = 1.0 - 1e-6;
  Vector w = ((2.0 * x0.array() - 1.0) * kShrink).atanh().matrix();
  Vector m = Vector::Zero(n), v = Vector::Zero(n);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  CwOutcome best;
  double best_l2 = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.cw_iters; ++it) {
    const Vector th = w.array().tanh().matrix();
    const Vector xa = (0.5 * (th.array() + 1.0)).matrix();
    const Vector delta = xa - x0;
    const Vector z = model.logits(xa);
    const int j = argmax_excluding(z, t);
    if (argmax(z) == t && delta.squaredNorm() < best_l2) {
      best_l2 = delta.squaredNorm();
      best = {xa, true};
    }
    // d/dx of |d|^2 + c max(z_j - z_t, -k)
    Vector grad_x = 2.0 * delta;
    if (z[j] - z[t] > -cfg.cw_k) {
      Matrix xs = xa;
      const Matrix g = input_backprop(model, xs, [&](const Matrix& zz) {
        Matrix seed = Matrix::Zero(zz.rows(), 1);
        seed(j, 0) = c;
        seed(t, 0) = -c;
        return seed;
      });
      grad_x += g.col(0);
    }
    const Vector grad_w = grad_x.cwiseProduct((0.5 * (1.0 - th.array().square())).matrix());
    m = b1 * m + (1.0 - b1) * grad_w;
    v = b2 * v + (1.0 - b2) * grad_w.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, it), c2 = 1.0 - std::pow(b2, it);
    w -= (cfg.cw_lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  }
  if (!best.success) best.x_adv = (0.5 * (w.array().tanh() + 1.0)).matrix();
  return best;
}

}  // namespace

AttackResult cw_l2(const Model& model, const Image& x, int t, const BaselineConfig& cfg) {
  cfg.validate();
  const int y = predict(model, x);
  require_target(model, t, y);
  const Stopwatch clock;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity(), c = cfg.cw_c;
  std::optional<Vector> best;
  double best_l2 = std::numeric_limits<double>::infinity();
  double best_c = c;
  Vector last = x.pixels();
  for (int step = 0; step < cfg.cw_binary_steps; ++step) {
    const CwOutcome out = cw_optimize(model, x.pixels(), t, c, cfg);
    last = out.x_adv;
    if (out.success) {
      const double l2 = (out.x_adv - x.pixels()).squaredNorm();
      if (l2 < best_l2) {
        best_l2 = l2;
        best = out.x_adv;
        best_c = c;
      }
      hi = c;
      c = 0.5 * (lo + hi);
    } else {
      lo = c;
      c = std::isinf(hi) ? 10.0 * c : 0.5 * (lo + hi);
    }
  }
  AttackResult r = make_attack_result(model, x, best ? *best : last, y, t);
  r.c_used = best ? best_c : lo;
  r.iterations = cfg.cw_binary_steps * cfg.cw_iters;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

Vector momentum_update(const Vector& g, const Vector& grad, double mu) {
  const double l1 = grad.lpNorm<1>();
  if (l1 == 0.0) return mu * g;
  return mu * g + grad / l1;
}

DiversityTransform::DiversityTransform(int height, int width, int channels, double factor, int top,
                                       int left)
    : size_(std::ptrdiff_t{height} * width * channels) {
  if (height <= 0 || width <= 0 || channels <= 0) throw ShapeError("bad transform shape");
  if (!(factor > 0.0 && factor <= 1.0)) throw ConfigError("resize factor must be in (0,1]");
  const int h2 = std::max(1, static_cast<int>(std::lround(factor * height)));
  const int w2 = std::max(1, static_cast<int>(std::lround(factor * width)));
  if (top < 0 || left < 0 || top + h2 > height || left + w2 > width) {
    throw ConfigError("padding offset out of range");
  }
  const double sy = static_cast<double>(height) / h2, sx = static_cast<double>(width) / w2;
  auto index = [&](int r, int c, int ch) {
    return (std::ptrdiff_t{r} * width + c) * channels + ch;
  };
  for (int r = 0; r < h2; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, height - 1);
    const double ay = fy - y0;
    for (int c = 0; c < w2; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, width - 1);
      const double ax = fx - x0;
      for (int ch = 0; ch < channels; ++ch) {
        const std::ptrdiff_t out = index(r + top, c + left, ch);
        const double ws[4] = {(1 - ay) * (1 - ax), (1 - ay) * ax, ay * (1 - ax), ay * ax};
        const std::ptrdiff_t ins[4] = {index(y0, x0, ch), index(y0, x1, ch), index(y1, x0, ch),
                                       index(y1, x1, ch)};
        for (int q = 0; q < 4; ++q) {
          if (ws[q] != 0.0) taps_.push_back({out, ins[q], ws[q]});
        }
      }
    }
  }
}

DiversityTransform DiversityTransform::sample(int height, int width, int channels,
                                              double resize_min, Rng& rng) {
  const double factor = rng.uniform(resize_min, 1.0);
  const int h2 = std::max(1, static_cast<int>(std::lround(factor * height)));
  const int w2 = std::max(1, static_cast<int>(std::lround(factor * width)));
  const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h2 + 1)));
  const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w2 + 1)));
  return DiversityTransform(height, width, channels, factor, top, left);
}

DiversityTransform DiversityTransform::identity(int height, int width, int channels) {
  return DiversityTransform(height, width, channels, 1.0, 0, 0);
}

Vector DiversityTransform::apply(const Vector& x) const {
  if (x.size() != size_) throw ShapeError("transform input has the wrong size");
  Vector out = Vector::Zero(size_);
  for (const Tap& t : taps_) out[t.out] += t.weight * x[t.in];
  return out;
}

Vector DiversityTransform::transpose_apply(const Vector& g) const {
  if (g.size() != size_) throw ShapeError("transform gradient has the wrong size");
  Vector out = Vector::Zero(size_);
  for (const Tap& t : taps_) out[t.in] += t.weight * g[t.out];
  return out;
}

AttackResult mdi2_fgsm(const Model& model, const Image& x, int y, const BaselineConfig& cfg) {
  cfg.validate();
  require_correctly_classified(model, x, y);
  const Stopwatch clock;
  Rng rng(cfg.seed);
  const Vector& x0 = x.pixels();
  Vector xa = x0;
  Vector g = Vector::Zero(x0.size());
  for (int it = 0; it < cfg.iters; ++it) {
    Vector grad;
    if (cfg.diversity_p > 0.0 && rng.uniform() < cfg.diversity_p) {
      const auto T = DiversityTransform::sample(x.height(), x.width(), x.channels(), cfg.resize_min, rng);
      grad = T.transpose_apply(cross_entropy_input_gradient(model, T.apply(xa), y));
    } else {
      grad = cross_entropy_input_gradient(model, xa, y);
    }
    g = momentum_update(g, grad, cfg.momentum);
    xa = project_box(xa + cfg.alpha * sign(g), x0, cfg.epsilon);
  }
  AttackResult r = make_attack_result(model, x, xa, y);
  r.c_used = cfg.epsilon;
  r.iterations = cfg.iters;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

BaselineKind parse_baseline(std::string_view name) {
  for (BaselineKind k : {BaselineKind::fgsm, BaselineKind::pgd, BaselineKind::deepfool,
                         BaselineKind::jsma, BaselineKind::cw_l2, BaselineKind::mdi2_fgsm}) {
    if (to_string(k) == name) return k;
  }
  if (name == "cw") return BaselineKind::cw_l2;
  if (name == "mdi2") return BaselineKind::mdi2_fgsm;
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::fgsm:
      return "fgsm";
    case BaselineKind::pgd:
      return "pgd";
    case BaselineKind::deepfool:
      return "deepfool";
    case BaselineKind::jsma:
      return "jsma";
    case BaselineKind::cw_l2:
      return "cw_l2";
    case BaselineKind::mdi2_fgsm:
      return "mdi2_fgsm";
  }
  return "?";
}

bool is_targeted(BaselineKind kind) { return kind == BaselineKind::jsma || kind == BaselineKind::cw_l2; }

AttackResult run_baseline(BaselineKind kind, const Model& model, const Image& x, int y,
                          std::optional<int> target, const BaselineConfig& cfg) {
  if (is_targeted(kind)) {
    if (!target) throw ConfigError(std::string(to_string(kind)) + " needs a target class");
    require_correctly_classified(model, x, y);
  }
  switch (kind) {
    case BaselineKind::fgsm:
      return fgsm(model, x, y, cfg);
    case BaselineKind::pgd:
      return pgd(model, x, y, cfg);
    case BaselineKind::deepfool:
      return deepfool(model, x, y, cfg);
    case BaselineKind::jsma:
      return jsma_attack(model, x, *target, cfg);
    case BaselineKind::cw_l2:
      return cw_l2(model, x, *target, cfg);
    case BaselineKind::mdi2_fgsm:
      return mdi2_fgsm(model, x, y, cfg);
  }
  throw ConfigError("unknown baseline");
}

}  // namespace team
