#include "team/gauss_newton.hpp"

#include <cmath>

#include "team/errors.hpp"

namespace team {

void GnConfig::validate() const {
  if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("backtrack must be in (0,1)");
  if (!(levenberg_mu > 0.0)) throw ConfigError("levenberg_mu must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must be in (0,1)");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(norm_cap > 0.0)) throw ConfigError("norm_cap must be positive");
  if (margin < 0.0) throw ConfigError("margin must be >= 0");
}

namespace {

Vector layer_values(const Vector& z, OutputLayer layer) {
  return layer == OutputLayer::logits ? z : softmax(z);
}

// r(z) and dr/dz.
std::pair<double, Vector> residual_from_logits(const Vector& z, const GnConfig& cfg) {
  const ObjectiveSpec& o = cfg.objective;
  const Vector F = layer_values(z, o.layer);
  const Eigen::Index k = z.size();
  Vector dF = Vector::Zero(k);  // dr/dF
  double r = 0.0;
  if (!o.targeted()) {
    const int m = o.correct_class;
    if (o.layer == OutputLayer::softmax) {
      r = F[m];
      dF[m] = 1.0;
    } else {
      const int j = argmax_excluding(F, m);
      r = F[m] - F[j] + cfg.margin;
      dF[m] = 1.0;
      dF[j] = -1.0;
    }
  } else {
    const int t = *o.target_class;
    const int j = argmax_excluding(F, t);
    r = F[j] - F[t] + cfg.margin;
    dF[j] = 1.0;
    dF[t] = -1.0;
  }
  if (o.layer == OutputLayer::logits) return {r, dF};
  // softmax chain: dr/dz = f * dF - f (f . dF)
  const Vector dz = F.cwiseProduct(dF) - F * F.dot(dF);
  return {r, dz};
}

double half_square(const Model& model, const Vector& x, const GnConfig& cfg) {
  const double r = residual_from_logits(model.logits(x), cfg).first;
  return 0.5 * r * r;
}

}  // namespace

GnResidual gn_residual(const Model& model, const Vector& x, const GnConfig& cfg) {
  GnResidual out;
  Matrix xs = x;
  const Matrix g = input_backprop(model, xs, [&](const Matrix& z) {
    auto [r, dz] = residual_from_logits(z.col(0), cfg);
    out.r = r;
    return Matrix(dz);
  });
  out.v = g.col(0);
  return out;
}

Vector gn_direction(const Vector& v, double r, double mu) {
  const double vv = v.squaredNorm();
  // lambda_min(v v^T) is 0 for n >= 2 and |v|^2 for n = 1.
  const double shift = v.size() == 1 ? -vv : 0.0;
  const double a = mu + shift;
  // (v v^T + a I)^{-1} v = v / (a + |v|^2)
  return -r * v / (a + vv);
}

GnStepOutcome gn_step(const Model& model, const Image& x, const Vector& delta_k,
                      const GnConfig& cfg) {
  if (delta_k.size() != x.size()) throw ShapeError("delta size != image size");
  const Vector point = clamp_unit(x.pixels() + delta_k);
  const Vector start = point - x.pixels();
  const GnResidual res = gn_residual(model, point, cfg);
  GnStepOutcome out{start, 0.0, 0.5 * res.r * res.r, 0.5 * res.r * res.r};
  if (!res.v.allFinite()) throw NumericError("non-finite residual gradient");
  if (res.v.squaredNorm() == 0.0 || res.r == 0.0) return out;
  // Freeze pixels sitting on a bound whose step would leave [0,1].
  Vector v = res.v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double push = -res.r * v[i];
    if ((point[i] >= 1.0 && push > 0.0) || (point[i] <= 0.0 && push < 0.0)) v[i] = 0.0;
  }
  if (v.squaredNorm() == 0.0) return out;
  const Vector d = gn_direction(v, res.r, cfg.levenberg_mu);
  const double slope = res.r * v.dot(d);  // d/dalpha of r^2/2 at alpha = 0
  double alpha = cfg.alpha0;
  for (int b = 0; b <= cfg.max_backtracks; ++b, alpha *= cfg.backtrack) {
    const Vector candidate = clamp_unit(point + alpha * d);
    const double loss = half_square(model, candidate, cfg);
    if (loss <= out.loss_before + cfg.armijo_c * alpha * slope) {
      out.delta = candidate - x.pixels();
      out.alpha = alpha;
      out.loss_after = loss;
      return out;
    }
  }
  return out;
}

namespace {

AttackResult run(const Model& model, const Image& x, const GnConfig& cfg, const GnObserver& observe) {
  const Stopwatch clock;
  const ObjectiveSpec& o = cfg.objective;
  const std::optional<int> target = o.targeted() ? o.target_class : std::nullopt;
  Vector delta = Vector::Zero(x.size());
  AttackResult result = make_attack_result(model, x, x.pixels(), o.correct_class, target);
  int it = 0;
  while (it < cfg.max_iters && !result.success) {
    const GnStepOutcome step = gn_step(model, x, delta, cfg);
    ++it;
    if (step.alpha == 0.0) break;
    delta = step.delta;
    bool capped = false;
    const double norm = delta.norm();
    if (norm > cfg.norm_cap) {
      delta *= cfg.norm_cap / norm;
      capped = true;
    }
    result = make_attack_result(model, x, x.pixels() + delta, o.correct_class, target);
    if (observe) observe(it, step.loss_after);
    if (capped) break;
  }
  result.iterations = it;
  result.c_used = cfg.norm_cap;
  result.wall_time_ms = clock.elapsed_ms();
  return result;
}

}  // namespace

AttackResult gn_attack(const Model& model, const Image& x, const GnConfig& cfg,
                       const GnObserver& observe) {
  cfg.validate();
  cfg.objective.validate(model.class_count());
  require_correctly_classified(model, x, cfg.objective.correct_class);
  return run(model, x, cfg, observe);
}

AttackResult gn_attack_from(const Model& model, const Image& start, const GnConfig& cfg,
                            const GnObserver& observe) {
  cfg.validate();
  const int label = predict(model, start);
  GnConfig c = cfg;
  c.objective.correct_class = label;
  if (c.objective.targeted() && c.objective.target_class == label) {
    AttackResult r = make_attack_result(model, start, start.pixels(), label, label);
    r.c_used = cfg.norm_cap;
    return r;
  }
  c.objective.validate(model.class_count());
  return run(model, start, c, observe);
}

}  // namespace team
