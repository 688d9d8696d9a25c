#include "team/team_attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "team/errors.hpp"

namespace team {

void TeamConfig::validate() const {
  if (!(c_start > 0.0)) throw ConfigError("c_start must be positive");
  if (!(c_step > 0.0)) throw ConfigError("c_step must be positive");
  if (!(c_max >= c_start)) throw ConfigError("c_max must be >= c_start");
  if (norm == Norm::l1) throw ConfigError("the budget sweep supports l0, l2 and linf");
  if (rebuild_every < 0) throw ConfigError("rebuild_every must be >= 0");
  if (norm == Norm::l0 && (l0_budget < 1 || !(l0_magnitude > 0.0))) {
    throw ConfigError("l0 attack needs l0_budget >= 1 and l0_magnitude > 0");
  }
  if (linf_iters < 1) throw ConfigError("linf_iters must be >= 1");
}

int TeamConfig::steps() const {
  return static_cast<int>(std::floor((c_max - c_start) / c_step + 1e-9)) + 1;
}

double TeamConfig::budget(int k) const { return c_start + k * c_step; }

namespace {

// Surrogate around the current expansion point plus its spectral data.
struct Surrogate {
  QuadraticModel qm;
  std::optional<SpectralQuadratic> spectral;
};

Surrogate expand(const Model& model, const Image& at, const TeamConfig& cfg) {
  Surrogate s{build_taylor_model(model, at, cfg.objective, cfg.hessian_cap), std::nullopt};
  if (cfg.norm == Norm::l2) s.spectral = decompose(s.qm);
  return s;
}

struct Step {
  Vector delta;
  double lambda = 0.0;
};

Step solve_budget(const Surrogate& s, const TeamConfig& cfg, double C, int k) {
  switch (cfg.norm) {
    case Norm::l2: {
      TrustRegionSolution sol = solve_trust_region_l2(s.qm, *s.spectral, C);
      return {std::move(sol.delta), sol.lambda};
    }
    case Norm::linf:
      return {solve_linf(s.qm, C, cfg.linf_iters), 0.0};
    case Norm::l0:
      return {solve_l0(s.qm, std::min(cfg.l0_budget, k + 1), cfg.l0_magnitude), 0.0};
    case Norm::l1:
      break;
  }
  throw ConfigError("unsupported norm");
}

// Projects a total perturbation back onto the budget set of C.
Vector project_budget(Vector d, const TeamConfig& cfg, double C, int k) {
  switch (cfg.norm) {
    case Norm::l2: {
      const double n2 = d.squaredNorm();
      if (n2 > C) d *= std::sqrt(C / n2);
      return d;
    }
    case Norm::linf: {
      const double r = std::sqrt(C);
      return d.cwiseMax(-r).cwiseMin(r);
    }
    case Norm::l0: {
      const int keep = std::min(cfg.l0_budget, k + 1);
      if ((d.array() != 0.0).count() <= keep) return d;
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(d.size()));
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      std::stable_sort(idx.begin(), idx.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return std::abs(d[a]) > std::abs(d[b]); });
      for (std::size_t i = static_cast<std::size_t>(keep); i < idx.size(); ++i) d[idx[i]] = 0.0;
      return d;
    }
    case Norm::l1:
      break;
  }
  return d;
}

}  // namespace

AttackResult team_attack(const Model& model, const Image& x, const TeamConfig& cfg) {
  cfg.validate();
  cfg.objective.validate(model.class_count());
  require_correctly_classified(model, x, cfg.objective.correct_class);
  const Stopwatch clock;

  Surrogate s = expand(model, x, cfg);
  Vector offset = Vector::Zero(x.size());  // expansion point minus x
  const int steps = cfg.steps();
  AttackResult last;
  for (int k = 0; k < steps; ++k) {
    const double C = cfg.budget(k);
    Step step = solve_budget(s, cfg, C, k);
    Vector total = offset + step.delta;
    if (cfg.rebuild_every > 0) total = project_budget(std::move(total), cfg, C, k);
    last = make_attack_result(model, x, x.pixels() + total, cfg.objective);
    last.c_used = C;
    last.lambda = step.lambda;
    last.iterations = k + 1;
    if (last.success) break;
    if (cfg.rebuild_every > 0 && (k + 1) % cfg.rebuild_every == 0 && k + 1 < steps) {
      offset = last.delta;
      s = expand(model, last.x_adv, cfg);
    }
  }
  last.wall_time_ms = clock.elapsed_ms();
  return last;
}

std::vector<AttackResult> team_targeted_sweep(const Model& model, const Image& x,
                                              const TeamConfig& cfg) {
  if (!cfg.objective.targeted()) {
    throw ConfigError("a targeted sweep needs a targeted objective (T2, T3, T5 or T6)");
  }
  const int m = cfg.objective.correct_class;
  require_correctly_classified(model, x, m);
  std::vector<AttackResult> out;
  for (int t = 0; t < model.class_count(); ++t) {
    if (t == m) continue;
    TeamConfig c = cfg;
    c.objective.target_class = t;
    out.push_back(team_attack(model, x, c));
  }
  return out;
}

std::vector<SweepPoint> c_sweep_trace(const Model& model, const Image& x, const TeamConfig& cfg) {
  cfg.validate();
  if (cfg.norm != Norm::l2) throw ConfigError("the budget trace is defined for the l2 norm");
  cfg.objective.validate(model.class_count());
  require_correctly_classified(model, x, cfg.objective.correct_class);
  const Surrogate s = expand(model, x, cfg);
  std::vector<SweepPoint> trace;
  for (int k = 0; k < cfg.steps(); ++k) {
    const double C = cfg.budget(k);
    const TrustRegionSolution sol = solve_trust_region_l2(s.qm, *s.spectral, C);
    const Vector adv = clamp_unit(x.pixels() + sol.delta);
    trace.push_back({C, sol.primal_value, sol.dual_value,
                     cross_entropy(model.logits(adv), cfg.objective.correct_class)});
  }
  return trace;
}

}  // namespace team
