#include "team/advtrain.hpp"

#include <cmath>
#include <string>

#include "team/errors.hpp"
#include "team/parallel.hpp"

namespace team {

InnerAttack parse_inner_attack(std::string_view name) {
  for (InnerAttack a : {InnerAttack::identity, InnerAttack::team, InnerAttack::gauss_newton,
                        InnerAttack::fgsm, InnerAttack::pgd}) {
    if (to_string(a) == name) return a;
  }
  if (name == "gn") return InnerAttack::gauss_newton;
  throw ConfigError("unknown inner attack '" + std::string(name) + "'");
}

std::string_view to_string(InnerAttack a) {
  switch (a) {
    case InnerAttack::identity:
      return "identity";
    case InnerAttack::team:
      return "team";
    case InnerAttack::gauss_newton:
      return "gauss_newton";
    case InnerAttack::fgsm:
      return "fgsm";
    case InnerAttack::pgd:
      return "pgd";
  }
  return "?";
}

TeamConfig InnerAttackSpec::default_team() {
  TeamConfig c;
  c.norm = Norm::linf;
  c.c_start = 0.01;
  c.c_max = 0.01;
  c.linf_iters = 20;
  return c;
}

GnConfig InnerAttackSpec::default_gn() {
  GnConfig c;
  c.objective = ObjectiveSpec::numbered(4, 0);
  c.max_iters = 20;
  return c;
}

AttackResult run_inner_attack(const Model& model, const Image& x, int y, const InnerAttackSpec& spec,
                              std::uint64_t seed) {
  switch (spec.kind) {
    case InnerAttack::identity: {
      require_correctly_classified(model, x, y);
      return make_attack_result(model, x, x.pixels(), y);
    }
    case InnerAttack::team: {
      if (x.size() > spec.team.hessian_cap) {
        InnerAttackSpec gn = spec;
        gn.kind = InnerAttack::gauss_newton;
        return run_inner_attack(model, x, y, gn, seed);
      }
      TeamConfig c = spec.team;
      c.objective.correct_class = y;
      c.objective.target_class.reset();
      c.objective.mode = ObjectiveMode::correct_class;
      return team_attack(model, x, c);
    }
    case InnerAttack::gauss_newton: {
      GnConfig c = spec.gn;
      c.objective.correct_class = y;
      c.objective.target_class.reset();
      c.objective.mode = ObjectiveMode::correct_class;
      return gn_attack(model, x, c);
    }
    case InnerAttack::fgsm:
      return fgsm(model, x, y, spec.baseline);
    case InnerAttack::pgd: {
      BaselineConfig c = spec.baseline;
      c.seed = seed;
      return pgd(model, x, y, c);
    }
  }
  throw ConfigError("unknown inner attack");
}

void AdvTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(mix_clean >= 0.0 && mix_clean <= 1.0)) throw ConfigError("mix_clean must be in [0,1]");
}

Model adversarial_train(const Model& model, const Dataset& data, const AdvTrainConfig& cfg,
                        const AdvEpochCallback& on_epoch) {
  if (data.empty()) throw EmptyInputError("cannot train on an empty dataset");
  cfg.validate();
  if (cfg.epochs == 0) return model;

  SgdTrainer trainer(model, cfg.learning_rate);
  EpochOrder order(data.size(), cfg.seed);
  const std::uint64_t attack_stream = derive_seed(cfg.seed, 1);
  std::uint64_t sample_counter = 0;
  const std::ptrdiff_t n = model.input_size();
  const std::size_t clean_per_batch =
      static_cast<std::size_t>(std::ceil(cfg.mix_clean * static_cast<double>(cfg.batch_size)));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto& idx = order.next();
    AdvEpochStats stats;
    stats.epoch = epoch;
    double total = 0.0, adv_total = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix xs(n, static_cast<std::ptrdiff_t>(end - start));
      std::vector<int> labels;
      labels.reserve(end - start);
      for (std::size_t j = start; j < end; ++j) {
        xs.col(static_cast<std::ptrdiff_t>(j - start)) = data.image(idx[j]).pixels();
        labels.push_back(data.label(idx[j]));
      }
      const std::uint64_t batch_base = sample_counter;
      sample_counter += end - start;

      const std::size_t first_attacked = start + std::min(clean_per_batch, end - start);
      if (cfg.attack.kind != InnerAttack::identity && first_attacked < end) {
        const Model current = trainer.snapshot();
        std::vector<std::optional<AttackResult>> adv(end - first_attacked);
        parallel_for(adv.size(), cfg.workers, [&](std::size_t k) {
          const std::size_t j = first_attacked + k;
          try {
            adv[k] = run_inner_attack(current, data.image(idx[j]), data.label(idx[j]), cfg.attack,
                                      derive_seed(attack_stream, batch_base + (j - start)));
          } catch (const Error&) {
          }
        });
        for (std::size_t k = 0; k < adv.size(); ++k) {
          if (!adv[k]) {
            ++stats.fallbacks;
            continue;
          }
          const std::size_t j = first_attacked + k;
          xs.col(static_cast<std::ptrdiff_t>(j - start)) = adv[k]->x_adv.pixels();
          adv_total += cross_entropy(current.logits(adv[k]->x_adv.pixels()), data.label(idx[j]));
          ++stats.attacked;
        }
      }
      total += trainer.step(xs, labels) * static_cast<double>(end - start);
    }
    stats.loss = total / static_cast<double>(idx.size());
    stats.adversarial_loss = stats.attacked ? adv_total / static_cast<double>(stats.attacked) : 0.0;
    if (on_epoch) on_epoch(stats);
  }
  return trainer.snapshot();
}

double robust_accuracy(const Model& model, const Dataset& data, const InnerAttackSpec& spec,
                       std::uint64_t seed) {
  if (data.empty()) throw EmptyInputError("robust accuracy of an empty dataset");
  std::size_t robust = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image& x = data.image(i);
    const int y = data.label(i);
    if (predict(model, x) != y) continue;
    const AttackResult r = run_inner_attack(model, x, y, spec, derive_seed(seed, i));
    if (r.final_label == y) ++robust;
  }
  return static_cast<double>(robust) / static_cast<double>(data.size());
}

}  // namespace team
