#include "team/objective.hpp"

#include <cctype>

#include "team/errors.hpp"

namespace team {

ObjectiveSpec ObjectiveSpec::numbered(int index, int correct, std::optional<int> target) {
  ObjectiveSpec s;
  s.correct_class = correct;
  switch (index) {
    case 1:
    case 4:
      s.mode = ObjectiveMode::correct_class;
      break;
    case 2:
    case 5:
      s.mode = ObjectiveMode::target_class;
      break;
    case 3:
    case 6:
      s.mode = ObjectiveMode::target_margin;
      break;
    default:
      throw ConfigError("objective index must be 1..6, got " + std::to_string(index));
  }
  s.layer = index <= 3 ? OutputLayer::logits : OutputLayer::softmax;
  if (s.targeted()) {
    if (!target) throw ConfigError("objective T" + std::to_string(index) + " needs a target");
    if (*target == correct) throw ConfigError("target class equals correct class");
    s.target_class = target;
  }
  return s;
}

ObjectiveSpec ObjectiveSpec::parse(std::string_view name, int correct, std::optional<int> target) {
  if (name.size() == 2 && std::toupper(static_cast<unsigned char>(name[0])) == 'T' &&
      name[1] >= '1' && name[1] <= '6') {
    return numbered(name[1] - '0', correct, target);
  }
  throw ConfigError("unknown objective '" + std::string(name) + "' (expected T1..T6)");
}

int ObjectiveSpec::index() const {
  const int base = layer == OutputLayer::logits ? 0 : 3;
  switch (mode) {
    case ObjectiveMode::correct_class:
      return base + 1;
    case ObjectiveMode::target_class:
      return base + 2;
    case ObjectiveMode::target_margin:
      return base + 3;
  }
  return 0;
}

void ObjectiveSpec::validate(int class_count) const {
  if (correct_class < 0 || correct_class >= class_count) {
    throw ConfigError("correct class " + std::to_string(correct_class) + " out of range");
  }
  if (!targeted()) return;
  if (!target_class) throw ConfigError(name() + " requires a target class");
  if (*target_class < 0 || *target_class >= class_count) {
    throw ConfigError("target class " + std::to_string(*target_class) + " out of range");
  }
  if (*target_class == correct_class) throw ConfigError("target class equals correct class");
}

double objective_from_logits(const Vector& z, const ObjectiveSpec& obj) {
  obj.validate(static_cast<int>(z.size()));
  const Vector out = obj.layer == OutputLayer::logits ? z : softmax(z);
  switch (obj.mode) {
    case ObjectiveMode::correct_class:
      return out[obj.correct_class];
    case ObjectiveMode::target_class:
      return out[*obj.target_class];
    case ObjectiveMode::target_margin: {
      const int t = *obj.target_class;
      return out[t] - out[argmax_excluding(out, t)];
    }
  }
  return 0.0;
}

Vector objective_logit_seed(const Vector& z, const ObjectiveSpec& obj) {
  obj.validate(static_cast<int>(z.size()));
  const std::ptrdiff_t k = z.size();
  // Seed with respect to the chosen output layer first.
  Vector seed = Vector::Zero(k);
  switch (obj.mode) {
    case ObjectiveMode::correct_class:
      seed[obj.correct_class] = 1.0;
      break;
    case ObjectiveMode::target_class:
      seed[*obj.target_class] = 1.0;
      break;
    case ObjectiveMode::target_margin: {
      // argmax over softmax equals argmax over logits, same tie-break
      const int t = *obj.target_class;
      seed[t] = 1.0;
      seed[argmax_excluding(z, t)] -= 1.0;
      break;
    }
  }
  if (obj.layer == OutputLayer::logits) return seed;
  // Chain through softmax: J = diag(f) - f f^T, symmetric.
  const Vector f = softmax(z);
  return f.cwiseProduct(seed) - f * f.dot(seed);
}

double eval_objective(const Model& model, const Vector& x, const ObjectiveSpec& obj) {
  return objective_from_logits(model.logits(x), obj);
}

double eval_objective(const Model& model, const Image& x, const ObjectiveSpec& obj) {
  return eval_objective(model, x.pixels(), obj);
}

Direction attack_direction(const ObjectiveSpec& obj) {
  return obj.mode == ObjectiveMode::correct_class ? Direction::minimize : Direction::maximize;
}

bool success_for_label(const ObjectiveSpec& obj, int predicted) {
  return obj.targeted() ? predicted == *obj.target_class : predicted != obj.correct_class;
}

bool success_predicate(const ObjectiveSpec& obj, const Model& model, const Image& x_adv) {
  return success_for_label(obj, predict(model, x_adv));
}

}  // namespace team
