#include "team/attack_result.hpp"

#include <string>

#include "team/errors.hpp"

namespace team {

double AttackResult::norm(Norm p) const {
  switch (p) {
    case Norm::l0:
      return norm_l0;
    case Norm::l1:
      return norm_l1;
    case Norm::l2:
      return norm_l2;
    case Norm::linf:
      return norm_linf;
  }
  return norm_l2;
}

AttackResult make_attack_result(const Model& model, const Image& x, const Vector& candidate,
                                int true_label, std::optional<int> target) {
  if (candidate.size() != x.size()) throw ShapeError("adversarial candidate has the wrong size");
  AttackResult r;
  r.x_adv = Image::clamped(candidate, x.height(), x.width(), x.channels());
  r.delta = r.x_adv.pixels() - x.pixels();
  r.true_label = true_label;
  r.target = target;
  r.final_label = predict(model, r.x_adv);
  r.success = target ? r.final_label == *target : r.final_label != true_label;
  r.norm_l0 = lp_norm(r.delta, Norm::l0);
  r.norm_l1 = lp_norm(r.delta, Norm::l1);
  r.norm_l2 = lp_norm(r.delta, Norm::l2);
  r.norm_linf = lp_norm(r.delta, Norm::linf);
  return r;
}

AttackResult make_attack_result(const Model& model, const Image& x, const Vector& candidate,
                                const ObjectiveSpec& obj) {
  return make_attack_result(model, x, candidate, obj.correct_class,
                            obj.targeted() ? obj.target_class : std::nullopt);
}

void require_correctly_classified(const Model& model, const Image& x, int label) {
  const int got = predict(model, x);
  if (got != label) {
    throw PreconditionError("clean input is classified as " + std::to_string(got) +
                            ", expected " + std::to_string(label) +
                            "; an already misclassified image has no adversarial meaning");
  }
}

}  // namespace team
