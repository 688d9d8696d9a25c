#include "team/metrics.hpp"

#include <cmath>
#include <string>

#include "team/attack_result.hpp"
#include "team/errors.hpp"
#include "team/rng.hpp"

namespace team {

std::string_view to_string(Norm p) {
  switch (p) {
    case Norm::l0:
      return "l0";
    case Norm::l1:
      return "l1";
    case Norm::l2:
      return "l2";
    case Norm::linf:
      return "linf";
  }
  return "?";
}

Norm parse_norm(std::string_view name) {
  for (Norm p : {Norm::l0, Norm::l1, Norm::l2, Norm::linf}) {
    if (to_string(p) == name) return p;
  }
  if (name == "inf") return Norm::linf;
  throw ConfigError("unknown norm '" + std::string(name) + "' (expected l0, l1, l2, linf)");
}

std::string_view to_string(CaseKind c) {
  switch (c) {
    case CaseKind::best:
      return "best";
    case CaseKind::average:
      return "average";
    case CaseKind::worst:
      return "worst";
  }
  return "?";
}

double lp_norm(const Vector& delta, Norm p) {
  switch (p) {
    case Norm::l0:
      return static_cast<double>((delta.array().abs() > 1e-12).count());
    case Norm::l1:
      return delta.lpNorm<1>();
    case Norm::l2:
      return delta.norm();
    case Norm::linf:
      return delta.size() ? delta.lpNorm<Eigen::Infinity>() : 0.0;
  }
  return 0.0;
}

double psnr(const Image& x, const Image& x_adv) {
  if (!x.same_shape(x_adv)) throw ShapeError("PSNR of images with different shapes");
  double sum = 0.0;
  for (std::ptrdiff_t i = 0; i < x.size(); ++i) {
    const double d = x_adv[i] - x[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

double asr(const std::vector<AttackResult>& results) {
  if (results.empty()) throw EmptyInputError("attack success rate of an empty run");
  std::size_t ok = 0;
  for (const AttackResult& r : results) ok += r.success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

namespace {

struct Accumulator {
  CaseReport report;
  double lp_sum = 0.0;
  double psnr_sum = 0.0;

  void add(const Image& x, const AttackResult* pick, Norm norm) {
    ++report.n_images;
    if (pick == nullptr || !pick->success) return;
    ++report.n_success;
    lp_sum += pick->norm(norm);
    psnr_sum += psnr(x, pick->x_adv);
  }

  CaseReport finish(CaseKind kind) {
    report.kind = kind;
    if (report.n_images) {
      report.asr = static_cast<double>(report.n_success) / static_cast<double>(report.n_images);
    }
    if (report.n_success) {
      report.mean_lp = lp_sum / static_cast<double>(report.n_success);
      report.mean_psnr = psnr_sum / static_cast<double>(report.n_success);
    }
    return report;
  }
};

}  // namespace

CaseProtocol case_protocol(const std::vector<PerImageTargets>& per_image, std::uint64_t seed,
                           Norm norm) {
  Rng rng(seed);
  Accumulator best, average, worst;
  for (const PerImageTargets& img : per_image) {
    const auto& rs = img.results;
    if (rs.empty()) throw EmptyInputError("image without targeted results");
    const AttackResult* b = nullptr;
    const AttackResult* w = nullptr;
    const AttackResult* failed = nullptr;
    for (const AttackResult& r : rs) {
      if (!r.success) {
        if (!failed) failed = &r;
        continue;
      }
      if (!b || r.norm(norm) < b->norm(norm)) b = &r;
      if (!w || r.norm(norm) > w->norm(norm)) w = &r;
    }
    if (failed) w = failed;
    const AttackResult* a = &rs[static_cast<std::size_t>(rng.below(rs.size()))];
    best.add(img.image, b, norm);
    worst.add(img.image, w, norm);
    average.add(img.image, a, norm);
  }
  return {best.finish(CaseKind::best), average.finish(CaseKind::average),
          worst.finish(CaseKind::worst)};
}

double transfer_rate(const std::vector<AttackResult>& source_results, const Model& target_model) {
  std::size_t attempted = 0, fooled = 0;
  for (const AttackResult& r : source_results) {
    if (!r.success) continue;
    ++attempted;
    if (predict(target_model, r.x_adv) != r.true_label) ++fooled;
  }
  if (attempted == 0) throw EmptyInputError("no successful source attacks to transfer");
  return static_cast<double>(fooled) / static_cast<double>(attempted);
}

}  // namespace team
