#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "team/image.hpp"

namespace team {

struct AttackResult;
class Model;

enum class Norm { l0, l1, l2, linf };

std::string_view to_string(Norm p);
Norm parse_norm(std::string_view name);

/// L0 counts entries with |v| > 1e-12; L1, L2 and L-infinity are standard.
double lp_norm(const Vector& delta, Norm p);

/// Reported in place of +infinity when two images are identical.
inline constexpr double kPsnrIdentical = 999.0;

/// 10 log10(1 / MSE) on [0,1] pixels. Throws ShapeError on shape mismatch.
double psnr(const Image& x, const Image& x_adv);

/// successes / total. Throws EmptyInputError on an empty list.
double asr(const std::vector<AttackResult>& results);

enum class CaseKind { best, average, worst };
std::string_view to_string(CaseKind c);

struct CaseReport {
  CaseKind kind = CaseKind::best;
  double mean_lp = 0.0;    // over successful attacks only
  double mean_psnr = 0.0;  // over successful attacks only
  double asr = 0.0;
  std::size_t n_images = 0;
  std::size_t n_success = 0;
};

/// Targeted results of one image: one entry per incorrect class.
struct PerImageTargets {
  Image image;
  std::vector<AttackResult> results;
};

struct CaseProtocol {
  CaseReport best;
  CaseReport average;
  CaseReport worst;
};

/// Best = the successful target with the smallest perturbation norm (failure
/// if none succeeded); worst = a failed target if any, else the largest norm;
/// average = one target drawn uniformly per image with the given seed.
/// Norm means and PSNR cover successful picks only.
CaseProtocol case_protocol(const std::vector<PerImageTargets>& per_image, std::uint64_t seed,
                           Norm norm = Norm::l2);

/// Fraction of source-successful adversarial examples whose label on
/// `target_model` differs from the true label. Throws EmptyInputError when no
/// source attack succeeded.
double transfer_rate(const std::vector<AttackResult>& source_results, const Model& target_model);

}  // namespace team
