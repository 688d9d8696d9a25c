#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "team/baselines.hpp"
#include "team/errors.hpp"
#include "team/gauss_newton.hpp"
#include "team/team_attack.hpp"

namespace team {

/// Settings of one attack experiment. Every field has a flat text key (see
/// experiment_keys); a config file holds one `key = value` per line, `#`
/// starts a comment.
struct ExperimentConfig {
  std::filesystem::path images;  // IDX image file
  std::filesystem::path labels;  // IDX label file
  std::size_t data_offset = 0;   // first dataset index considered
  std::size_t data_limit = 0;    // number of indices considered, 0 = all
  std::filesystem::path model;   // checkpoint

  /// team, gn, fgsm, pgd, deepfool, jsma, cw, mdi2
  std::string attack = "team";
  /// T1..T6, used by team and gn
  std::string objective = "T1";
  /// Target selection for targeted runs: all (every other class), next
  /// ((label + 1) mod classes) or a class index.
  std::string target = "all";
  TeamConfig team;
  GnConfig gn;
  BaselineConfig baseline;

  std::size_t image_count = 100;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0 = hardware concurrency
  bool record_timing = false;
  std::filesystem::path output;  // CSV destination, empty = none

  /// Throws ConfigError for inconsistent settings and ResourceError when a
  /// referenced file is missing. `require_files` = false skips the latter.
  void validate(bool require_files = true) const;
  bool targeted() const;
};

/// Every accepted config key, in documentation order.
const std::vector<std::string>& experiment_keys();

/// Sets one key. Throws ConfigError on an unknown key or malformed value.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Applies a config file body. Errors carry the line number.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);

/// Defaults, then the file, then TEAM_SEED (`env_seed`), then the
/// `overrides` in order.
ExperimentConfig resolve_experiment_config(
    const std::optional<std::filesystem::path>& file, const char* env_seed,
    const std::vector<std::pair<std::string, std::string>>& overrides);

/// An attack error raised while processing one image.
class ImageError : public Error {
 public:
  ImageError(std::size_t image_id, const std::string& what)
      : Error("image " + std::to_string(image_id) + ": " + what), image_id_(image_id) {}
  std::size_t image_id() const { return image_id_; }

 private:
  std::size_t image_id_;
};

struct ExperimentRow {
  std::size_t image_id = 0;
  AttackResult result;
  double psnr = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;  // image order, then target order
  std::size_t n_images = 0;
  std::optional<CaseProtocol> cases;  // targeted runs only
  Norm case_norm = Norm::l2;
};

/// Indices of `data` in [offset, offset + limit) that the model classifies
/// correctly (and whose label differs from a fixed target), sampled without
/// replacement with the seed and returned in ascending order.
std::vector<std::size_t> select_images(const Model& model, const Dataset& data,
                                       const ExperimentConfig& cfg);

/// Runs the configured attack on the selected images over a bounded worker
/// pool. Results are merged in image order and each image draws its
/// randomness from derive_seed(seed, image_id), so the report does not
/// depend on the worker count.
ExperimentReport run_experiment(const Model& model, const Dataset& data, const ExperimentConfig& cfg);

/// Loads dataset and model from the config, runs, and writes the CSV to
/// cfg.output when set.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr std::string_view kCsvHeader =
    "image_id,true_label,target,success,l0,l1,l2,linf,psnr,c_used,iterations,wall_time_ms";

/// Header, one row per attack, then a `summary` row (true_label holds n=<images>,
/// target holds rows=<attacks>; metric columns are ASR, means over successes
/// and mean iterations). Targeted runs add summary_best, summary_average and
/// summary_worst rows with the case-protocol norm mean in the column of the
/// case norm. wall_time_ms is written only when `record_timing` is set.
void write_csv(const ExperimentReport& report, std::ostream& out, bool record_timing);
std::string to_csv(const ExperimentReport& report, bool record_timing);

/// Collects the summary rows of several report files into one CSV with a
/// leading `report` column.
std::string summarize_reports(const std::vector<std::filesystem::path>& files);

struct TransferRow {
  std::size_t image_id = 0;
  int true_label = -1;
  std::optional<int> target;
  bool source_success = false;
  int target_label = -1;  // label of x_adv on the target model
  bool transferred = false;  // source success that also fools the target model
};

struct TransferReport {
  std::vector<TransferRow> rows;
  std::size_t attempted = 0;  // source successes
  std::size_t fooled = 0;
  double rate = 0.0;
};

/// Replays the adversarial examples of a source run on another model. Throws
/// EmptyInputError when the source run has no success.
TransferReport evaluate_transfer(const ExperimentReport& source, const Model& target_model);

/// Columns image_id,true_label,target,source_success,target_label,transferred
/// followed by `summary,attempted=<n>,fooled=<n>,<rate>`.
std::string to_transfer_csv(const TransferReport& report);

/// Targeted Gauss-Newton runs from one start image toward every class.
/// `cfg.objective` picks the residual family (its target is replaced).
std::vector<AttackResult> synth_digits(const Model& model, const Image& start, const GnConfig& cfg);

/// Columns start,target,success,final_label,l2,iterations.
std::string to_synth_csv(const std::vector<std::pair<std::string, std::vector<AttackResult>>>& runs);

/// Formats a double for CSV output (shortest round-trip digits).
std::string format_number(double v);

}  // namespace team
