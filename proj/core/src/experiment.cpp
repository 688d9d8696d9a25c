#include "team/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "team/io.hpp"
#include "team/parallel.hpp"

namespace team {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;

struct KeyTable {
  std::vector<std::string> order;
  std::map<std::string, Setter, std::less<>> setters;

  void add(std::string key, Setter s) {
    order.push_back(key);
    setters.emplace(std::move(key), std::move(s));
  }
};

template <class T, class F>
Setter number(F field) {
  return [field](ExperimentConfig& c, std::string_view k, std::string_view v) {
    if constexpr (std::is_floating_point_v<T>) {
      field(c) = parse_double(k, v);
    } else {
      field(c) = parse_int<T>(k, v);
    }
  };
}

const KeyTable& key_table() {
  static const KeyTable table = [] {
    KeyTable t;
    using C = ExperimentConfig;
    auto path = [](std::filesystem::path C::*m) {
      return [m](C& c, std::string_view, std::string_view v) { c.*m = std::filesystem::path(v); };
    };
    auto text = [](std::string C::*m) {
      return [m](C& c, std::string_view, std::string_view v) { c.*m = std::string(v); };
    };
    auto flag = [](auto getter) {
      return [getter](C& c, std::string_view k, std::string_view v) { getter(c) = parse_bool(k, v); };
    };
    t.add("images", path(&C::images));
    t.add("labels", path(&C::labels));
    t.add("data_offset", number<std::size_t>([](C& c) -> std::size_t& { return c.data_offset; }));
    t.add("data_limit", number<std::size_t>([](C& c) -> std::size_t& { return c.data_limit; }));
    t.add("model", path(&C::model));
    t.add("attack", text(&C::attack));
    t.add("objective", text(&C::objective));
    t.add("target", text(&C::target));
    t.add("norm", [](C& c, std::string_view, std::string_view v) { c.team.norm = parse_norm(v); });
    t.add("image_count", number<std::size_t>([](C& c) -> std::size_t& { return c.image_count; }));
    t.add("seed", number<std::uint64_t>([](C& c) -> std::uint64_t& { return c.seed; }));
    t.add("workers", number<unsigned>([](C& c) -> unsigned& { return c.workers; }));
    t.add("record_timing", flag([](C& c) -> bool& { return c.record_timing; }));
    t.add("output", path(&C::output));

    t.add("c_start", number<double>([](C& c) -> double& { return c.team.c_start; }));
    t.add("c_step", number<double>([](C& c) -> double& { return c.team.c_step; }));
    t.add("c_max", number<double>([](C& c) -> double& { return c.team.c_max; }));
    t.add("rebuild_every", number<int>([](C& c) -> int& { return c.team.rebuild_every; }));
    t.add("l0_budget", number<int>([](C& c) -> int& { return c.team.l0_budget; }));
    t.add("l0_magnitude", number<double>([](C& c) -> double& { return c.team.l0_magnitude; }));
    t.add("linf_iters", number<int>([](C& c) -> int& { return c.team.linf_iters; }));
    t.add("hessian_cap", number<std::ptrdiff_t>([](C& c) -> std::ptrdiff_t& { return c.team.hessian_cap; }));

    t.add("gn_alpha0", number<double>([](C& c) -> double& { return c.gn.alpha0; }));
    t.add("gn_backtrack", number<double>([](C& c) -> double& { return c.gn.backtrack; }));
    t.add("gn_armijo_c", number<double>([](C& c) -> double& { return c.gn.armijo_c; }));
    t.add("gn_mu", number<double>([](C& c) -> double& { return c.gn.levenberg_mu; }));
    t.add("gn_max_iters", number<int>([](C& c) -> int& { return c.gn.max_iters; }));
    t.add("gn_norm_cap", number<double>([](C& c) -> double& { return c.gn.norm_cap; }));
    t.add("gn_margin", number<double>([](C& c) -> double& { return c.gn.margin; }));
    t.add("gn_max_backtracks", number<int>([](C& c) -> int& { return c.gn.max_backtracks; }));

    t.add("epsilon", number<double>([](C& c) -> double& { return c.baseline.epsilon; }));
    t.add("alpha", number<double>([](C& c) -> double& { return c.baseline.alpha; }));
    t.add("iters", number<int>([](C& c) -> int& { return c.baseline.iters; }));
    t.add("random_start", flag([](C& c) -> bool& { return c.baseline.random_start; }));
    t.add("cw_c", number<double>([](C& c) -> double& { return c.baseline.cw_c; }));
    t.add("cw_k", number<double>([](C& c) -> double& { return c.baseline.cw_k; }));
    t.add("cw_lr", number<double>([](C& c) -> double& { return c.baseline.cw_lr; }));
    t.add("cw_binary_steps", number<int>([](C& c) -> int& { return c.baseline.cw_binary_steps; }));
    t.add("cw_iters", number<int>([](C& c) -> int& { return c.baseline.cw_iters; }));
    t.add("jsma_theta", number<double>([](C& c) -> double& { return c.baseline.jsma_theta; }));
    t.add("jsma_max_pixels", number<int>([](C& c) -> int& { return c.baseline.jsma_max_pixels; }));
    t.add("momentum", number<double>([](C& c) -> double& { return c.baseline.momentum; }));
    t.add("diversity_p", number<double>([](C& c) -> double& { return c.baseline.diversity_p; }));
    t.add("resize_min", number<double>([](C& c) -> double& { return c.baseline.resize_min; }));
    t.add("deepfool_overshoot", number<double>([](C& c) -> double& { return c.baseline.deepfool_overshoot; }));
    t.add("deepfool_iters", number<int>([](C& c) -> int& { return c.baseline.deepfool_iters; }));
    t.add("deepfool_unsquared", flag([](C& c) -> bool& { return c.baseline.deepfool_unsquared; }));
    return t;
  }();
  return table;
}

enum class AttackFamily { team, gn, baseline };

AttackFamily family(std::string_view attack) {
  if (attack == "team") return AttackFamily::team;
  if (attack == "gn" || attack == "gauss_newton") return AttackFamily::gn;
  parse_baseline(attack);
  return AttackFamily::baseline;
}

std::optional<int> fixed_target(const ExperimentConfig& cfg) {
  if (cfg.target == "all" || cfg.target == "next") return std::nullopt;
  return parse_int<int>("target", cfg.target);
}

std::vector<std::optional<int>> targets_for(const ExperimentConfig& cfg, int y, int classes) {
  if (!cfg.targeted()) return {std::nullopt};
  if (cfg.target == "all") {
    std::vector<std::optional<int>> ts;
    for (int t = 0; t < classes; ++t) {
      if (t != y) ts.emplace_back(t);
    }
    return ts;
  }
  if (cfg.target == "next") return {(y + 1) % classes};
  return {fixed_target(cfg)};
}

AttackResult attack_one(const Model& model, const Image& x, int y, std::optional<int> target,
                        std::size_t image_id, const ExperimentConfig& cfg) {
  switch (family(cfg.attack)) {
    case AttackFamily::team: {
      TeamConfig c = cfg.team;
      c.objective = ObjectiveSpec::parse(cfg.objective, y, target);
      return team_attack(model, x, c);
    }
    case AttackFamily::gn: {
      GnConfig c = cfg.gn;
      c.objective = ObjectiveSpec::parse(cfg.objective, y, target);
      return gn_attack(model, x, c);
    }
    case AttackFamily::baseline: {
      BaselineConfig c = cfg.baseline;
      c.seed = derive_seed(cfg.seed, image_id);
      return run_baseline(parse_baseline(cfg.attack), model, x, y, target, c);
    }
  }
  throw ConfigError("unknown attack");
}

std::string cell(double v) { return format_number(v); }

}  // namespace

bool ExperimentConfig::targeted() const {
  switch (family(attack)) {
    case AttackFamily::team:
    case AttackFamily::gn:
      return ObjectiveSpec::parse(objective, 0, 1).targeted();
    case AttackFamily::baseline:
      return is_targeted(parse_baseline(attack));
  }
  return false;
}

void ExperimentConfig::validate(bool require_files) const {
  const AttackFamily fam = family(attack);
  ObjectiveSpec::parse(objective, 0, 1);
  if (target != "all" && target != "next") {
    if (parse_int<int>("target", target) < 0) throw ConfigError("target must be a class index");
  }
  if (fam == AttackFamily::team) {
    TeamConfig c = team;
    c.objective = ObjectiveSpec::parse(objective, 0, 1);
    c.validate();
  }
  if (fam == AttackFamily::gn) gn.validate();
  if (fam == AttackFamily::baseline) baseline.validate();
  if (require_files) {
    for (const auto* p : {&images, &labels, &model}) {
      if (p->empty()) throw ConfigError("images, labels and model must be set");
      if (!std::filesystem::exists(*p)) throw ResourceError("file not found: " + p->string());
    }
  }
}

const std::vector<std::string>& experiment_keys() { return key_table().order; }

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto& setters = key_table().setters;
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(cfg, trim(std::string_view(body).substr(0, eq)),
                    trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ExperimentConfig resolve_experiment_config(
    const std::optional<std::filesystem::path>& file, const char* env_seed,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ResourceError("cannot read config file " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
  }
  if (env_seed && *env_seed) {
    try {
      apply_setting(cfg, "seed", trim(env_seed));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("TEAM_SEED: ") + e.what());
    }
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  return cfg;
}

std::vector<std::size_t> select_images(const Model& model, const Dataset& data,
                                       const ExperimentConfig& cfg) {
  const std::size_t first = std::min(cfg.data_offset, data.size());
  const std::size_t last =
      cfg.data_limit ? std::min(data.size(), first + cfg.data_limit) : data.size();
  const std::optional<int> fixed = cfg.targeted() ? fixed_target(cfg) : std::nullopt;
  std::vector<std::size_t> eligible;
  for (std::size_t i = first; i < last; ++i) {
    if (fixed && data.label(i) == *fixed) continue;
    if (predict(model, data.image(i)) == data.label(i)) eligible.push_back(i);
  }
  Rng rng(derive_seed(cfg.seed, 0x5e1ec7));
  rng.shuffle(eligible.begin(), eligible.end());
  eligible.resize(std::min(eligible.size(), cfg.image_count));
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

ExperimentReport run_experiment(const Model& model, const Dataset& data, const ExperimentConfig& cfg) {
  cfg.validate(false);
  if (const auto t = cfg.targeted() ? fixed_target(cfg) : std::nullopt; t && *t >= model.class_count()) {
    throw ConfigError("target class out of range");
  }
  const std::vector<std::size_t> ids = select_images(model, data, cfg);
  std::vector<std::vector<AttackResult>> per_image(ids.size());
  parallel_for(ids.size(), cfg.workers, [&](std::size_t k) {
    const std::size_t id = ids[k];
    const int y = data.label(id);
    try {
      for (const auto& t : targets_for(cfg, y, model.class_count())) {
        per_image[k].push_back(attack_one(model, data.image(id), y, t, id, cfg));
      }
    } catch (const Error& e) {
      throw ImageError(id, e.what());
    }
  });

  ExperimentReport report;
  report.n_images = ids.size();
  report.case_norm = family(cfg.attack) == AttackFamily::team ? cfg.team.norm : Norm::l2;
  std::vector<PerImageTargets> grouped;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Image& x = data.image(ids[k]);
    for (AttackResult& r : per_image[k]) {
      if (!cfg.record_timing) r.wall_time_ms = 0.0;
      const double p = psnr(x, r.x_adv);
      report.rows.push_back({ids[k], r, p});
    }
    if (cfg.targeted()) grouped.push_back({x, std::move(per_image[k])});
  }
  if (cfg.targeted() && !grouped.empty()) report.cases = case_protocol(grouped, cfg.seed, report.case_norm);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate(true);
  const Dataset data = load_idx(cfg.images, cfg.labels);
  const Model model = load_checkpoint(cfg.model);
  ExperimentReport report = run_experiment(model, data, cfg);
  if (!cfg.output.empty()) {
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) throw ResourceError("cannot write " + cfg.output.string());
    write_csv(report, out, cfg.record_timing);
    if (!out) throw ResourceError("failed writing " + cfg.output.string());
  }
  return report;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void write_csv(const ExperimentReport& report, std::ostream& out, bool record_timing) {
  out << kCsvHeader << '\n';
  double l[4] = {0, 0, 0, 0}, psnr_sum = 0.0, c_sum = 0.0, iter_sum = 0.0, time_sum = 0.0;
  std::size_t ok = 0;
  for (const ExperimentRow& row : report.rows) {
    const AttackResult& r = row.result;
    out << row.image_id << ',' << r.true_label << ',' << (r.target ? std::to_string(*r.target) : "")
        << ',' << (r.success ? 1 : 0) << ',' << cell(r.norm_l0) << ',' << cell(r.norm_l1) << ','
        << cell(r.norm_l2) << ',' << cell(r.norm_linf) << ',' << cell(row.psnr) << ','
        << cell(r.c_used) << ',' << r.iterations << ',';
    if (record_timing) out << cell(r.wall_time_ms);
    out << '\n';
    iter_sum += r.iterations;
    time_sum += r.wall_time_ms;
    if (!r.success) continue;
    ++ok;
    l[0] += r.norm_l0;
    l[1] += r.norm_l1;
    l[2] += r.norm_l2;
    l[3] += r.norm_linf;
    psnr_sum += row.psnr;
    c_sum += r.c_used;
  }
  const std::size_t n = report.rows.size();
  out << "summary,n=" << report.n_images << ",rows=" << n << ',';
  if (n) out << cell(static_cast<double>(ok) / static_cast<double>(n));
  for (double v : {l[0], l[1], l[2], l[3], psnr_sum, c_sum}) {
    out << ',';
    if (ok) out << cell(v / static_cast<double>(ok));
  }
  out << ',';
  if (n) out << cell(iter_sum / static_cast<double>(n));
  out << ',';
  if (record_timing) out << cell(time_sum);
  out << '\n';

  if (!report.cases) return;
  const int norm_col = static_cast<int>(report.case_norm);
  for (const CaseReport* c : {&report.cases->best, &report.cases->average, &report.cases->worst}) {
    out << "summary_" << to_string(c->kind) << ",n=" << c->n_images << ",successes=" << c->n_success
        << ',' << cell(c->asr);
    for (int col = 0; col < 4; ++col) {
      out << ',';
      if (col == norm_col && c->n_success) out << cell(c->mean_lp);
    }
    out << ',';
    if (c->n_success) out << cell(c->mean_psnr);
    out << ",,,\n";
  }
}

std::string to_csv(const ExperimentReport& report, bool record_timing) {
  std::ostringstream out;
  write_csv(report, out, record_timing);
  return out.str();
}

std::string summarize_reports(const std::vector<std::filesystem::path>& files) {
  std::ostringstream out;
  out << "report," << kCsvHeader << '\n';
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw ResourceError("cannot read report " + f.string());
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
      throw FormatError("report " + f.string() + " has an unexpected header");
    }
    while (std::getline(in, line)) {
      if (line.rfind("summary", 0) == 0) out << f.filename().string() << ',' << line << '\n';
    }
  }
  return out.str();
}

TransferReport evaluate_transfer(const ExperimentReport& source, const Model& target_model) {
  TransferReport t;
  std::vector<AttackResult> results;
  results.reserve(source.rows.size());
  for (const ExperimentRow& row : source.rows) {
    const AttackResult& r = row.result;
    TransferRow out;
    out.image_id = row.image_id;
    out.true_label = r.true_label;
    out.target = r.target;
    out.source_success = r.success;
    out.target_label = predict(target_model, r.x_adv);
    out.transferred = r.success && out.target_label != r.true_label;
    t.rows.push_back(out);
    results.push_back(r);
  }
  t.rate = transfer_rate(results, target_model);
  for (const TransferRow& r : t.rows) {
    t.attempted += r.source_success ? 1 : 0;
    t.fooled += r.transferred ? 1 : 0;
  }
  return t;
}

std::string to_transfer_csv(const TransferReport& report) {
  std::ostringstream out;
  out << "image_id,true_label,target,source_success,target_label,transferred\n";
  for (const TransferRow& r : report.rows) {
    out << r.image_id << ',' << r.true_label << ',' << (r.target ? std::to_string(*r.target) : "") << ','
        << (r.source_success ? 1 : 0) << ',' << r.target_label << ',' << (r.transferred ? 1 : 0) << '\n';
  }
  out << "summary,attempted=" << report.attempted << ",fooled=" << report.fooled << ','
      << format_number(report.rate) << ",,\n";
  return out.str();
}

std::vector<AttackResult> synth_digits(const Model& model, const Image& start, const GnConfig& cfg) {
  if (!cfg.objective.targeted()) throw ConfigError("synthetic digits need a targeted objective");
  std::vector<AttackResult> out;
  for (int t = 0; t < model.class_count(); ++t) {
    GnConfig c = cfg;
    c.objective.target_class = t;
    out.push_back(gn_attack_from(model, start, c));
  }
  return out;
}

std::string to_synth_csv(const std::vector<std::pair<std::string, std::vector<AttackResult>>>& runs) {
  std::ostringstream out;
  out << "start,target,success,final_label,l2,iterations\n";
  for (const auto& [name, results] : runs) {
    for (const AttackResult& r : results) {
      out << name << ',' << (r.target ? std::to_string(*r.target) : "") << ',' << (r.success ? 1 : 0)
          << ',' << r.final_label << ',' << format_number(r.norm_l2) << ',' << r.iterations << '\n';
    }
  }
  return out.str();
}

}  // namespace team
