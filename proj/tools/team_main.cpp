#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "team/advtrain.hpp"
#include "team/experiment.hpp"
#include "team/io.hpp"

namespace {

using namespace team;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 1;

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      sizes.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad layer size '" + item + "' in architecture '" + text + "'");
    }
  }
  if (sizes.size() < 2) throw ConfigError("architecture needs at least input and output sizes");
  return sizes;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
  if (!out) throw ResourceError("failed writing " + path.string());
}

/// Seed precedence for subcommands without a config file: default, TEAM_SEED, flag.
std::uint64_t resolve_seed(std::uint64_t fallback, bool flag_given, std::uint64_t flag_value) {
  if (flag_given) return flag_value;
  ExperimentConfig probe;
  probe.seed = fallback;
  if (const char* env = std::getenv("TEAM_SEED"); env && *env) apply_setting(probe, "seed", env);
  return probe.seed;
}

Dataset load_slice(const fs::path& images, const fs::path& labels, std::size_t offset, std::size_t limit) {
  const Dataset all = load_idx(images, labels);
  return limit ? all.slice(offset, limit) : all.slice(offset, all.size());
}

/// Options shared by every experiment-style subcommand.
struct ExperimentOptions {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> shortcuts;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "flat key = value config file");
    app->add_option("--set", sets, "override one config key (key=value), repeatable");
    auto shortcut = [&](const std::string& flag, const std::string& key, const std::string& help) {
      app->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { shortcuts.emplace_back(key, v); }, help);
    };
    shortcut("--images", "images", "IDX image file");
    shortcut("--labels", "labels", "IDX label file");
    shortcut("--model", "model", "model checkpoint");
    shortcut("--count", "image_count", "number of images to attack");
    shortcut("--seed", "seed", "experiment seed");
    shortcut("--out", "output", "CSV output path");
    shortcut("--workers", "workers", "attack worker threads (0 = all cores)");
    shortcut("--objective", "objective", "objective T1..T6");
    shortcut("--norm", "norm", "l0, l2 or linf");
    shortcut("--target", "target", "all, next or a class index");
  }

  ExperimentConfig resolve(const std::vector<std::pair<std::string, std::string>>& forced) const {
    std::vector<std::pair<std::string, std::string>> overrides = shortcuts;
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    overrides.insert(overrides.end(), forced.begin(), forced.end());
    const std::optional<fs::path> file = config.empty() ? std::nullopt : std::optional<fs::path>(config);
    return resolve_experiment_config(file, std::getenv("TEAM_SEED"), overrides);
  }
};

void print_summary(const ExperimentReport& r, const ExperimentConfig& cfg) {
  std::size_t ok = 0;
  double l2 = 0.0;
  for (const ExperimentRow& row : r.rows) {
    if (!row.result.success) continue;
    ++ok;
    l2 += row.result.norm_l2;
  }
  std::cerr << cfg.attack << ": images=" << r.n_images << " attacks=" << r.rows.size()
            << " successes=" << ok;
  if (ok) std::cerr << " mean_l2=" << l2 / static_cast<double>(ok);
  std::cerr << '\n';
  if (r.cases) {
    for (const CaseReport* c : {&r.cases->best, &r.cases->average, &r.cases->worst}) {
      std::cerr << "  " << to_string(c->kind) << ": asr=" << c->asr << " mean_" << to_string(r.case_norm)
                << "=" << c->mean_lp << '\n';
    }
  }
}

int run_and_report(const ExperimentConfig& cfg) {
  const ExperimentReport r = run_experiment(cfg);
  if (cfg.output.empty()) std::cout << to_csv(r, cfg.record_timing);
  print_summary(r, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-expansion adversarial attacks on small dense networks"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a dense classifier with mini-batch SGD");
  std::string tr_images, tr_labels, tr_arch = "784,128,64,10", tr_act = "tanh", tr_out, tr_log;
  std::string tr_test_images, tr_test_labels;
  std::size_t tr_offset = 0, tr_limit = 0;
  TrainConfig tr_cfg;
  tr_cfg.epochs = 20;
  std::uint64_t tr_seed = 1;
  train->add_option("--images", tr_images, "IDX image file")->required();
  train->add_option("--labels", tr_labels, "IDX label file")->required();
  train->add_option("--offset", tr_offset, "first training index");
  train->add_option("--limit", tr_limit, "number of training images (0 = rest)");
  train->add_option("--arch", tr_arch, "layer sizes, input first")->capture_default_str();
  train->add_option("--activation", tr_act, "hidden activation: tanh, softplus, relu")->capture_default_str();
  train->add_option("--epochs", tr_cfg.epochs)->capture_default_str();
  train->add_option("--lr", tr_cfg.learning_rate)->capture_default_str();
  train->add_option("--batch", tr_cfg.batch_size)->capture_default_str();
  auto* tr_seed_opt = train->add_option("--seed", tr_seed, "initialization and shuffling seed");
  train->add_option("--out", tr_out, "checkpoint path")->required();
  train->add_option("--log", tr_log, "per-epoch CSV (epoch,loss)");
  train->add_option("--test-images", tr_test_images, "IDX images for reporting accuracy");
  train->add_option("--test-labels", tr_test_labels, "IDX labels for reporting accuracy");

  // experiment-style subcommands
  ExperimentOptions attack_opts, sweep_opts, gn_opts, baseline_opts;
  auto* attack = app.add_subcommand("attack", "untargeted or targeted TEAM attack over sampled images");
  attack_opts.attach(attack);
  auto* sweep = app.add_subcommand("attack-sweep", "targeted TEAM attack toward every other class (T1/T4 map to T2/T5)");
  sweep_opts.attach(sweep);
  auto* gn = app.add_subcommand("gn-attack", "Gauss-Newton attack over sampled images");
  gn_opts.attach(gn);
  auto* baseline = app.add_subcommand("baseline", "reference attack: fgsm, pgd, deepfool, jsma, cw, mdi2");
  std::string baseline_name;
  baseline->add_option("name", baseline_name, "baseline attack")->required();
  baseline_opts.attach(baseline);

  // advtrain
  auto* adv = app.add_subcommand("advtrain", "adversarial training with a pluggable inner attack");
  std::string av_images, av_labels, av_model, av_out, av_log, av_attack = "team";
  std::string av_eval_images, av_eval_labels;
  std::size_t av_offset = 0, av_limit = 0;
  AdvTrainConfig av_cfg;
  std::uint64_t av_seed = 1;
  double av_c = 0.01;
  adv->add_option("--images", av_images)->required();
  adv->add_option("--labels", av_labels)->required();
  adv->add_option("--offset", av_offset);
  adv->add_option("--limit", av_limit);
  adv->add_option("--model", av_model, "checkpoint to start from")->required();
  adv->add_option("--attack", av_attack, "team, gn, fgsm, pgd or identity")->capture_default_str();
  adv->add_option("--epochs", av_cfg.epochs)->capture_default_str();
  adv->add_option("--lr", av_cfg.learning_rate)->capture_default_str();
  adv->add_option("--batch", av_cfg.batch_size)->capture_default_str();
  adv->add_option("--mix-clean", av_cfg.mix_clean, "clean share of each batch")->capture_default_str();
  adv->add_option("--workers", av_cfg.workers, "attack threads per batch (0 = all cores)");
  adv->add_option("--budget", av_c, "TEAM budget C; the box half-width is sqrt(C)")->capture_default_str();
  adv->add_option("--linf-iters", av_cfg.attack.team.linf_iters)->capture_default_str();
  adv->add_option("--epsilon", av_cfg.attack.baseline.epsilon, "fgsm/pgd budget")->capture_default_str();
  auto* av_seed_opt = adv->add_option("--seed", av_seed);
  adv->add_option("--out", av_out, "checkpoint path")->required();
  adv->add_option("--log", av_log, "per-epoch CSV");
  adv->add_option("--eval-images", av_eval_images, "IDX images for clean/FGSM accuracy");
  adv->add_option("--eval-labels", av_eval_labels);

  // synth-digits
  auto* synth = app.add_subcommand("synth-digits", "targeted Gauss-Newton runs from synthetic starts");
  std::string sy_model, sy_out, sy_images_out, sy_objective = "T2";
  std::vector<std::string> sy_starts{"black", "white"};
  int sy_h = 28, sy_w = 28;
  std::uint64_t sy_seed = 1;
  GnConfig sy_cfg;
  sy_cfg.norm_cap = 28.0;
  sy_model.clear();
  synth->add_option("--model", sy_model)->required();
  synth->add_option("--start", sy_starts, "black, white, noise (repeatable)")->capture_default_str();
  synth->add_option("--objective", sy_objective, "targeted objective T2, T3, T5 or T6")->capture_default_str();
  synth->add_option("--height", sy_h)->capture_default_str();
  synth->add_option("--width", sy_w)->capture_default_str();
  synth->add_option("--norm-cap", sy_cfg.norm_cap)->capture_default_str();
  synth->add_option("--margin", sy_cfg.margin)->capture_default_str();
  synth->add_option("--max-iters", sy_cfg.max_iters)->capture_default_str();
  auto* sy_seed_opt = synth->add_option("--seed", sy_seed, "noise start seed");
  synth->add_option("--out", sy_out, "CSV path (default stdout)");
  synth->add_option("--images-out", sy_images_out, "prefix for IDX files of the final images");

  // eval-transfer
  auto* transfer = app.add_subcommand("eval-transfer", "replay attacks from one model on another");
  ExperimentOptions tr_opts;
  tr_opts.attach(transfer);
  std::string target_model, transfer_out;
  transfer->add_option("--target-model", target_model, "model to evaluate the examples on")->required();
  transfer->add_option("--transfer-out", transfer_out, "transfer CSV path (default stdout)");

  // report
  auto* report = app.add_subcommand("report", "collect summary rows of several attack CSVs");
  std::vector<std::string> report_files;
  std::string report_out;
  report->add_option("files", report_files, "attack CSV files")->required();
  report->add_option("--out", report_out, "output path (default stdout)");

  auto* keys = app.add_subcommand("config-keys", "list every accepted config key");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const Dataset data = load_slice(tr_images, tr_labels, tr_offset, tr_limit);
      tr_cfg.seed = resolve_seed(1, tr_seed_opt->count() > 0, tr_seed);
      const Model init = Model::random(parse_sizes(tr_arch), parse_activation(tr_act), tr_cfg.seed);
      std::ostringstream log;
      log << "epoch,loss\n";
      const Model m = train_sgd(init, data, tr_cfg, [&](int e, double loss) {
        log << e << ',' << format_number(loss) << '\n';
        std::cerr << "epoch " << e << " loss " << loss << '\n';
      });
      std::ostringstream meta;
      meta << "epochs=" << tr_cfg.epochs << ";lr=" << format_number(tr_cfg.learning_rate)
           << ";batch=" << tr_cfg.batch_size << ";train_size=" << data.size();
      save_checkpoint(m, tr_out, meta.str());
      if (!tr_log.empty()) write_text(tr_log, log.str());
      std::cerr << "train accuracy " << accuracy(m, data) << '\n';
      if (!tr_test_images.empty()) {
        std::cerr << "test accuracy " << accuracy(m, load_idx(tr_test_images, tr_test_labels)) << '\n';
      }
      return 0;
    }
    if (*attack) return run_and_report(attack_opts.resolve({{"attack", "team"}}));
    if (*sweep) {
      ExperimentConfig cfg = sweep_opts.resolve({{"attack", "team"}});
      if (cfg.objective == "T1" || cfg.objective == "t1") cfg.objective = "T2";
      if (cfg.objective == "T4" || cfg.objective == "t4") cfg.objective = "T5";
      cfg.target = "all";
      return run_and_report(cfg);
    }
    if (*gn) return run_and_report(gn_opts.resolve({{"attack", "gn"}}));
    if (*baseline) return run_and_report(baseline_opts.resolve({{"attack", baseline_name}}));
    if (*adv) {
      const Dataset data = load_slice(av_images, av_labels, av_offset, av_limit);
      const Model init = load_checkpoint(av_model);
      av_cfg.seed = resolve_seed(1, av_seed_opt->count() > 0, av_seed);
      av_cfg.attack.kind = parse_inner_attack(av_attack);
      av_cfg.attack.team.c_start = av_cfg.attack.team.c_max = av_c;
      std::ostringstream log;
      log << "epoch,loss,adversarial_loss,attacked,fallbacks\n";
      const Model m = adversarial_train(init, data, av_cfg, [&](const AdvEpochStats& s) {
        log << s.epoch << ',' << format_number(s.loss) << ',' << format_number(s.adversarial_loss) << ','
            << s.attacked << ',' << s.fallbacks << '\n';
        std::cerr << "epoch " << s.epoch << " loss " << s.loss << " adversarial " << s.adversarial_loss
                  << " attacked " << s.attacked << " fallbacks " << s.fallbacks << '\n';
      });
      std::ostringstream meta;
      meta << "advtrain=" << av_attack << ";epochs=" << av_cfg.epochs << ";mix_clean="
           << format_number(av_cfg.mix_clean) << ";seed=" << av_cfg.seed;
      save_checkpoint(m, av_out, meta.str());
      if (!av_log.empty()) write_text(av_log, log.str());
      if (!av_eval_images.empty()) {
        const Dataset eval = load_idx(av_eval_images, av_eval_labels);
        InnerAttackSpec f;
        f.kind = InnerAttack::fgsm;
        f.baseline.epsilon = av_cfg.attack.baseline.epsilon;
        std::cerr << "before: clean " << accuracy(init, eval) << " fgsm " << robust_accuracy(init, eval, f)
                  << "\nafter:  clean " << accuracy(m, eval) << " fgsm " << robust_accuracy(m, eval, f) << '\n';
      }
      return 0;
    }
    if (*synth) {
      const Model m = load_checkpoint(sy_model);
      sy_cfg.objective = ObjectiveSpec::parse(sy_objective, 0, 1);
      const std::uint64_t seed = resolve_seed(1, sy_seed_opt->count() > 0, sy_seed);
      std::vector<std::pair<std::string, std::vector<AttackResult>>> runs;
      for (const std::string& s : sy_starts) {
        const Image start = synth_image(parse_synth_kind(s), sy_h, sy_w, seed);
        runs.emplace_back(s, synth_digits(m, start, sy_cfg));
        if (!sy_images_out.empty()) {
          std::vector<Image> xs;
          std::vector<int> ys;
          for (const AttackResult& r : runs.back().second) {
            xs.push_back(r.x_adv);
            ys.push_back(*r.target);
          }
          save_idx(Dataset(xs, ys, m.class_count()), sy_images_out + "-" + s + "-images-idx3-ubyte",
                   sy_images_out + "-" + s + "-labels-idx1-ubyte");
        }
        std::size_t ok = 0;
        for (const AttackResult& r : runs.back().second) ok += r.success ? 1 : 0;
        std::cerr << s << ": " << ok << "/" << runs.back().second.size() << " classes reached\n";
      }
      write_text(sy_out, to_synth_csv(runs));
      return 0;
    }
    if (*transfer) {
      const ExperimentConfig cfg = tr_opts.resolve({});
      const ExperimentReport source = run_experiment(cfg);
      const TransferReport t = evaluate_transfer(source, load_checkpoint(target_model));
      write_text(transfer_out, to_transfer_csv(t));
      std::cerr << "transfer rate " << t.rate << " (" << t.fooled << "/" << t.attempted << ")\n";
      return 0;
    }
    if (*report) {
      write_text(report_out, summarize_reports({report_files.begin(), report_files.end()}));
      return 0;
    }
    if (*keys) {
      for (const std::string& k : experiment_keys()) std::cout << k << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
