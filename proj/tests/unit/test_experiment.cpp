#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "team/experiment.hpp"
#include "team/io.hpp"

using namespace team;
namespace fs = std::filesystem;

namespace {

Dataset small_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> xs;
  std::vector<int> ys;
  for (int i = 0; i < n; ++i) {
    Vector v(9);
    for (auto& p : v) p = rng.uniform(0.0, 1.0);
    xs.emplace_back(v, 3, 3);
    ys.push_back(static_cast<int>(rng.below(4)));
  }
  return Dataset(std::move(xs), std::move(ys), 4);
}

// Labels every image by the model's own prediction so all are eligible.
Dataset self_labelled(const Model& m, const Dataset& d) {
  std::vector<int> ys;
  for (const Image& x : d.images()) ys.push_back(predict(m, x));
  return Dataset(d.images(), ys, d.class_count());
}

struct Fixture {
  Model model = Model::random({9, 8, 4}, Activation::tanh, 3);
  Dataset data = self_labelled(model, small_data(24, 2));
};

ExperimentConfig quick(std::string attack) {
  ExperimentConfig c;
  c.attack = std::move(attack);
  c.image_count = 6;
  c.seed = 7;
  c.team.c_step = 0.2;
  c.team.c_max = 6.0;
  c.workers = 2;
  return c;
}

}  // namespace

TEST(ExperimentConfig, ParsesFlatText) {
  ExperimentConfig c;
  apply_config_text(c, "# comment\nattack = pgd\n  epsilon=0.3 # trailing\n\nnorm = linf\nrandom_start = false\n");
  EXPECT_EQ(c.attack, "pgd");
  EXPECT_DOUBLE_EQ(c.baseline.epsilon, 0.3);
  EXPECT_EQ(c.team.norm, Norm::linf);
  EXPECT_FALSE(c.baseline.random_start);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig c;
  try {
    apply_config_text(c, "seed = 3\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(apply_setting(c, "c_max", "ten"), ConfigError);
  EXPECT_THROW(apply_setting(c, "image_count", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(c, "record_timing", "maybe"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "seed 3\n"), ConfigError);
}

TEST(ExperimentConfig, EveryKeyIsSettable) {
  for (const std::string& k : experiment_keys()) {
    ExperimentConfig c;
    std::string v = "1";
    if (k == "norm") v = "l2";
    if (k == "attack") v = "fgsm";
    if (k == "objective") v = "T2";
    if (k == "target") v = "next";
    EXPECT_NO_THROW(apply_setting(c, k, v)) << k;
  }
}

TEST(ExperimentConfig, PrecedenceFileEnvCli) {
  const fs::path file = fs::temp_directory_path() / "team_precedence.cfg";
  {
    std::ofstream(file) << "seed = 5\nimage_count = 9\nattack = deepfool\n";
  }
  EXPECT_EQ(resolve_experiment_config(file, nullptr, {}).seed, 5u);
  EXPECT_EQ(resolve_experiment_config(file, "11", {}).seed, 11u);
  const ExperimentConfig c = resolve_experiment_config(file, "11", {{"seed", "13"}});
  EXPECT_EQ(c.seed, 13u);
  EXPECT_EQ(c.image_count, 9u);
  EXPECT_EQ(c.attack, "deepfool");
  EXPECT_THROW(resolve_experiment_config(file, "x", {}), ConfigError);
  EXPECT_THROW(resolve_experiment_config(fs::path("/nonexistent/cfg"), nullptr, {}), ResourceError);
  fs::remove(file);
}

TEST(ExperimentConfig, ValidationChecksAttackAndFiles) {
  ExperimentConfig c;
  c.attack = "bim";
  EXPECT_THROW(c.validate(false), ConfigError);
  c = ExperimentConfig{};
  c.objective = "T9";
  EXPECT_THROW(c.validate(false), ConfigError);
  c = ExperimentConfig{};
  EXPECT_THROW(c.validate(true), ConfigError);
  c.images = c.labels = c.model = "/nonexistent/file";
  EXPECT_THROW(c.validate(true), ResourceError);
}

TEST(Experiment, CsvHeaderIsFixed) {
  Fixture f;
  const std::string csv = to_csv(run_experiment(f.model, f.data, quick("fgsm")), false);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "image_id,true_label,target,success,l0,l1,l2,linf,psnr,c_used,iterations,wall_time_ms");
  EXPECT_EQ(kCsvSchemaVersion, 1);
}

TEST(Experiment, RowsAndSummary) {
  Fixture f;
  const ExperimentReport r = run_experiment(f.model, f.data, quick("team"));
  ASSERT_EQ(r.n_images, 6u);
  ASSERT_EQ(r.rows.size(), 6u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LT(r.rows[i - 1].image_id, r.rows[i].image_id);
  std::istringstream csv(to_csv(r, false));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines.back().rfind("summary,n=6,rows=6,", 0), 0u);
  // wall time column stays blank without record_timing
  EXPECT_EQ(lines[1].back(), ',');
}

TEST(Experiment, EmptySelectionGivesSummaryOnly) {
  Fixture f;
  ExperimentConfig c = quick("fgsm");
  c.image_count = 0;
  const std::string csv = to_csv(run_experiment(f.model, f.data, c), false);
  EXPECT_EQ(csv, std::string(kCsvHeader) + "\nsummary,n=0,rows=0,,,,,,,,,\n");
}

TEST(Experiment, DeterministicAndWorkerIndependent) {
  Fixture f;
  for (const char* attack : {"team", "pgd", "mdi2", "gn"}) {
    ExperimentConfig c = quick(attack);
    c.workers = 1;
    const std::string one = to_csv(run_experiment(f.model, f.data, c), false);
    c.workers = 3;
    EXPECT_EQ(to_csv(run_experiment(f.model, f.data, c), false), one) << attack;
    EXPECT_EQ(to_csv(run_experiment(f.model, f.data, c), false), one) << attack;
  }
}

TEST(Experiment, SeedChangesSample) {
  Fixture f;
  ExperimentConfig c = quick("fgsm");
  c.image_count = 3;
  const auto a = select_images(f.model, f.data, c);
  c.seed = 8;
  EXPECT_NE(select_images(f.model, f.data, c), a);
}

TEST(Experiment, SelectionSkipsMisclassifiedImages) {
  Fixture f;
  std::vector<int> ys = f.data.labels();
  ys[0] = (ys[0] + 1) % 4;
  const Dataset d(f.data.images(), ys, 4);
  ExperimentConfig c = quick("fgsm");
  c.image_count = 100;
  const auto ids = select_images(f.model, d, c);
  EXPECT_EQ(ids.size(), 23u);
  EXPECT_NE(ids.front(), 0u);
}

TEST(Experiment, TargetedAllAddsCaseRows) {
  Fixture f;
  ExperimentConfig c = quick("team");
  c.objective = "T2";
  c.image_count = 3;
  const ExperimentReport r = run_experiment(f.model, f.data, c);
  EXPECT_EQ(r.rows.size(), 9u);
  ASSERT_TRUE(r.cases.has_value());
  const std::string csv = to_csv(r, false);
  for (const char* row : {"summary_best,", "summary_average,", "summary_worst,"}) {
    EXPECT_NE(csv.find(row), std::string::npos) << row;
  }
  c.target = "next";
  const ExperimentReport next = run_experiment(f.model, f.data, c);
  ASSERT_EQ(next.rows.size(), 3u);
  for (const auto& row : next.rows) EXPECT_EQ(*row.result.target, (row.result.true_label + 1) % 4);
}

TEST(Experiment, FixedTargetSkipsImagesOfThatClass) {
  Fixture f;
  ExperimentConfig c = quick("jsma");
  c.target = "2";
  c.image_count = 100;
  for (const auto& row : run_experiment(f.model, f.data, c).rows) {
    EXPECT_NE(row.result.true_label, 2);
    EXPECT_EQ(*row.result.target, 2);
  }
  c.target = "9";
  EXPECT_THROW(run_experiment(f.model, f.data, c), ConfigError);
}

TEST(Experiment, ErrorsCarryImageId) {
  const Model relu = Model::random({9, 8, 4}, Activation::relu, 3);
  const Dataset d = self_labelled(relu, small_data(5, 2));
  ExperimentConfig c = quick("team");
  try {
    run_experiment(relu, d, c);
    FAIL();
  } catch (const ImageError& e) {
    EXPECT_NE(std::string(e.what()).find("image "), std::string::npos);
  }
}

TEST(Experiment, FileRunWritesCsvAndSummaries) {
  Fixture f;
  const fs::path dir = fs::temp_directory_path() / "team_experiment_files";
  fs::create_directories(dir);
  save_idx(f.data, dir / "img", dir / "lbl");
  save_checkpoint(f.model, dir / "m.ckpt");
  ExperimentConfig c = quick("deepfool");
  c.images = dir / "img";
  c.labels = dir / "lbl";
  c.model = dir / "m.ckpt";
  c.output = dir / "a.csv";
  run_experiment(c);
  std::ifstream in(c.output);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kCsvHeader);
  const std::string table = summarize_reports({c.output});
  EXPECT_NE(table.find("a.csv,summary,"), std::string::npos);
  {
    std::ofstream(dir / "bad.csv") << "image_id,label\n";
  }
  EXPECT_THROW(summarize_reports({dir / "bad.csv"}), FormatError);
  fs::remove_all(dir);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(999.0), "999");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Transfer, SelfTransferAndReport) {
  Fixture f;
  const ExperimentReport src = run_experiment(f.model, f.data, quick("deepfool"));
  const TransferReport self = evaluate_transfer(src, f.model);
  EXPECT_DOUBLE_EQ(self.rate, 1.0);
  const Model other = Model::random({9, 8, 4}, Activation::tanh, 99);
  const TransferReport t = evaluate_transfer(src, other);
  EXPECT_GE(t.rate, 0.0);
  EXPECT_LE(t.rate, 1.0);
  EXPECT_EQ(t.rows.size(), src.rows.size());
  EXPECT_EQ(static_cast<double>(t.fooled) / static_cast<double>(t.attempted), t.rate);
  const std::string csv = to_transfer_csv(t);
  EXPECT_EQ(csv.rfind("image_id,true_label,target,source_success,target_label,transferred\n", 0), 0u);
  EXPECT_NE(csv.find("\nsummary,attempted="), std::string::npos);
  ExperimentConfig none = quick("fgsm");
  none.image_count = 0;
  EXPECT_THROW(evaluate_transfer(run_experiment(f.model, f.data, none), other), EmptyInputError);
}

TEST(SynthDigits, OneRunPerClass) {
  const Model m = Model::random({9, 8, 4}, Activation::tanh, 3);
  GnConfig c;
  c.objective = ObjectiveSpec::numbered(2, 0, 1);
  c.norm_cap = 3.0;
  const Image black = Image::zeros(3, 3);
  const auto rs = synth_digits(m, black, c);
  ASSERT_EQ(rs.size(), 4u);
  for (int t = 0; t < 4; ++t) {
    EXPECT_EQ(*rs[static_cast<std::size_t>(t)].target, t);
    EXPECT_LE(rs[static_cast<std::size_t>(t)].norm_l2, 3.0 + 1e-9);
  }
  EXPECT_TRUE(rs[static_cast<std::size_t>(predict(m, black))].success);
  const std::string csv = to_synth_csv({{"black", rs}});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  c.objective = ObjectiveSpec::numbered(1, 0);
  EXPECT_THROW(synth_digits(m, black, c), ConfigError);
}
