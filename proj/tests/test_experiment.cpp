#include "ealab/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace ealab {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  EXPECT_TRUE(is) << path;
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

TEST(Config, DefaultsApplied) {
  const ExperimentConfig cfg = parse_experiment_config(R"({"task": "N16T2"})");
  EXPECT_EQ(cfg.mixture.tasks.size(), 1u);
  EXPECT_EQ(cfg.model.basis, 16);
  EXPECT_EQ(cfg.model.context_len, 16);
  EXPECT_EQ(cfg.model.kernel.kind, AttentionKind::DPA);
  EXPECT_DOUBLE_EQ(cfg.model.kernel.beta, 1.0);
  EXPECT_EQ(cfg.model.sharing, WeightSharing::shared);
  EXPECT_EQ(cfg.model.hidden_factor, 4);
  EXPECT_DOUBLE_EQ(cfg.model.ln_eps, 1e-5);
  EXPECT_EQ(cfg.train.batch_predictions, 40);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.02);
  EXPECT_DOUBLE_EQ(cfg.train.momentum, 0.8);
  EXPECT_EQ(cfg.train.eval_every, 10);
  EXPECT_EQ(cfg.train.n_test_during, 100);
  EXPECT_EQ(cfg.train.n_gen_during, 50);
  EXPECT_EQ(cfg.train.n_test_final, 10000);
  EXPECT_EQ(cfg.train.n_gen_final, 100);
  EXPECT_EQ(cfg.train.n_runs, 16);
}

TEST(Config, RejectsUnknownKeysEverywhere) {
  EXPECT_THROW(parse_experiment_config(R"({"task": "N16T2", "typo": 1})"),
               std::invalid_argument);
  EXPECT_THROW(
      parse_experiment_config(R"({"task": "N16T2", "model": {"beta": 1, "unknown": 2}})"),
      std::invalid_argument);
  EXPECT_THROW(
      parse_experiment_config(R"({"task": "N16T2", "train": {"epochz": 10}})"),
      std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(
                   R"({"mixture": [{"spec": "N16T2", "weight": 1, "x": 1}]})"),
               std::invalid_argument);
}

TEST(Config, TaskXorMixture) {
  EXPECT_THROW(parse_experiment_config(R"({})"), std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(
                   R"({"task": "N16T2", "mixture": [{"spec": "N16T2-S", "weight": 1}]})"),
               std::invalid_argument);
  const ExperimentConfig cfg = parse_experiment_config(
      R"({"mixture": [{"spec": "N16T2", "weight": 1},
                      {"spec": "N16T2-S", "weight": 3}]})");
  EXPECT_DOUBLE_EQ(cfg.mixture.tasks[0].weight, 0.25);
  EXPECT_DOUBLE_EQ(cfg.mixture.tasks[1].weight, 0.75);
}

TEST(Config, ContextMustCoverTaskWindow) {
  EXPECT_THROW(parse_experiment_config(
                   R"({"task": "N2T5", "model": {"context_len": 4}})"),
               std::invalid_argument);
  EXPECT_THROW(parse_experiment_config(R"({"task": "N16T2", "model": {"kernel": "foo"}})"),
               std::invalid_argument);
  EXPECT_THROW(parse_experiment_config("not json"), std::invalid_argument);
}

TEST(Config, SnapshotRoundTrip) {
  const ExperimentConfig cfg = parse_experiment_config(R"({
    "mixture": [{"spec": "N16T2", "weight": 0.5},
                {"spec": "N16T2-S", "weight": 0.5}],
    "model": {"context_len": 32, "kernel": "ea", "beta": 0.25,
              "weight_sharing": "per_position"},
    "train": {"epochs": 12, "lr_schedule": [[8, 0.25]], "n_runs": 2,
              "base_seed": 99},
    "output_dir": "runs/custom"
  })");
  const std::string snapshot = experiment_config_json(cfg);
  const ExperimentConfig reparsed = parse_experiment_config(snapshot);
  EXPECT_EQ(experiment_config_json(reparsed), snapshot);
  EXPECT_EQ(reparsed.model.kernel.kind, AttentionKind::EA);
  EXPECT_EQ(reparsed.train.lr_schedule.size(), 1u);
  EXPECT_EQ(reparsed.train.lr_schedule[0].epoch, 8);
}

TEST(Presets, MatchFigureSetups) {
  const std::vector<std::string> names = preset_names();
  EXPECT_EQ(names.size(), 16u);
  for (const std::string& name : names) {
    const ExperimentConfig cfg = make_preset(name);
    cfg.validate();
    const bool ea = name.find("_ea") != std::string::npos;
    EXPECT_EQ(cfg.model.kernel.kind,
              ea ? AttentionKind::EA : AttentionKind::DPA)
        << name;
  }

  const ExperimentConfig fig2 = make_preset("fig2_ea_c32");
  EXPECT_EQ(to_string(fig2.mixture.tasks[0].spec), "N16T2");
  EXPECT_EQ(fig2.model.context_len, 32);
  EXPECT_EQ(fig2.train.n_runs, 16);

  EXPECT_EQ(make_preset("fig2_dpa_c52").model.context_len, 52);
  EXPECT_EQ(make_preset("fig2_dpa_c56").model.context_len, 56);

  const ExperimentConfig fig3 = make_preset("fig3_ea");
  EXPECT_EQ(to_string(fig3.mixture.tasks[0].spec), "N2T5");
  EXPECT_EQ(fig3.model.context_len, 16);

  const ExperimentConfig fig4 = make_preset("fig4_dpa");
  EXPECT_EQ(to_string(fig4.mixture.tasks[0].spec), "N16T5");
  EXPECT_EQ(fig4.model.context_len, 128);
  EXPECT_EQ(fig4.train.n_test_final, 5000);

  const ExperimentConfig fig5 = make_preset("fig5_ea");
  ASSERT_EQ(fig5.mixture.tasks.size(), 2u);
  EXPECT_EQ(to_string(fig5.mixture.tasks[0].spec), "N16T2");
  EXPECT_EQ(to_string(fig5.mixture.tasks[1].spec), "N16T2-S");
  EXPECT_DOUBLE_EQ(fig5.mixture.tasks[0].weight, 0.5);
  ASSERT_EQ(fig5.train.lr_schedule.size(), 1u);
  EXPECT_EQ(fig5.train.lr_schedule[0].epoch, 2500);
  EXPECT_DOUBLE_EQ(fig5.train.lr_schedule[0].multiplier, 0.25);

  const ExperimentConfig fig6 = make_preset("fig6_ea_c64");
  EXPECT_EQ(to_string(fig6.mixture.tasks[0].spec), "N16T2-R");
  EXPECT_EQ(fig6.model.context_len, 64);
  EXPECT_EQ(make_preset("fig6_dpa_c128").model.context_len, 128);

  EXPECT_THROW(make_preset("fig7_ea"), std::invalid_argument);
}

ExperimentConfig tiny_experiment(const fs::path& dir) {
  ExperimentConfig cfg = parse_experiment_config(R"({
    "task": "N4T2",
    "model": {"context_len": 8, "kernel": "ea"},
    "train": {"epochs": 6, "eval_every": 3, "n_test_during": 5,
              "n_gen_during": 8, "n_test_final": 10, "n_gen_final": 8,
              "n_runs": 3, "base_seed": 21}
  })");
  cfg.output_dir = dir;
  return cfg;
}

TEST(RunExperiment, WritesAllArtifactsDeterministically) {
  const fs::path base = fs::temp_directory_path() / "ealab_exp_test";
  fs::remove_all(base);
  const ExperimentConfig cfg_a = tiny_experiment(base / "a");
  const ExperimentConfig cfg_b = tiny_experiment(base / "b");

  const ExperimentSummary summary = run_experiment(cfg_a, 1);
  EXPECT_EQ(summary.n_runs, 3);
  EXPECT_EQ(summary.n_diverged, 0);
  run_experiment(cfg_b, 2);  // concurrent workers

  EXPECT_TRUE(fs::exists(base / "a" / "config.json"));
  // byte-identical regardless of worker count (the config snapshot differs in
  // its output_dir field by construction)
  for (const char* file : {"metrics.csv", "aggregate.csv", "final_eval.json"}) {
    EXPECT_TRUE(fs::exists(base / "a" / file)) << file;
    EXPECT_EQ(read_file(base / "a" / file), read_file(base / "b" / file))
        << file;
  }
  for (int run = 0; run < 3; ++run) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%02d.json", run);
    EXPECT_TRUE(fs::exists(base / "a" / "checkpoints" / name));
  }

  // the snapshot replays bit-exactly
  ExperimentConfig replay =
      load_experiment_config(base / "a" / "config.json");
  replay.output_dir = base / "c";
  run_experiment(replay, 2);
  EXPECT_EQ(read_file(base / "a" / "metrics.csv"),
            read_file(base / "c" / "metrics.csv"));

  // checkpoints load and evaluate
  const Checkpoint ckpt =
      load_checkpoint(base / "a" / "checkpoints" / "run_00.json");
  EXPECT_EQ(ckpt.config.basis, 4);
  EXPECT_EQ(ckpt.epoch, 6);

  const auto final_eval =
      nlohmann::json::parse(read_file(base / "a" / "final_eval.json"));
  ASSERT_TRUE(final_eval.contains("N4T2"));
  EXPECT_EQ(final_eval["N4T2"]["n_series"], 30);  // pooled over 3 runs
  EXPECT_EQ(final_eval["N4T2"]["n_gen"], 8);
  EXPECT_EQ(final_eval["N4T2"]["per_run"].size(), 3u);

  fs::remove_all(base);
}

TEST(DefaultJobs, EnvOverride) {
  setenv("EA_LAB_JOBS", "3", 1);
  EXPECT_EQ(default_jobs(), 3);
  setenv("EA_LAB_JOBS", "0", 1);
  EXPECT_GE(default_jobs(), 1);
  unsetenv("EA_LAB_JOBS");
  EXPECT_GE(default_jobs(), 1);
}

}  // namespace
}  // namespace ealab
