#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ealab/model.hpp"
#include "ealab/training.hpp"

namespace ealab {

// A declarative experiment: task (or mixture), model, training protocol,
// output directory. Parsed strictly; unknown keys are errors.
struct ExperimentConfig {
  TaskMixture mixture;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path output_dir = "runs/experiment";

  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_json(const ExperimentConfig& config);

std::vector<std::string> preset_names();
ExperimentConfig make_preset(const std::string& name);

struct ExperimentSummary {
  int n_runs = 0;
  int n_diverged = 0;
  std::filesystem::path output_dir;
};

// Runs the experiment and writes config.json, metrics.csv, aggregate.csv,
// final_eval.json and per-run checkpoints into the output directory.
// Aggregate files land via a write-then-rename.
ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs);

// EA_LAB_JOBS, else hardware concurrency.
int default_jobs();

}  // namespace ealab
