#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ealab/model.hpp"
#include "ealab/tasks.hpp"

namespace ealab {

struct LrScheduleEntry {
  std::int64_t epoch = 0;
  double multiplier = 1.0;
};

struct TrainConfig {
  std::int64_t epochs = 1000;
  int batch_predictions = 40;  // N_batch
  double lr = 0.02;
  double momentum = 0.8;
  std::vector<LrScheduleEntry> lr_schedule;
  std::int64_t eval_every = 10;
  int n_test_during = 100;
  int n_gen_during = 50;
  int n_test_final = 10000;
  int n_gen_final = 100;
  int n_runs = 16;
  std::uint64_t base_seed = 1;
  double divergence_abort_threshold = 1e6;

  void validate() const;
};

// Effective learning rate at a (1-based) epoch: lr times every schedule
// multiplier whose epoch has been reached.
double lr_at_epoch(const TrainConfig& config, std::int64_t epoch);

struct WeightedTask {
  TaskSpec spec;
  double weight = 1.0;
};

struct TaskMixture {
  std::vector<WeightedTask> tasks;  // weights normalized to sum 1

  static TaskMixture single(const TaskSpec& spec);
  void validate() const;
  void normalize();
  int shared_basis() const;
  int max_window() const;
  // Weighted draw; a single-task mixture consumes no randomness.
  std::size_t sample(Rng& rng) const;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  std::size_t task_index = 0;  // task trained this epoch
  double train_loss = 0.0;
  double final_loss = 0.0;
  double lr = 0.0;
  // Per mixture task; set on evaluation epochs.
  std::vector<std::optional<double>> eval_accuracy;
};

struct FinalEval {
  double accuracy = 0.0;
  std::int64_t n_series = 0;
  std::int64_t n_gen = 0;
  std::int64_t n_correct = 0;
  bool degenerate = false;
};

struct RunMetrics {
  int run_id = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::vector<FinalEval> final_evals;  // per mixture task; empty if diverged
  bool diverged = false;
  std::int64_t diverged_epoch = -1;
  std::string divergence_reason;
};

struct EpochStats {
  double mean_loss = 0.0;
  double final_loss = 0.0;
};

// Test instrumentation; never set in production paths.
struct TrainObserver {
  std::function<void(std::span<const Symbol> series)> on_series;
  std::function<void(int step, std::span<const Symbol> context, Symbol target)>
      on_step;
};
struct EvalObserver {
  std::function<void(std::span<const Symbol> series)> on_series;
  std::function<void(int step, std::span<const Symbol> context,
                     Symbol prediction)>
      on_step;
};

// One epoch: a fresh random series of N_con + N_batch symbols, then N_batch
// teacher-forced sliding-window predictions, each followed by one
// SGD-momentum update. Throws DivergenceError when the loss goes non-finite
// or exceeds the abort threshold.
EpochStats run_epoch(ModelParams& params, Velocity& velocity,
                     const ModelConfig& model_config,
                     const TrainConfig& config, const TaskSpec& task,
                     double lr_now, Rng& rng,
                     const TrainObserver* observer = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  std::int64_t n_correct = 0;
  std::int64_t n_predictions = 0;
  bool degenerate = false;  // n_gen == 0
};

using Predictor = std::function<Symbol(std::span<const Symbol>)>;

// Autoregressive rollout: n_series random starts, n_gen greedy predictions
// each, every prediction fed back into the context; accuracy against the
// ground-truth continuation.
EvalResult evaluate_with(const Predictor& predictor, const TaskSpec& task,
                         int n_series, int n_gen, int context_len, Rng& rng,
                         const EvalObserver* observer = nullptr);

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const TaskSpec& task, int n_series, int n_gen, Rng& rng);

// Predicts via the task recurrence from the context tail.
Predictor oracle_predictor(const TaskSpec& task);

struct TrainResult {
  ModelParams params;
  RunMetrics metrics;
};

// One full training run (seeded init, per-epoch task sampling, schedule,
// periodic evaluation, final evaluation). Deterministic per run_seed.
TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const TaskMixture& mixture, int run_id,
                  std::uint64_t run_seed);

struct MultiRunResult {
  std::vector<TrainResult> runs;  // ordered by run_id
  int n_diverged() const;
};

// Runs seeds base_seed..base_seed+n_runs-1, optionally on `jobs` worker
// threads; results are identical regardless of jobs.
MultiRunResult multi_run(const TrainConfig& config,
                         const ModelConfig& model_config,
                         const TaskMixture& mixture, int jobs = 1);

// CSV / JSON emission (formats documented in the README).
std::string metrics_csv(std::span<const RunMetrics> runs,
                        const TaskMixture& mixture);
std::string aggregate_csv(std::span<const RunMetrics> runs,
                          const TaskMixture& mixture);
std::string final_eval_json(std::span<const RunMetrics> runs,
                            const TaskMixture& mixture);

}  // namespace ealab
