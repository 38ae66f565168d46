#include "ealab/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ealab {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_predictions < 1)
    throw std::invalid_argument("batch_predictions must be >= 1");
  if (lr < 0.0) throw std::invalid_argument("lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (n_test_during < 1 || n_test_final < 1)
    throw std::invalid_argument("evaluation series counts must be >= 1");
  if (n_gen_during < 0 || n_gen_final < 0)
    throw std::invalid_argument("generation lengths must be >= 0");
  if (n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  if (!(divergence_abort_threshold > 0.0))
    throw std::invalid_argument("divergence_abort_threshold must be positive");
  for (const LrScheduleEntry& e : lr_schedule) {
    if (e.epoch < 1)
      throw std::invalid_argument("lr_schedule epochs must be >= 1");
    if (!(e.multiplier > 0.0))
      throw std::invalid_argument("lr_schedule multipliers must be positive");
  }
}

double lr_at_epoch(const TrainConfig& config, std::int64_t epoch) {
  double lr = config.lr;
  for (const LrScheduleEntry& e : config.lr_schedule)
    if (epoch >= e.epoch) lr *= e.multiplier;
  return lr;
}

TaskMixture TaskMixture::single(const TaskSpec& spec) {
  TaskMixture m;
  m.tasks.push_back({spec, 1.0});
  return m;
}

void TaskMixture::validate() const {
  if (tasks.empty()) throw std::invalid_argument("mixture must be nonempty");
  double sum = 0.0;
  for (const WeightedTask& t : tasks) {
    t.spec.validate();
    if (t.weight < 0.0)
      throw std::invalid_argument("mixture weights must be >= 0");
    if (t.spec.basis != tasks.front().spec.basis)
      throw std::invalid_argument(
          "all mixture tasks must share one basis (the embedding dimension)");
    sum += t.weight;
  }
  if (!(sum > 0.0))
    throw std::invalid_argument("mixture weights must not all be zero");
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("mixture weights must sum to 1");
}

void TaskMixture::normalize() {
  double sum = 0.0;
  for (const WeightedTask& t : tasks) sum += t.weight;
  if (!(sum > 0.0))
    throw std::invalid_argument("mixture weights must not all be zero");
  for (WeightedTask& t : tasks) t.weight /= sum;
}

int TaskMixture::shared_basis() const {
  validate();
  return tasks.front().spec.basis;
}

int TaskMixture::max_window() const {
  int w = 0;
  for (const WeightedTask& t : tasks) w = std::max(w, t.spec.window_size());
  return w;
}

std::size_t TaskMixture::sample(Rng& rng) const {
  if (tasks.size() == 1) return 0;
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    acc += tasks[i].weight;
    if (u < acc) return i;
  }
  return tasks.size() - 1;
}

EpochStats run_epoch(ModelParams& params, Velocity& velocity,
                     const ModelConfig& model_config,
                     const TrainConfig& config, const TaskSpec& task,
                     double lr_now, Rng& rng, const TrainObserver* observer) {
  if (model_config.context_len < task.window_size())
    throw std::invalid_argument("context_len must be >= the task window");
  const auto nc = static_cast<std::size_t>(model_config.context_len);
  const int n_batch = config.batch_predictions;

  const SequenceState initial = random_initial_state(task, rng);
  const std::vector<Symbol> series =
      generate_series(task, initial, nc + static_cast<std::size_t>(n_batch));
  if (observer != nullptr && observer->on_series) observer->on_series(series);

  double loss_sum = 0.0;
  double last_loss = 0.0;
  for (int step = 0; step < n_batch; ++step) {
    // Teacher forcing: the context is always a window of the true series.
    const std::span<const Symbol> context(series.data() + step, nc);
    const Symbol target = series[static_cast<std::size_t>(step) + nc];
    if (observer != nullptr && observer->on_step)
      observer->on_step(step, context, target);

    double step_loss = 0.0;
    ModelGrads grads =
        backward(params, model_config, context, target, &step_loss);
    if (!std::isfinite(step_loss) ||
        step_loss > config.divergence_abort_threshold)
      throw DivergenceError("training loss " + fmt_double(step_loss) +
                            " exceeded the divergence threshold");
    // The update descends the squared difference averaged over the d readout
    // components (the summed and averaged objectives share minimizers; only
    // the averaged gradient is stable at the default learning rate, and it
    // reproduces the instability onset at N_con = 512).
    const double grad_scale = 1.0 / static_cast<double>(model_config.basis);
    ParamsFlat gf = flatten(grads);
    for (auto& [name, part] : gf.parts)
      for (double& x : part) x *= grad_scale;
    sgd_momentum_step(params, velocity, grads, config.momentum, lr_now);
    loss_sum += step_loss;
    last_loss = step_loss;
  }
  return {loss_sum / n_batch, last_loss};
}

EvalResult evaluate_with(const Predictor& predictor, const TaskSpec& task,
                         int n_series, int n_gen, int context_len, Rng& rng,
                         const EvalObserver* observer) {
  if (context_len < task.window_size())
    throw std::invalid_argument("context_len must be >= the task window");
  EvalResult result;
  if (n_gen == 0) {
    // No predictions requested; defined as a perfect (degenerate) score.
    result.accuracy = 1.0;
    result.degenerate = true;
    return result;
  }
  const auto nc = static_cast<std::size_t>(context_len);
  std::vector<Symbol> context;
  for (int s = 0; s < n_series; ++s) {
    const SequenceState initial = random_initial_state(task, rng);
    const std::vector<Symbol> truth =
        generate_series(task, initial, nc + static_cast<std::size_t>(n_gen));
    if (observer != nullptr && observer->on_series) observer->on_series(truth);
    context.assign(truth.begin(), truth.begin() + static_cast<long>(nc));
    for (int j = 0; j < n_gen; ++j) {
      const Symbol pred = predictor(context);
      if (observer != nullptr && observer->on_step)
        observer->on_step(j, context, pred);
      if (pred == truth[nc + static_cast<std::size_t>(j)]) ++result.n_correct;
      ++result.n_predictions;
      // Self-feeding: the model's own output extends the context.
      context.erase(context.begin());
      context.push_back(pred);
    }
  }
  result.accuracy = static_cast<double>(result.n_correct) /
                    static_cast<double>(result.n_predictions);
  return result;
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const TaskSpec& task, int n_series, int n_gen, Rng& rng) {
  const Predictor predictor = [&](std::span<const Symbol> context) {
    return predict_greedy(params, config, context);
  };
  return evaluate_with(predictor, task, n_series, n_gen, config.context_len,
                       rng);
}

Predictor oracle_predictor(const TaskSpec& task) {
  return [task](std::span<const Symbol> context) {
    const auto window = static_cast<std::size_t>(task.window_size());
    if (context.size() < window)
      throw std::invalid_argument("context shorter than the task window");
    SequenceState state;
    state.window.assign(context.end() - static_cast<long>(window),
                        context.end());
    return next_symbol(task, state);
  };
}

TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const TaskMixture& mixture, int run_id,
                  std::uint64_t run_seed) {
  config.validate();
  model_config.validate();
  mixture.validate();
  if (mixture.shared_basis() != model_config.basis)
    throw std::invalid_argument("model basis must equal the task basis");
  if (model_config.context_len < mixture.max_window())
    throw std::invalid_argument("context_len must be >= every task window");

  Rng init_rng(derive_seed(run_seed, 0));
  Rng train_rng(derive_seed(run_seed, 1));
  Rng eval_rng(derive_seed(run_seed, 2));
  Rng final_rng(derive_seed(run_seed, 3));

  TrainResult result;
  result.params = init_params(model_config, init_rng);
  result.metrics.run_id = run_id;
  result.metrics.seed = run_seed;
  Velocity velocity = zero_params(model_config);

  const std::size_t n_tasks = mixture.tasks.size();
  for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr_now = lr_at_epoch(config, epoch);
    const std::size_t task_index = mixture.sample(train_rng);
    EpochRecord record;
    record.epoch = epoch;
    record.task_index = task_index;
    record.lr = lr_now;
    record.eval_accuracy.resize(n_tasks);
    try {
      const EpochStats stats =
          run_epoch(result.params, velocity, model_config, config,
                    mixture.tasks[task_index].spec, lr_now, train_rng);
      record.train_loss = stats.mean_loss;
      record.final_loss = stats.final_loss;
    } catch (const DivergenceError& e) {
      result.metrics.diverged = true;
      result.metrics.diverged_epoch = epoch;
      result.metrics.divergence_reason = e.what();
      break;
    }
    if (epoch % config.eval_every == 0) {
      for (std::size_t ti = 0; ti < n_tasks; ++ti) {
        const EvalResult ev =
            evaluate(result.params, model_config, mixture.tasks[ti].spec,
                     config.n_test_during, config.n_gen_during, eval_rng);
        record.eval_accuracy[ti] = ev.accuracy;
      }
    }
    result.metrics.epochs.push_back(std::move(record));
  }

  if (!result.metrics.diverged) {
    for (std::size_t ti = 0; ti < n_tasks; ++ti) {
      const EvalResult ev =
          evaluate(result.params, model_config, mixture.tasks[ti].spec,
                   config.n_test_final, config.n_gen_final, final_rng);
      FinalEval fe;
      fe.accuracy = ev.accuracy;
      fe.n_series = config.n_test_final;
      fe.n_gen = config.n_gen_final;
      fe.n_correct = ev.n_correct;
      fe.degenerate = ev.degenerate;
      result.metrics.final_evals.push_back(fe);
    }
  }
  return result;
}

int MultiRunResult::n_diverged() const {
  int n = 0;
  for (const TrainResult& r : runs)
    if (r.metrics.diverged) ++n;
  return n;
}

MultiRunResult multi_run(const TrainConfig& config,
                         const ModelConfig& model_config,
                         const TaskMixture& mixture, int jobs) {
  config.validate();
  const int n_runs = config.n_runs;
  MultiRunResult result;
  result.runs.resize(static_cast<std::size_t>(n_runs));

  jobs = std::clamp(jobs, 1, n_runs);
  std::atomic<int> next_run{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto worker = [&] {
    for (;;) {
      const int run_id = next_run.fetch_add(1);
      if (run_id >= n_runs) return;
      try {
        result.runs[static_cast<std::size_t>(run_id)] =
            train(config, model_config, mixture, run_id,
                  config.base_seed + static_cast<std::uint64_t>(run_id));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

std::string metrics_csv(std::span<const RunMetrics> runs,
                        const TaskMixture& mixture) {
  std::ostringstream os;
  os << "run_id,seed,epoch,task,train_loss,eval_accuracy,lr\n";
  for (const RunMetrics& run : runs) {
    for (const EpochRecord& rec : run.epochs) {
      const bool evaluated = std::any_of(
          rec.eval_accuracy.begin(), rec.eval_accuracy.end(),
          [](const std::optional<double>& a) { return a.has_value(); });
      const auto emit = [&](std::size_t task_index,
                            const std::optional<double>& acc) {
        os << run.run_id << ',' << run.seed << ',' << rec.epoch << ','
           << to_string(mixture.tasks[task_index].spec) << ','
           << fmt_double(rec.train_loss) << ','
           << (acc ? fmt_double(*acc) : std::string()) << ','
           << fmt_double(rec.lr) << '\n';
      };
      if (!evaluated) {
        emit(rec.task_index, std::nullopt);
      } else {
        // One row per mixture task on evaluation epochs.
        for (std::size_t ti = 0; ti < rec.eval_accuracy.size(); ++ti)
          emit(ti, rec.eval_accuracy[ti]);
      }
    }
  }
  return os.str();
}

std::string aggregate_csv(std::span<const RunMetrics> runs,
                          const TaskMixture& mixture) {
  std::ostringstream os;
  os << "epoch,task,mean_accuracy,median_accuracy,min_accuracy,max_accuracy,"
        "mean_loss,n_runs_included\n";
  std::vector<const RunMetrics*> included;
  for (const RunMetrics& run : runs)
    if (!run.diverged) included.push_back(&run);
  if (included.empty()) return os.str();

  const std::size_t n_tasks = mixture.tasks.size();
  const std::size_t n_epochs = included.front()->epochs.size();
  for (std::size_t e = 0; e < n_epochs; ++e) {
    const EpochRecord& lead = included.front()->epochs[e];
    const bool evaluated = std::any_of(
        lead.eval_accuracy.begin(), lead.eval_accuracy.end(),
        [](const std::optional<double>& a) { return a.has_value(); });
    if (!evaluated) continue;
    double loss_sum = 0.0;
    for (const RunMetrics* run : included)
      loss_sum += run->epochs[e].train_loss;
    const double mean_loss = loss_sum / static_cast<double>(included.size());
    for (std::size_t ti = 0; ti < n_tasks; ++ti) {
      std::vector<double> accs;
      accs.reserve(included.size());
      for (const RunMetrics* run : included) {
        const auto& acc = run->epochs[e].eval_accuracy[ti];
        if (acc.has_value()) accs.push_back(*acc);
      }
      if (accs.empty()) continue;
      std::sort(accs.begin(), accs.end());
      const double mean =
          std::accumulate(accs.begin(), accs.end(), 0.0) /
          static_cast<double>(accs.size());
      const std::size_t mid = accs.size() / 2;
      const double median = accs.size() % 2 == 1
                                ? accs[mid]
                                : 0.5 * (accs[mid - 1] + accs[mid]);
      os << lead.epoch << ',' << to_string(mixture.tasks[ti].spec) << ','
         << fmt_double(mean) << ',' << fmt_double(median) << ','
         << fmt_double(accs.front()) << ',' << fmt_double(accs.back()) << ','
         << fmt_double(mean_loss) << ',' << included.size() << '\n';
    }
  }
  return os.str();
}

std::string final_eval_json(std::span<const RunMetrics> runs,
                            const TaskMixture& mixture) {
  nlohmann::ordered_json j;
  for (std::size_t ti = 0; ti < mixture.tasks.size(); ++ti) {
    std::int64_t total_correct = 0;
    std::int64_t total_series = 0;
    std::int64_t n_gen = 0;
    std::int64_t total_predictions = 0;
    auto per_run = nlohmann::ordered_json::array();
    for (const RunMetrics& run : runs) {
      if (run.diverged) {
        per_run.push_back({{"run_id", run.run_id},
                           {"seed", run.seed},
                           {"diverged", true},
                           {"diverged_epoch", run.diverged_epoch}});
        continue;
      }
      const FinalEval& fe = run.final_evals[ti];
      total_correct += fe.n_correct;
      total_series += fe.n_series;
      n_gen = fe.n_gen;
      total_predictions += fe.n_series * fe.n_gen;
      per_run.push_back({{"run_id", run.run_id},
                         {"seed", run.seed},
                         {"accuracy", fe.accuracy},
                         {"n_correct", fe.n_correct},
                         {"diverged", false}});
    }
    const double accuracy =
        total_predictions > 0
            ? static_cast<double>(total_correct) /
                  static_cast<double>(total_predictions)
            : 1.0;
    j[to_string(mixture.tasks[ti].spec)] = {{"accuracy", accuracy},
                                            {"n_series", total_series},
                                            {"n_gen", n_gen},
                                            {"n_correct", total_correct},
                                            {"per_run", per_run}};
  }
  return j.dump(1, '\t') + "\n";
}

}  // namespace ealab
