// ealab: command-line front end for the expressive-attention laboratory.
//
// Subcommands: cycles, train, eval, gradcheck, params, attn-dump, presets.
// Exit codes: 0 success, 2 config error, 3 completed with diverged runs,
// 4 I/O failure, 5 check failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ealab/cycles.hpp"
#include "ealab/experiment.hpp"
#include "ealab/grad_check.hpp"
#include "ealab/model.hpp"
#include "ealab/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIoError = 4;
constexpr int kExitCheckFailed = 5;

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct CliError {
  int code;
  std::string message;
};

ealab::ExperimentConfig resolve_config(const std::string& config_path,
                                       const std::string& preset) {
  if (config_path.empty() == preset.empty())
    throw CliError{kExitConfigError,
                   "pass exactly one of --config or --preset"};
  try {
    return config_path.empty() ? ealab::make_preset(preset)
                               : ealab::load_experiment_config(config_path);
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
}

std::vector<ealab::Symbol> parse_context_list(const std::string& text) {
  std::vector<ealab::Symbol> out;
  std::string token;
  std::istringstream is(text);
  while (std::getline(is, token, ',')) {
    try {
      out.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw CliError{kExitConfigError,
                     "invalid context symbol \"" + token + "\""};
    }
  }
  return out;
}

int cmd_cycles(const std::string& spec_string, std::uint64_t state_cap,
               const std::string& output) {
  ealab::TaskSpec spec;
  try {
    spec = ealab::parse_task_spec(spec_string);
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  ealab::CycleEnumerationOptions options;
  if (state_cap > 0) options.state_cap = state_cap;
  ealab::CycleDecomposition dec;
  try {
    dec = ealab::enumerate_cycles(spec, options);
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  const std::string json = ealab::cycle_decomposition_json(spec, dec);
  if (!output.empty()) {
    std::ofstream os(output);
    if (!os) throw CliError{kExitIoError, "cannot open " + output};
    os << json << '\n';
  }
  std::cout << json << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& preset,
              const std::string& output, std::uint64_t seed, bool seed_set,
              int runs, int jobs) {
  ealab::ExperimentConfig config = resolve_config(config_path, preset);
  if (!output.empty()) config.output_dir = output;
  if (seed_set) config.train.base_seed = seed;
  if (runs > 0) config.train.n_runs = runs;
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  ealab::ExperimentSummary summary;
  try {
    summary = ealab::run_experiment(config, jobs);
  } catch (const std::ios_base::failure& e) {
    throw CliError{kExitIoError, e.what()};
  } catch (const std::runtime_error& e) {
    throw CliError{kExitIoError, e.what()};
  }
  std::cout << ordered_json{{"output_dir", summary.output_dir.string()},
                            {"n_runs", summary.n_runs},
                            {"n_diverged", summary.n_diverged}}
                   .dump()
            << '\n';
  return summary.n_diverged > 0 ? kExitDiverged : kExitOk;
}

int cmd_eval(const std::string& checkpoint, bool oracle,
             const std::string& task_string, int n_series, int n_gen,
             int context_len, std::uint64_t seed) {
  if (checkpoint.empty() == !oracle)
    throw CliError{kExitConfigError,
                   "pass exactly one of --checkpoint or --oracle"};
  ealab::TaskSpec task;
  try {
    task = ealab::parse_task_spec(task_string);
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  ealab::Rng rng(ealab::derive_seed(seed, 2));
  ealab::EvalResult result;
  if (oracle) {
    if (context_len <= 0) context_len = task.window_size();
    result = ealab::evaluate_with(ealab::oracle_predictor(task), task,
                                  n_series, n_gen, context_len, rng);
  } else {
    ealab::Checkpoint ckpt;
    try {
      ckpt = ealab::load_checkpoint(checkpoint);
    } catch (const std::exception& e) {
      throw CliError{kExitIoError, e.what()};
    }
    result = ealab::evaluate(ckpt.params, ckpt.config, task, n_series, n_gen,
                             rng);
  }
  std::cout << ordered_json{{"task", to_string(task)},
                            {"accuracy", result.accuracy},
                            {"n_series", n_series},
                            {"n_gen", n_gen},
                            {"n_correct", result.n_correct},
                            {"degenerate", result.degenerate}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, const std::string& preset,
                  double h, double tol, int coords, std::uint64_t seed) {
  const ealab::ExperimentConfig config = resolve_config(config_path, preset);
  const ealab::TaskSpec task = config.mixture.tasks.front().spec;

  ealab::Rng init_rng(ealab::derive_seed(seed, 0));
  ealab::ModelParams params = ealab::init_params(config.model, init_rng);
  ealab::Rng data_rng(ealab::derive_seed(seed, 1));
  const ealab::SequenceState initial =
      ealab::random_initial_state(task, data_rng);
  const std::vector<ealab::Symbol> series = ealab::generate_series(
      task, initial, static_cast<std::size_t>(config.model.context_len) + 1);
  const std::span<const ealab::Symbol> context(
      series.data(), static_cast<std::size_t>(config.model.context_len));
  const ealab::Symbol target = series.back();

  ealab::GradCheckProblem problem;
  problem.loss = [&] {
    return ealab::loss(ealab::forward(params, config.model, context), target,
                       config.model.basis);
  };
  problem.analytic_gradient = [&] {
    return ealab::to_flat_vector(
        ealab::backward(params, config.model, context, target));
  };
  ealab::ParamsFlat flat = ealab::flatten(params);
  problem.coords = flat.coord_pointers();

  ealab::Rng check_rng(ealab::derive_seed(seed, 7));
  ealab::GradCheckReport report;
  try {
    report = ealab::finite_difference_check(
        problem, h, tol, check_rng,
        static_cast<std::size_t>(std::max(coords, 1)));
  } catch (const std::exception& e) {
    throw CliError{kExitCheckFailed, e.what()};
  }
  std::cout << ordered_json{{"pass", report.pass},
                            {"max_rel_err", report.max_rel_err},
                            {"tol", tol},
                            {"h", h},
                            {"n_checked", report.n_checked},
                            {"n_params", flat.total}}
                   .dump()
            << '\n';
  return report.pass ? kExitOk : kExitCheckFailed;
}

int cmd_params(const std::string& config_path, const std::string& preset) {
  const ealab::ExperimentConfig config = resolve_config(config_path, preset);
  const ealab::ParamCount count = ealab::param_count(config.model);
  for (const auto& [name, n] : count.breakdown)
    std::printf("%-10s %10zu\n", name.c_str(), n);
  std::printf("%-10s %10zu\n", "total", count.total);
  return kExitOk;
}

int cmd_attn_dump(const std::string& checkpoint,
                  const std::string& context_text, const std::string& output) {
  ealab::Checkpoint ckpt;
  try {
    ckpt = ealab::load_checkpoint(checkpoint);
  } catch (const std::exception& e) {
    throw CliError{kExitIoError, e.what()};
  }
  const std::vector<ealab::Symbol> context = parse_context_list(context_text);
  if (context.size() != static_cast<std::size_t>(ckpt.config.context_len))
    throw CliError{kExitConfigError,
                   "context must list exactly " +
                       std::to_string(ckpt.config.context_len) + " symbols"};
  ealab::ForwardTrace trace;
  try {
    ealab::forward(ckpt.params, ckpt.config, context, &trace);
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  const fs::path dir = output.empty() ? fs::path(".") : fs::path(output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path weights_path = dir / "attention.csv";
  const fs::path log_path = dir / "attention_log10.csv";
  try {
    ealab::write_matrix_csv_file(weights_path.string(), trace.attn);
    ealab::write_matrix_csv_file(log_path.string(),
                                 ealab::attention_log_heatmap(trace.attn));
  } catch (const std::exception& e) {
    throw CliError{kExitIoError, e.what()};
  }
  double min_log = 0.0;
  const ealab::Tensor2 lg = ealab::attention_log_heatmap(trace.attn);
  for (std::size_t m = 0; m < lg.rows; ++m)
    for (std::size_t k = 0; k <= m; ++k) min_log = std::min(min_log, lg(m, k));
  std::cout << ordered_json{{"rows", trace.attn.rows},
                            {"kernel", to_string(ckpt.config.kernel.kind)},
                            {"min_log10_weight", min_log},
                            {"weights_csv", weights_path.string()},
                            {"log10_csv", log_path.string()}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_presets(const std::string& name) {
  if (name.empty()) {
    for (const std::string& preset : ealab::preset_names())
      std::cout << preset << '\n';
    return kExitOk;
  }
  try {
    std::cout << ealab::experiment_config_json(ealab::make_preset(name));
  } catch (const std::exception& e) {
    throw CliError{kExitConfigError, e.what()};
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for expressive vs dot-product attention "
               "on NT sequence tasks"};
  app.require_subcommand(1);

  // cycles
  auto* cycles = app.add_subcommand(
      "cycles", "Exact cycle decomposition of a task's state map");
  std::string spec_string;
  std::uint64_t state_cap = 0;
  std::string cycles_output;
  cycles->add_option("spec", spec_string, "Task spec, e.g. N16T3 or N16T2-S")
      ->required();
  cycles->add_option("--state-cap", state_cap,
                     "Maximum admissible state count (default 2^28)");
  cycles->add_option("--output", cycles_output, "Also write the JSON here");

  // train
  auto* train = app.add_subcommand("train", "Run a training experiment");
  std::string train_config, train_preset, train_output;
  std::uint64_t train_seed = 0;
  int train_runs = 0;
  int jobs = ealab::default_jobs();
  train->add_option("--config", train_config, "Experiment config JSON file");
  train->add_option("--preset", train_preset, "Built-in preset name");
  train->add_option("--output", train_output, "Output directory override");
  auto* seed_opt =
      train->add_option("--seed", train_seed, "Base seed override");
  train->add_option("--runs", train_runs, "Number of runs override");
  train->add_option("--jobs", jobs,
                    "Concurrent runs (default: EA_LAB_JOBS or hardware)");

  // eval
  auto* eval = app.add_subcommand(
      "eval", "Autoregressive evaluation of a checkpoint or the task oracle");
  std::string eval_checkpoint, eval_task;
  bool eval_oracle = false;
  int n_series = 10000, n_gen = 100, eval_context = 0;
  std::uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint JSON file");
  eval->add_flag("--oracle", eval_oracle,
                 "Evaluate the exact task oracle instead of a model");
  eval->add_option("--task", eval_task, "Task spec")->required();
  eval->add_option("--n-series", n_series, "Random series count");
  eval->add_option("--n-gen", n_gen, "Predictions per series");
  eval->add_option("--context-len", eval_context,
                   "Context length (oracle mode only)");
  eval->add_option("--seed", eval_seed, "Evaluation seed");

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of the model gradients");
  std::string gc_config, gc_preset;
  double gc_h = 1e-5, gc_tol = 1e-4;
  int gc_coords = 200;
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--config", gc_config, "Experiment config JSON file");
  gradcheck->add_option("--preset", gc_preset, "Built-in preset name");
  gradcheck->add_option("--step", gc_h, "Central-difference step h");
  gradcheck->add_option("--tol", gc_tol, "Max relative error to pass");
  gradcheck->add_option("--coords", gc_coords, "Minimum coordinates sampled");
  gradcheck->add_option("--seed", gc_seed, "Seed for init and sampling");

  // params
  auto* params = app.add_subcommand(
      "params", "Per-tensor parameter count table for a model config");
  std::string params_config, params_preset;
  params->add_option("--config", params_config, "Experiment config JSON file");
  params->add_option("--preset", params_preset, "Built-in preset name");

  // attn-dump
  auto* attn = app.add_subcommand(
      "attn-dump", "Dump attention weights and log10 heatmap CSV");
  std::string attn_checkpoint, attn_context, attn_output;
  attn->add_option("--checkpoint", attn_checkpoint, "Checkpoint JSON file")
      ->required();
  attn->add_option("--context", attn_context,
                   "Comma-separated context symbols (length N_con)")
      ->required();
  attn->add_option("--output", attn_output, "Output directory (default .)");

  // presets
  auto* presets = app.add_subcommand(
      "presets", "List presets, or print one preset's config JSON");
  std::string preset_name;
  presets->add_option("name", preset_name, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (cycles->parsed())
      return cmd_cycles(spec_string, state_cap, cycles_output);
    if (train->parsed())
      return cmd_train(train_config, train_preset, train_output, train_seed,
                       seed_opt->count() > 0, train_runs, jobs);
    if (eval->parsed())
      return cmd_eval(eval_checkpoint, eval_oracle, eval_task, n_series, n_gen,
                      eval_context, eval_seed);
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_config, gc_preset, gc_h, gc_tol, gc_coords,
                           gc_seed);
    if (params->parsed()) return cmd_params(params_config, params_preset);
    if (attn->parsed())
      return cmd_attn_dump(attn_checkpoint, attn_context, attn_output);
    if (presets->parsed()) return cmd_presets(preset_name);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitOk;
}
