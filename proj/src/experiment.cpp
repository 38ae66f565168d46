#include "ealab/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ealab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw std::invalid_argument("unknown key \"" + key + "\" in " + where);
}

void parse_model_section(const json& j, ModelConfig& model) {
  reject_unknown_keys(j,
                      {"context_len", "kernel", "beta", "weight_sharing",
                       "hidden_factor", "ln_eps"},
                      "model");
  if (j.contains("context_len")) model.context_len = j["context_len"].get<int>();
  if (j.contains("kernel"))
    model.kernel.kind = parse_attention_kind(j["kernel"].get<std::string>());
  if (j.contains("beta")) model.kernel.beta = j["beta"].get<double>();
  if (j.contains("weight_sharing"))
    model.sharing = parse_weight_sharing(j["weight_sharing"].get<std::string>());
  if (j.contains("hidden_factor"))
    model.hidden_factor = j["hidden_factor"].get<int>();
  if (j.contains("ln_eps")) model.ln_eps = j["ln_eps"].get<double>();
}

void parse_train_section(const json& j, TrainConfig& train) {
  reject_unknown_keys(
      j,
      {"epochs", "batch_predictions", "lr", "momentum", "lr_schedule",
       "eval_every", "n_test_during", "n_gen_during", "n_test_final",
       "n_gen_final", "n_runs", "base_seed", "divergence_abort_threshold"},
      "train");
  if (j.contains("epochs")) train.epochs = j["epochs"].get<std::int64_t>();
  if (j.contains("batch_predictions"))
    train.batch_predictions = j["batch_predictions"].get<int>();
  if (j.contains("lr")) train.lr = j["lr"].get<double>();
  if (j.contains("momentum")) train.momentum = j["momentum"].get<double>();
  if (j.contains("lr_schedule")) {
    train.lr_schedule.clear();
    for (const auto& entry : j["lr_schedule"]) {
      if (!entry.is_array() || entry.size() != 2)
        throw std::invalid_argument(
            "lr_schedule entries must be [epoch, multiplier] pairs");
      train.lr_schedule.push_back(
          {entry[0].get<std::int64_t>(), entry[1].get<double>()});
    }
  }
  if (j.contains("eval_every"))
    train.eval_every = j["eval_every"].get<std::int64_t>();
  if (j.contains("n_test_during"))
    train.n_test_during = j["n_test_during"].get<int>();
  if (j.contains("n_gen_during"))
    train.n_gen_during = j["n_gen_during"].get<int>();
  if (j.contains("n_test_final"))
    train.n_test_final = j["n_test_final"].get<int>();
  if (j.contains("n_gen_final"))
    train.n_gen_final = j["n_gen_final"].get<int>();
  if (j.contains("n_runs")) train.n_runs = j["n_runs"].get<int>();
  if (j.contains("base_seed"))
    train.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("divergence_abort_threshold"))
    train.divergence_abort_threshold =
        j["divergence_abort_threshold"].get<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
  mixture.validate();
  model.validate();
  train.validate();
  if (model.basis != mixture.shared_basis())
    throw std::invalid_argument("model basis must match the task basis");
  if (model.context_len < mixture.max_window())
    throw std::invalid_argument(
        "context_len must be >= delay+1 for every task in the mixture");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  reject_unknown_keys(j, {"task", "mixture", "model", "train", "output_dir"},
                      "config");
  ExperimentConfig config;

  if (j.contains("task") == j.contains("mixture"))
    throw std::invalid_argument(
        "config must set exactly one of \"task\" or \"mixture\"");
  if (j.contains("task")) {
    config.mixture =
        TaskMixture::single(parse_task_spec(j["task"].get<std::string>()));
  } else {
    config.mixture.tasks.clear();
    for (const auto& entry : j["mixture"]) {
      reject_unknown_keys(entry, {"spec", "weight"}, "mixture entry");
      WeightedTask wt;
      wt.spec = parse_task_spec(entry.at("spec").get<std::string>());
      wt.weight = entry.at("weight").get<double>();
      config.mixture.tasks.push_back(wt);
    }
    config.mixture.normalize();
  }
  config.model.basis = config.mixture.shared_basis();
  if (j.contains("model")) parse_model_section(j["model"], config.model);
  if (j.contains("train")) parse_train_section(j["train"], config.train);
  if (j.contains("output_dir"))
    config.output_dir = j["output_dir"].get<std::string>();
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::string experiment_config_json(const ExperimentConfig& config) {
  ordered_json j;
  if (config.mixture.tasks.size() == 1) {
    j["task"] = to_string(config.mixture.tasks.front().spec);
  } else {
    auto mixture = ordered_json::array();
    for (const WeightedTask& wt : config.mixture.tasks)
      mixture.push_back(
          {{"spec", to_string(wt.spec)}, {"weight", wt.weight}});
    j["mixture"] = mixture;
  }
  j["model"] = {{"context_len", config.model.context_len},
                {"kernel", to_string(config.model.kernel.kind)},
                {"beta", config.model.kernel.beta},
                {"weight_sharing", to_string(config.model.sharing)},
                {"hidden_factor", config.model.hidden_factor},
                {"ln_eps", config.model.ln_eps}};
  auto schedule = ordered_json::array();
  for (const LrScheduleEntry& e : config.train.lr_schedule)
    schedule.push_back({e.epoch, e.multiplier});
  j["train"] = {
      {"epochs", config.train.epochs},
      {"batch_predictions", config.train.batch_predictions},
      {"lr", config.train.lr},
      {"momentum", config.train.momentum},
      {"lr_schedule", schedule},
      {"eval_every", config.train.eval_every},
      {"n_test_during", config.train.n_test_during},
      {"n_gen_during", config.train.n_gen_during},
      {"n_test_final", config.train.n_test_final},
      {"n_gen_final", config.train.n_gen_final},
      {"n_runs", config.train.n_runs},
      {"base_seed", config.train.base_seed},
      {"divergence_abort_threshold", config.train.divergence_abort_threshold}};
  j["output_dir"] = config.output_dir.generic_string();
  return j.dump(1, '\t') + "\n";
}

namespace {

ExperimentConfig preset_base(const std::string& task, AttentionKind kernel,
                             int context_len, WeightSharing sharing,
                             std::int64_t epochs, const std::string& name) {
  ExperimentConfig config;
  config.mixture = TaskMixture::single(parse_task_spec(task));
  config.model.basis = config.mixture.shared_basis();
  config.model.context_len = context_len;
  config.model.kernel.kind = kernel;
  config.model.sharing = sharing;
  config.train.epochs = epochs;
  config.output_dir = std::filesystem::path("runs") / name;
  return config;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const char* kernel : {"ea", "dpa"}) {
    for (int c : {32, 52, 56})
      names.push_back("fig2_" + std::string(kernel) + "_c" + std::to_string(c));
    names.push_back("fig3_" + std::string(kernel));
    names.push_back("fig4_" + std::string(kernel));
    names.push_back("fig5_" + std::string(kernel));
    for (int c : {64, 128})
      names.push_back("fig6_" + std::string(kernel) + "_c" + std::to_string(c));
  }
  return names;
}

ExperimentConfig make_preset(const std::string& name) {
  const auto starts_with = [&](const char* prefix) {
    return name.rfind(prefix, 0) == 0;
  };
  AttentionKind kernel = AttentionKind::EA;
  if (name.find("_dpa") != std::string::npos) kernel = AttentionKind::DPA;
  else if (name.find("_ea") == std::string::npos)
    throw std::invalid_argument("unknown preset \"" + name + "\"");

  if (starts_with("fig2_")) {
    int context = 0;
    if (name.ends_with("_c32")) context = 32;
    else if (name.ends_with("_c52")) context = 52;
    else if (name.ends_with("_c56")) context = 56;
    else throw std::invalid_argument("unknown preset \"" + name + "\"");
    const std::int64_t epochs = context == 32 ? 4000 : 400;
    return preset_base("N16T2", kernel, context, WeightSharing::shared, epochs,
                       name);
  }
  if (name == "fig3_ea" || name == "fig3_dpa") {
    // 1002-parameter models; the per-token heads match the paper's scale.
    return preset_base("N2T5", kernel, 16, WeightSharing::per_position, 4000,
                       name);
  }
  if (name == "fig4_ea" || name == "fig4_dpa") {
    ExperimentConfig config = preset_base(
        "N16T5", kernel, 128, WeightSharing::per_position, 2000, name);
    config.train.n_test_final = 5000;  // 5e5 final predictions
    return config;
  }
  if (name == "fig5_ea" || name == "fig5_dpa") {
    ExperimentConfig config =
        preset_base("N16T2", kernel, 32, WeightSharing::shared, 4000, name);
    config.mixture.tasks.clear();
    config.mixture.tasks.push_back({parse_task_spec("N16T2"), 0.5});
    config.mixture.tasks.push_back({parse_task_spec("N16T2-S"), 0.5});
    config.train.lr_schedule = {{2500, 0.25}};
    return config;
  }
  if (starts_with("fig6_")) {
    int context = 0;
    if (name.ends_with("_c64")) context = 64;
    else if (name.ends_with("_c128")) context = 128;
    else throw std::invalid_argument("unknown preset \"" + name + "\"");
    return preset_base("N16T2-R", kernel, context, WeightSharing::shared, 4000,
                       name);
  }
  throw std::invalid_argument("unknown preset \"" + name + "\"");
}

namespace {

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os)
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir / "checkpoints", ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " +
                             config.output_dir.string() + ": " + ec.message());

  write_file_atomic(config.output_dir / "config.json",
                    experiment_config_json(config));

  const MultiRunResult result =
      multi_run(config.train, config.model, config.mixture, jobs);

  std::vector<RunMetrics> metrics;
  metrics.reserve(result.runs.size());
  for (const TrainResult& run : result.runs) metrics.push_back(run.metrics);

  write_file_atomic(config.output_dir / "metrics.csv",
                    metrics_csv(metrics, config.mixture));
  write_file_atomic(config.output_dir / "aggregate.csv",
                    aggregate_csv(metrics, config.mixture));
  write_file_atomic(config.output_dir / "final_eval.json",
                    final_eval_json(metrics, config.mixture));

  for (const TrainResult& run : result.runs) {
    if (run.metrics.diverged) continue;
    char name[32];
    std::snprintf(name, sizeof(name), "run_%02d.json", run.metrics.run_id);
    Checkpoint ckpt;
    ckpt.config = config.model;
    ckpt.params = run.params;
    ckpt.rng_seed = run.metrics.seed;
    ckpt.epoch = config.train.epochs;
    save_checkpoint(config.output_dir / "checkpoints" / name, ckpt);
  }

  ExperimentSummary summary;
  summary.n_runs = config.train.n_runs;
  summary.n_diverged = result.n_diverged();
  summary.output_dir = config.output_dir;
  return summary;
}

int default_jobs() {
  if (const char* env = std::getenv("EA_LAB_JOBS")) {
    const int jobs = std::atoi(env);
    if (jobs >= 1) return jobs;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace ealab
