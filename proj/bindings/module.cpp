// _ealab: python bindings for the expressive-attention laboratory.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ealab/cycles.hpp"
#include "ealab/experiment.hpp"
#include "ealab/grad_check.hpp"
#include "ealab/model.hpp"
#include "ealab/training.hpp"

namespace py = pybind11;

namespace {

using ealab::Symbol;
using ealab::Tensor2;

Tensor2 tensor_from_numpy(const py::array_t<double>& arr) {
  const auto buf = arr.request();
  if (buf.ndim != 2) throw std::invalid_argument("expected a 2-D array");
  Tensor2 out(static_cast<std::size_t>(buf.shape[0]),
              static_cast<std::size_t>(buf.shape[1]));
  const auto view = arr.unchecked<2>();
  for (py::ssize_t r = 0; r < buf.shape[0]; ++r)
    for (py::ssize_t c = 0; c < buf.shape[1]; ++c)
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          view(r, c);
  return out;
}

py::array_t<double> numpy_from_tensor(const Tensor2& t) {
  py::array_t<double> out({t.rows, t.cols});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c)
      view(static_cast<py::ssize_t>(r), static_cast<py::ssize_t>(c)) = t(r, c);
  return out;
}

py::dict decomposition_to_dict(const ealab::TaskSpec& spec,
                               const ealab::CycleDecomposition& dec) {
  py::dict out;
  out["spec"] = to_string(spec);
  out["total"] = dec.total_states;
  py::list cycles;
  for (const auto& [length, count] : dec.entries)
    cycles.append(py::make_tuple(length, count));
  out["cycles"] = cycles;
  out["transients"] = dec.transient_states;
  out["mean_cycle_length"] = ealab::mean_cycle_length(dec);
  return out;
}

// Owns a config + parameter set; exposes the model operations.
class Model {
 public:
  Model(int basis, int context_len, const std::string& kernel, double beta,
        const std::string& weight_sharing, int hidden_factor, double ln_eps,
        std::uint64_t seed) {
    config_.basis = basis;
    config_.context_len = context_len;
    config_.kernel.kind = ealab::parse_attention_kind(kernel);
    config_.kernel.beta = beta;
    config_.sharing = ealab::parse_weight_sharing(weight_sharing);
    config_.hidden_factor = hidden_factor;
    config_.ln_eps = ln_eps;
    config_.validate();
    ealab::Rng rng(ealab::derive_seed(seed, 0));
    params_ = ealab::init_params(config_, rng);
  }

  explicit Model(const ealab::Checkpoint& ckpt)
      : config_(ckpt.config), params_(ckpt.params) {}

  py::array_t<double> forward(const std::vector<Symbol>& context) const {
    const ealab::Tensor1 readout =
        ealab::forward(params_, config_, context);
    py::array_t<double> out(readout.size());
    auto view = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < readout.size(); ++i)
      view(static_cast<py::ssize_t>(i)) = readout[i];
    return out;
  }

  Symbol predict(const std::vector<Symbol>& context) const {
    return ealab::predict_greedy(params_, config_, context);
  }

  double loss(const std::vector<Symbol>& context, Symbol target) const {
    return ealab::loss(ealab::forward(params_, config_, context), target,
                       config_.basis);
  }

  py::array_t<double> attention(const std::vector<Symbol>& context) const {
    ealab::ForwardTrace trace;
    ealab::forward(params_, config_, context, &trace);
    return numpy_from_tensor(trace.attn);
  }

  py::dict param_count() const {
    const ealab::ParamCount count = ealab::param_count(config_);
    py::dict breakdown;
    for (const auto& [name, n] : count.breakdown) breakdown[name.c_str()] = n;
    py::dict out;
    out["total"] = count.total;
    out["breakdown"] = breakdown;
    return out;
  }

  // One training run against a single task; returns per-epoch mean losses
  // and (epoch, accuracy) evaluation points.
  py::dict fit(const std::string& task, std::int64_t epochs,
               std::int64_t eval_every, int n_test, int n_gen,
               std::uint64_t seed) {
    const ealab::TaskSpec spec = ealab::parse_task_spec(task);
    ealab::TrainConfig train_config;
    train_config.epochs = epochs;
    train_config.eval_every = eval_every > 0 ? eval_every : epochs + 1;
    train_config.n_test_during = n_test;
    train_config.n_gen_during = n_gen;
    train_config.n_test_final = n_test;
    train_config.n_gen_final = n_gen;
    train_config.n_runs = 1;
    train_config.base_seed = seed;
    const ealab::TrainResult result = ealab::train(
        train_config, config_, ealab::TaskMixture::single(spec), 0, seed);

    py::list losses, evals;
    for (const auto& rec : result.metrics.epochs) {
      losses.append(rec.train_loss);
      if (rec.eval_accuracy[0])
        evals.append(py::make_tuple(rec.epoch, *rec.eval_accuracy[0]));
    }
    py::dict out;
    out["loss"] = losses;
    out["eval"] = evals;
    out["diverged"] = result.metrics.diverged;
    if (!result.metrics.diverged) {
      params_ = result.params;
      out["final_accuracy"] = result.metrics.final_evals[0].accuracy;
    }
    return out;
  }

  py::dict evaluate(const std::string& task, int n_series, int n_gen,
                    std::uint64_t seed) const {
    const ealab::TaskSpec spec = ealab::parse_task_spec(task);
    ealab::Rng rng(ealab::derive_seed(seed, 2));
    const ealab::EvalResult result =
        ealab::evaluate(params_, config_, spec, n_series, n_gen, rng);
    py::dict out;
    out["accuracy"] = result.accuracy;
    out["n_correct"] = result.n_correct;
    out["n_predictions"] = result.n_predictions;
    return out;
  }

  py::dict gradient_check(const std::string& task, double h, double tol,
                          std::size_t min_coords, std::uint64_t seed) {
    const ealab::TaskSpec spec = ealab::parse_task_spec(task);
    ealab::Rng data_rng(ealab::derive_seed(seed, 1));
    const ealab::SequenceState initial =
        ealab::random_initial_state(spec, data_rng);
    const std::vector<Symbol> series = ealab::generate_series(
        spec, initial, static_cast<std::size_t>(config_.context_len) + 1);
    const std::vector<Symbol> context(series.begin(), series.end() - 1);
    const Symbol target = series.back();

    ealab::GradCheckProblem problem;
    problem.loss = [&] {
      return ealab::loss(ealab::forward(params_, config_, context), target,
                         config_.basis);
    };
    problem.analytic_gradient = [&] {
      return ealab::to_flat_vector(
          ealab::backward(params_, config_, context, target));
    };
    ealab::ParamsFlat flat = ealab::flatten(params_);
    problem.coords = flat.coord_pointers();
    ealab::Rng check_rng(ealab::derive_seed(seed, 7));
    const ealab::GradCheckReport report =
        ealab::finite_difference_check(problem, h, tol, check_rng, min_coords);
    py::dict out;
    out["pass"] = report.pass;
    out["max_rel_err"] = report.max_rel_err;
    out["n_checked"] = report.n_checked;
    return out;
  }

  void save(const std::string& path) const {
    ealab::save_checkpoint(path, {config_, params_, 0, 0});
  }

  static Model load(const std::string& path) {
    return Model(ealab::load_checkpoint(path));
  }

  std::string repr() const {
    return "<ealab.Model basis=" + std::to_string(config_.basis) +
           " context_len=" + std::to_string(config_.context_len) + " kernel=" +
           to_string(config_.kernel.kind) + " sharing=" +
           to_string(config_.sharing) + ">";
  }

 private:
  ealab::ModelConfig config_;
  ealab::ModelParams params_;
};

}  // namespace

PYBIND11_MODULE(_ealab, m) {
  m.doc() =
      "Expressive vs dot-product attention laboratory on NT sequence tasks";

  py::class_<ealab::TaskSpec>(m, "TaskSpec")
      .def(py::init([](const std::string& text) {
             return ealab::parse_task_spec(text);
           }),
           py::arg("spec"))
      .def_readonly("basis", &ealab::TaskSpec::basis)
      .def_readonly("delay", &ealab::TaskSpec::delay)
      .def_property_readonly("variant",
                             [](const ealab::TaskSpec& spec) {
                               switch (spec.variant) {
                                 case ealab::TaskVariant::NT: return "NT";
                                 case ealab::TaskVariant::NTS: return "NT-S";
                                 default: return "NT-R";
                               }
                             })
      .def_property_readonly("window_size", &ealab::TaskSpec::window_size)
      .def_property_readonly("state_count", &ealab::TaskSpec::state_count)
      .def("__repr__", [](const ealab::TaskSpec& spec) {
        return "TaskSpec('" + to_string(spec) + "')";
      })
      .def("__str__",
           [](const ealab::TaskSpec& spec) { return to_string(spec); });

  m.def(
      "next_symbol",
      [](const std::string& task, const std::vector<Symbol>& window) {
        return ealab::next_symbol(ealab::parse_task_spec(task), {window});
      },
      py::arg("task"), py::arg("window"),
      "Next symbol of the recurrence from a window of delay+1 symbols");

  m.def(
      "generate_series",
      [](const std::string& task, const std::vector<Symbol>& initial,
         std::size_t length) {
        return ealab::generate_series(ealab::parse_task_spec(task), {initial},
                                      length);
      },
      py::arg("task"), py::arg("initial"), py::arg("length"));

  m.def(
      "random_series",
      [](const std::string& task, std::size_t length, std::uint64_t seed) {
        const ealab::TaskSpec spec = ealab::parse_task_spec(task);
        ealab::Rng rng(seed);
        return ealab::generate_series(
            spec, ealab::random_initial_state(spec, rng), length);
      },
      py::arg("task"), py::arg("length"), py::arg("seed") = 1);

  m.def(
      "enumerate_cycles",
      [](const std::string& task, std::uint64_t state_cap) {
        const ealab::TaskSpec spec = ealab::parse_task_spec(task);
        ealab::CycleEnumerationOptions options;
        if (state_cap > 0) options.state_cap = state_cap;
        return decomposition_to_dict(spec,
                                     ealab::enumerate_cycles(spec, options));
      },
      py::arg("task"), py::arg("state_cap") = 0,
      "Exact cycle decomposition of the task's state map");

  m.def(
      "scores",
      [](const py::array_t<double>& q, const py::array_t<double>& k) {
        return numpy_from_tensor(
            ealab::scores(tensor_from_numpy(q), tensor_from_numpy(k)));
      },
      py::arg("q"), py::arg("k"), "Score matrix z = Q K^T");

  m.def(
      "dpa_weights",
      [](const py::array_t<double>& z, double beta) {
        return numpy_from_tensor(ealab::dpa_weights(tensor_from_numpy(z), beta));
      },
      py::arg("z"), py::arg("beta") = 1.0,
      "Causally masked softmax attention weights");

  m.def(
      "ea_weights",
      [](const py::array_t<double>& z) {
        return numpy_from_tensor(ealab::ea_weights(tensor_from_numpy(z)));
      },
      py::arg("z"),
      "Causally masked z^2/(1+z^2) attention weights");

  m.def(
      "apply_attention",
      [](const py::array_t<double>& a, const py::array_t<double>& v) {
        return numpy_from_tensor(ealab::apply_attention(tensor_from_numpy(a),
                                                        tensor_from_numpy(v)));
      },
      py::arg("a"), py::arg("v"));

  m.def(
      "attention_log_heatmap",
      [](const py::array_t<double>& a) {
        return numpy_from_tensor(
            ealab::attention_log_heatmap(tensor_from_numpy(a)));
      },
      py::arg("a"));

  m.def(
      "oracle_accuracy",
      [](const std::string& task, int n_series, int n_gen, int context_len,
         std::uint64_t seed) {
        const ealab::TaskSpec spec = ealab::parse_task_spec(task);
        if (context_len <= 0) context_len = spec.window_size();
        ealab::Rng rng(ealab::derive_seed(seed, 2));
        return ealab::evaluate_with(ealab::oracle_predictor(spec), spec,
                                    n_series, n_gen, context_len, rng)
            .accuracy;
      },
      py::arg("task"), py::arg("n_series") = 100, py::arg("n_gen") = 50,
      py::arg("context_len") = 0, py::arg("seed") = 1);

  py::class_<Model>(m, "Model")
      .def(py::init<int, int, const std::string&, double, const std::string&,
                    int, double, std::uint64_t>(),
           py::arg("basis"), py::arg("context_len"), py::arg("kernel") = "dpa",
           py::arg("beta") = 1.0, py::arg("weight_sharing") = "shared",
           py::arg("hidden_factor") = 4, py::arg("ln_eps") = 1e-5,
           py::arg("seed") = 1)
      .def("forward", &Model::forward, py::arg("context"))
      .def("predict", &Model::predict, py::arg("context"))
      .def("loss", &Model::loss, py::arg("context"), py::arg("target"))
      .def("attention", &Model::attention, py::arg("context"))
      .def("param_count", &Model::param_count)
      .def("fit", &Model::fit, py::arg("task"), py::arg("epochs"),
           py::arg("eval_every") = 0, py::arg("n_test") = 50,
           py::arg("n_gen") = 50, py::arg("seed") = 1)
      .def("evaluate", &Model::evaluate, py::arg("task"),
           py::arg("n_series") = 100, py::arg("n_gen") = 50,
           py::arg("seed") = 1)
      .def("gradient_check", &Model::gradient_check, py::arg("task"),
           py::arg("h") = 1e-5, py::arg("tol") = 1e-4,
           py::arg("min_coords") = 200, py::arg("seed") = 1)
      .def("save", &Model::save, py::arg("path"))
      .def_static("load", &Model::load, py::arg("path"))
      .def("__repr__", &Model::repr);
}
