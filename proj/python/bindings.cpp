#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "slate_ope/cli_reporting.hpp"
#include "slate_ope/risk_oracle.hpp"
#include "slate_ope/sim_harness.hpp"

namespace py = pybind11;
using namespace slate_ope;

namespace {

// The variant alternatives are not default-constructible, so Python sees one
// opaque model type.
struct PyRewardModel {
  RewardModel model;
};

std::vector<std::vector<std::size_t>> dataset_slates(const LoggedDataset& data) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) out.push_back(s.slate.actions);
  return out;
}

std::vector<bool> dataset_rewards(const LoggedDataset& data) {
  std::vector<bool> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) out.push_back(s.reward);
  return out;
}

}  // namespace

PYBIND11_MODULE(slate_ope, m) {
  m.doc() = "Off-policy evaluation for slate bandits: IPS, PI and PI++ with an exact risk oracle.";
  m.attr("__version__") = std::string(kVersion);

  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<InvalidSpecError>(m, "InvalidSpecError", base.ptr());
  py::register_exception<InvalidSlateError>(m, "InvalidSlateError", base.ptr());
  py::register_exception<InvalidPolicyError>(m, "InvalidPolicyError", base.ptr());
  py::register_exception<AbsoluteContinuityError>(m, "AbsoluteContinuityError", base.ptr());
  py::register_exception<DegenerateSlotError>(m, "DegenerateSlotError", base.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<SlateSpec>(m, "SlateSpec")
      .def(py::init<std::vector<std::size_t>>(), py::arg("cardinalities"))
      .def_property_readonly("cardinalities",
                             [](const SlateSpec& s) {
                               return std::vector<std::size_t>(s.cardinalities().begin(), s.cardinalities().end());
                             })
      .def_property_readonly("slot_count", &SlateSpec::slot_count)
      .def("__str__", &SlateSpec::to_string)
      .def("__eq__", [](const SlateSpec& a, const SlateSpec& b) { return a == b; });

  py::class_<FactoredPolicy>(m, "FactoredPolicy")
      .def(py::init<SlateSpec, std::vector<std::vector<double>>>(), py::arg("spec"), py::arg("slot_dists"))
      .def_property_readonly("spec", &FactoredPolicy::spec)
      .def("probability", &FactoredPolicy::probability, py::arg("slot"), py::arg("action"))
      .def("slate_probability",
           [](const FactoredPolicy& p, std::vector<std::size_t> actions) {
             return slate_probability(p, Slate{std::move(actions)});
           })
      .def("sample", [](const FactoredPolicy& p, std::uint64_t seed) {
        RandomStream rng(seed);
        return sample_slate(p, rng).actions;
      });
  m.def("uniform_policy", &make_uniform_policy, py::arg("spec"));
  m.def(
      "deterministic_policy",
      [](const SlateSpec& spec, std::vector<std::size_t> actions) {
        return make_deterministic_policy(spec, Slate{std::move(actions)});
      },
      py::arg("spec"), py::arg("actions"));

  py::class_<DivergenceSummary>(m, "DivergenceSummary")
      .def_readonly("alphas", &DivergenceSummary::alphas)
      .def_readonly("arithmetic_mean", &DivergenceSummary::arithmetic_mean)
      .def_readonly("harmonic_mean", &DivergenceSummary::harmonic_mean);
  m.def("compute_divergences", &compute_divergences, py::arg("target"), py::arg("logging"));
  m.def("summarize_divergences", &summarize_divergences, py::arg("alphas"));

  m.def(
      "optimal_cv_weights",
      [](std::vector<double> alphas, double assumed_prior_mean) {
        return optimal_cv_weights(summarize_divergences(std::move(alphas)), assumed_prior_mean).weights;
      },
      py::arg("alphas"), py::arg("assumed_prior_mean"));
  m.def(
      "predicted_improvement",
      [](std::vector<double> alphas, double true_prior_mean, double assumed_prior_mean) {
        return predicted_improvement(summarize_divergences(std::move(alphas)), true_prior_mean, assumed_prior_mean)
            .improvement_per_sample;
      },
      py::arg("alphas"), py::arg("true_prior_mean"), py::arg("assumed_prior_mean"));
  m.def(
      "control_variate_objective",
      [](const std::vector<double>& alphas, const std::vector<double>& weights, double prior_mean) {
        return control_variate_objective(alphas, weights, prior_mean);
      },
      py::arg("alphas"), py::arg("weights"), py::arg("prior_mean"));

  py::class_<PyRewardModel>(m, "RewardModel")
      .def_static(
          "elementwise",
          [](SlateSpec spec, std::vector<std::vector<double>> phis) {
            return PyRewardModel{ElementwiseAdditiveModel(std::move(spec), std::move(phis))};
          },
          py::arg("spec"), py::arg("phis"))
      .def_static(
          "pairwise",
          [](SlateSpec spec, std::vector<std::vector<double>> pair_tables) {
            return PyRewardModel{PairwiseAdditiveModel(std::move(spec), std::move(pair_tables))};
          },
          py::arg("spec"), py::arg("pair_tables"))
      .def_property_readonly("spec", [](const PyRewardModel& m) { return model_spec(m.model); })
      .def_property_readonly("kind", [](const PyRewardModel& m) { return to_string(model_kind(m.model)); })
      .def(
          "rate",
          [](const PyRewardModel& m, std::vector<std::size_t> actions) {
            return bernoulli_rate(m.model, Slate{std::move(actions)});
          },
          py::arg("actions"))
      .def(
          "policy_value",
          [](const PyRewardModel& m, const FactoredPolicy& target) { return true_policy_value(m.model, target); },
          py::arg("target"));
  m.def(
      "draw_model",
      [](const SlateSpec& spec, double prior_mean, double relative_sd, const std::string& kind,
         std::uint64_t seed) {
        RandomStream rng(seed);
        return PyRewardModel{draw_model(spec, {prior_mean, relative_sd, parse_reward_kind(kind)}, rng)};
      },
      py::arg("spec"), py::arg("prior_mean") = 0.25, py::arg("relative_sd") = 0.1,
      py::arg("kind") = "elementwise", py::arg("seed") = 0);

  py::class_<LoggedDataset>(m, "LoggedDataset")
      .def(py::init([](FactoredPolicy logging, const std::vector<std::vector<std::size_t>>& slates,
                       const std::vector<bool>& rewards) {
             if (slates.size() != rewards.size()) throw PreconditionError("slates and rewards differ in length");
             std::vector<LoggedSample> samples;
             for (std::size_t i = 0; i < slates.size(); ++i) samples.push_back({Slate{slates[i]}, rewards[i]});
             return LoggedDataset(std::move(logging), std::move(samples));
           }),
           py::arg("logging"), py::arg("slates"), py::arg("rewards"))
      .def("__len__", [](const LoggedDataset& d) { return d.samples.size(); })
      .def_property_readonly("slates", &dataset_slates)
      .def_property_readonly("rewards", &dataset_rewards);
  m.def(
      "generate_dataset",
      [](const PyRewardModel& model, const FactoredPolicy& logging, std::uint64_t n, std::uint64_t seed) {
        RandomStream rng(seed);
        return generate_dataset(model.model, logging, n, rng);
      },
      py::arg("model"), py::arg("logging"), py::arg("n"), py::arg("seed") = 0);

  py::class_<AdditiveEstimatorParams>(m, "AdditiveEstimatorParams")
      .def_readonly("lambda_", &AdditiveEstimatorParams::lambda)
      .def_readonly("g_weights", &AdditiveEstimatorParams::g_weights)
      .def_readonly("f_weights", &AdditiveEstimatorParams::f_weights)
      .def_static("pseudoinverse", &AdditiveEstimatorParams::pseudoinverse, py::arg("slot_count"))
      .def_static("with_control_variate", &AdditiveEstimatorParams::with_control_variate, py::arg("f_weights"));

  m.def("estimate_ips", &estimate_ips, py::arg("data"), py::arg("target"));
  m.def("estimate_pi", &estimate_pi, py::arg("data"), py::arg("target"));
  m.def("estimate_pi_plus_plus", &estimate_pi_plus_plus, py::arg("data"), py::arg("target"),
        py::arg("assumed_prior_mean"));
  m.def("estimate_additive", &estimate_additive, py::arg("data"), py::arg("target"), py::arg("params"));
  m.def(
      "exact_variance",
      [](const PyRewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
         const AdditiveEstimatorParams& params) { return exact_variance(model.model, logging, target, params); },
      py::arg("model"), py::arg("logging"), py::arg("target"), py::arg("params"));
  m.def(
      "exact_bias",
      [](const PyRewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
         const AdditiveEstimatorParams& params) { return exact_bias(model.model, logging, target, params); },
      py::arg("model"), py::arg("logging"), py::arg("target"), py::arg("params"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_static("parse", &parse_config_text, py::arg("text"))
      .def("format", &format_config)
      .def_readwrite("sample_size", &ExperimentConfig::sample_size)
      .def_readwrite("tensor_count", &ExperimentConfig::tensor_count)
      .def_readwrite("replications", &ExperimentConfig::replications)
      .def_readwrite("true_prior_mean", &ExperimentConfig::true_prior_mean)
      .def_readwrite("assumed_prior_mean", &ExperimentConfig::assumed_prior_mean)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("threads", &ExperimentConfig::threads);

  py::class_<EstimatorSummary>(m, "EstimatorSummary")
      .def_readonly("estimator", &EstimatorSummary::estimator)
      .def_readonly("mean_estimate", &EstimatorSummary::mean_estimate)
      .def_readonly("bias", &EstimatorSummary::bias)
      .def_readonly("variance", &EstimatorSummary::variance)
      .def_readonly("mse", &EstimatorSummary::mse)
      .def_readonly("nmse", &EstimatorSummary::nmse);
  py::class_<TensorResult>(m, "TensorResult")
      .def_readonly("tensor_index", &TensorResult::tensor_index)
      .def_readonly("spec", &TensorResult::spec)
      .def_readonly("divergences", &TensorResult::divergences)
      .def_readonly("v_pi", &TensorResult::v_pi)
      .def_readonly("summaries", &TensorResult::summaries)
      .def_readonly("delta_nmse", &TensorResult::delta_nmse)
      .def_readonly("predicted_improvement", &TensorResult::predicted_improvement)
      .def_readonly("clamp_fraction", &TensorResult::clamp_fraction)
      .def("summary", &TensorResult::summary, py::arg("estimator"), py::return_value_policy::reference_internal);
  m.def(
      "run_tensors", [](const ExperimentConfig& cfg) { return run_tensors(cfg); }, py::arg("config"),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "format_results_csv",
      [](const std::vector<TensorResult>& results, const ExperimentConfig& cfg) {
        return format_results_csv(results, cfg);
      },
      py::arg("results"), py::arg("config"));
}
