#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slate_ope/estimators.hpp"
#include "slate_ope/reward_models.hpp"
#include "slate_ope/risk_oracle.hpp"
#include "slate_ope/rng.hpp"
#include "slate_ope/slate_core.hpp"

namespace slate_ope {

enum class ExperimentKind { prior_grid, cardinality_grid, slot_sweep, regression, oracle_check };

/// How each tensor's slate geometry is chosen.
enum class CardinalityRule {
  fixed,           // cfg.cardinalities as given
  even_division,   // d_0 = 2, d_k = floor(100 k / (K - 1))
  uniform_random,  // d_k ~ UniformInt(2, 100), redrawn per tensor
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string text);
std::string to_string(CardinalityRule rule);
CardinalityRule parse_cardinality_rule(std::string text);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::slot_sweep;
  CardinalityRule cardinality_rule = CardinalityRule::fixed;
  std::vector<std::size_t> cardinalities;  // used by the fixed rule
  std::size_t slot_count = 0;              // used by the generated rules
  std::uint64_t sample_size = 100'000;     // N
  std::uint64_t tensor_count = 50;         // T
  std::uint64_t replications = 500;        // S
  double true_prior_mean = 0.25;           // P-bar, drives the reward model
  double assumed_prior_mean = 0.25;        // P', drives the PI++ weights
  double relative_sd = 0.1;
  RewardKind reward_kind = RewardKind::elementwise;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Reductions always run in replication-index order; the flag is recorded
  // in the manifest so runs state the guarantee they were made under.
  bool deterministic_reduce = true;

  std::vector<double> true_prior_grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::vector<double> assumed_prior_grid{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::vector<std::size_t> cardinality_choices{2, 10, 100, 1000};
  std::vector<std::size_t> k_values{2, 3, 4, 5};

  /// Checks the fields the per-tensor simulation depends on.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

struct EstimatorSummary {
  std::string estimator;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double variance = 0.0;  // population variance over replications
  double mse = 0.0;
  double nmse = 0.0;      // N * mse
};

inline constexpr std::string_view kIps = "IPS";
inline constexpr std::string_view kPi = "PI";
inline constexpr std::string_view kPiPlusPlus = "PI++";

struct TensorResult {
  std::uint64_t tensor_index = 0;
  SlateSpec spec{{1}};
  DivergenceSummary divergences;
  double v_pi = 0.0;
  std::vector<EstimatorSummary> summaries;  // IPS, PI, PI++
  double delta_nmse = 0.0;                  // nmse(PI) - nmse(PI++)
  double predicted_improvement = 0.0;
  double true_prior_mean = 0.0;
  double assumed_prior_mean = 0.0;
  std::uint64_t sample_size = 0;
  std::uint64_t replications = 0;
  double clamp_fraction = 0.0;  // share of generated slates whose rate was clamped

  const EstimatorSummary& summary(std::string_view estimator) const;
  /// 100 * delta_nmse / nmse(PI).
  double percent_improvement() const;
  bool clamp_warning() const { return clamp_fraction > 0.01; }
};

/// d_0 = 2 and d_k = floor(100 k / (K - 1)) for k >= 1; K = 4 gives [2, 33, 66, 100].
std::vector<std::size_t> even_division_cardinalities(std::size_t slot_count);

/// The slate geometry used for `tensor_index` under cfg's cardinality rule.
SlateSpec tensor_spec(const ExperimentConfig& cfg, std::uint64_t tensor_index);

/// n i.i.d. samples: slate ~ logging, reward ~ Bernoulli(rate(slate)).
LoggedDataset generate_dataset(const RewardModel& model, const FactoredPolicy& logging, std::uint64_t n,
                               RandomStream& rng);

struct ReplicationBatch {
  std::vector<EstimatorAccumulator> accumulators;  // one per replication, in index order
  std::uint64_t clamped_samples = 0;
  std::uint64_t total_samples = 0;
};

/// Runs `replications` independent datasets of size n, folding each into an
/// accumulator without materializing samples. Replication r draws from the
/// stream (root_seed, data, tensor_index, r), with the same draw order as
/// generate_dataset, so results do not depend on `threads`.
ReplicationBatch simulate_replications(const RewardModel& model, const FactoredPolicy& logging,
                                       const FactoredPolicy& target, std::uint64_t n,
                                       std::uint64_t replications, std::uint64_t root_seed,
                                       std::uint64_t tensor_index, unsigned threads = 1);

/// Bias, variance, MSE and N*MSE of a set of replicated estimates.
EstimatorSummary summarize_estimates(std::string_view estimator, std::span<const double> estimates,
                                     double truth, std::uint64_t sample_size);

/// One tensor, evaluated once per assumed prior mean. All priors share the
/// drawn model and datasets, which differ only in the PI++ weights.
std::vector<TensorResult> run_tensor_for_priors(const ExperimentConfig& cfg, std::uint64_t tensor_index,
                                                std::span<const double> assumed_priors);

/// Draws the model for (seed, tensor_index), runs S replications of size N
/// and summarizes IPS, PI and PI++ against the deterministic target [0,...,0]
/// under uniform logging.
TensorResult run_tensor(const ExperimentConfig& cfg, std::uint64_t tensor_index);

using ProgressFn = std::function<void(const TensorResult&)>;

/// Every tensor 0..T-1 of cfg.
std::vector<TensorResult> run_tensors(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Mean and standard error of per-tensor quantities.
struct TensorAggregate {
  std::size_t tensors = 0;
  double mean_delta_nmse = 0.0;
  double se_delta_nmse = 0.0;
  double mean_percent_improvement = 0.0;
  double se_percent_improvement = 0.0;
  double mean_predicted_improvement = 0.0;
};

TensorAggregate aggregate(std::span<const TensorResult> results);

struct PriorGridCell {
  double true_prior_mean = 0.0;
  double assumed_prior_mean = 0.0;
  double predicted_improvement = 0.0;
  TensorAggregate stats;
  std::vector<TensorResult> tensors;
};

/// Every (P-bar, P') pair; cells are listed true-prior-major.
std::vector<PriorGridCell> experiment_prior_grid(const ExperimentConfig& cfg, std::span<const double> true_priors,
                                                 std::span<const double> assumed_priors,
                                                 const ProgressFn& progress = {});

struct CardinalityGridCell {
  std::size_t first = 0;
  std::size_t second = 0;
  TensorAggregate stats;
  std::vector<TensorResult> tensors;
};

/// Every ordered pair (d_1, d_2) of `choices` on a two-slot slate.
std::vector<CardinalityGridCell> experiment_cardinality_grid(const ExperimentConfig& cfg,
                                                             std::span<const std::size_t> choices,
                                                             const ProgressFn& progress = {});

struct SlotSweepEntry {
  std::size_t slot_count = 0;
  TensorAggregate stats;
  std::vector<TensorResult> tensors;
};

std::vector<SlotSweepEntry> experiment_slot_sweep(const ExperimentConfig& cfg, std::span<const std::size_t> k_values,
                                                  CardinalityRule rule, const ProgressFn& progress = {});

struct RegressionFit {
  std::size_t points = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x. Needs at least 3 points.
RegressionFit fit_line(std::span<const double> x, std::span<const double> y);

struct SlotRegression {
  std::size_t slot_count = 0;
  RegressionFit fit;
};

/// Per slot count, regresses each tensor's delta_nmse on its predicted
/// improvement P^2 K (M - H).
std::vector<SlotRegression> fit_improvement_regression(std::span<const TensorResult> results);

struct NamedEstimator {
  std::string name;
  AdditiveEstimatorParams params;
};

/// Exact per-sample risk of one additive estimator next to its replicated
/// counterpart. Variances are per sample, i.e. N times the estimator's.
struct OracleComparison {
  std::string estimator;
  double exact_variance = 0.0;
  double empirical_variance = 0.0;  // N * unbiased sample variance over replications
  double variance_se = 0.0;         // exact_variance * sqrt(2 / (S - 1))
  double variance_z = 0.0;
  double exact_bias = 0.0;
  double empirical_bias = 0.0;
  double bias_se = 0.0;
  double bias_z = 0.0;

  bool within(double z_limit) const {
    return std::abs(variance_z) <= z_limit && std::abs(bias_z) <= z_limit;
  }
};

/// Replicates each estimator S times on datasets of size n from the stream
/// (root_seed, data, tensor_index, r) and compares against exact_variance and
/// exact_bias. Needs S >= 2 and an enumerable slate space.
std::vector<OracleComparison> compare_with_oracle(const RewardModel& model, const FactoredPolicy& logging,
                                                  const FactoredPolicy& target,
                                                  std::span<const NamedEstimator> estimators, std::uint64_t n,
                                                  std::uint64_t replications, std::uint64_t root_seed,
                                                  std::uint64_t tensor_index = 0, unsigned threads = 1);

/// The reward model drawn for tensor_index under cfg.
RewardModel tensor_model(const ExperimentConfig& cfg, std::uint64_t tensor_index);

struct OracleCheckResult {
  std::uint64_t tensor_index = 0;
  SlateSpec spec{{1}};
  std::vector<OracleComparison> comparisons;  // PI, then PI++ at cfg's assumed prior
};

/// compare_with_oracle on every tensor of cfg, with uniform logging and the
/// deterministic target [0,...,0].
std::vector<OracleCheckResult> experiment_oracle_check(const ExperimentConfig& cfg);

}  // namespace slate_ope
