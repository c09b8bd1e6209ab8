#include "slate_ope/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace slate_ope {
namespace {

// Calls fn(i) for i in [0, count). Work is handed out by index; callers store
// results by index so the schedule never affects the outcome.
template <class Fn>
void parallel_for(std::uint64_t count, unsigned threads, Fn&& fn) {
  const auto workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(threads, 1u), count));
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::uint64_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Draw order per sample: slot actions 0..K-1, then the reward uniform.
template <class Model, class Sink>
void draw_samples(const Model& model, const FactoredPolicy& logging, std::uint64_t n, RandomStream& rng,
                  Sink&& sink) {
  std::vector<std::size_t> actions(logging.slot_count());
  for (std::uint64_t i = 0; i < n; ++i) {
    sample_slate_into(logging, rng, actions);
    const double raw = model.raw_rate(actions);
    const bool clamped = raw < 0.0 || raw > 1.0;
    const bool reward = rng.uniform() < clamp_rate(raw);
    sink(std::span<const std::size_t>(actions), reward, clamped);
  }
}

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// Standard error of the mean; 0 for a single value.
double standard_error(std::span<const double> values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

void check_prior(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ConfigError(std::string(name) + " must lie in (0, 1)");
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::prior_grid: return "prior_grid";
    case ExperimentKind::cardinality_grid: return "cardinality_grid";
    case ExperimentKind::slot_sweep: return "slot_sweep";
    case ExperimentKind::regression: return "regression";
    case ExperimentKind::oracle_check: return "oracle_check";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string text) {
  std::replace(text.begin(), text.end(), '-', '_');
  for (auto kind : {ExperimentKind::prior_grid, ExperimentKind::cardinality_grid, ExperimentKind::slot_sweep,
                    ExperimentKind::regression, ExperimentKind::oracle_check}) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown experiment '" + text +
                    "' (expected prior_grid, cardinality_grid, slot_sweep, regression or oracle_check)");
}

std::string to_string(CardinalityRule rule) {
  switch (rule) {
    case CardinalityRule::fixed: return "fixed";
    case CardinalityRule::even_division: return "even_division";
    case CardinalityRule::uniform_random: return "uniform_random";
  }
  return "unknown";
}

CardinalityRule parse_cardinality_rule(std::string text) {
  std::replace(text.begin(), text.end(), '-', '_');
  for (auto rule : {CardinalityRule::fixed, CardinalityRule::even_division, CardinalityRule::uniform_random}) {
    if (to_string(rule) == text) return rule;
  }
  throw ConfigError("unknown cardinality rule '" + text + "' (expected fixed, even_division or uniform_random)");
}

void ExperimentConfig::validate() const {
  if (sample_size < 1) throw ConfigError("n must be at least 1");
  if (tensor_count < 1) throw ConfigError("t must be at least 1");
  if (replications < 1) throw ConfigError("s must be at least 1");
  check_prior(true_prior_mean, "p_bar");
  check_prior(assumed_prior_mean, "p_prime");
  if (!(relative_sd >= 0.0) || !std::isfinite(relative_sd)) throw ConfigError("relative_sd must be >= 0");
  switch (cardinality_rule) {
    case CardinalityRule::fixed:
      if (cardinalities.empty()) throw ConfigError("d (slot cardinalities) is required for the fixed rule");
      SlateSpec{cardinalities};
      break;
    case CardinalityRule::even_division:
    case CardinalityRule::uniform_random:
      if (slot_count < 2) throw ConfigError("k must be at least 2 for generated cardinalities");
      break;
  }
  if (reward_kind == RewardKind::pairwise) {
    const std::size_t k = cardinality_rule == CardinalityRule::fixed ? cardinalities.size() : slot_count;
    if (k < 2) throw ConfigError("pairwise rewards need at least two slots");
  }
}

const EstimatorSummary& TensorResult::summary(std::string_view estimator) const {
  for (const auto& s : summaries) {
    if (s.estimator == estimator) return s;
  }
  throw PreconditionError("no summary for estimator " + std::string(estimator));
}

double TensorResult::percent_improvement() const {
  const double base = summary(kPi).nmse;
  return base > 0.0 ? 100.0 * delta_nmse / base : 0.0;
}

std::vector<std::size_t> even_division_cardinalities(std::size_t slot_count) {
  if (slot_count < 2) throw InvalidSpecError("even division needs at least two slots");
  std::vector<std::size_t> out(slot_count);
  out[0] = 2;
  for (std::size_t k = 1; k < slot_count; ++k) out[k] = k * 100 / (slot_count - 1);
  return out;
}

SlateSpec tensor_spec(const ExperimentConfig& cfg, std::uint64_t tensor_index) {
  switch (cfg.cardinality_rule) {
    case CardinalityRule::fixed:
      return SlateSpec(cfg.cardinalities);
    case CardinalityRule::even_division:
      return SlateSpec(even_division_cardinalities(cfg.slot_count));
    case CardinalityRule::uniform_random: {
      RandomStream rng(derive_seed(cfg.seed, StreamPurpose::cardinalities, tensor_index));
      std::vector<std::size_t> cards(cfg.slot_count);
      for (auto& d : cards) d = 2 + static_cast<std::size_t>(rng.below(99));
      return SlateSpec(std::move(cards));
    }
  }
  throw ConfigError("unknown cardinality rule");
}

LoggedDataset generate_dataset(const RewardModel& model, const FactoredPolicy& logging, std::uint64_t n,
                               RandomStream& rng) {
  if (n < 1) throw PreconditionError("a dataset needs at least one sample");
  if (model_spec(model) != logging.spec()) throw InvalidSpecError("model and logging policy specs differ");
  std::vector<LoggedSample> samples;
  samples.reserve(n);
  std::visit(
      [&](const auto& m) {
        draw_samples(m, logging, n, rng, [&](std::span<const std::size_t> actions, bool reward, bool) {
          samples.push_back({Slate{{actions.begin(), actions.end()}}, reward});
        });
      },
      model);
  return LoggedDataset(logging, std::move(samples));
}

ReplicationBatch simulate_replications(const RewardModel& model, const FactoredPolicy& logging,
                                       const FactoredPolicy& target, std::uint64_t n,
                                       std::uint64_t replications, std::uint64_t root_seed,
                                       std::uint64_t tensor_index, unsigned threads) {
  if (n < 1 || replications < 1) throw PreconditionError("need n >= 1 and at least one replication");
  if (model_spec(model) != logging.spec()) throw InvalidSpecError("model and logging policy specs differ");
  const ImportanceTable table(target, logging);
  ReplicationBatch batch;
  batch.accumulators.assign(replications, EstimatorAccumulator(logging.slot_count()));
  std::vector<std::uint64_t> clamped(replications, 0);
  parallel_for(replications, threads, [&](std::uint64_t r) {
    RandomStream rng(derive_seed(root_seed, StreamPurpose::data, tensor_index, r));
    auto& acc = batch.accumulators[r];
    std::uint64_t local_clamped = 0;
    std::visit(
        [&](const auto& m) {
          draw_samples(m, logging, n, rng, [&](std::span<const std::size_t> actions, bool reward, bool clamp) {
            acc.add(table, actions, reward);
            local_clamped += clamp;
          });
        },
        model);
    clamped[r] = local_clamped;
  });
  batch.clamped_samples = std::accumulate(clamped.begin(), clamped.end(), std::uint64_t{0});
  batch.total_samples = n * replications;
  return batch;
}

EstimatorSummary summarize_estimates(std::string_view estimator, std::span<const double> estimates,
                                     double truth, std::uint64_t sample_size) {
  if (estimates.empty()) throw PreconditionError("no estimates to summarize");
  EstimatorSummary out;
  out.estimator = std::string(estimator);
  out.mean_estimate = mean_of(estimates);
  out.bias = out.mean_estimate - truth;
  double centered = 0.0;
  for (double e : estimates) centered += (e - out.mean_estimate) * (e - out.mean_estimate);
  out.variance = centered / static_cast<double>(estimates.size());
  out.mse = out.bias * out.bias + out.variance;
  out.nmse = static_cast<double>(sample_size) * out.mse;
  return out;
}

std::vector<TensorResult> run_tensor_for_priors(const ExperimentConfig& cfg, std::uint64_t tensor_index,
                                                std::span<const double> assumed_priors) {
  cfg.validate();
  const SlateSpec spec = tensor_spec(cfg, tensor_index);
  const RewardModel model = tensor_model(cfg, tensor_index);
  const FactoredPolicy logging = make_uniform_policy(spec);
  const FactoredPolicy target =
      make_deterministic_policy(spec, Slate{std::vector<std::size_t>(spec.slot_count(), 0)});
  const DivergenceSummary divs = compute_divergences(target, logging);

  std::vector<ControlVariateWeights> weights;
  for (double prior : assumed_priors) {
    check_prior(prior, "p_prime");
    weights.push_back(optimal_cv_weights(divs, prior));
  }

  const ReplicationBatch batch = simulate_replications(model, logging, target, cfg.sample_size, cfg.replications,
                                                       cfg.seed, tensor_index, cfg.threads);
  const double v_pi = true_policy_value(model, target);

  const auto count = batch.accumulators.size();
  std::vector<double> ips(count), pi(count), pipp(count);
  for (std::size_t r = 0; r < count; ++r) {
    ips[r] = batch.accumulators[r].ips();
    pi[r] = batch.accumulators[r].pseudoinverse();
  }
  const EstimatorSummary ips_summary = summarize_estimates(kIps, ips, v_pi, cfg.sample_size);
  const EstimatorSummary pi_summary = summarize_estimates(kPi, pi, v_pi, cfg.sample_size);

  std::vector<TensorResult> out;
  out.reserve(weights.size());
  for (const auto& w : weights) {
    for (std::size_t r = 0; r < count; ++r) pipp[r] = batch.accumulators[r].pseudoinverse_plus_plus(w.weights);
    TensorResult result;
    result.tensor_index = tensor_index;
    result.spec = spec;
    result.divergences = divs;
    result.v_pi = v_pi;
    result.summaries = {ips_summary, pi_summary, summarize_estimates(kPiPlusPlus, pipp, v_pi, cfg.sample_size)};
    result.delta_nmse = result.summaries[1].nmse - result.summaries[2].nmse;
    result.predicted_improvement =
        predicted_improvement(divs, cfg.true_prior_mean, w.prior_mean).improvement_per_sample;
    result.true_prior_mean = cfg.true_prior_mean;
    result.assumed_prior_mean = w.prior_mean;
    result.sample_size = cfg.sample_size;
    result.replications = cfg.replications;
    result.clamp_fraction =
        static_cast<double>(batch.clamped_samples) / static_cast<double>(batch.total_samples);
    out.push_back(std::move(result));
  }
  return out;
}

TensorResult run_tensor(const ExperimentConfig& cfg, std::uint64_t tensor_index) {
  const double prior = cfg.assumed_prior_mean;
  return std::move(run_tensor_for_priors(cfg, tensor_index, std::span<const double>(&prior, 1)).front());
}

std::vector<TensorResult> run_tensors(const ExperimentConfig& cfg, const ProgressFn& progress) {
  std::vector<TensorResult> out;
  out.reserve(cfg.tensor_count);
  for (std::uint64_t t = 0; t < cfg.tensor_count; ++t) {
    out.push_back(run_tensor(cfg, t));
    if (progress) progress(out.back());
  }
  return out;
}

TensorAggregate aggregate(std::span<const TensorResult> results) {
  TensorAggregate out;
  out.tensors = results.size();
  if (results.empty()) return out;
  std::vector<double> delta, percent, predicted;
  for (const auto& r : results) {
    delta.push_back(r.delta_nmse);
    percent.push_back(r.percent_improvement());
    predicted.push_back(r.predicted_improvement);
  }
  out.mean_delta_nmse = mean_of(delta);
  out.se_delta_nmse = standard_error(delta, out.mean_delta_nmse);
  out.mean_percent_improvement = mean_of(percent);
  out.se_percent_improvement = standard_error(percent, out.mean_percent_improvement);
  out.mean_predicted_improvement = mean_of(predicted);
  return out;
}

std::vector<PriorGridCell> experiment_prior_grid(const ExperimentConfig& cfg, std::span<const double> true_priors,
                                                 std::span<const double> assumed_priors,
                                                 const ProgressFn& progress) {
  if (true_priors.empty() || assumed_priors.empty()) throw ConfigError("prior grids must be non-empty");
  std::vector<PriorGridCell> cells;
  for (double p_bar : true_priors) {
    check_prior(p_bar, "p_bar grid value");
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.true_prior_mean = p_bar;
    const std::size_t first = cells.size();
    for (double p_prime : assumed_priors) {
      PriorGridCell cell;
      cell.true_prior_mean = p_bar;
      cell.assumed_prior_mean = p_prime;
      cells.push_back(std::move(cell));
    }
    for (std::uint64_t t = 0; t < cfg.tensor_count; ++t) {
      auto results = run_tensor_for_priors(cell_cfg, t, assumed_priors);
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (progress) progress(results[i]);
        cells[first + i].tensors.push_back(std::move(results[i]));
      }
    }
  }
  for (auto& cell : cells) {
    cell.stats = aggregate(cell.tensors);
    cell.predicted_improvement = cell.stats.mean_predicted_improvement;
  }
  return cells;
}

std::vector<CardinalityGridCell> experiment_cardinality_grid(const ExperimentConfig& cfg,
                                                             std::span<const std::size_t> choices,
                                                             const ProgressFn& progress) {
  if (choices.empty()) throw ConfigError("cardinality choices must be non-empty");
  for (std::size_t d : choices) {
    if (d < 2) throw ConfigError("cardinality choices need at least 2 actions each");
  }
  std::vector<CardinalityGridCell> cells;
  for (std::size_t first : choices) {
    for (std::size_t second : choices) {
      ExperimentConfig cell_cfg = cfg;
      cell_cfg.cardinality_rule = CardinalityRule::fixed;
      cell_cfg.cardinalities = {first, second};
      CardinalityGridCell cell;
      cell.first = first;
      cell.second = second;
      cell.tensors = run_tensors(cell_cfg, progress);
      cell.stats = aggregate(cell.tensors);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<SlotSweepEntry> experiment_slot_sweep(const ExperimentConfig& cfg, std::span<const std::size_t> k_values,
                                                  CardinalityRule rule, const ProgressFn& progress) {
  if (k_values.empty()) throw ConfigError("k_values must be non-empty");
  if (rule == CardinalityRule::fixed) throw ConfigError("a slot sweep needs a generated cardinality rule");
  std::vector<SlotSweepEntry> out;
  for (std::size_t k : k_values) {
    if (k < 2) throw ConfigError("slot sweep values must be at least 2");
    ExperimentConfig k_cfg = cfg;
    k_cfg.cardinality_rule = rule;
    k_cfg.slot_count = k;
    SlotSweepEntry entry;
    entry.slot_count = k;
    entry.tensors = run_tensors(k_cfg, progress);
    entry.stats = aggregate(entry.tensors);
    out.push_back(std::move(entry));
  }
  return out;
}

RegressionFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("regression inputs differ in length");
  if (x.size() < 3) throw PreconditionError("regression needs at least 3 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw PreconditionError("regression needs at least two distinct x values");
  RegressionFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double residual = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    residual += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - residual / syy : 1.0;
  return fit;
}

std::vector<SlotRegression> fit_improvement_regression(std::span<const TensorResult> results) {
  std::vector<std::size_t> slot_counts;
  for (const auto& r : results) slot_counts.push_back(r.spec.slot_count());
  std::sort(slot_counts.begin(), slot_counts.end());
  slot_counts.erase(std::unique(slot_counts.begin(), slot_counts.end()), slot_counts.end());
  std::vector<SlotRegression> out;
  for (std::size_t k : slot_counts) {
    std::vector<double> x, y;
    for (const auto& r : results) {
      if (r.spec.slot_count() != k) continue;
      x.push_back(r.predicted_improvement);
      y.push_back(r.delta_nmse);
    }
    out.push_back({k, fit_line(x, y)});
  }
  return out;
}

}  // namespace slate_ope

namespace slate_ope {

std::vector<OracleComparison> compare_with_oracle(const RewardModel& model, const FactoredPolicy& logging,
                                                  const FactoredPolicy& target,
                                                  std::span<const NamedEstimator> estimators, std::uint64_t n,
                                                  std::uint64_t replications, std::uint64_t root_seed,
                                                  std::uint64_t tensor_index, unsigned threads) {
  if (replications < 2) throw PreconditionError("oracle comparison needs at least two replications");
  const double v_pi = true_policy_value(model, target);
  const ReplicationBatch batch =
      simulate_replications(model, logging, target, n, replications, root_seed, tensor_index, threads);
  const double s = static_cast<double>(replications);
  const double size = static_cast<double>(n);

  std::vector<OracleComparison> out;
  std::vector<double> estimates(replications);
  for (const auto& est : estimators) {
    OracleComparison c;
    c.estimator = est.name;
    c.exact_variance = exact_variance(model, logging, target, est.params);
    c.exact_bias = exact_bias(model, logging, target, est.params);
    for (std::uint64_t r = 0; r < replications; ++r) estimates[r] = batch.accumulators[r].additive(est.params);
    const EstimatorSummary summary = summarize_estimates(est.name, estimates, v_pi, n);
    const double sample_variance = summary.variance * s / (s - 1.0);
    c.empirical_variance = size * sample_variance;
    c.variance_se = c.exact_variance * std::sqrt(2.0 / (s - 1.0));
    c.variance_z = c.variance_se > 0.0 ? (c.empirical_variance - c.exact_variance) / c.variance_se : 0.0;
    c.empirical_bias = summary.bias;
    c.bias_se = std::sqrt(c.exact_variance / size / s);
    c.bias_z = c.bias_se > 0.0 ? (c.empirical_bias - c.exact_bias) / c.bias_se : 0.0;
    out.push_back(std::move(c));
  }
  return out;
}

RewardModel tensor_model(const ExperimentConfig& cfg, std::uint64_t tensor_index) {
  const SlateSpec spec = tensor_spec(cfg, tensor_index);
  RandomStream model_rng(derive_seed(cfg.seed, StreamPurpose::model, tensor_index));
  return draw_model(spec, {cfg.true_prior_mean, cfg.relative_sd, cfg.reward_kind}, model_rng);
}

std::vector<OracleCheckResult> experiment_oracle_check(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<OracleCheckResult> out;
  for (std::uint64_t t = 0; t < cfg.tensor_count; ++t) {
    OracleCheckResult result;
    result.tensor_index = t;
    result.spec = tensor_spec(cfg, t);
    const RewardModel model = tensor_model(cfg, t);
    const FactoredPolicy logging = make_uniform_policy(result.spec);
    const FactoredPolicy target =
        make_deterministic_policy(result.spec, Slate{std::vector<std::size_t>(result.spec.slot_count(), 0)});
    const auto weights = optimal_cv_weights(compute_divergences(target, logging), cfg.assumed_prior_mean);
    const NamedEstimator estimators[] = {
        {std::string(kPi), AdditiveEstimatorParams::pseudoinverse(result.spec.slot_count())},
        {std::string(kPiPlusPlus), AdditiveEstimatorParams::with_control_variate(weights.weights)},
    };
    result.comparisons = compare_with_oracle(model, logging, target, estimators, cfg.sample_size,
                                             cfg.replications, cfg.seed, t, cfg.threads);
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace slate_ope
