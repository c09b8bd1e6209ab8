#include "slate_ope/estimators.hpp"

#include <cmath>
#include <string>

namespace slate_ope {

LoggedDataset::LoggedDataset(FactoredPolicy logging, std::vector<LoggedSample> data)
    : logging_policy(std::move(logging)), samples(std::move(data)) {
  for (const auto& sample : samples) validate_slate(logging_policy.spec(), sample.slate);
}

AdditiveEstimatorParams AdditiveEstimatorParams::pseudoinverse(std::size_t slot_count) {
  AdditiveEstimatorParams params;
  params.lambda = 1.0 - static_cast<double>(slot_count);
  params.g_weights.assign(slot_count, 1.0);
  params.f_weights.assign(slot_count, 0.0);
  return params;
}

AdditiveEstimatorParams AdditiveEstimatorParams::with_control_variate(std::vector<double> f_weights) {
  auto params = pseudoinverse(f_weights.size());
  params.f_weights = std::move(f_weights);
  return params;
}

EstimatorAccumulator::EstimatorAccumulator(std::size_t slot_count)
    : sum_reward_y_(slot_count, 0.0), sum_y_(slot_count, 0.0) {}

void EstimatorAccumulator::add(const ImportanceTable& table, std::span<const std::size_t> actions,
                               bool reward) {
  double product = 1.0;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const double y = table.weight(k, actions[k]);
    product *= y;
    sum_y_[k] += y;
    if (reward) sum_reward_y_[k] += y;
  }
  ++count_;
  if (reward) {
    sum_reward_ += 1.0;
    sum_reward_product_ += product;
  }
}

void EstimatorAccumulator::merge(const EstimatorAccumulator& other) {
  if (other.slot_count() != slot_count()) {
    throw PreconditionError("cannot merge accumulators with different slot counts");
  }
  count_ += other.count_;
  sum_reward_ += other.sum_reward_;
  sum_reward_product_ += other.sum_reward_product_;
  for (std::size_t k = 0; k < sum_y_.size(); ++k) {
    sum_y_[k] += other.sum_y_[k];
    sum_reward_y_[k] += other.sum_reward_y_[k];
  }
}

void EstimatorAccumulator::require_samples() const {
  if (count_ == 0) throw PreconditionError("estimators need at least one logged sample");
}

double EstimatorAccumulator::ips() const {
  require_samples();
  return sum_reward_product_ / static_cast<double>(count_);
}

double EstimatorAccumulator::additive(const AdditiveEstimatorParams& params) const {
  require_samples();
  if (params.g_weights.size() != slot_count() || params.f_weights.size() != slot_count()) {
    throw PreconditionError("estimator weights have length " + std::to_string(params.g_weights.size()) +
                            "/" + std::to_string(params.f_weights.size()) + ", slate has " +
                            std::to_string(slot_count()) + " slots");
  }
  double total = params.lambda * sum_reward_;
  for (std::size_t k = 0; k < slot_count(); ++k) {
    total += params.g_weights[k] * sum_reward_y_[k];
    total -= params.f_weights[k] * sum_y_[k];
  }
  return total / static_cast<double>(count_);
}

double EstimatorAccumulator::pseudoinverse() const {
  return additive(AdditiveEstimatorParams::pseudoinverse(slot_count()));
}

double EstimatorAccumulator::pseudoinverse_plus_plus(std::span<const double> cv_weights) const {
  return additive(AdditiveEstimatorParams::with_control_variate({cv_weights.begin(), cv_weights.end()}));
}

double EstimatorAccumulator::control_variate_mean(std::span<const double> cv_weights) const {
  require_samples();
  if (cv_weights.size() != slot_count()) throw PreconditionError("control variate weight length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < slot_count(); ++k) total += cv_weights[k] * sum_y_[k];
  return total / static_cast<double>(count_);
}

EstimatorAccumulator accumulate(const LoggedDataset& data, const FactoredPolicy& target) {
  const ImportanceTable table(target, data.logging_policy);
  EstimatorAccumulator acc(table.slot_count());
  for (const auto& sample : data.samples) acc.add(table, sample.slate.actions, sample.reward);
  return acc;
}

double estimate_ips(const LoggedDataset& data, const FactoredPolicy& target) {
  return accumulate(data, target).ips();
}

double estimate_additive(const LoggedDataset& data, const FactoredPolicy& target,
                         const AdditiveEstimatorParams& params) {
  if (params.g_weights.size() != target.slot_count() || params.f_weights.size() != target.slot_count()) {
    throw PreconditionError("estimator weights do not match the slot count");
  }
  return accumulate(data, target).additive(params);
}

double estimate_pi(const LoggedDataset& data, const FactoredPolicy& target) {
  return estimate_additive(data, target, AdditiveEstimatorParams::pseudoinverse(target.slot_count()));
}

ControlVariateWeights optimal_cv_weights(const DivergenceSummary& divs, double assumed_prior_mean) {
  if (!(assumed_prior_mean > 0.0 && assumed_prior_mean < 1.0)) {
    throw PreconditionError("assumed prior mean must lie in (0, 1)");
  }
  if (!divs.harmonic_mean) {
    throw DegenerateSlotError("a slot has zero divergence between target and logging policy; "
                              "drop it from the slate before using the control variate");
  }
  const double harmonic = *divs.harmonic_mean;
  ControlVariateWeights out{std::vector<double>(divs.slot_count()), assumed_prior_mean, divs};
  for (std::size_t k = 0; k < divs.slot_count(); ++k) {
    const double alpha = divs.alphas[k];
    if (!(alpha > 0.0)) throw DegenerateSlotError("slot " + std::to_string(k) + " has alpha <= 0");
    out.weights[k] = assumed_prior_mean * (1.0 - harmonic / alpha);
  }
  return out;
}

double estimate_pi_plus_plus(const LoggedDataset& data, const FactoredPolicy& target,
                             double assumed_prior_mean) {
  const auto weights = optimal_cv_weights(compute_divergences(target, data.logging_policy), assumed_prior_mean);
  return estimate_additive(data, target, AdditiveEstimatorParams::with_control_variate(weights.weights));
}

}  // namespace slate_ope
