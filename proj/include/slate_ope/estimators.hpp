#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "slate_ope/slate_core.hpp"

namespace slate_ope {

struct LoggedSample {
  Slate slate;
  bool reward = false;
};

struct LoggedDataset {
  LoggedDataset(FactoredPolicy logging_policy, std::vector<LoggedSample> samples);

  const SlateSpec& spec() const { return logging_policy.spec(); }

  FactoredPolicy logging_policy;
  std::vector<LoggedSample> samples;
};

/// Parameters of the additive family
///   g = lambda + sum_k g_weights[k] Y_k,   f = sum_k f_weights[k] Y_k.
/// f has no constant term.
struct AdditiveEstimatorParams {
  double lambda = 0.0;
  std::vector<double> g_weights;
  std::vector<double> f_weights;

  std::size_t slot_count() const { return g_weights.size(); }

  /// lambda = 1 - K, unit g weights, no control variate.
  static AdditiveEstimatorParams pseudoinverse(std::size_t slot_count);

  /// Pseudoinverse g with the given control-variate weights as f.
  static AdditiveEstimatorParams with_control_variate(std::vector<double> f_weights);
};

struct ControlVariateWeights {
  std::vector<double> weights;
  double prior_mean = 0.0;  // the assumed prior mean the weights were tuned for
  DivergenceSummary divergences;
};

/// Single-pass sufficient statistics for every estimator in the additive
/// family plus IPS. Partial accumulators over disjoint sample ranges merge
/// associatively.
class EstimatorAccumulator {
 public:
  explicit EstimatorAccumulator(std::size_t slot_count);

  /// `slot_weights` holds Y_k for the sample's slate.
  void add(std::span<const double> slot_weights, bool reward) {
    double product = 1.0;
    for (std::size_t k = 0; k < slot_weights.size(); ++k) {
      const double y = slot_weights[k];
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

  void add(const ImportanceTable& table, std::span<const std::size_t> actions, bool reward);

  void merge(const EstimatorAccumulator& other);

  std::uint64_t count() const { return count_; }
  std::size_t slot_count() const { return sum_y_.size(); }
  double reward_sum() const { return sum_reward_; }
  std::span<const double> slot_weight_sums() const { return sum_y_; }

  double ips() const;
  double additive(const AdditiveEstimatorParams& params) const;
  double pseudoinverse() const;
  double pseudoinverse_plus_plus(std::span<const double> cv_weights) const;
  /// (1/n) sum_i sum_k w_k Y_ki
  double control_variate_mean(std::span<const double> cv_weights) const;

 private:
  void require_samples() const;

  std::uint64_t count_ = 0;
  double sum_reward_ = 0.0;
  double sum_reward_product_ = 0.0;
  std::vector<double> sum_reward_y_;
  std::vector<double> sum_y_;
};

EstimatorAccumulator accumulate(const LoggedDataset& data, const FactoredPolicy& target);

/// (1/n) sum_i r_i prod_k Y_ki
double estimate_ips(const LoggedDataset& data, const FactoredPolicy& target);

double estimate_additive(const LoggedDataset& data, const FactoredPolicy& target,
                         const AdditiveEstimatorParams& params);

/// Pseudoinverse estimator: the additive family at lambda = 1 - K, unit
/// weights, no control variate.
double estimate_pi(const LoggedDataset& data, const FactoredPolicy& target);

/// w_k = P' (1 - H / alpha_k), the minimizer of
/// sum_k w_k^2 alpha_k - 2 P' sum_k w_k alpha_k subject to sum_k w_k = 0.
/// Throws DegenerateSlotError unless every alpha_k > 0.
ControlVariateWeights optimal_cv_weights(const DivergenceSummary& divs, double assumed_prior_mean);

/// PI minus the optimally weighted control variate for the assumed prior mean.
double estimate_pi_plus_plus(const LoggedDataset& data, const FactoredPolicy& target,
                             double assumed_prior_mean);

}  // namespace slate_ope
