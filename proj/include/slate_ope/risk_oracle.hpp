#pragma once

#include <span>

#include "slate_ope/estimators.hpp"
#include "slate_ope/reward_models.hpp"
#include "slate_ope/slate_core.hpp"

namespace slate_ope {

struct RiskPrediction {
  double improvement_per_sample = 0.0;  // n (risk_PI - risk_PI++); positive favours PI++
  DivergenceSummary divergences;
  double true_prior_mean = 0.0;
  double assumed_prior_mean = 0.0;
};

/// Exact single-sample variance Var(T) of T = R G - F under the logging
/// policy, by enumerating every slate:
///   E[P G^2] - E[P G]^2 + E[F^2] - 2 E[P G F].
/// Needs sum_k f_weights == 0 (so E[F] = 0). Divide by n for a dataset of n.
double exact_variance(const RewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
                      const AdditiveEstimatorParams& params);

/// Exact E[R G - F] - v_pi by enumeration.
double exact_bias(const RewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
                  const AdditiveEstimatorParams& params);

/// -P'(P' - 2 P) K (M - H); equals P^2 K (M - H) when P' == P.
RiskPrediction predicted_improvement(const DivergenceSummary& divs, double true_prior_mean,
                                     double assumed_prior_mean);

/// Per-sample Bayes risk of a zero-sum control variate relative to none:
/// sum_k w_k^2 alpha_k - 2 P sum_k w_k alpha_k.
double control_variate_objective(std::span<const double> alphas, std::span<const double> weights,
                                 double prior_mean);

}  // namespace slate_ope
