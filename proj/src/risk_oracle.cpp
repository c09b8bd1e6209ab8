#include "slate_ope/risk_oracle.hpp"

#include <cmath>
#include <string>

namespace slate_ope {
namespace {

struct Moments {
  double pg = 0.0;    // E[P G]
  double pg2 = 0.0;   // E[P G^2]
  double f = 0.0;     // E[F]
  double f2 = 0.0;    // E[F^2]
  double pgf = 0.0;   // E[P G F]
};

Moments enumerate_moments(const RewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
                          const AdditiveEstimatorParams& params) {
  const SlateSpec& spec = logging.spec();
  if (model_spec(model) != spec || target.spec() != spec) {
    throw InvalidSpecError("model, logging and target policies must share one slate spec");
  }
  if (params.g_weights.size() != spec.slot_count() || params.f_weights.size() != spec.slot_count()) {
    throw PreconditionError("estimator weights do not match the slot count");
  }
  const ImportanceTable table(target, logging);
  Moments m;
  for_each_slate(spec, [&](const Slate& slate) {
    double mu = 1.0;
    double g = params.lambda;
    double f = 0.0;
    for (std::size_t k = 0; k < spec.slot_count(); ++k) {
      const std::size_t a = slate.actions[k];
      mu *= logging.probability(k, a);
      const double y = table.weight(k, a);
      g += params.g_weights[k] * y;
      f += params.f_weights[k] * y;
    }
    if (mu == 0.0) return;
    const double p = bernoulli_rate(model, slate);
    m.pg += mu * p * g;
    m.pg2 += mu * p * g * g;
    m.f += mu * f;
    m.f2 += mu * f * f;
    m.pgf += mu * p * g * f;
  });
  return m;
}

}  // namespace

double exact_variance(const RewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
                      const AdditiveEstimatorParams& params) {
  double weight_sum = 0.0, weight_scale = 1.0;
  for (double w : params.f_weights) {
    weight_sum += w;
    weight_scale += std::abs(w);
  }
  if (std::abs(weight_sum) > 1e-12 * weight_scale) {
    throw PreconditionError("control-variate weights must sum to zero, got " + std::to_string(weight_sum));
  }
  const Moments m = enumerate_moments(model, logging, target, params);
  return m.pg2 - m.pg * m.pg + m.f2 - 2.0 * m.pgf;
}

double exact_bias(const RewardModel& model, const FactoredPolicy& logging, const FactoredPolicy& target,
                  const AdditiveEstimatorParams& params) {
  const Moments m = enumerate_moments(model, logging, target, params);
  return m.pg - m.f - true_policy_value(model, target);
}

RiskPrediction predicted_improvement(const DivergenceSummary& divs, double true_prior_mean,
                                     double assumed_prior_mean) {
  if (!divs.harmonic_mean) {
    throw DegenerateSlotError("predicted improvement needs every slot divergence to be positive");
  }
  const double k = static_cast<double>(divs.slot_count());
  const double gap = divs.arithmetic_mean - *divs.harmonic_mean;
  RiskPrediction out;
  out.improvement_per_sample = -assumed_prior_mean * (assumed_prior_mean - 2.0 * true_prior_mean) * k * gap;
  out.divergences = divs;
  out.true_prior_mean = true_prior_mean;
  out.assumed_prior_mean = assumed_prior_mean;
  return out;
}

double control_variate_objective(std::span<const double> alphas, std::span<const double> weights,
                                 double prior_mean) {
  if (alphas.size() != weights.size()) throw PreconditionError("alpha and weight lengths differ");
  double quadratic = 0.0, linear = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    quadratic += weights[k] * weights[k] * alphas[k];
    linear += weights[k] * alphas[k];
  }
  return quadratic - 2.0 * prior_mean * linear;
}

}  // namespace slate_ope
