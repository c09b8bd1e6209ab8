#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "slate_ope/rng.hpp"
#include "slate_ope/slate_core.hpp"

namespace slate_ope {

enum class RewardKind { elementwise, pairwise };

std::string to_string(RewardKind kind);
RewardKind parse_reward_kind(const std::string& text);

struct ModelDrawConfig {
  double prior_mean = 0.25;   // mean slate-level Bernoulli rate
  double relative_sd = 0.1;   // per-term SD as a fraction of the per-term mean
  RewardKind kind = RewardKind::elementwise;

  void validate() const;
};

/// p(a) = sum_k phi_k(a^k), clamped into [0, 1] when evaluated.
class ElementwiseAdditiveModel {
 public:
  ElementwiseAdditiveModel(SlateSpec spec, std::vector<std::vector<double>> phis);

  const SlateSpec& spec() const { return spec_; }
  std::span<const double> phi(std::size_t slot) const { return phis_.at(slot); }

  /// Additive sum before clamping.
  double raw_rate(std::span<const std::size_t> actions) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < actions.size(); ++k) sum += phis_[k][actions[k]];
    return sum;
  }

 private:
  SlateSpec spec_;
  std::vector<std::vector<double>> phis_;
};

/// p(a) = sum_{k<j} phi_kj(a^k, a^j), clamped into [0, 1] when evaluated.
/// Pair tables are stored row-major (d_k rows, d_j columns) in the order
/// (0,1), (0,2), ..., (1,2), ...
class PairwiseAdditiveModel {
 public:
  PairwiseAdditiveModel(SlateSpec spec, std::vector<std::vector<double>> pair_tables);

  const SlateSpec& spec() const { return spec_; }
  std::size_t pair_count() const { return tables_.size(); }
  std::size_t pair_index(std::size_t k, std::size_t j) const;
  double phi(std::size_t k, std::size_t j, std::size_t a, std::size_t b) const {
    return tables_[pair_index(k, j)][a * spec_.cardinality(j) + b];
  }
  std::span<const double> table(std::size_t k, std::size_t j) const { return tables_[pair_index(k, j)]; }

  double raw_rate(std::span<const std::size_t> actions) const {
    double sum = 0.0;
    std::size_t pair = 0;
    const std::size_t slots = actions.size();
    for (std::size_t k = 0; k < slots; ++k) {
      for (std::size_t j = k + 1; j < slots; ++j, ++pair) {
        sum += tables_[pair][actions[k] * spec_.cardinality(j) + actions[j]];
      }
    }
    return sum;
  }

 private:
  SlateSpec spec_;
  std::vector<std::vector<double>> tables_;
};

using RewardModel = std::variant<ElementwiseAdditiveModel, PairwiseAdditiveModel>;

const SlateSpec& model_spec(const RewardModel& model);
RewardKind model_kind(const RewardModel& model);

inline double clamp_rate(double raw) { return raw < 0.0 ? 0.0 : (raw > 1.0 ? 1.0 : raw); }

/// phi_k(a) ~ N(P/K, relative_sd * P/K), independently.
ElementwiseAdditiveModel draw_elementwise_model(const SlateSpec& spec, const ModelDrawConfig& cfg,
                                                RandomStream& rng);

/// phi_kj(a, b) ~ N(P/C, relative_sd * P/C) with C = K(K-1)/2 pairs, so that
/// slate rates have mean P. Requires K >= 2.
PairwiseAdditiveModel draw_pairwise_model(const SlateSpec& spec, const ModelDrawConfig& cfg,
                                          RandomStream& rng);

/// Dispatches on cfg.kind.
RewardModel draw_model(const SlateSpec& spec, const ModelDrawConfig& cfg, RandomStream& rng);

double bernoulli_rate(const ElementwiseAdditiveModel& model, const Slate& slate);
double bernoulli_rate(const PairwiseAdditiveModel& model, const Slate& slate);
double bernoulli_rate(const RewardModel& model, const Slate& slate);

/// v_pi = E_pi[R], computed exactly. Deterministic targets read a single
/// slate; otherwise the slate space is enumerated when it fits under the cap,
/// and beyond it the additive structure is used provided no slate in the
/// target's support can be clamped (CapacityError if that cannot be shown).
double true_policy_value(const RewardModel& model, const FactoredPolicy& target);

/// Sum of per-slot (or per-pair) expected terms under the target, ignoring
/// the clamp. Equals true_policy_value whenever no supported slate is clamped.
double additive_policy_value(const RewardModel& model, const FactoredPolicy& target);

/// Plain-text model format:
///
///   slate-ope-model 1
///   kind elementwise|pairwise
///   cardinalities d_0 d_1 ...
///   phi k v_0 ... v_{d_k-1}              (elementwise, one line per slot)
///   pair k j v_00 v_01 ... (row-major)   (pairwise, one line per pair)
///
/// Values are written with 17 significant digits, so reading back is exact.
void write_model(std::ostream& out, const RewardModel& model);
RewardModel read_model(std::istream& in);

}  // namespace slate_ope
