#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slate_ope/errors.hpp"
#include "slate_ope/rng.hpp"

namespace slate_ope {

/// Brute-force paths (exact oracles, enumerated policy values) refuse slate
/// spaces larger than this.
inline constexpr std::uint64_t kEnumerationCap = 1'000'000;

/// Slate geometry: K slots, slot k offering d_k actions.
class SlateSpec {
 public:
  explicit SlateSpec(std::vector<std::size_t> cardinalities);

  std::size_t slot_count() const { return cardinalities_.size(); }
  std::size_t cardinality(std::size_t slot) const { return cardinalities_.at(slot); }
  std::span<const std::size_t> cardinalities() const { return cardinalities_; }

  /// Total number of slates, or nullopt when it exceeds `cap`.
  std::optional<std::uint64_t> slate_count(std::uint64_t cap = kEnumerationCap) const;

  /// Dash-joined cardinalities, e.g. "2-33-66-100".
  std::string to_string() const;

  bool operator==(const SlateSpec&) const = default;

 private:
  std::vector<std::size_t> cardinalities_;
};

struct Slate {
  std::vector<std::size_t> actions;

  bool operator==(const Slate&) const = default;
};

/// Throws InvalidSlateError unless `slate` has one in-range action per slot.
void validate_slate(const SlateSpec& spec, const Slate& slate);

/// Product of independent per-slot categoricals. Immutable once built.
class FactoredPolicy {
 public:
  /// Each vector must be non-negative and sum to 1 within 1e-12; nothing is
  /// renormalized.
  FactoredPolicy(SlateSpec spec, std::vector<std::vector<double>> slot_dists);

  const SlateSpec& spec() const { return spec_; }
  std::size_t slot_count() const { return spec_.slot_count(); }
  std::span<const double> slot_distribution(std::size_t slot) const { return slots_.at(slot).probs; }
  double probability(std::size_t slot, std::size_t action) const { return slots_[slot].probs[action]; }

  /// True when every action of the slot has the same probability. Uniform
  /// slots carry their cardinality so ratios against them stay exact.
  bool slot_is_uniform(std::size_t slot) const { return slots_.at(slot).uniform; }

  /// Draws one action for `slot`.
  std::size_t sample_action(std::size_t slot, RandomStream& rng) const {
    const Slot& s = slots_[slot];
    if (s.uniform) return static_cast<std::size_t>(rng.below(s.probs.size()));
    const double u = rng.uniform();
    return static_cast<std::size_t>(std::upper_bound(s.cdf.begin(), s.cdf.end(), u) - s.cdf.begin());
  }

  /// The slate carrying all the mass, if the policy is deterministic.
  std::optional<Slate> deterministic_slate() const;

 private:
  struct Slot {
    std::vector<double> probs;
    std::vector<double> cdf;
    bool uniform = false;
  };

  SlateSpec spec_;
  std::vector<Slot> slots_;
};

FactoredPolicy make_uniform_policy(const SlateSpec& spec);

/// One-hot in every slot at `slate`. Throws InvalidSlateError when out of range.
FactoredPolicy make_deterministic_policy(const SlateSpec& spec, const Slate& slate);

Slate sample_slate(const FactoredPolicy& policy, RandomStream& rng);

/// Fills `out` (length K) without allocating.
inline void sample_slate_into(const FactoredPolicy& policy, RandomStream& rng, std::span<std::size_t> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = policy.sample_action(k, rng);
}

double slate_probability(const FactoredPolicy& policy, const Slate& slate);

/// Y_k = pi_k(a^k) / mu_k(a^k) at the given slate. Returns 0 when both
/// probabilities are 0; throws AbsoluteContinuityError when only mu is 0.
double slot_importance_weight(const FactoredPolicy& target, const FactoredPolicy& logging,
                              const Slate& slate, std::size_t slot);

/// Slot-level ratio tables Y_k(a) for every slot and action, validated for
/// absolute continuity once up front.
class ImportanceTable {
 public:
  ImportanceTable(const FactoredPolicy& target, const FactoredPolicy& logging);

  std::size_t slot_count() const { return ratios_.size(); }
  double weight(std::size_t slot, std::size_t action) const { return ratios_[slot][action]; }
  std::span<const double> slot_weights(std::size_t slot) const { return ratios_[slot]; }

 private:
  std::vector<std::vector<double>> ratios_;
};

struct DivergenceSummary {
  std::vector<double> alphas;
  double arithmetic_mean = 0.0;
  // Undefined when any alpha is zero.
  std::optional<double> harmonic_mean;

  std::size_t slot_count() const { return alphas.size(); }
};

/// Builds the summary from a list of alphas (used directly by tests and the
/// closed-form risk routines).
DivergenceSummary summarize_divergences(std::vector<double> alphas);

/// alpha_k = sum_a pi_k(a)^2 / mu_k(a) - 1, by exact summation over each slot.
DivergenceSummary compute_divergences(const FactoredPolicy& target, const FactoredPolicy& logging);

/// Visits every slate of `spec` in lexicographic order. Throws CapacityError
/// when the slate space exceeds `cap`.
template <class Visitor>
void for_each_slate(const SlateSpec& spec, Visitor&& visit, std::uint64_t cap = kEnumerationCap) {
  if (!spec.slate_count(cap)) {
    throw CapacityError("slate space " + spec.to_string() + " exceeds the enumeration cap of " +
                        std::to_string(cap));
  }
  Slate slate{std::vector<std::size_t>(spec.slot_count(), 0)};
  while (true) {
    visit(static_cast<const Slate&>(slate));
    std::size_t k = spec.slot_count();
    while (k > 0) {
      --k;
      if (++slate.actions[k] < spec.cardinality(k)) break;
      slate.actions[k] = 0;
      if (k == 0) return;
    }
  }
}

}  // namespace slate_ope
