#include "slate_ope/slate_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slate_ope {
namespace {

constexpr double kProbabilityTolerance = 1e-12;

// pi/mu with the both-zero convention. Uniform logging slots use pi * d,
// which is exact where 1 / (1 / d) is not.
double slot_ratio(const FactoredPolicy& target, const FactoredPolicy& logging, std::size_t slot,
                  std::size_t action) {
  const double p = target.probability(slot, action);
  const double q = logging.probability(slot, action);
  if (q == 0.0) {
    if (p == 0.0) return 0.0;
    throw AbsoluteContinuityError("target plays action " + std::to_string(action) + " in slot " +
                                  std::to_string(slot) + " which the logging policy never plays");
  }
  if (p == q) return 1.0;
  if (logging.slot_is_uniform(slot)) {
    return p * static_cast<double>(logging.spec().cardinality(slot));
  }
  return p / q;
}

void check_same_spec(const FactoredPolicy& target, const FactoredPolicy& logging) {
  if (target.spec() != logging.spec()) {
    throw InvalidSpecError("target spec " + target.spec().to_string() +
                           " differs from logging spec " + logging.spec().to_string());
  }
}

}  // namespace

SlateSpec::SlateSpec(std::vector<std::size_t> cardinalities) : cardinalities_(std::move(cardinalities)) {
  if (cardinalities_.empty()) throw InvalidSpecError("a slate needs at least one slot");
  for (std::size_t k = 0; k < cardinalities_.size(); ++k) {
    if (cardinalities_[k] == 0) {
      throw InvalidSpecError("slot " + std::to_string(k) + " has no actions");
    }
  }
}

std::optional<std::uint64_t> SlateSpec::slate_count(std::uint64_t cap) const {
  std::uint64_t total = 1;
  for (std::size_t d : cardinalities_) {
    if (total > cap / d) return std::nullopt;
    total *= d;
  }
  if (total > cap) return std::nullopt;
  return total;
}

std::string SlateSpec::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < cardinalities_.size(); ++k) {
    if (k) out += '-';
    out += std::to_string(cardinalities_[k]);
  }
  return out;
}

void validate_slate(const SlateSpec& spec, const Slate& slate) {
  if (slate.actions.size() != spec.slot_count()) {
    throw InvalidSlateError("slate has " + std::to_string(slate.actions.size()) + " slots, spec has " +
                            std::to_string(spec.slot_count()));
  }
  for (std::size_t k = 0; k < slate.actions.size(); ++k) {
    if (slate.actions[k] >= spec.cardinality(k)) {
      throw InvalidSlateError("action " + std::to_string(slate.actions[k]) + " out of range for slot " +
                              std::to_string(k) + " with " + std::to_string(spec.cardinality(k)) +
                              " actions");
    }
  }
}

FactoredPolicy::FactoredPolicy(SlateSpec spec, std::vector<std::vector<double>> slot_dists)
    : spec_(std::move(spec)) {
  if (slot_dists.size() != spec_.slot_count()) {
    throw InvalidPolicyError("expected " + std::to_string(spec_.slot_count()) +
                             " slot distributions, got " + std::to_string(slot_dists.size()));
  }
  slots_.reserve(slot_dists.size());
  for (std::size_t k = 0; k < slot_dists.size(); ++k) {
    auto& probs = slot_dists[k];
    if (probs.size() != spec_.cardinality(k)) {
      throw InvalidPolicyError("slot " + std::to_string(k) + " distribution has " +
                               std::to_string(probs.size()) + " entries, expected " +
                               std::to_string(spec_.cardinality(k)));
    }
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InvalidPolicyError("slot " + std::to_string(k) + " has a negative or non-finite probability");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw InvalidPolicyError("slot " + std::to_string(k) + " probabilities sum to " +
                               std::to_string(total));
    }
    Slot slot;
    slot.uniform = std::all_of(probs.begin(), probs.end(), [&](double p) { return p == probs.front(); });
    slot.cdf.resize(probs.size());
    std::partial_sum(probs.begin(), probs.end(), slot.cdf.begin());
    // Everything from the last positive-mass action on absorbs rounding slack.
    const auto last = std::find_if(probs.rbegin(), probs.rend(), [](double p) { return p > 0.0; });
    const auto tail = static_cast<std::size_t>(probs.rend() - last) - 1;
    std::fill(slot.cdf.begin() + static_cast<std::ptrdiff_t>(tail), slot.cdf.end(),
              std::numeric_limits<double>::infinity());
    slot.probs = std::move(probs);
    slots_.push_back(std::move(slot));
  }
}

std::optional<Slate> FactoredPolicy::deterministic_slate() const {
  Slate slate;
  slate.actions.reserve(slots_.size());
  for (const Slot& s : slots_) {
    auto it = std::find(s.probs.begin(), s.probs.end(), 1.0);
    if (it == s.probs.end()) return std::nullopt;
    slate.actions.push_back(static_cast<std::size_t>(it - s.probs.begin()));
  }
  return slate;
}

FactoredPolicy make_uniform_policy(const SlateSpec& spec) {
  std::vector<std::vector<double>> dists;
  dists.reserve(spec.slot_count());
  for (std::size_t d : spec.cardinalities()) {
    dists.emplace_back(d, 1.0 / static_cast<double>(d));
  }
  return FactoredPolicy(spec, std::move(dists));
}

FactoredPolicy make_deterministic_policy(const SlateSpec& spec, const Slate& slate) {
  validate_slate(spec, slate);
  std::vector<std::vector<double>> dists;
  dists.reserve(spec.slot_count());
  for (std::size_t k = 0; k < spec.slot_count(); ++k) {
    std::vector<double> probs(spec.cardinality(k), 0.0);
    probs[slate.actions[k]] = 1.0;
    dists.push_back(std::move(probs));
  }
  return FactoredPolicy(spec, std::move(dists));
}

Slate sample_slate(const FactoredPolicy& policy, RandomStream& rng) {
  Slate slate{std::vector<std::size_t>(policy.slot_count())};
  sample_slate_into(policy, rng, slate.actions);
  return slate;
}

double slate_probability(const FactoredPolicy& policy, const Slate& slate) {
  validate_slate(policy.spec(), slate);
  double p = 1.0;
  for (std::size_t k = 0; k < slate.actions.size(); ++k) p *= policy.probability(k, slate.actions[k]);
  return p;
}

double slot_importance_weight(const FactoredPolicy& target, const FactoredPolicy& logging,
                              const Slate& slate, std::size_t slot) {
  check_same_spec(target, logging);
  validate_slate(target.spec(), slate);
  if (slot >= slate.actions.size()) {
    throw InvalidSlateError("slot index " + std::to_string(slot) + " out of range");
  }
  return slot_ratio(target, logging, slot, slate.actions[slot]);
}

ImportanceTable::ImportanceTable(const FactoredPolicy& target, const FactoredPolicy& logging) {
  check_same_spec(target, logging);
  ratios_.resize(target.slot_count());
  for (std::size_t k = 0; k < ratios_.size(); ++k) {
    const std::size_t d = target.spec().cardinality(k);
    ratios_[k].resize(d);
    for (std::size_t a = 0; a < d; ++a) ratios_[k][a] = slot_ratio(target, logging, k, a);
  }
}

DivergenceSummary summarize_divergences(std::vector<double> alphas) {
  DivergenceSummary out;
  out.alphas = std::move(alphas);
  if (out.alphas.empty()) return out;
  const double k = static_cast<double>(out.alphas.size());
  out.arithmetic_mean = std::accumulate(out.alphas.begin(), out.alphas.end(), 0.0) / k;
  const bool positive = std::all_of(out.alphas.begin(), out.alphas.end(), [](double a) { return a > 0.0; });
  if (!positive) return out;
  const bool all_equal = std::all_of(out.alphas.begin(), out.alphas.end(),
                                     [&](double a) { return a == out.alphas.front(); });
  if (all_equal) {
    // Exact M == H, so the control variate vanishes identically.
    out.arithmetic_mean = out.alphas.front();
    out.harmonic_mean = out.alphas.front();
    return out;
  }
  double inverse_sum = 0.0;
  for (double a : out.alphas) inverse_sum += 1.0 / a;
  out.harmonic_mean = k / inverse_sum;
  return out;
}

DivergenceSummary compute_divergences(const FactoredPolicy& target, const FactoredPolicy& logging) {
  check_same_spec(target, logging);
  std::vector<double> alphas(target.slot_count(), 0.0);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    // sum_a pi(a) (Y(a) - 1) == E_pi[Y_k] - 1, but is exactly 0 when pi == mu.
    double alpha = 0.0;
    for (std::size_t a = 0; a < target.spec().cardinality(k); ++a) {
      const double p = target.probability(k, a);
      const double y = slot_ratio(target, logging, k, a);
      if (p != 0.0) alpha += p * (y - 1.0);
    }
    alphas[k] = std::max(alpha, 0.0);
  }
  return summarize_divergences(std::move(alphas));
}

}  // namespace slate_ope
