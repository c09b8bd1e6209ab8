#include "slate_ope/reward_models.hpp"

#include <algorithm>
#include <array>
#include <utility>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace slate_ope {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::vector<std::size_t>> support_of(const FactoredPolicy& policy) {
  std::vector<std::vector<std::size_t>> support(policy.slot_count());
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto probs = policy.slot_distribution(k);
    for (std::size_t a = 0; a < probs.size(); ++a) {
      if (probs[a] > 0.0) support[k].push_back(a);
    }
  }
  return support;
}

std::optional<std::uint64_t> support_size(const std::vector<std::vector<std::size_t>>& support) {
  std::vector<std::size_t> sizes;
  for (const auto& s : support) sizes.push_back(s.size());
  return SlateSpec(std::move(sizes)).slate_count(kEnumerationCap);
}

double enumerate_policy_value(const RewardModel& model, const FactoredPolicy& target,
                              const std::vector<std::vector<std::size_t>>& support) {
  std::vector<std::size_t> sizes;
  for (const auto& s : support) sizes.push_back(s.size());
  const SlateSpec support_spec(std::move(sizes));
  Slate slate{std::vector<std::size_t>(support.size())};
  double value = 0.0;
  for_each_slate(support_spec, [&](const Slate& index) {
    double prob = 1.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
      slate.actions[k] = support[k][index.actions[k]];
      prob *= target.probability(k, slate.actions[k]);
    }
    value += prob * bernoulli_rate(model, slate);
  });
  return value;
}

// Smallest and largest pre-clamp rate over slates in the support.
std::pair<double, double> support_rate_bounds(const RewardModel& model,
                                              const std::vector<std::vector<std::size_t>>& support) {
  double lo = 0.0, hi = 0.0;
  auto widen = [&](auto&& values) {
    double v_lo = std::numeric_limits<double>::infinity(), v_hi = -v_lo;
    values([&](double v) {
      v_lo = std::min(v_lo, v);
      v_hi = std::max(v_hi, v);
    });
    lo += v_lo;
    hi += v_hi;
  };
  std::visit(Overloaded{[&](const ElementwiseAdditiveModel& m) {
                          for (std::size_t k = 0; k < support.size(); ++k) {
                            widen([&](auto&& emit) {
                              for (std::size_t a : support[k]) emit(m.phi(k)[a]);
                            });
                          }
                        },
                        [&](const PairwiseAdditiveModel& m) {
                          for (std::size_t k = 0; k < support.size(); ++k) {
                            for (std::size_t j = k + 1; j < support.size(); ++j) {
                              widen([&](auto&& emit) {
                                for (std::size_t a : support[k]) {
                                  for (std::size_t b : support[j]) emit(m.phi(k, j, a, b));
                                }
                              });
                            }
                          }
                        }},
             model);
  return {lo, hi};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(RewardKind kind) {
  return kind == RewardKind::elementwise ? "elementwise" : "pairwise";
}

RewardKind parse_reward_kind(const std::string& text) {
  if (text == "elementwise") return RewardKind::elementwise;
  if (text == "pairwise") return RewardKind::pairwise;
  throw ConfigError("unknown reward kind '" + text + "' (expected elementwise or pairwise)");
}

void ModelDrawConfig::validate() const {
  if (!(prior_mean > 0.0 && prior_mean < 1.0)) {
    throw ConfigError("prior mean must lie in (0, 1), got " + format_double(prior_mean));
  }
  if (!(relative_sd >= 0.0) || !std::isfinite(relative_sd)) {
    throw ConfigError("relative_sd must be non-negative, got " + format_double(relative_sd));
  }
}

ElementwiseAdditiveModel::ElementwiseAdditiveModel(SlateSpec spec, std::vector<std::vector<double>> phis)
    : spec_(std::move(spec)), phis_(std::move(phis)) {
  if (phis_.size() != spec_.slot_count()) {
    throw InvalidSpecError("elementwise model needs one phi vector per slot");
  }
  for (std::size_t k = 0; k < phis_.size(); ++k) {
    if (phis_[k].size() != spec_.cardinality(k)) {
      throw InvalidSpecError("phi vector for slot " + std::to_string(k) + " has wrong length");
    }
  }
}

PairwiseAdditiveModel::PairwiseAdditiveModel(SlateSpec spec, std::vector<std::vector<double>> pair_tables)
    : spec_(std::move(spec)), tables_(std::move(pair_tables)) {
  const std::size_t slots = spec_.slot_count();
  if (slots < 2) throw InvalidSpecError("pairwise model needs at least two slots");
  if (tables_.size() != slots * (slots - 1) / 2) {
    throw InvalidSpecError("pairwise model needs one table per slot pair");
  }
  for (std::size_t k = 0; k < slots; ++k) {
    for (std::size_t j = k + 1; j < slots; ++j) {
      if (tables_[pair_index(k, j)].size() != spec_.cardinality(k) * spec_.cardinality(j)) {
        throw InvalidSpecError("pair table (" + std::to_string(k) + "," + std::to_string(j) +
                               ") has wrong size");
      }
    }
  }
}

std::size_t PairwiseAdditiveModel::pair_index(std::size_t k, std::size_t j) const {
  const std::size_t slots = spec_.slot_count();
  if (!(k < j && j < slots)) throw InvalidSpecError("pair index requires k < j < K");
  // Pairs before row k: (K-1) + (K-2) + ... + (K-k).
  return k * (2 * slots - k - 1) / 2 + (j - k - 1);
}

const SlateSpec& model_spec(const RewardModel& model) {
  return std::visit([](const auto& m) -> const SlateSpec& { return m.spec(); }, model);
}

RewardKind model_kind(const RewardModel& model) {
  return std::holds_alternative<ElementwiseAdditiveModel>(model) ? RewardKind::elementwise
                                                                 : RewardKind::pairwise;
}

ElementwiseAdditiveModel draw_elementwise_model(const SlateSpec& spec, const ModelDrawConfig& cfg,
                                                RandomStream& rng) {
  cfg.validate();
  if (cfg.kind != RewardKind::elementwise) {
    throw ConfigError("draw_elementwise_model called with a pairwise config");
  }
  const double mean = cfg.prior_mean / static_cast<double>(spec.slot_count());
  const double sd = cfg.relative_sd * mean;
  std::vector<std::vector<double>> phis(spec.slot_count());
  for (std::size_t k = 0; k < phis.size(); ++k) {
    phis[k].resize(spec.cardinality(k));
    for (double& v : phis[k]) v = rng.normal(mean, sd);
  }
  return ElementwiseAdditiveModel(spec, std::move(phis));
}

PairwiseAdditiveModel draw_pairwise_model(const SlateSpec& spec, const ModelDrawConfig& cfg,
                                          RandomStream& rng) {
  cfg.validate();
  if (cfg.kind != RewardKind::pairwise) {
    throw ConfigError("draw_pairwise_model called with an elementwise config");
  }
  const std::size_t slots = spec.slot_count();
  if (slots < 2) throw InvalidSpecError("pairwise model needs at least two slots");
  const double pairs = static_cast<double>(slots * (slots - 1) / 2);
  const double mean = cfg.prior_mean / pairs;
  const double sd = cfg.relative_sd * mean;
  std::vector<std::vector<double>> tables;
  for (std::size_t k = 0; k < slots; ++k) {
    for (std::size_t j = k + 1; j < slots; ++j) {
      std::vector<double> table(spec.cardinality(k) * spec.cardinality(j));
      for (double& v : table) v = rng.normal(mean, sd);
      tables.push_back(std::move(table));
    }
  }
  return PairwiseAdditiveModel(spec, std::move(tables));
}

RewardModel draw_model(const SlateSpec& spec, const ModelDrawConfig& cfg, RandomStream& rng) {
  if (cfg.kind == RewardKind::elementwise) return draw_elementwise_model(spec, cfg, rng);
  return draw_pairwise_model(spec, cfg, rng);
}

double bernoulli_rate(const ElementwiseAdditiveModel& model, const Slate& slate) {
  validate_slate(model.spec(), slate);
  return clamp_rate(model.raw_rate(slate.actions));
}

double bernoulli_rate(const PairwiseAdditiveModel& model, const Slate& slate) {
  validate_slate(model.spec(), slate);
  return clamp_rate(model.raw_rate(slate.actions));
}

double bernoulli_rate(const RewardModel& model, const Slate& slate) {
  return std::visit([&](const auto& m) { return bernoulli_rate(m, slate); }, model);
}

double true_policy_value(const RewardModel& model, const FactoredPolicy& target) {
  if (model_spec(model) != target.spec()) {
    throw InvalidSpecError("model and target policy have different slate specs");
  }
  if (auto slate = target.deterministic_slate()) return bernoulli_rate(model, *slate);

  const auto support = support_of(target);
  if (support_size(support)) return enumerate_policy_value(model, target, support);

  // Too many slates: fall back on additivity, which is exact only when no
  // slate in the support leaves [0, 1] before clamping.
  const auto [lo, hi] = support_rate_bounds(model, support);
  if (lo < 0.0 || hi > 1.0) {
    throw CapacityError("target support of " + model_spec(model).to_string() +
                        " exceeds the enumeration cap and some rates may be clamped");
  }
  return additive_policy_value(model, target);
}

double additive_policy_value(const RewardModel& model, const FactoredPolicy& target) {
  if (model_spec(model) != target.spec()) {
    throw InvalidSpecError("model and target policy have different slate specs");
  }
  return std::visit(
      Overloaded{[&](const ElementwiseAdditiveModel& m) {
                   double value = 0.0;
                   for (std::size_t k = 0; k < target.slot_count(); ++k) {
                     const auto probs = target.slot_distribution(k);
                     for (std::size_t a = 0; a < probs.size(); ++a) value += probs[a] * m.phi(k)[a];
                   }
                   return value;
                 },
                 [&](const PairwiseAdditiveModel& m) {
                   double value = 0.0;
                   for (std::size_t k = 0; k < target.slot_count(); ++k) {
                     for (std::size_t j = k + 1; j < target.slot_count(); ++j) {
                       const auto pk = target.slot_distribution(k);
                       const auto pj = target.slot_distribution(j);
                       for (std::size_t a = 0; a < pk.size(); ++a) {
                         if (pk[a] == 0.0) continue;
                         for (std::size_t b = 0; b < pj.size(); ++b) value += pk[a] * pj[b] * m.phi(k, j, a, b);
                       }
                     }
                   }
                   return value;
                 }},
      model);
}

void write_model(std::ostream& out, const RewardModel& model) {
  const SlateSpec& spec = model_spec(model);
  out << "slate-ope-model 1\n";
  out << "kind " << to_string(model_kind(model)) << '\n';
  out << "cardinalities";
  for (std::size_t d : spec.cardinalities()) out << ' ' << d;
  out << '\n';
  std::visit(Overloaded{[&](const ElementwiseAdditiveModel& m) {
                          for (std::size_t k = 0; k < spec.slot_count(); ++k) {
                            out << "phi " << k;
                            for (double v : m.phi(k)) out << ' ' << format_double(v);
                            out << '\n';
                          }
                        },
                        [&](const PairwiseAdditiveModel& m) {
                          for (std::size_t k = 0; k < spec.slot_count(); ++k) {
                            for (std::size_t j = k + 1; j < spec.slot_count(); ++j) {
                              out << "pair " << k << ' ' << j;
                              for (double v : m.table(k, j)) out << ' ' << format_double(v);
                              out << '\n';
                            }
                          }
                        }},
             model);
}

RewardModel read_model(std::istream& in) {
  auto next_line = [&](const char* what) {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.front() != '#') return line;
    }
    throw ConfigError(std::string("model file ended before ") + what);
  };
  auto read_values = [](std::istringstream& is, std::size_t count, const std::string& where) {
    std::vector<double> values(count);
    for (double& v : values) {
      if (!(is >> v)) throw ConfigError("model file: too few values in " + where);
    }
    std::string extra;
    if (is >> extra) throw ConfigError("model file: too many values in " + where);
    return values;
  };

  if (next_line("header") != "slate-ope-model 1") throw ConfigError("model file: bad header");
  std::istringstream kind_line(next_line("kind"));
  std::string tag, kind_text;
  kind_line >> tag >> kind_text;
  if (tag != "kind") throw ConfigError("model file: expected 'kind'");
  const RewardKind kind = parse_reward_kind(kind_text);

  std::istringstream card_line(next_line("cardinalities"));
  card_line >> tag;
  if (tag != "cardinalities") throw ConfigError("model file: expected 'cardinalities'");
  std::vector<std::size_t> cards;
  for (std::size_t d; card_line >> d;) cards.push_back(d);
  const SlateSpec spec(cards);

  if (kind == RewardKind::elementwise) {
    std::vector<std::vector<double>> phis;
    for (std::size_t k = 0; k < spec.slot_count(); ++k) {
      std::istringstream line(next_line("phi rows"));
      std::size_t slot = 0;
      if (!(line >> tag >> slot) || tag != "phi" || slot != k) {
        throw ConfigError("model file: expected 'phi " + std::to_string(k) + "'");
      }
      phis.push_back(read_values(line, spec.cardinality(k), "phi " + std::to_string(k)));
    }
    return ElementwiseAdditiveModel(spec, std::move(phis));
  }
  std::vector<std::vector<double>> tables;
  for (std::size_t k = 0; k < spec.slot_count(); ++k) {
    for (std::size_t j = k + 1; j < spec.slot_count(); ++j) {
      std::istringstream line(next_line("pair rows"));
      std::size_t a = 0, b = 0;
      const std::string where = "pair " + std::to_string(k) + " " + std::to_string(j);
      if (!(line >> tag >> a >> b) || tag != "pair" || a != k || b != j) {
        throw ConfigError("model file: expected '" + where + "'");
      }
      tables.push_back(read_values(line, spec.cardinality(k) * spec.cardinality(j), where));
    }
  }
  return PairwiseAdditiveModel(spec, std::move(tables));
}

}  // namespace slate_ope
