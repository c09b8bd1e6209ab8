// Acceptance gate. Usage: acceptance <path-to-slate_ope_cli> [A1 A2 ...]
// Prints one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "slate_ope/cli_reporting.hpp"
#include "slate_ope/risk_oracle.hpp"
#include "slate_ope/sim_harness.hpp"

using namespace slate_ope;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

FactoredPolicy det_at_zero(const SlateSpec& spec) {
  return make_deterministic_policy(spec, Slate{std::vector<std::size_t>(spec.slot_count(), 0)});
}

// Strictly positive, properly normalized random distribution.
std::vector<double> random_distribution(std::size_t d, RandomStream& rng) {
  std::vector<double> p(d);
  double total = 0.0;
  for (auto& x : p) total += (x = 0.05 + rng.uniform());
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < d; ++i) rest -= (p[i] /= total);
  p.back() = rest;
  return p;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double se_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1.0) / v.size());
}

std::vector<double> deltas(const std::vector<TensorResult>& results) {
  std::vector<double> out;
  for (const auto& r : results) out.push_back(r.delta_nmse);
  return out;
}

double max_clamp(const std::vector<TensorResult>& results) {
  double m = 0.0;
  for (const auto& r : results) m = std::max(m, r.clamp_fraction);
  return m;
}

ExperimentConfig fixed_config(std::vector<std::size_t> d, double p_bar, double p_prime, std::uint64_t n,
                              std::uint64_t s, std::uint64_t t, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.cardinality_rule = CardinalityRule::fixed;
  cfg.cardinalities = std::move(d);
  cfg.slot_count = cfg.cardinalities.size();
  cfg.true_prior_mean = p_bar;
  cfg.assumed_prior_mean = p_prime;
  cfg.sample_size = n;
  cfg.replications = s;
  cfg.tensor_count = t;
  cfg.seed = seed;
  cfg.threads = worker_threads();
  return cfg;
}

Verdict a1_zero_sum() {
  RandomStream rng(derive_seed(101, StreamPurpose::auxiliary));
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> alphas(1 + rng.below(10));
    for (auto& a : alphas) a = 1000.0 * (1.0 - rng.uniform());  // (0, 1000]
    double prior = 0.0;
    while (prior <= 0.0) prior = rng.uniform();
    const auto w = optimal_cv_weights(summarize_divergences(alphas), prior);
    worst = std::max(worst, std::abs(std::accumulate(w.weights.begin(), w.weights.end(), 0.0)));
  }
  return {worst <= 1e-12, "max |sum w| over 1000 settings = " + fmt(worst)};
}

Verdict a2_divergence_formula() {
  std::size_t mismatches = 0;
  for (std::size_t d = 2; d <= 1000; ++d) {
    const SlateSpec spec({d});
    const auto divs = compute_divergences(det_at_zero(spec), make_uniform_policy(spec));
    mismatches += divs.alphas[0] != static_cast<double>(d - 1);
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 999 cardinalities differ from d - 1"};
}

Verdict a3_main_result() {
  const auto cfg = fixed_config({2, 4}, 0.5, 0.5, 10000, 2000, 50, 2024);
  const auto results = run_tensors(cfg);
  const auto d = deltas(results);
  const double mean = mean_of(d), se = se_of(d);
  const double predicted = results.front().predicted_improvement;
  const double tol = std::max(0.15 * predicted, 4 * se);
  return {std::abs(predicted - 0.25) < 1e-15 && std::abs(mean - predicted) <= tol,
          "mean delta_nmse " + fmt(mean) + " (SE " + fmt(se) + ") vs predicted " + fmt(predicted) +
              ", tolerance " + fmt(tol) + ", max clamp fraction " + fmt(max_clamp(results))};
}

Verdict a4_variance_oracle() {
  const SlateSpec spec({2, 3});
  // explicit rate table p(a0, a1)
  const RewardModel model = PairwiseAdditiveModel(spec, {{0.20, 0.55, 0.30, 0.65, 0.10, 0.45}});
  const auto mu = make_uniform_policy(spec);
  const auto pi = det_at_zero(spec);
  const auto w = optimal_cv_weights(compute_divergences(pi, mu), 0.4);
  const NamedEstimator estimators[] = {
      {"PI", AdditiveEstimatorParams::pseudoinverse(2)},
      {"PI++", AdditiveEstimatorParams::with_control_variate(w.weights)},
  };
  const auto comparisons = compare_with_oracle(model, mu, pi, estimators, 10000, 2000,
                                               derive_seed(404, StreamPurpose::auxiliary), 0, worker_threads());
  bool pass = true;
  std::string detail;
  for (const auto& c : comparisons) {
    pass = pass && std::abs(c.variance_z) <= 4.0;
    detail += c.estimator + ": exact " + fmt(c.exact_variance) + " empirical " + fmt(c.empirical_variance) +
              " z " + fmt(c.variance_z, 3) + "; ";
  }
  return {pass, detail};
}

Verdict a5_control_variate_moments() {
  RandomStream rng(derive_seed(505, StreamPurpose::auxiliary));
  double worst_z = 0.0;
  for (int setting = 0; setting < 20; ++setting) {
    const std::size_t k = 2 + rng.below(3);
    std::vector<std::size_t> cards(k);
    for (auto& d : cards) d = 2 + rng.below(12);
    const SlateSpec spec(cards);
    std::vector<std::vector<double>> mu_dists, pi_dists;
    for (std::size_t d : cards) {
      mu_dists.push_back(random_distribution(d, rng));
      pi_dists.push_back(random_distribution(d, rng));
    }
    // alternate uniform logging with a deterministic target and general policies
    const FactoredPolicy mu = setting % 2 ? FactoredPolicy(spec, mu_dists) : make_uniform_policy(spec);
    const FactoredPolicy pi = setting % 2 ? FactoredPolicy(spec, pi_dists) : det_at_zero(spec);
    const auto alphas = compute_divergences(pi, mu).alphas;
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& x : w) sum += (x = rng.uniform() - 0.5);
    for (auto& x : w) x -= sum / k;
    double f2_exact = 0.0, gf_exact = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      f2_exact += w[j] * w[j] * alphas[j];
      gf_exact += w[j] * alphas[j];
    }
    const ImportanceTable table(pi, mu);
    const int n = 100000;
    double s_f2 = 0, s_f2sq = 0, s_gf = 0, s_gfsq = 0;
    std::vector<std::size_t> a(k);
    for (int i = 0; i < n; ++i) {
      sample_slate_into(mu, rng, a);
      double f = 0.0, g = 1.0 - static_cast<double>(k);
      for (std::size_t j = 0; j < k; ++j) {
        const double y = table.weight(j, a[j]);
        f += w[j] * y;
        g += y;
      }
      s_f2 += f * f;
      s_f2sq += f * f * f * f;
      s_gf += g * f;
      s_gfsq += g * f * g * f;
    }
    const double m_f2 = s_f2 / n, m_gf = s_gf / n;
    const double se_f2 = std::sqrt((s_f2sq / n - m_f2 * m_f2) / (n - 1.0));
    const double se_gf = std::sqrt((s_gfsq / n - m_gf * m_gf) / (n - 1.0));
    worst_z = std::max({worst_z, std::abs(m_f2 - f2_exact) / se_f2, std::abs(m_gf - gf_exact) / se_gf});
  }
  return {worst_z <= 4.0, "largest |z| over 20 settings for E[F^2] and E[GF] = " + fmt(worst_z, 3)};
}

Verdict a6_unbiasedness() {
  const auto cfg = fixed_config({3, 5}, 0.25, 0.25, 10000, 1000, 1, 606);
  const auto result = run_tensor(cfg, 0);
  bool pass = true;
  std::string detail;
  for (const auto name : {kPi, kPiPlusPlus}) {
    const auto& s = result.summary(name);
    const double se = std::sqrt(s.variance * cfg.replications / (cfg.replications - 1.0) / cfg.replications);
    pass = pass && std::abs(s.bias) <= 4 * se;
    detail += std::string(name) + ": bias " + fmt(s.bias) + " (SE " + fmt(se) + "); ";
  }
  return {pass, detail + "v_pi " + fmt(result.v_pi)};
}

Verdict a7_misspecification() {
  const auto cfg = fixed_config({2, 10}, 0.25, 0.25, 10000, 2000, 50, 707);
  const std::vector<double> truth{0.25};
  const std::vector<double> assumed{0.25, 0.5, 0.7};
  const auto cells = experiment_prior_grid(cfg, truth, assumed);
  std::vector<double> z;
  std::string detail;
  for (const auto& cell : cells) {
    const auto d = deltas(cell.tensors);
    const double mean = mean_of(d), se = se_of(d);
    z.push_back(mean / se);
    detail += "P'=" + fmt(cell.assumed_prior_mean) + ": " + fmt(mean) + " (SE " + fmt(se) + ", predicted " +
              fmt(cell.predicted_improvement) + "); ";
  }
  const bool pass = z[0] > 4.0 && std::abs(z[1]) <= 4.0 && z[2] < -4.0;
  return {pass, detail};
}

Verdict a8_equal_cardinality() {
  bool pass = true;
  std::string detail;
  for (const auto& [p_bar, p_prime] : {std::pair{0.25, 0.25}, std::pair{0.1, 0.45}, std::pair{0.4, 0.05}}) {
    const auto cfg = fixed_config({10, 10}, p_bar, p_prime, 10000, 300, 5, 808);
    const auto results = run_tensors(cfg);
    const auto d = deltas(results);
    const double mean = mean_of(d), se = se_of(d);
    bool exact_zero = true;
    for (const auto& r : results) exact_zero = exact_zero && r.predicted_improvement == 0.0;
    pass = pass && exact_zero && std::abs(mean) <= 4 * se + 0.0;
    detail += "(" + fmt(p_bar) + "," + fmt(p_prime) + "): predicted " + (exact_zero ? "0" : "nonzero") +
              ", mean delta " + fmt(mean) + "; ";
  }
  return {pass, detail};
}

Verdict a9_linear_in_k() {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::slot_sweep;
  cfg.sample_size = 100000;
  cfg.tensor_count = 50;
  cfg.replications = 500;
  cfg.seed = 909;
  cfg.threads = worker_threads();
  const std::vector<std::size_t> ks{2, 3, 4, 5};
  const auto entries = experiment_slot_sweep(cfg, ks, CardinalityRule::even_division);
  std::vector<double> x, y;
  std::string detail;
  for (const auto& e : entries) {
    x.push_back(e.stats.mean_predicted_improvement);
    y.push_back(e.stats.mean_delta_nmse);
    detail += "K=" + std::to_string(e.slot_count) + ": " + fmt(e.stats.mean_delta_nmse) + " vs " +
              fmt(e.stats.mean_predicted_improvement) + "; ";
  }
  const auto fit = fit_line(x, y);
  return {fit.r_squared >= 0.8, detail + "R^2 " + fmt(fit.r_squared)};
}

Verdict a10_qp_optimality() {
  RandomStream rng(derive_seed(1010, StreamPurpose::auxiliary));
  std::size_t violations = 0;
  double smallest_gap = INFINITY;
  for (int setting = 0; setting < 100; ++setting) {
    std::vector<double> alphas(2 + rng.below(9));
    for (auto& a : alphas) a = 1000.0 * (1.0 - rng.uniform());
    const double prior = 0.01 + 0.98 * rng.uniform();
    const auto w = optimal_cv_weights(summarize_divergences(alphas), prior).weights;
    const double best = control_variate_objective(alphas, w, prior);
    for (int p = 0; p < 1000; ++p) {
      const double scale = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
      std::vector<double> eps(w.size());
      double sum = 0.0;
      for (auto& e : eps) sum += (e = scale * (rng.uniform() - 0.5));
      std::vector<double> moved(w.size());
      for (std::size_t k = 0; k < w.size(); ++k) moved[k] = w[k] + eps[k] - sum / w.size();
      const double gap = control_variate_objective(alphas, moved, prior) - best;
      smallest_gap = std::min(smallest_gap, gap);
      // rounding noise in the objective itself
      violations += gap < -1e-12 * (1.0 + std::abs(best));
    }
  }
  return {violations == 0,
          std::to_string(violations) + " of 100000 perturbations beat w*; smallest gap " + fmt(smallest_gap)};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Verdict a11_reproducibility(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  const auto root = std::filesystem::temp_directory_path() / "slate_ope_acceptance_a11";
  std::filesystem::remove_all(root);
  std::string detail;
  bool pass = true;
  for (const char* run : {"first", "second"}) {
    const std::string command = "\"" + cli +
                                "\" slot-sweep --seed 1111 --n 5000 --t 4 --s 30 --k-values 2,3,4 "
                                "--deterministic-reduce --quiet --out-dir \"" +
                                (root / run).string() + "\" > /dev/null";
    if (std::system(command.c_str()) != 0) return {false, std::string("CLI run failed: ") + command};
  }
  for (const char* file : {"results.csv", "slot_sweep.csv"}) {
    const std::string a = read_file(root / "first" / file);
    const std::string b = read_file(root / "second" / file);
    const bool same = !a.empty() && a == b;
    pass = pass && same;
    detail += std::string(file) + (same ? " identical (" + std::to_string(a.size()) + " bytes); " : " differs; ");
  }
  std::filesystem::remove_all(root);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::set<std::string> only;
  for (int i = 2; i < argc; ++i) only.insert(argv[i]);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"A1", a1_zero_sum},
      {"A2", a2_divergence_formula},
      {"A3", a3_main_result},
      {"A4", a4_variance_oracle},
      {"A5", a5_control_variate_moments},
      {"A6", a6_unbiasedness},
      {"A7", a7_misspecification},
      {"A8", a8_equal_cardinality},
      {"A9", a9_linear_in_k},
      {"A10", a10_qp_optimality},
      {"A11", [&] { return a11_reproducibility(cli); }},
  };

  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && !only.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !v.pass;
    std::cout << id << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << " [" << fmt(seconds, 3) << " s]"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
