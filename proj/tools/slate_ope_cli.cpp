#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slate_ope/cli_reporting.hpp"

namespace {

using namespace slate_ope;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Outcome {
  std::vector<TensorResult> results;
  std::vector<NamedTable> tables;
  bool checks_passed = true;
};

template <class Cells>
void collect_tensors(const Cells& cells, std::vector<TensorResult>& out) {
  for (const auto& cell : cells) out.insert(out.end(), cell.tensors.begin(), cell.tensors.end());
}

Outcome run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  Outcome outcome;
  switch (cfg.experiment) {
    case ExperimentKind::prior_grid: {
      const auto cells = experiment_prior_grid(cfg, cfg.true_prior_grid, cfg.assumed_prior_grid, progress);
      collect_tensors(cells, outcome.results);
      outcome.tables.push_back({"prior_grid.csv", format_prior_grid_csv(cells)});
      break;
    }
    case ExperimentKind::cardinality_grid: {
      const auto cells = experiment_cardinality_grid(cfg, cfg.cardinality_choices, progress);
      collect_tensors(cells, outcome.results);
      outcome.tables.push_back({"cardinality_grid.csv", format_cardinality_grid_csv(cells)});
      break;
    }
    case ExperimentKind::slot_sweep:
    case ExperimentKind::regression: {
      const auto entries = experiment_slot_sweep(cfg, cfg.k_values, cfg.cardinality_rule, progress);
      collect_tensors(entries, outcome.results);
      outcome.tables.push_back({"slot_sweep.csv", format_slot_sweep_csv(entries)});
      if (cfg.experiment == ExperimentKind::regression) {
        const auto fits = fit_improvement_regression(outcome.results);
        outcome.tables.push_back({"regression.csv", format_regression_csv(fits)});
      }
      break;
    }
    case ExperimentKind::oracle_check: {
      const auto checks = experiment_oracle_check(cfg);
      for (const auto& check : checks) {
        for (const auto& c : check.comparisons) {
          const bool ok = c.within(4.0);
          outcome.checks_passed = outcome.checks_passed && ok;
          std::cerr << "oracle tensor " << check.tensor_index << ' ' << c.estimator << ": variance exact "
                    << c.exact_variance << " empirical " << c.empirical_variance << " (z " << c.variance_z
                    << "), bias z " << c.bias_z << (ok ? "" : "  OUTSIDE 4 SE") << '\n';
        }
      }
      outcome.tables.push_back({"oracle_check.csv", format_oracle_check_csv(checks)});
      outcome.results = run_tensors(cfg, progress);
      break;
    }
  }
  return outcome;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation of slate bandits: IPS, PI and PI++ simulation experiments"};
  app.set_version_flag("--version", std::string(kVersion));

  std::string command;
  std::optional<std::string> experiment, config_path, seed, n, t, s, k, d, p_bar, p_prime, reward_kind, threads,
      relative_sd, cardinality_rule, p_bar_grid, p_prime_grid, cardinality_choices, k_values;
  bool deterministic_reduce = false;
  bool quiet = false;
  std::string out_dir = "results";

  app.add_option("command", command,
                 "prior-grid, cardinality-grid, slot-sweep, regression or oracle-check (same as --experiment)");
  app.add_option("--experiment", experiment, "experiment kind");
  app.add_option("--config", config_path, "key = value config file; flags override it")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "root seed");
  app.add_option("--n", n, "samples per dataset (N)");
  app.add_option("--t", t, "tensors (T)");
  app.add_option("--s", s, "replications per tensor (S)");
  app.add_option("--k", k, "slot count for generated cardinalities");
  app.add_option("--d", d, "dash-joined slot cardinalities, e.g. 3-50-800");
  app.add_option("--p-bar", p_bar, "true prior mean");
  app.add_option("--p-prime", p_prime, "assumed prior mean for PI++");
  app.add_option("--reward-kind", reward_kind, "elementwise or pairwise");
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--deterministic-reduce", deterministic_reduce, "reduce replications in index order");
  app.add_option("--relative-sd", relative_sd, "relative standard deviation of reward components");
  app.add_option("--cardinality-rule", cardinality_rule, "fixed, even_division or uniform_random");
  app.add_option("--p-bar-grid", p_bar_grid, "comma-separated true prior means for prior-grid");
  app.add_option("--p-prime-grid", p_prime_grid, "comma-separated assumed prior means for prior-grid");
  app.add_option("--cardinality-choices", cardinality_choices, "comma-separated cardinalities for cardinality-grid");
  app.add_option("--k-values", k_values, "comma-separated slot counts for slot-sweep and regression");
  app.add_flag("--quiet", quiet, "no progress lines");

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<ConfigEntry> entries;
    if (config_path) {
      std::ifstream in(*config_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      entries = parse_key_values(buffer.str(), *config_path);
    }
    const auto flag = [&](const char* key, const std::optional<std::string>& value) {
      if (value) entries.push_back({key, *value, std::string("--") + key});
    };
    if (!command.empty()) entries.push_back({"experiment", command, "command"});
    flag("experiment", experiment);
    flag("seed", seed);
    flag("n", n);
    flag("t", t);
    flag("s", s);
    flag("k", k);
    flag("d", d);
    flag("p_bar", p_bar);
    flag("p_prime", p_prime);
    flag("reward_kind", reward_kind);
    flag("threads", threads);
    flag("relative_sd", relative_sd);
    flag("cardinality_rule", cardinality_rule);
    flag("p_bar_grid", p_bar_grid);
    flag("p_prime_grid", p_prime_grid);
    flag("cardinality_choices", cardinality_choices);
    flag("k_values", k_values);
    if (deterministic_reduce) entries.push_back({"deterministic_reduce", "true", "--deterministic-reduce"});

    const ExperimentConfig cfg = config_from_entries(entries);

    std::size_t done = 0;
    const ProgressFn progress = [&](const TensorResult& r) {
      ++done;
      if (quiet) return;
      std::cerr << "tensor " << r.tensor_index << " d=" << r.spec.to_string() << " p'=" << r.assumed_prior_mean
                << " delta_nmse=" << r.delta_nmse << " predicted=" << r.predicted_improvement << " (" << done
                << " done)\n";
    };
    const Outcome outcome = run_experiment(cfg, progress);

    std::size_t clamped = 0;
    for (const auto& r : outcome.results) clamped += r.clamp_warning();
    if (clamped > 0) {
      std::cerr << "warning: " << clamped << " of " << outcome.results.size()
                << " tensors clamped more than 1% of reward rates into [0, 1]\n";
    }

    RunManifest manifest;
    manifest.config = cfg;
    manifest.timestamp = utc_timestamp();
    const WrittenFiles files = write_results(outcome.results, manifest, out_dir, outcome.tables);
    std::cout << "wrote " << files.results_csv.string() << '\n';
    for (const auto& path : files.extra) std::cout << "wrote " << path.string() << '\n';
    std::cout << "wrote " << files.manifest.string() << '\n';
    if (!outcome.checks_passed) {
      std::cerr << "error: oracle check found a comparison outside 4 standard errors\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
