#include "slate_ope/cli_reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace slate_ope {
namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

[[noreturn]] void bad_value(const ConfigEntry& e, const std::string& why) {
  throw ConfigError(e.source + ": invalid value '" + e.value + "' for key '" + e.key + "': " + why);
}

double parse_double(const ConfigEntry& e, std::string_view text) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(value)) {
    bad_value(e, "expected a number");
  }
  return value;
}

// Accepts plain integers and exact scientific forms such as 1e7.
std::uint64_t parse_count(const ConfigEntry& e, std::string_view text) {
  const std::string s = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return value;
  const double d = parse_double(e, s);
  if (d < 0.0 || d != std::floor(d) || d > 1e18) bad_value(e, "expected a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::size_t> parse_count_list(const ConfigEntry& e, char sep) {
  std::vector<std::size_t> out;
  for (const auto& part : split(e.value, sep)) {
    if (part.empty()) bad_value(e, "empty list element");
    out.push_back(static_cast<std::size_t>(parse_count(e, part)));
  }
  return out;
}

std::vector<double> parse_double_list(const ConfigEntry& e) {
  std::vector<double> out;
  for (const auto& part : split(e.value, ',')) {
    if (part.empty()) bad_value(e, "empty list element");
    out.push_back(parse_double(e, part));
  }
  return out;
}

bool parse_bool(const ConfigEntry& e) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(e, "expected true or false");
}

template <class T>
std::string join(const std::vector<T>& values, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_floating_point_v<T>) {
      out += format_number(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

void require_prior(double value, const char* key) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ConfigError("range error: " + std::string(key) + " = " + format_number(value) + " must lie in (0, 1)");
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<ConfigEntry> parse_key_values(std::string_view text, std::string_view source) {
  std::vector<ConfigEntry> entries;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = normalize_key(trim(std::string_view(line).substr(0, eq)));
    if (key.empty()) throw ConfigError(where + ": missing key");
    entries.push_back({key, trim(std::string_view(line).substr(eq + 1)), where});
  }
  return entries;
}

ExperimentConfig config_from_entries(std::span<const ConfigEntry> entries) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    const std::string key = normalize_key(e.key);
    if (key == "experiment") {
      cfg.experiment = parse_experiment_kind(trim(e.value));
    } else if (key == "seed") {
      cfg.seed = parse_count(e, e.value);
    } else if (key == "n") {
      cfg.sample_size = parse_count(e, e.value);
    } else if (key == "t") {
      cfg.tensor_count = parse_count(e, e.value);
    } else if (key == "s") {
      cfg.replications = parse_count(e, e.value);
    } else if (key == "k") {
      cfg.slot_count = static_cast<std::size_t>(parse_count(e, e.value));
    } else if (key == "d") {
      cfg.cardinalities = parse_count_list(e, '-');
    } else if (key == "cardinality_rule") {
      cfg.cardinality_rule = parse_cardinality_rule(trim(e.value));
    } else if (key == "p_bar") {
      cfg.true_prior_mean = parse_double(e, e.value);
    } else if (key == "p_prime") {
      cfg.assumed_prior_mean = parse_double(e, e.value);
    } else if (key == "relative_sd") {
      cfg.relative_sd = parse_double(e, e.value);
    } else if (key == "reward_kind") {
      cfg.reward_kind = parse_reward_kind(trim(e.value));
    } else if (key == "threads") {
      cfg.threads = static_cast<unsigned>(parse_count(e, e.value));
    } else if (key == "deterministic_reduce") {
      cfg.deterministic_reduce = parse_bool(e);
    } else if (key == "p_bar_grid") {
      cfg.true_prior_grid = parse_double_list(e);
    } else if (key == "p_prime_grid") {
      cfg.assumed_prior_grid = parse_double_list(e);
    } else if (key == "cardinality_choices") {
      cfg.cardinality_choices = parse_count_list(e, ',');
    } else if (key == "k_values") {
      cfg.k_values = parse_count_list(e, ',');
    } else {
      throw ConfigError(e.source + ": unknown key '" + e.key + "'");
    }
    seen.insert(key);
  }
  for (const char* required : {"experiment", "seed"}) {
    if (!seen.contains(required)) throw ConfigError(std::string("missing required field '") + required + "'");
  }

  const bool has_d = seen.contains("d");
  const bool has_rule = seen.contains("cardinality_rule");
  if (has_d && !has_rule) cfg.cardinality_rule = CardinalityRule::fixed;
  if (has_d && seen.contains("k") && cfg.slot_count != cfg.cardinalities.size()) {
    throw ConfigError("k = " + std::to_string(cfg.slot_count) + " disagrees with d = " + join(cfg.cardinalities, "-"));
  }
  if (has_d) cfg.slot_count = cfg.cardinalities.size();
  if (!has_d && !has_rule) {
    switch (cfg.experiment) {
      case ExperimentKind::prior_grid:
        if (seen.contains("k")) {
          cfg.cardinality_rule = CardinalityRule::even_division;
        } else {
          cfg.cardinalities = {3, 50, 800};
          cfg.slot_count = 3;
        }
        break;
      case ExperimentKind::oracle_check:
        cfg.cardinalities = {2, 3};
        cfg.slot_count = 2;
        break;
      case ExperimentKind::cardinality_grid:
        break;
      case ExperimentKind::slot_sweep:
        cfg.cardinality_rule = CardinalityRule::even_division;
        break;
      case ExperimentKind::regression:
        cfg.cardinality_rule = CardinalityRule::uniform_random;
        break;
    }
  }
  validate_experiment(cfg);
  return cfg;
}

void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.sample_size < 1) throw ConfigError("range error: n must be at least 1");
  if (cfg.tensor_count < 1) throw ConfigError("range error: t must be at least 1");
  if (cfg.replications < 1) throw ConfigError("range error: s must be at least 1");
  if (cfg.threads < 1) throw ConfigError("range error: threads must be at least 1");
  require_prior(cfg.true_prior_mean, "p_bar");
  require_prior(cfg.assumed_prior_mean, "p_prime");
  if (!(cfg.relative_sd >= 0.0)) throw ConfigError("range error: relative_sd must be >= 0");
  for (std::size_t d : cfg.cardinalities) {
    if (d < 1) throw ConfigError("range error: every d entry must be at least 1");
  }
  switch (cfg.experiment) {
    case ExperimentKind::prior_grid:
      if (cfg.true_prior_grid.empty() || cfg.assumed_prior_grid.empty()) {
        throw ConfigError("prior grids must be non-empty");
      }
      for (double p : cfg.true_prior_grid) require_prior(p, "p_bar_grid");
      for (double p : cfg.assumed_prior_grid) require_prior(p, "p_prime_grid");
      cfg.validate();
      break;
    case ExperimentKind::cardinality_grid:
      if (cfg.cardinality_choices.empty()) throw ConfigError("cardinality_choices must be non-empty");
      for (std::size_t d : cfg.cardinality_choices) {
        if (d < 2) throw ConfigError("range error: cardinality_choices entries must be at least 2");
      }
      break;
    case ExperimentKind::slot_sweep:
    case ExperimentKind::regression:
      if (cfg.cardinality_rule == CardinalityRule::fixed) {
        throw ConfigError("slot sweeps need cardinality_rule even_division or uniform_random");
      }
      if (cfg.k_values.empty()) throw ConfigError("k_values must be non-empty");
      for (std::size_t k : cfg.k_values) {
        if (k < 2) throw ConfigError("range error: k_values entries must be at least 2");
      }
      if (cfg.experiment == ExperimentKind::regression && cfg.tensor_count < 3) {
        throw ConfigError("range error: regression needs t >= 3");
      }
      // even division gives every tensor of one K the same predicted value
      if (cfg.experiment == ExperimentKind::regression && cfg.cardinality_rule != CardinalityRule::uniform_random) {
        throw ConfigError("regression needs cardinality_rule uniform_random");
      }
      break;
    case ExperimentKind::oracle_check:
      cfg.validate();
      if (cfg.cardinality_rule != CardinalityRule::fixed) throw ConfigError("oracle_check needs a fixed d");
      if (!SlateSpec(cfg.cardinalities).slate_count()) {
        throw ConfigError("oracle_check needs at most " + std::to_string(kEnumerationCap) + " slates");
      }
      break;
  }
}

ExperimentConfig parse_config_text(std::string_view text) {
  const auto entries = parse_key_values(text, "config");
  return config_from_entries(entries);
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_entries(parse_key_values(buffer.str(), path.string()));
}

std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "experiment = " << to_string(cfg.experiment) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "cardinality_rule = " << to_string(cfg.cardinality_rule) << '\n';
  if (!cfg.cardinalities.empty()) out << "d = " << join(cfg.cardinalities, "-") << '\n';
  out << "k = " << cfg.slot_count << '\n';
  out << "n = " << cfg.sample_size << '\n';
  out << "t = " << cfg.tensor_count << '\n';
  out << "s = " << cfg.replications << '\n';
  out << "p_bar = " << format_number(cfg.true_prior_mean) << '\n';
  out << "p_prime = " << format_number(cfg.assumed_prior_mean) << '\n';
  out << "relative_sd = " << format_number(cfg.relative_sd) << '\n';
  out << "reward_kind = " << to_string(cfg.reward_kind) << '\n';
  out << "threads = " << cfg.threads << '\n';
  out << "deterministic_reduce = " << (cfg.deterministic_reduce ? "true" : "false") << '\n';
  out << "p_bar_grid = " << join(cfg.true_prior_grid, ",") << '\n';
  out << "p_prime_grid = " << join(cfg.assumed_prior_grid, ",") << '\n';
  out << "cardinality_choices = " << join(cfg.cardinality_choices, ",") << '\n';
  out << "k_values = " << join(cfg.k_values, ",") << '\n';
  return out.str();
}

std::string format_manifest(const RunManifest& manifest) {
  std::ostringstream out;
  out << "# slate_ope run manifest\n";
  out << "# version: " << manifest.version << '\n';
  out << "# timestamp: " << manifest.timestamp << '\n';
  for (const auto& path : manifest.output_paths) out << "# output: " << path << '\n';
  out << format_config(manifest.config);
  return out.str();
}

std::string format_results_csv(std::span<const TensorResult> results, const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  const std::string experiment = to_string(cfg.experiment);
  for (const auto& r : results) {
    const std::string hm = r.divergences.harmonic_mean ? format_number(*r.divergences.harmonic_mean) : "";
    for (const auto& s : r.summaries) {
      out << experiment << ',' << r.spec.slot_count() << ',' << r.spec.to_string() << ',' << r.tensor_index << ','
          << s.estimator << ',' << r.sample_size << ',' << format_number(s.bias) << ','
          << format_number(s.variance) << ',' << format_number(s.mse) << ',' << format_number(s.nmse) << ','
          << format_number(r.delta_nmse) << ',' << format_number(r.divergences.arithmetic_mean) << ',' << hm << ','
          << format_number(r.predicted_improvement) << ',' << format_number(r.true_prior_mean) << ','
          << format_number(r.assumed_prior_mean) << ',' << cfg.seed << '\n';
    }
  }
  return out.str();
}

std::string format_prior_grid_csv(std::span<const PriorGridCell> cells) {
  std::ostringstream out;
  out << "p_bar,p_prime,tensors,mean_delta_nmse,se_delta_nmse,predicted_improvement,mean_percent_improvement\n";
  for (const auto& c : cells) {
    out << format_number(c.true_prior_mean) << ',' << format_number(c.assumed_prior_mean) << ',' << c.stats.tensors
        << ',' << format_number(c.stats.mean_delta_nmse) << ',' << format_number(c.stats.se_delta_nmse) << ','
        << format_number(c.predicted_improvement) << ',' << format_number(c.stats.mean_percent_improvement) << '\n';
  }
  return out.str();
}

std::string format_cardinality_grid_csv(std::span<const CardinalityGridCell> cells) {
  std::ostringstream out;
  out << "d1,d2,tensors,mean_percent_improvement,se_percent_improvement,mean_delta_nmse,se_delta_nmse,"
         "predicted_improvement\n";
  for (const auto& c : cells) {
    out << c.first << ',' << c.second << ',' << c.stats.tensors << ','
        << format_number(c.stats.mean_percent_improvement) << ',' << format_number(c.stats.se_percent_improvement)
        << ',' << format_number(c.stats.mean_delta_nmse) << ',' << format_number(c.stats.se_delta_nmse) << ','
        << format_number(c.stats.mean_predicted_improvement) << '\n';
  }
  return out.str();
}

std::string format_slot_sweep_csv(std::span<const SlotSweepEntry> entries) {
  std::ostringstream out;
  out << "K,tensors,mean_delta_nmse,se_delta_nmse,mean_predicted_improvement,mean_percent_improvement\n";
  for (const auto& e : entries) {
    out << e.slot_count << ',' << e.stats.tensors << ',' << format_number(e.stats.mean_delta_nmse) << ','
        << format_number(e.stats.se_delta_nmse) << ',' << format_number(e.stats.mean_predicted_improvement) << ','
        << format_number(e.stats.mean_percent_improvement) << '\n';
  }
  return out.str();
}

std::string format_regression_csv(std::span<const SlotRegression> fits) {
  std::ostringstream out;
  out << "K,points,slope,intercept,r_squared\n";
  for (const auto& f : fits) {
    out << f.slot_count << ',' << f.fit.points << ',' << format_number(f.fit.slope) << ','
        << format_number(f.fit.intercept) << ',' << format_number(f.fit.r_squared) << '\n';
  }
  return out.str();
}

std::string format_oracle_check_csv(std::span<const OracleCheckResult> checks) {
  std::ostringstream out;
  out << "tensor_index,cardinalities,estimator,exact_variance,empirical_variance,variance_se,variance_z,"
         "exact_bias,empirical_bias,bias_se,bias_z\n";
  for (const auto& check : checks) {
    for (const auto& c : check.comparisons) {
      out << check.tensor_index << ',' << check.spec.to_string() << ',' << c.estimator << ','
          << format_number(c.exact_variance) << ',' << format_number(c.empirical_variance) << ','
          << format_number(c.variance_se) << ',' << format_number(c.variance_z) << ','
          << format_number(c.exact_bias) << ',' << format_number(c.empirical_bias) << ','
          << format_number(c.bias_se) << ',' << format_number(c.bias_z) << '\n';
    }
  }
  return out.str();
}

WrittenFiles write_results(std::span<const TensorResult> results, RunManifest manifest,
                           const std::filesystem::path& out_dir, std::span<const NamedTable> extra_tables) {
  if (results.empty()) throw PreconditionError("no results to write");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  WrittenFiles files;
  files.results_csv = out_dir / "results.csv";
  files.manifest = out_dir / "manifest.cfg";
  write_file(files.results_csv, format_results_csv(results, manifest.config));
  manifest.output_paths.push_back(files.results_csv.string());
  for (const auto& table : extra_tables) {
    files.extra.push_back(out_dir / table.file_name);
    write_file(files.extra.back(), table.contents);
    manifest.output_paths.push_back(files.extra.back().string());
  }
  write_file(files.manifest, format_manifest(manifest));
  return files;
}

}  // namespace slate_ope
