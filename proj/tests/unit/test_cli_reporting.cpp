#include <gtest/gtest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slate_ope/cli_reporting.hpp"

using namespace slate_ope;

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("slate_ope_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ConfigParse, MinimalConfigUsesDefaults) {
  const auto cfg = parse_config_text("experiment = slot_sweep\nseed = 42\n");
  EXPECT_EQ(cfg.experiment, ExperimentKind::slot_sweep);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.cardinality_rule, CardinalityRule::even_division);
  EXPECT_EQ(cfg.sample_size, 100000u);
  EXPECT_EQ(cfg.tensor_count, 50u);
  EXPECT_EQ(cfg.replications, 500u);
  EXPECT_EQ(cfg.k_values, (std::vector<std::size_t>{2, 3, 4, 5}));
}

TEST(ConfigParse, PriorGridSetup) {
  const auto cfg = parse_config_text(
      "# prior grid at full scale\n"
      "experiment = prior_grid\nseed = 7\nd = 3-50-800\nk = 3\nn = 1e7\n");
  EXPECT_EQ(cfg.cardinalities, (std::vector<std::size_t>{3, 50, 800}));
  EXPECT_EQ(cfg.slot_count, 3u);
  EXPECT_EQ(cfg.sample_size, 10000000u);
  EXPECT_EQ(cfg.cardinality_rule, CardinalityRule::fixed);
  EXPECT_EQ(parse_config_text("experiment = prior_grid\nseed = 1\n").cardinalities,
            (std::vector<std::size_t>{3, 50, 800}));
}

TEST(ConfigParse, Errors) {
  const auto message = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("experiment = slot_sweep\nseed = 1\np_bar = 1.5\n").find("p_bar"), std::string::npos);
  EXPECT_NE(message("experiment = slot_sweep\nseed = 1\nflavour = 3\n").find("flavour"), std::string::npos);
  EXPECT_NE(message("experiment = slot_sweep\n").find("seed"), std::string::npos);
  EXPECT_NE(message("seed = 3\n").find("experiment"), std::string::npos);
  EXPECT_NE(message("experiment = slot_sweep\nseed = x\n").find("seed"), std::string::npos);
  EXPECT_NE(message("experiment = slot_sweep\nseed = 1\nn = 2.5\n").find("'n'"), std::string::npos);
  EXPECT_NE(message("experiment = oracle_check\nseed = 1\nd = 2-3\nk = 4\n").find("disagrees"), std::string::npos);
  EXPECT_NE(message("experiment = slot_sweep\nseed = 1\nnot a pair\n").find("key = value"), std::string::npos);
  EXPECT_THROW(parse_config_text("experiment = slot_sweep\nseed = 1\nk_values = 1,3\n"), ConfigError);
  EXPECT_NE(message("experiment = regression\nseed = 1\ncardinality_rule = even_division\n").find("uniform_random"),
            std::string::npos);
  EXPECT_THROW(parse_config_text("experiment = cardinality_grid\nseed = 1\ncardinality_choices = 1,3\n"),
               ConfigError);
}

TEST(ConfigParse, LaterEntriesWinAndDashesNormalize) {
  const std::vector<ConfigEntry> entries{{"experiment", "oracle-check", "file"},
                                         {"seed", "5", "file"},
                                         {"p-prime", "0.1", "file"},
                                         {"p_prime", "0.3", "flag"}};
  const auto cfg = config_from_entries(entries);
  EXPECT_EQ(cfg.experiment, ExperimentKind::oracle_check);
  EXPECT_EQ(cfg.assumed_prior_mean, 0.3);
  EXPECT_EQ(cfg.cardinalities, (std::vector<std::size_t>{2, 3}));
}

TEST(ConfigFormat, RoundTripIsLossless) {
  for (const char* text : {
           "experiment = slot_sweep\nseed = 42\n",
           "experiment = prior_grid\nseed = 18446744073709551615\nd = 3-50-800\np_bar_grid = 0.1,0.30000000000000004\n",
           "experiment = regression\nseed = 3\nk_values = 2,3,4\nrelative_sd = 0.123456789\n",
           "experiment = cardinality_grid\nseed = 1\ncardinality_choices = 2,10,100,1000\nthreads = 4\n",
           "experiment = oracle_check\nseed = 9\nreward_kind = pairwise\ndeterministic_reduce = false\n",
       }) {
    const auto cfg = parse_config_text(text);
    const auto again = parse_config_text(format_config(cfg));
    EXPECT_TRUE(cfg == again) << text;
    EXPECT_EQ(format_config(again), format_config(cfg));
  }
}

TEST(ConfigFormat, ManifestIsAValidConfig) {
  RunManifest manifest;
  manifest.config = parse_config_text("experiment = oracle_check\nseed = 4\nn = 100\n");
  manifest.timestamp = "2026-01-01T00:00:00Z";
  manifest.output_paths = {"out/results.csv"};
  const std::string text = format_manifest(manifest);
  EXPECT_NE(text.find("version: " + std::string(kVersion)), std::string::npos);
  EXPECT_NE(text.find("out/results.csv"), std::string::npos);
  EXPECT_TRUE(parse_config_text(text) == manifest.config);
}

TEST(NumberFormat, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.25), "0.25");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_number(-3.0), "-3");
  for (double v : {1.0 / 3.0, 6.02214076e23, -1e-300, 123456.789}) {
    EXPECT_EQ(to_double(format_number(v)), v);
  }
}

TEST(ResultsCsv, SchemaAndRows) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::slot_sweep;
  cfg.cardinality_rule = CardinalityRule::even_division;
  cfg.slot_count = 4;
  cfg.sample_size = 200;
  cfg.tensor_count = 1;
  cfg.replications = 10;
  cfg.seed = 3;
  const std::vector<TensorResult> results{run_tensor(cfg, 0)};
  const auto rows = lines_of(format_results_csv(results, cfg));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], kResultsHeader);
  const auto header = split_line(rows[0]);
  std::vector<std::vector<std::string>> fields;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    fields.push_back(split_line(rows[i]));
    ASSERT_EQ(fields.back().size(), header.size());
    EXPECT_EQ(fields.back()[2], "2-33-66-100");
    EXPECT_EQ(fields.back()[0], "slot_sweep");
    EXPECT_EQ(fields.back()[1], "4");
    EXPECT_EQ(fields.back()[16], "3");
  }
  EXPECT_EQ(fields[0][4], "IPS");
  EXPECT_EQ(fields[1][4], "PI");
  EXPECT_EQ(fields[2][4], "PI++");
  const double delta = to_double(fields[0][10]);
  EXPECT_NEAR(delta, to_double(fields[1][9]) - to_double(fields[2][9]), 1e-9 * std::max(1.0, std::abs(delta)));
}

TEST(ResultsCsv, UndefinedHarmonicMeanIsEmpty) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::slot_sweep;
  TensorResult r;
  r.spec = SlateSpec({3});
  r.divergences = summarize_divergences({0.0});
  r.summaries = {EstimatorSummary{"PI"}};
  const std::vector<TensorResult> results{r};
  const auto rows = lines_of(format_results_csv(results, cfg));
  EXPECT_EQ(split_line(rows[1])[12], "");
}

TEST(WriteResults, FilesAndErrors) {
  ExperimentConfig cfg = parse_config_text("experiment = oracle_check\nseed = 2\nn = 100\ns = 5\nt = 1\n");
  const std::vector<TensorResult> results = run_tensors(cfg);
  RunManifest manifest;
  manifest.config = cfg;
  manifest.timestamp = "now";
  const auto dir = scratch_dir("write");
  const std::vector<NamedTable> extra{{"extra.csv", "a,b\n1,2\n"}};
  const auto files = write_results(results, manifest, dir / "nested", extra);
  EXPECT_TRUE(std::filesystem::exists(files.results_csv));
  EXPECT_TRUE(std::filesystem::exists(files.manifest));
  ASSERT_EQ(files.extra.size(), 1u);
  std::ifstream in(files.results_csv);
  std::stringstream buffer;
  buffer << in.rdbuf();
  EXPECT_EQ(buffer.str(), format_results_csv(results, cfg));
  EXPECT_TRUE(parse_config_file(files.manifest) == cfg);

  EXPECT_THROW(write_results({}, manifest, dir), PreconditionError);
  std::ofstream(dir / "blocker") << "x";
  EXPECT_THROW(write_results(results, manifest, dir / "blocker" / "sub"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Tables, Headers) {
  EXPECT_EQ(lines_of(format_prior_grid_csv({}))[0],
            "p_bar,p_prime,tensors,mean_delta_nmse,se_delta_nmse,predicted_improvement,mean_percent_improvement");
  EXPECT_EQ(lines_of(format_regression_csv({}))[0], "K,points,slope,intercept,r_squared");
  const std::vector<SlotRegression> fits{{3, RegressionFit{5, 2.0, 0.5, 0.75}}};
  EXPECT_EQ(lines_of(format_regression_csv(fits))[1], "3,5,2,0.5,0.75");
}
