#include "fockstab/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

using namespace fockstab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fockstab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentConfig quick(const fs::path& dir, int trajectories, int horizon) {
  ExperimentConfig c;
  c.trajectories = trajectories;
  c.horizon = horizon;
  c.master_seed = 11;
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST(ValidateConfig, preset_is_default) {
  const ExperimentConfig c = validate_config(json::object());
  EXPECT_EQ(c, ExperimentConfig{});
  EXPECT_NEAR(c.theta, std::numbers::pi / 4 - 3 * std::sqrt(2.0) / 5, 1e-15);
  EXPECT_NEAR(c.phi, std::sqrt(2.0) / 5, 1e-15);
  EXPECT_EQ(validate_config(json{{"preset", "paper-fig2"}}), c);
}

TEST(ValidateConfig, preset_eigenvalues_are_distinct) {
  const ExperimentConfig c;
  double smallest = 1.0;
  for (int i = 0; i < 10; ++i) {
    for (int j = i + 1; j < 10; ++j) {
      const double ci = std::cos(c.theta + i * c.phi);
      const double cj = std::cos(c.theta + j * c.phi);
      smallest = std::min(smallest, std::abs(ci * ci - cj * cj));
    }
  }
  EXPECT_GT(smallest, 1e-3);
  EXPECT_NO_THROW(check_nondegenerate(c.theta, c.phi, 10));
}

TEST(ValidateConfig, zero_phi_is_degenerate) {
  const json raw{{"preset", nullptr}, {"theta", 0.3}, {"phi", 0.0}};
  EXPECT_THROW(validate_config(raw), DegenerateMeasurement);
  try {
    validate_config(raw);
  } catch (const DegenerateMeasurement& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
  // phi = pi folds n and n + 1 onto the same cos^2.
  EXPECT_THROW(validate_config(json{{"preset", nullptr}, {"theta", 0.3}, {"phi", std::numbers::pi}}),
               DegenerateMeasurement);
}

TEST(ValidateConfig, structural_rejections) {
  auto field_of = [](const json& raw) -> std::string {
    try {
      validate_config(raw);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "";
  };
  EXPECT_EQ(field_of({{"filter_dim", 10}, {"n_bar", 9}}), "filter_dim");
  EXPECT_EQ(field_of({{"system_dim", 9}}), "system_dim");
  EXPECT_EQ(field_of({{"horizon", -1}}), "horizon");
  EXPECT_EQ(field_of({{"trajectories", 0}}), "trajectories");
  EXPECT_EQ(field_of({{"alpha_bar", 0.0}}), "alpha_bar");
  EXPECT_EQ(field_of({{"law", "bang-bang"}}), "law");
  EXPECT_EQ(field_of({{"bogus", 1}}), "bogus");
  EXPECT_EQ(field_of({{"n_bar", "three"}}), "n_bar");
  EXPECT_EQ(field_of({{"theta", 0.1}}), "phi");
  EXPECT_EQ(field_of({{"preset", "other"}}), "preset");
  EXPECT_EQ(field_of({{"preset", "paper-fig2"}, {"theta", 0.1}, {"phi", 0.2}}), "preset");
  EXPECT_EQ(field_of({{"preset", nullptr}}), "theta");
  EXPECT_THROW(validate_config(json::array()), ConfigError);
}

TEST(ValidateConfig, explicit_angles_and_preset_follow_target) {
  const ExperimentConfig c = validate_config({{"theta", 0.2}, {"phi", 0.31}});
  EXPECT_FALSE(c.preset.has_value());
  EXPECT_EQ(c.theta, 0.2);
  EXPECT_EQ(c.phi, 0.31);

  const ExperimentConfig moved = validate_config({{"n_bar", 5}});
  EXPECT_NEAR(std::cos(moved.theta + 5 * moved.phi), std::sqrt(0.5), 1e-15);
}

TEST(ValidateConfig, round_trip) {
  ExperimentConfig c = validate_config({{"theta", 0.2},
                                        {"phi", 0.31},
                                        {"law", "finite-dim"},
                                        {"master_seed", 18446744073709551615ull},
                                        {"delta", 0.01},
                                        {"csv", true}});
  EXPECT_EQ(validate_config(to_json(c)), c);
  const ExperimentConfig preset;
  EXPECT_EQ(validate_config(to_json(preset)), preset);
}

TEST(CmdRun, single_record_and_config_echo) {
  const fs::path dir = scratch_dir("single");
  const ExperimentConfig c = quick(dir, 1, 0);
  ASSERT_EQ(cmd_run(c), kExitOk);
  const auto records = lines(dir / kRecordsFile);
  ASSERT_EQ(records.size(), 1u);
  const json r = json::parse(records[0]);
  EXPECT_EQ(r["traj"], 0);
  EXPECT_EQ(r["step"], 0);
  EXPECT_TRUE(r["outcome"].is_null());
  for (const char* key : {"alpha", "fidelity_true", "fidelity_filter", "lyapunov_filter"}) {
    EXPECT_TRUE(r.contains(key)) << key;
  }
  const json summary = json::parse(slurp(dir / kSummaryFile));
  EXPECT_EQ(summary["schema"], kSummarySchema);
  EXPECT_EQ(validate_config(summary["config"]), c);
  EXPECT_FALSE(fs::exists(dir / kRecordsCsvFile));
}

TEST(CmdRun, rerun_is_byte_identical) {
  const fs::path a = scratch_dir("rerun_a");
  const fs::path b = scratch_dir("rerun_b");
  ExperimentConfig ca = quick(a, 6, 25);
  ca.csv = true;
  ExperimentConfig cb = ca;
  cb.output_dir = b.string();
  ASSERT_EQ(cmd_run(ca, {1, nullptr, nullptr}), kExitOk);
  ASSERT_EQ(cmd_run(cb, {4, nullptr, nullptr}), kExitOk);
  EXPECT_EQ(slurp(a / kRecordsFile), slurp(b / kRecordsFile));
  EXPECT_EQ(slurp(a / kRecordsCsvFile), slurp(b / kRecordsCsvFile));
  // The summary echoes output_dir, so compare everything else.
  json sa = json::parse(slurp(a / kSummaryFile));
  json sb = json::parse(slurp(b / kSummaryFile));
  sa["config"].erase("output_dir");
  sb["config"].erase("output_dir");
  EXPECT_EQ(sa, sb);
}

TEST(CmdRun, summary_matches_record_file) {
  const fs::path dir = scratch_dir("tally");
  ExperimentConfig c = quick(dir, 5, 30);
  c.csv = true;
  c.law = FeedbackLaw::finite_dim;
  ASSERT_EQ(cmd_run(c), kExitOk);
  const auto records = lines(dir / kRecordsFile);
  long g = 0;
  long e = 0;
  std::vector<double> final_fidelity(5, 0.0);
  std::vector<double> sum(31, 0.0);
  for (const std::string& line : records) {
    const json r = json::parse(line);
    if (r["outcome"] == "g") ++g;
    if (r["outcome"] == "e") ++e;
    final_fidelity[r["traj"].get<int>()] = r["fidelity_true"];
    sum[r["step"].get<int>()] += r["fidelity_true"].get<double>();
  }
  const json summary = json::parse(slurp(dir / kSummaryFile));
  EXPECT_EQ(summary["record_count"], records.size());
  EXPECT_EQ(summary["outcome_counts"]["g"], g);
  EXPECT_EQ(summary["outcome_counts"]["e"], e);
  double mean_final = 0.0;
  for (double f : final_fidelity) mean_final += f;
  EXPECT_NEAR(summary["mean_final_fidelity"].get<double>(), mean_final / 5, 1e-15);
  EXPECT_NEAR(summary["mean_fidelity_per_step"][30].get<double>(), sum[30] / 5, 1e-15);
  int histogram_total = 0;
  for (int count : summary["final_fidelity_histogram"]["counts"]) histogram_total += count;
  EXPECT_EQ(histogram_total, 5);
  // CSV carries the same rows with a header.
  EXPECT_EQ(lines(dir / kRecordsCsvFile).size(), records.size() + 1);
}

TEST(CmdRun, exit_codes) {
  std::ostringstream err;
  ExperimentConfig bad = quick(scratch_dir("bad"), 1, 0);
  bad.filter_dim = 4;
  EXPECT_EQ(cmd_run(bad, {1, nullptr, &err}), kExitConfigError);
  EXPECT_NE(err.str().find("filter_dim"), std::string::npos);

  const fs::path blocker = scratch_dir("blocker");
  { std::ofstream(blocker) << "not a directory"; }
  ExperimentConfig io = quick(blocker / "out", 1, 0);
  err.str("");
  EXPECT_EQ(cmd_run(io, {1, nullptr, &err}), kExitIoError);
  EXPECT_NE(err.str().find("I/O error"), std::string::npos);
  fs::remove(blocker);

  EXPECT_EQ(detail::guarded(nullptr, [] { throw FilterDivergence("x"); }), kExitRuntimeError);
  EXPECT_EQ(detail::guarded(nullptr, [] { throw std::runtime_error("x"); }), kExitRuntimeError);
  EXPECT_EQ(detail::guarded(nullptr, [] {}), kExitOk);
}

TEST(CmdCompare, two_rows_per_law) {
  const fs::path dir = scratch_dir("compare");
  std::ostringstream log;
  ASSERT_EQ(cmd_compare(quick(dir, 1, 1), {1, &log, nullptr}), kExitOk);
  const auto table = lines(dir / kCompareTableFile);
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0], "law,step,mean_fidelity_true,mean_fidelity_filter");
  EXPECT_EQ(table[1].rfind("lyapunov,0,", 0), 0u);
  EXPECT_EQ(table[2].rfind("lyapunov,1,", 0), 0u);
  EXPECT_EQ(table[3].rfind("finite-dim,0,", 0), 0u);
  EXPECT_EQ(table[4].rfind("finite-dim,1,", 0), 0u);
  // Same seed and same initial state: step 0 agrees across laws.
  EXPECT_EQ(table[1].substr(table[1].find(',', 9)), table[3].substr(table[3].find(',', 11)));

  const json summary = json::parse(slurp(dir / kCompareSummaryFile));
  EXPECT_FALSE(summary["config"].contains("law"));
  EXPECT_TRUE(summary["lyapunov"].contains("escape_fraction"));
  EXPECT_TRUE(summary["finite-dim"].contains("escape_fraction"));
  EXPECT_NE(log.str().find("escape_fraction"), std::string::npos);
}

TEST(CmdCompare, lyapunov_not_worse_than_finite_dim) {
  const fs::path dir = scratch_dir("compare_ens");
  const Comparison result = compare_laws(quick(dir, 30, 200), 1);
  EXPECT_GE(result.lyapunov.mean_final_fidelity, result.finite_dim.mean_final_fidelity - 0.05);
}
