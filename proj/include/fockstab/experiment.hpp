#pragma once

// The `run` and `compare` experiments behind the command-line tool. Both
// return process exit codes; every file is written after the ensemble
// reduction has finished.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fockstab/config.hpp"
#include "fockstab/errors.hpp"
#include "fockstab/io.hpp"
#include "fockstab/trajectory.hpp"

namespace fockstab {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitRuntimeError = 2,
  kExitIoError = 3,
};

struct RunOptions {
  unsigned workers = default_workers();
  std::ostream* log = nullptr;  // result lines; silent when null
  std::ostream* err = nullptr;  // error messages; silent when null
};

namespace detail {

// Maps the library's error types onto exit codes.
template <typename Body>
int guarded(std::ostream* err, Body&& body) {
  auto report = [&](const char* kind, const std::exception& e) {
    if (err) *err << kind << ": " << e.what() << '\n';
  };
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    report("config error", e);
    return kExitConfigError;
  } catch (const IoError& e) {
    report("I/O error", e);
    return kExitIoError;
  } catch (const std::exception& e) {
    report("runtime error", e);
    return kExitRuntimeError;
  }
}

}  // namespace detail

inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kRecordsCsvFile = "records.csv";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kCompareTableFile = "compare.csv";
inline constexpr const char* kCompareSummaryFile = "compare.json";

// Runs the configured ensemble and writes records.jsonl, summary.json and,
// with config.csv, records.csv into config.output_dir.
inline int cmd_run(const ExperimentConfig& config, const RunOptions& options = {}) {
  return detail::guarded(options.err, [&] {
    validate(config);
    const std::vector<TrajectoryRecord> records = run_trajectories(config, options.workers);
    const EnsembleSummary summary = summarize(config, records);

    const std::filesystem::path dir(config.output_dir);
    ensure_directory(dir);
    {
      const auto path = dir / kRecordsFile;
      auto out = open_output(path);
      write_records_jsonl(out, records);
      finish_output(out, path);
    }
    if (config.csv) {
      const auto path = dir / kRecordsCsvFile;
      auto out = open_output(path);
      write_records_csv(out, records);
      finish_output(out, path);
    }
    {
      const auto path = dir / kSummaryFile;
      auto out = open_output(path);
      out << summary_to_json(summary, records).dump(2) << '\n';
      finish_output(out, path);
    }
    if (options.log) {
      *options.log << "law=" << to_string(config.law) << " trajectories=" << records.size()
                   << " horizon=" << config.horizon
                   << " mean_final_fidelity=" << summary.mean_final_fidelity
                   << " escape_fraction=" << summary.escape_fraction
                   << " divergences=" << summary.divergence_count << '\n';
    }
  });
}

struct Comparison {
  EnsembleSummary lyapunov;
  EnsembleSummary finite_dim;
};

inline Comparison compare_laws(const ExperimentConfig& config, unsigned workers) {
  ExperimentConfig lyap = config;
  lyap.law = FeedbackLaw::lyapunov;
  ExperimentConfig fd = config;
  fd.law = FeedbackLaw::finite_dim;
  return {run_ensemble(lyap, workers), run_ensemble(fd, workers)};
}

// Long-format table: one row per (law, step).
inline void write_compare_table(std::ostream& out, const Comparison& c) {
  out << "law,step,mean_fidelity_true,mean_fidelity_filter\n";
  for (const EnsembleSummary* s : {&c.lyapunov, &c.finite_dim}) {
    for (std::size_t k = 0; k < s->mean_fidelity_per_step.size(); ++k) {
      out << to_string(s->config.law) << ',' << k << ','
          << OrderedJson(s->mean_fidelity_per_step[k]).dump() << ','
          << OrderedJson(s->mean_filter_fidelity_per_step[k]).dump() << '\n';
    }
  }
}

inline OrderedJson compare_to_json(const Comparison& c) {
  auto law_summary = [](const EnsembleSummary& s) {
    OrderedJson j;
    j["mean_final_fidelity"] = s.mean_final_fidelity;
    j["escape_fraction"] = s.escape_fraction;
    j["divergence_count"] = s.divergence_count;
    return j;
  };
  OrderedJson j;
  j["schema"] = "fockstab-compare/1";
  OrderedJson config = OrderedJson::parse(to_json(c.lyapunov.config).dump());
  config.erase("law");
  j["config"] = config;
  j["escape_threshold"] = kEscapeThreshold;
  j[to_string(FeedbackLaw::lyapunov)] = law_summary(c.lyapunov);
  j[to_string(FeedbackLaw::finite_dim)] = law_summary(c.finite_dim);
  return j;
}

// Runs both feedback laws with the same seed (config.law is ignored) and
// writes compare.csv and compare.json into config.output_dir.
inline int cmd_compare(const ExperimentConfig& config, const RunOptions& options = {}) {
  return detail::guarded(options.err, [&] {
    validate(config);
    const Comparison result = compare_laws(config, options.workers);

    const std::filesystem::path dir(config.output_dir);
    ensure_directory(dir);
    {
      const auto path = dir / kCompareTableFile;
      auto out = open_output(path);
      write_compare_table(out, result);
      finish_output(out, path);
    }
    {
      const auto path = dir / kCompareSummaryFile;
      auto out = open_output(path);
      out << compare_to_json(result).dump(2) << '\n';
      finish_output(out, path);
    }
    if (options.log) {
      std::ostream& log = *options.log;
      log << std::fixed << std::setprecision(4);
      log << "step  lyapunov  finite-dim\n";
      const std::size_t n = result.lyapunov.mean_fidelity_per_step.size();
      const std::size_t stride = n > 21 ? (n - 1) / 20 : 1;
      for (std::size_t k = 0; k < n; k += stride) {
        log << std::setw(4) << k << "  " << result.lyapunov.mean_fidelity_per_step[k] << "    "
            << result.finite_dim.mean_fidelity_per_step[k] << '\n';
      }
      log << "escape_fraction  lyapunov=" << result.lyapunov.escape_fraction
          << "  finite-dim=" << result.finite_dim.escape_fraction << '\n';
      log << "mean_final_fidelity  lyapunov=" << result.lyapunov.mean_final_fidelity
          << "  finite-dim=" << result.finite_dim.mean_final_fidelity << '\n';
      log.unsetf(std::ios::floatfield);
    }
  });
}

}  // namespace fockstab
