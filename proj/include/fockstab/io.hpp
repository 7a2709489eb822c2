#pragma once

// Serialization of trajectory records and ensemble summaries.
//
// Record file (records.jsonl): one JSON object per line, one line per step per
// trajectory, trajectories in index order:
//   {"traj":0,"step":0,"outcome":null,"alpha":0.0,"fidelity_true":...,
//    "fidelity_filter":...,"lyapunov_filter":...}
// "outcome" is "g", "e", or null for the initial record.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fockstab/config.hpp"
#include "fockstab/errors.hpp"
#include "fockstab/trajectory.hpp"

namespace fockstab {

using OrderedJson = nlohmann::ordered_json;

inline constexpr const char* kRecordSchema = "fockstab-records/1";
inline constexpr const char* kSummarySchema = "fockstab-summary/1";

inline OrderedJson record_to_json(int traj, const StepRecord& r) {
  OrderedJson j;
  j["traj"] = traj;
  j["step"] = r.step;
  j["outcome"] = r.outcome ? OrderedJson(std::string(1, to_char(*r.outcome))) : OrderedJson();
  j["alpha"] = r.alpha;
  j["fidelity_true"] = r.fidelity_true;
  j["fidelity_filter"] = r.fidelity_filter;
  j["lyapunov_filter"] = r.lyapunov_filter;
  return j;
}

inline void write_records_jsonl(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  for (const TrajectoryRecord& t : records) {
    for (const StepRecord& r : t.steps) out << record_to_json(t.traj_index, r).dump() << '\n';
  }
}

inline void write_records_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  out << "traj,step,outcome,alpha,fidelity_true,fidelity_filter,lyapunov_filter\n";
  for (const TrajectoryRecord& t : records) {
    for (const StepRecord& r : t.steps) {
      // Reuse the JSON number formatting so both files carry identical digits.
      const OrderedJson j = record_to_json(t.traj_index, r);
      out << t.traj_index << ',' << r.step << ','
          << (r.outcome ? std::string(1, to_char(*r.outcome)) : std::string()) << ','
          << j["alpha"].dump() << ',' << j["fidelity_true"].dump() << ','
          << j["fidelity_filter"].dump() << ',' << j["lyapunov_filter"].dump() << '\n';
    }
  }
}

inline OrderedJson summary_to_json(const EnsembleSummary& s,
                                   const std::vector<TrajectoryRecord>& records) {
  OrderedJson j;
  j["schema"] = kSummarySchema;
  j["records_schema"] = kRecordSchema;
  j["config"] = OrderedJson::parse(to_json(s.config).dump());
  j["trajectories"] = records.size();
  j["mean_final_fidelity"] = s.mean_final_fidelity;
  j["escape_threshold"] = kEscapeThreshold;
  j["escape_fraction"] = s.escape_fraction;
  j["divergence_count"] = s.divergence_count;
  OrderedJson divergences = OrderedJson::array();
  for (const TrajectoryRecord& t : records) {
    if (t.status != TerminalStatus::completed) {
      divergences.push_back({{"traj", t.traj_index}, {"diagnostic", t.diagnostic}});
    }
  }
  j["divergences"] = divergences;
  j["record_count"] = s.record_count;
  j["outcome_counts"] = {{"g", s.outcome_g_count}, {"e", s.outcome_e_count}};
  j["final_fidelity_histogram"] = {{"bins", kHistogramBins},
                                   {"counts", s.final_fidelity_histogram}};
  j["mean_fidelity_per_step"] = s.mean_fidelity_per_step;
  j["mean_filter_fidelity_per_step"] = s.mean_filter_fidelity_per_step;
  j["active_per_step"] = s.active_per_step;
  return j;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

}  // namespace fockstab
