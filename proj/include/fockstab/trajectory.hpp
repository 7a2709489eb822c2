#pragma once

// Closed-loop Monte Carlo: the true cavity is measured, the filter replays the
// outcome, the controller reads the filter and the same displacement is
// applied to both. Ensembles run trajectories in parallel with one
// independent random stream per trajectory index.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fockstab/config.hpp"
#include "fockstab/estimator.hpp"
#include "fockstab/fock.hpp"
#include "fockstab/lyapunov.hpp"

namespace fockstab {

// Fidelity below this at the horizon marks a trajectory as escaped.
inline constexpr double kEscapeThreshold = 0.5;
inline constexpr int kHistogramBins = 20;

struct StepRecord {
  int step = 0;
  std::optional<Outcome> outcome;  // empty for the initial record
  double alpha = 0.0;
  double fidelity_true = 0.0;
  double fidelity_filter = 0.0;
  double lyapunov_filter = 0.0;

  bool operator==(const StepRecord&) const = default;
};

enum class TerminalStatus { completed, filter_divergence };

inline std::string to_string(TerminalStatus s) {
  return s == TerminalStatus::completed ? "completed" : "filter-divergence";
}

struct TrajectoryRecord {
  int traj_index = 0;
  std::uint64_t master_seed = 0;
  std::vector<StepRecord> steps;  // initial record plus one per completed step
  TerminalStatus status = TerminalStatus::completed;
  std::string diagnostic;

  double final_fidelity() const { return steps.back().fidelity_true; }

  bool operator==(const TrajectoryRecord&) const = default;
};

// Per-trajectory uniform stream keyed on (master_seed, traj_index). Both
// std::seed_seq and std::mt19937_64 are specified bit-exactly, and the
// double conversion is explicit, so draws are portable.
class TrajectoryStream {
 public:
  TrajectoryStream(std::uint64_t master_seed, std::uint64_t traj_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(traj_index),
                      static_cast<std::uint32_t>(traj_index >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

struct StepOutput {
  StateVector system;
  FilterState filter;
  StepRecord record;
};

// Operators and tables shared by every step of every trajectory for one config.
class ClosedLoop {
 public:
  explicit ClosedLoop(const ExperimentConfig& config)
      : config_((validate(config), config)),
        params_(config.control()),
        sigma_(sigma_table(config.n_bar, config.filter_dim)),
        system_pair_(config.system_dim, config.theta, config.phi),
        filter_pair_(config.filter_dim, config.theta, config.phi) {}

  const ExperimentConfig& config() const noexcept { return config_; }
  const SigmaTable& sigma() const noexcept { return sigma_; }
  const ControlParams& params() const noexcept { return params_; }

  StepRecord observe(int k, std::optional<Outcome> s, double alpha, const StateVector& system,
                     const FilterState& filter) const {
    return StepRecord{k,
                      s,
                      alpha,
                      fidelity_to_fock(system, config_.n_bar),
                      fidelity_to_fock(filter.state, config_.n_bar),
                      lyapunov_value(filter.state, sigma_, params_)};
  }

  // One measurement/control cycle producing the state at step k.
  StepOutput step(const StateVector& system, const FilterState& filter, double u, int k) const {
    MeasurementResult measured = measure_step(system, system_pair_, u);
    const FilterState filter_half = filter_collapse(filter, filter_pair_, measured.outcome);
    const double alpha = choose_alpha(config_.law, filter_half.state, sigma_, params_);
    StateVector next_system = displacement(system.dim(), alpha).apply(measured.state);
    FilterState next_filter = filter_displace(filter_half, alpha);
    StepRecord record = observe(k, measured.outcome, alpha, next_system, next_filter);
    return {std::move(next_system), std::move(next_filter), record};
  }

 private:
  ExperimentConfig config_;
  ControlParams params_;
  SigmaTable sigma_;
  MeasurementPair system_pair_;
  MeasurementPair filter_pair_;
};

inline TrajectoryRecord run_trajectory(const ClosedLoop& loop, int traj_index) {
  const ExperimentConfig& config = loop.config();
  TrajectoryRecord record;
  record.traj_index = traj_index;
  record.master_seed = config.master_seed;
  record.steps.reserve(static_cast<std::size_t>(config.horizon) + 1);

  StateVector system = coherent_state(config.system_dim, config.n_bar);
  FilterState filter = filter_init(config.filter_dim, config.n_bar);
  record.steps.push_back(loop.observe(0, std::nullopt, 0.0, system, filter));

  TrajectoryStream stream(config.master_seed, static_cast<std::uint64_t>(traj_index));
  for (int k = 1; k <= config.horizon; ++k) {
    try {
      StepOutput out = loop.step(system, filter, stream.uniform(), k);
      system = std::move(out.system);
      filter = std::move(out.filter);
      record.steps.push_back(out.record);
    } catch (const FilterDivergence& e) {
      record.status = TerminalStatus::filter_divergence;
      record.diagnostic = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
  }
  return record;
}

inline TrajectoryRecord run_trajectory(const ExperimentConfig& config, int traj_index) {
  return run_trajectory(ClosedLoop(config), traj_index);
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Trajectories 0..N-1, ordered by index whatever the worker count.
inline std::vector<TrajectoryRecord> run_trajectories(const ExperimentConfig& config,
                                                      unsigned workers = default_workers()) {
  const ClosedLoop loop(config);
  const int count = config.trajectories;
  std::vector<TrajectoryRecord> records(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        records[static_cast<std::size_t>(i)] = run_trajectory(loop, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };

  const unsigned n_threads = std::clamp(workers, 1u, static_cast<unsigned>(count));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

struct EnsembleSummary {
  ExperimentConfig config;
  // Averages over the trajectories still running at each step.
  std::vector<double> mean_fidelity_per_step;
  std::vector<double> mean_filter_fidelity_per_step;
  std::vector<int> active_per_step;
  std::array<int, kHistogramBins> final_fidelity_histogram{};
  double mean_final_fidelity = 0.0;
  double escape_fraction = 0.0;
  int divergence_count = 0;
  long record_count = 0;
  long outcome_g_count = 0;
  long outcome_e_count = 0;
};

inline int histogram_bin(double fidelity) {
  const int bin = static_cast<int>(fidelity * kHistogramBins);
  return std::clamp(bin, 0, kHistogramBins - 1);
}

// Deterministic reduction in trajectory-index order.
inline EnsembleSummary summarize(const ExperimentConfig& config,
                                 const std::vector<TrajectoryRecord>& records) {
  EnsembleSummary summary;
  summary.config = config;
  const auto length = static_cast<std::size_t>(config.horizon) + 1;
  summary.mean_fidelity_per_step.assign(length, 0.0);
  summary.mean_filter_fidelity_per_step.assign(length, 0.0);
  summary.active_per_step.assign(length, 0);

  int escaped = 0;
  for (const TrajectoryRecord& t : records) {
    for (const StepRecord& r : t.steps) {
      const auto k = static_cast<std::size_t>(r.step);
      summary.mean_fidelity_per_step[k] += r.fidelity_true;
      summary.mean_filter_fidelity_per_step[k] += r.fidelity_filter;
      summary.active_per_step[k] += 1;
      if (r.outcome) (*r.outcome == Outcome::g ? summary.outcome_g_count : summary.outcome_e_count)++;
    }
    summary.record_count += static_cast<long>(t.steps.size());
    const double f = t.final_fidelity();
    summary.final_fidelity_histogram[static_cast<std::size_t>(histogram_bin(f))] += 1;
    summary.mean_final_fidelity += f;
    if (f < kEscapeThreshold) ++escaped;
    if (t.status == TerminalStatus::filter_divergence) ++summary.divergence_count;
  }
  for (std::size_t k = 0; k < length; ++k) {
    if (summary.active_per_step[k] > 0) {
      summary.mean_fidelity_per_step[k] /= summary.active_per_step[k];
      summary.mean_filter_fidelity_per_step[k] /= summary.active_per_step[k];
    }
  }
  const auto n = static_cast<double>(records.size());
  summary.mean_final_fidelity /= n;
  summary.escape_fraction = escaped / n;
  return summary;
}

inline EnsembleSummary run_ensemble(const ExperimentConfig& config,
                                    unsigned workers = default_workers()) {
  return summarize(config, run_trajectories(config, workers));
}

}  // namespace fockstab
