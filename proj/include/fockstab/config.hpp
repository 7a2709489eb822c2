#pragma once

// Experiment configuration: defaults, the paper-fig2 measurement preset,
// JSON (de)serialization and validation including the non-degeneracy check
// of the measurement eigenvalues inside the filter truncation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fockstab/errors.hpp"
#include "fockstab/lyapunov.hpp"

namespace fockstab {

inline constexpr const char* kPaperFig2Preset = "paper-fig2";

struct MeasurementAngles {
  double theta;
  double phi;
};

// M_g = cos(sqrt(2) (N - n_bar) / 5 + pi/4), i.e. phi = sqrt(2)/5 and
// theta = pi/4 - n_bar sqrt(2)/5.
inline MeasurementAngles paper_fig2_angles(int n_bar) {
  const double phi = std::numbers::sqrt2 / 5.0;
  return {std::numbers::pi / 4.0 - n_bar * phi, phi};
}

struct ExperimentConfig {
  int n_bar = 3;
  int system_dim = 21;
  int filter_dim = 10;
  double theta = paper_fig2_angles(3).theta;
  double phi = paper_fig2_angles(3).phi;
  std::optional<std::string> preset = std::string(kPaperFig2Preset);
  double alpha_bar = 0.1;
  double delta = 1.0 / 220.0;
  double fd_step = 1e-3;
  FeedbackLaw law = FeedbackLaw::lyapunov;
  int horizon = 200;
  int trajectories = 100;
  std::uint64_t master_seed = 0;
  std::string output_dir = ".";
  bool csv = false;

  ControlParams control() const {
    return ControlParams{alpha_bar, delta, n_bar, theta, phi, fd_step};
  }

  bool operator==(const ExperimentConfig&) const = default;
};

// Smallest accepted gap between two measurement eigenvalues cos^2(theta + n phi).
inline constexpr double kMinEigenvalueGap = 1e-9;

// Rejects (theta, phi) for which two photon numbers below filter_dim give the
// same outcome statistics.
inline void check_nondegenerate(double theta, double phi, int filter_dim) {
  for (int i = 0; i < filter_dim; ++i) {
    const double ci = std::cos(theta + i * phi);
    for (int j = i + 1; j < filter_dim; ++j) {
      const double cj = std::cos(theta + j * phi);
      const double gap = std::abs(ci * ci - cj * cj);
      if (!(gap > kMinEigenvalueGap)) throw DegenerateMeasurement(i, j, gap);
    }
  }
}

// Structural invariants plus non-degeneracy. system_dim == filter_dim is
// accepted so that the filter can be checked against the true state.
inline void validate(const ExperimentConfig& c) {
  if (c.n_bar < 0) throw ConfigError("n_bar", "must be >= 0");
  if (c.filter_dim < c.n_bar + 2) throw ConfigError("filter_dim", "must exceed n_bar + 1");
  if (c.system_dim < c.filter_dim) throw ConfigError("system_dim", "must be >= filter_dim");
  if (c.horizon < 0) throw ConfigError("horizon", "must be >= 0");
  if (c.trajectories < 1) throw ConfigError("trajectories", "must be >= 1");
  c.control().validate(c.filter_dim);
  check_nondegenerate(c.theta, c.phi, c.filter_dim);
}

namespace detail {

template <typename T>
T read_field(const nlohmann::json& raw, const char* key, T fallback) {
  if (!raw.contains(key)) return fallback;
  try {
    return raw.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["n_bar"] = c.n_bar;
  j["system_dim"] = c.system_dim;
  j["filter_dim"] = c.filter_dim;
  j["theta"] = c.theta;
  j["phi"] = c.phi;
  j["preset"] = c.preset ? nlohmann::json(*c.preset) : nlohmann::json(nullptr);
  j["alpha_bar"] = c.alpha_bar;
  j["delta"] = c.delta;
  j["fd_step"] = c.fd_step;
  j["law"] = to_string(c.law);
  j["horizon"] = c.horizon;
  j["trajectories"] = c.trajectories;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["csv"] = c.csv;
  return j;
}

// Builds and validates a config from a JSON object. Missing fields take their
// defaults; without explicit angles the paper-fig2 preset applies, and
// explicit angles must agree with a named preset.
inline ExperimentConfig validate_config(const nlohmann::json& raw) {
  if (!raw.is_object()) throw ConfigError("<root>", "expected a JSON object");
  static const char* const known[] = {"n_bar",   "system_dim", "filter_dim", "theta",
                                      "phi",     "preset",     "alpha_bar",  "delta",
                                      "fd_step", "law",        "horizon",    "trajectories",
                                      "master_seed", "output_dir", "csv"};
  for (const auto& [key, value] : raw.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError(key, "unknown field");
    }
  }

  ExperimentConfig c;
  c.n_bar = detail::read_field(raw, "n_bar", c.n_bar);
  c.system_dim = detail::read_field(raw, "system_dim", c.system_dim);
  c.filter_dim = detail::read_field(raw, "filter_dim", c.filter_dim);
  c.alpha_bar = detail::read_field(raw, "alpha_bar", c.alpha_bar);
  c.delta = detail::read_field(raw, "delta", c.delta);
  c.fd_step = detail::read_field(raw, "fd_step", c.fd_step);
  c.law = feedback_law_from_string(detail::read_field(raw, "law", to_string(c.law)));
  c.horizon = detail::read_field(raw, "horizon", c.horizon);
  c.trajectories = detail::read_field(raw, "trajectories", c.trajectories);
  c.master_seed = detail::read_field(raw, "master_seed", c.master_seed);
  c.output_dir = detail::read_field(raw, "output_dir", c.output_dir);
  c.csv = detail::read_field(raw, "csv", c.csv);

  const bool has_theta = raw.contains("theta");
  const bool has_phi = raw.contains("phi");
  if (has_theta != has_phi) {
    throw ConfigError(has_theta ? "phi" : "theta", "theta and phi must be given together");
  }
  const bool preset_given = raw.contains("preset");
  c.preset.reset();
  if (preset_given && !raw.at("preset").is_null()) {
    const auto name = detail::read_field<std::string>(raw, "preset", "");
    if (name != kPaperFig2Preset) throw ConfigError("preset", "unknown preset '" + name + "'");
    c.preset = name;
  } else if (!preset_given && !has_theta) {
    c.preset = std::string(kPaperFig2Preset);
  }

  if (c.preset) {
    const auto angles = paper_fig2_angles(c.n_bar);
    c.theta = angles.theta;
    c.phi = angles.phi;
    if (has_theta && (detail::read_field(raw, "theta", 0.0) != angles.theta ||
                      detail::read_field(raw, "phi", 0.0) != angles.phi)) {
      throw ConfigError("preset", "explicit theta/phi disagree with preset '" + *c.preset + "'");
    }
  } else if (has_theta) {
    c.theta = detail::read_field(raw, "theta", 0.0);
    c.phi = detail::read_field(raw, "phi", 0.0);
  } else {
    throw ConfigError("theta", "theta and phi are required when no preset is selected");
  }

  validate(c);
  return c;
}

}  // namespace fockstab
