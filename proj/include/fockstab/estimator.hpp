#pragma once

// Pure-state quantum filter on a smaller truncation than the simulated cavity.
// It replays the observed outcomes and applied controls to track the estimate
// the controller acts on.

#include <string>
#include <utility>

#include "fockstab/errors.hpp"
#include "fockstab/fock.hpp"

namespace fockstab {

struct FilterState {
  StateVector state;

  int dim() const noexcept { return state.dim(); }
};

// Coherent state with mean n_bar, cut and renormalized at filter_dim.
inline FilterState filter_init(int filter_dim, int n_bar) {
  if (n_bar < 0) throw ConfigError("n_bar", "must be >= 0");
  if (filter_dim < n_bar + 2) {
    throw ConfigError("filter_dim", "must be at least n_bar + 2 (got " +
                                        std::to_string(filter_dim) + " for n_bar " +
                                        std::to_string(n_bar) + ")");
  }
  return FilterState{coherent_state(filter_dim, static_cast<double>(n_bar))};
}

// Back-action of the observed outcome on the estimate.
inline FilterState filter_collapse(const FilterState& fs, const MeasurementPair& pair,
                                   Outcome outcome) {
  try {
    return FilterState{collapse(fs.state, pair, outcome)};
  } catch (const DegenerateCollapse& e) {
    throw FilterDivergence(std::string("filter deems observed outcome impossible: ") + e.what());
  }
}

inline FilterState filter_displace(const FilterState& fs, double alpha) {
  return FilterState{displacement(fs.dim(), alpha).apply(fs.state)};
}

// D_alpha M_s psi / ||M_s psi||, every operator at the filter truncation.
inline FilterState filter_update(const FilterState& fs, const MeasurementPair& pair,
                                 Outcome outcome, double alpha) {
  return filter_displace(filter_collapse(fs, pair, outcome), alpha);
}

}  // namespace fockstab
