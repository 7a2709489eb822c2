#pragma once

// Strict Lyapunov function for the target Fock state, its derivatives along
// displacements, and the two feedback laws driving the cavity toward |n_bar>.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fockstab/errors.hpp"
#include "fockstab/fock.hpp"

namespace fockstab {

// Weights sigma_0 .. sigma_dim for target n_bar. The entry at index dim lies
// one past the truncation and only feeds boundary terms; sigma_{-1} reads as 0.
class SigmaTable {
 public:
  SigmaTable(int target, std::vector<double> values)
      : target_(target), values_(std::move(values)) {}

  int target() const noexcept { return target_; }
  int dim() const noexcept { return static_cast<int>(values_.size()) - 1; }

  double operator[](int n) const {
    if (n < 0) return 0.0;
    return values_.at(static_cast<std::size_t>(n));
  }

  // sigma_0 .. sigma_{dim-1}
  std::span<const double> values() const noexcept {
    return std::span<const double>(values_).first(values_.size() - 1);
  }

 private:
  int target_;
  std::vector<double> values_;
};

inline SigmaTable sigma_table(int n_bar, int dim) {
  detail::require_dim(dim);
  if (n_bar < 0 || n_bar >= dim) {
    throw InvalidArgument("target photon number " + std::to_string(n_bar) +
                          " outside the truncation of dim " + std::to_string(dim));
  }
  std::vector<double> sigma(static_cast<std::size_t>(dim) + 1, 0.0);
  // Below the target: tail sums of 1/k - 1/k^2 down from n_bar.
  double below = 0.0;
  for (int n = n_bar - 1; n >= 0; --n) {
    const double k = n + 1;
    below += 1.0 / k - 1.0 / (k * k);
    sigma[n] = below;
  }
  if (n_bar > 0) sigma[0] += 0.125;
  // Above the target: partial harmonic sums of 1/k + 1/k^2.
  double above = 0.0;
  for (int n = n_bar + 1; n <= dim; ++n) {
    const double k = n;
    above += 1.0 / k + 1.0 / (k * k);
    sigma[n] = above;
  }
  return SigmaTable(n_bar, std::move(sigma));
}

// (n+1) sigma_{n+1} + n sigma_{n-1} - (2n+1) sigma_n: the weight of |c_n|^2 in
// the alpha^2 Taylor coefficient of V_hat(D_alpha psi).
inline double curvature_coefficient(const SigmaTable& sigma, int n) {
  return (n + 1) * sigma[n + 1] + n * sigma[n - 1] - (2 * n + 1) * sigma[n];
}

struct ControlParams {
  double alpha_bar = 0.1;
  double delta = 1.0 / 220.0;
  int n_bar = 3;
  double theta = 0.0;
  double phi = 0.0;
  double fd_step = 1e-3;

  double phase(int n) const noexcept { return theta + n * phi; }

  void validate(int filter_dim) const {
    if (!(alpha_bar > 0.0) || !std::isfinite(alpha_bar)) {
      throw ConfigError("alpha_bar", "must be finite and > 0");
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
      throw ConfigError("delta", "must be finite and >= 0");
    }
    if (!(fd_step > 0.0) || fd_step > alpha_bar / 10.0) {
      throw ConfigError("fd_step", "must lie in (0, alpha_bar/10]");
    }
    if (n_bar < 0 || n_bar >= filter_dim) {
      throw ConfigError("n_bar", "must lie in [0, filter_dim)");
    }
    if (!std::isfinite(theta)) throw ConfigError("theta", "must be finite");
    if (!std::isfinite(phi)) throw ConfigError("phi", "must be finite");
  }
};

namespace detail {

inline void require_sigma_dim(const StateVector& state, const SigmaTable& sigma) {
  require_same_dim(sigma.dim(), state.dim());
}

}  // namespace detail

// sum_n sigma_n |c_n|^2 over the truncation.
inline double vhat_value(const StateVector& state, const SigmaTable& sigma) {
  detail::require_sigma_dim(state, sigma);
  double v = 0.0;
  for (int n = 0; n < state.dim(); ++n) v += sigma[n] * state.population(n);
  return v;
}

// V(psi) = V_hat(psi) + delta (cos^4 + sin^4)(phi_nbar) - delta (||M_g psi||^4 + ||M_e psi||^4).
// Vanishes exactly at |n_bar>.
inline double lyapunov_value(const StateVector& state, const SigmaTable& sigma,
                             const ControlParams& params) {
  detail::require_sigma_dim(state, sigma);
  double weighted = 0.0;
  double p_g = 0.0;
  double p_e = 0.0;
  for (int n = 0; n < state.dim(); ++n) {
    const double pop = state.population(n);
    const double c = std::cos(params.phase(n));
    const double s = std::sin(params.phase(n));
    weighted += sigma[n] * pop;
    p_g += c * c * pop;
    p_e += s * s * pop;
  }
  const double c = std::cos(params.phase(params.n_bar));
  const double s = std::sin(params.phase(params.n_bar));
  const double c2 = c * c;
  const double s2 = s * s;
  return weighted + params.delta * (c2 * c2 + s2 * s2) - params.delta * (p_g * p_g + p_e * p_e);
}

struct VhatDerivatives {
  double first;
  double second;
};

// First and second derivative of alpha -> V_hat(D_alpha psi) at alpha = 0,
// with D_alpha = exp(alpha (a^dagger - a)) on the truncated space and
// c_{-1} = c_dim = 0. The truncated generator has no level above dim-1, so at
// the edge the weight one level up is the edge weight itself.
inline VhatDerivatives vhat_derivatives(const StateVector& state, const SigmaTable& sigma) {
  detail::require_sigma_dim(state, sigma);
  const int dim = state.dim();
  auto c = [&](int n) -> Complex { return (n < 0 || n >= dim) ? Complex{} : state[n]; };
  auto weight = [&](int n) { return sigma[std::min(n, dim - 1)]; };

  double first = 0.0;
  double second = 0.0;
  for (int n = 0; n < dim; ++n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double sn1 = std::sqrt(static_cast<double>(n + 1));
    // (G psi)_n = sqrt(n) c_{n-1} - sqrt(n+1) c_{n+1}
    const Complex g_psi = sn * c(n - 1) - sn1 * c(n + 1);
    first += sigma[n] * std::real(std::conj(c(n)) * g_psi);

    const double diagonal =
        (n + 1) * weight(n + 1) + n * weight(n - 1) - (2 * n + 1) * weight(n);
    const double cross = std::real(c(n - 1) * std::conj(c(n + 1))) * sn * sn1 *
                         (weight(n - 1) + weight(n + 1) - 2.0 * weight(n));
    second += state.population(n) * diagonal + cross;
  }
  // The bracketed sum is the alpha^2 Taylor coefficient; the derivative is twice it.
  return {2.0 * first, 2.0 * second};
}

// -2 (||M_g^2 psi||^2 - ||M_g psi||^4)^2 / (tr(M_g^2 rho) tr(M_e^2 rho)).
// The measurement-only drift of V equals delta times this value.
inline double measurement_drift_kernel(const StateVector& state, const MeasurementPair& pair) {
  detail::require_same_dim(pair.dim(), state.dim());
  double m2 = 0.0;
  double m4 = 0.0;
  for (int n = 0; n < state.dim(); ++n) {
    const double c2 = pair.eigenvalue(Outcome::g, n) * pair.eigenvalue(Outcome::g, n);
    m2 += c2 * state.population(n);
    m4 += c2 * c2 * state.population(n);
  }
  const double p_e = pair.probability(state, Outcome::e);
  const double variance = m4 - m2 * m2;
  if (m2 <= 0.0 || p_e <= 0.0) return 0.0;
  return -2.0 * variance * variance / (m2 * p_e);
}

enum class FeedbackLaw { lyapunov, finite_dim };

inline std::string to_string(FeedbackLaw law) {
  return law == FeedbackLaw::lyapunov ? "lyapunov" : "finite-dim";
}

inline FeedbackLaw feedback_law_from_string(const std::string& name) {
  if (name == "lyapunov") return FeedbackLaw::lyapunov;
  if (name == "finite-dim") return FeedbackLaw::finite_dim;
  throw ConfigError("law", "expected 'lyapunov' or 'finite-dim', got '" + name + "'");
}

namespace detail {

inline double lyapunov_after_displacement(const StateVector& state, double alpha,
                                          const SigmaTable& sigma, const ControlParams& params) {
  if (alpha == 0.0) return lyapunov_value(state, sigma, params);
  return lyapunov_value(displacement(state.dim(), alpha).apply(state), sigma, params);
}

// Candidate a beats b when strictly lower beyond round-off, otherwise on
// smaller |alpha|, then on negative sign.
inline bool candidate_precedes(double value_a, double alpha_a, double value_b, double alpha_b) {
  const double tol = 1e-13 * std::max(1.0, std::max(std::abs(value_a), std::abs(value_b)));
  if (value_a < value_b - tol) return true;
  if (value_b < value_a - tol) return false;
  if (std::abs(alpha_a) != std::abs(alpha_b)) return std::abs(alpha_a) < std::abs(alpha_b);
  return alpha_a < alpha_b;
}

}  // namespace detail

// Minimizes alpha -> V(D_alpha psi) over [-alpha_bar, alpha_bar] through a
// quadratic fitted to exact values at {-h, 0, h}. The returned control is the
// best of {fitted minimizer, 0, -alpha_bar, +alpha_bar} under exact V, so it
// never increases V.
inline double choose_alpha_lyapunov(const StateVector& state, const SigmaTable& sigma,
                                    const ControlParams& params) {
  const double h = params.fd_step;
  const double bound = params.alpha_bar;
  const double g_minus = detail::lyapunov_after_displacement(state, -h, sigma, params);
  const double g_zero = lyapunov_value(state, sigma, params);
  const double g_plus = detail::lyapunov_after_displacement(state, h, sigma, params);

  // q(alpha) = curvature alpha^2 + slope alpha + g_zero
  const double curvature = (g_plus + g_minus - 2.0 * g_zero) / (2.0 * h * h);
  const double slope = (g_plus - g_minus) / (2.0 * h);
  auto quadratic = [&](double a) { return curvature * a * a + slope * a + g_zero; };

  double fitted;
  if (curvature > 0.0) {
    fitted = std::clamp(-slope / (2.0 * curvature), -bound, bound);
  } else {
    fitted = quadratic(bound) < quadratic(-bound) ? bound : -bound;
  }

  const std::array<double, 4> candidates{fitted, 0.0, -bound, bound};
  double best_alpha = 0.0;
  double best_value = g_zero;
  for (double a : candidates) {
    const double v =
        a == 0.0 ? g_zero : detail::lyapunov_after_displacement(state, a, sigma, params);
    if (detail::candidate_precedes(v, a, best_value, best_alpha)) {
      best_value = v;
      best_alpha = a;
    }
  }
  return best_alpha;
}

// Fidelity-threshold law designed on a finite-dimensional model:
// alpha_bar when |<n_bar|psi>|^2 <= 1/10, otherwise
// <psi|[ |n_bar><n_bar|, a^dagger - a ]|psi> / (4 n_bar + 2).
inline double choose_alpha_finite_dim(const StateVector& state, int n_bar, double alpha_bar) {
  const double fidelity = fidelity_to_fock(state, n_bar);
  if (fidelity <= 0.1) return alpha_bar;

  const int dim = state.dim();
  auto c = [&](int n) -> Complex { return (n < 0 || n >= dim) ? Complex{} : state[n]; };
  const double down = std::sqrt(static_cast<double>(n_bar));
  const double up = std::sqrt(static_cast<double>(n_bar + 1));
  // <psi|P G|psi> = conj(c_nbar) (G psi)_nbar ; <psi|G P|psi> = <psi|G|n_bar> c_nbar
  const Complex pg = std::conj(c(n_bar)) * (down * c(n_bar - 1) - up * c(n_bar + 1));
  const Complex gp = (up * std::conj(c(n_bar + 1)) - down * std::conj(c(n_bar - 1))) * c(n_bar);
  const Complex commutator = pg - gp;
  if (std::abs(commutator.imag()) >= 1e-10) {
    throw Error("commutator expectation has imaginary residue " +
                std::to_string(commutator.imag()));
  }
  return commutator.real() / (4.0 * n_bar + 2.0);
}

inline double choose_alpha(FeedbackLaw law, const StateVector& state, const SigmaTable& sigma,
                           const ControlParams& params) {
  switch (law) {
    case FeedbackLaw::lyapunov:
      return choose_alpha_lyapunov(state, sigma, params);
    case FeedbackLaw::finite_dim:
      return choose_alpha_finite_dim(state, params.n_bar, params.alpha_bar);
  }
  throw InvalidArgument("unknown feedback law");
}

// One-step conditional drift E[V(psi_{k+1}) | psi_k] - V(psi_k), split into the
// control part k1 and the measurement part k2. Exact two-outcome expectation.
struct StepDrift {
  double total;
  double k1;
  double k2;
};

inline StepDrift expected_step_drift(const StateVector& state, FeedbackLaw law,
                                     const SigmaTable& sigma, const ControlParams& params) {
  const MeasurementPair pair(state.dim(), params.theta, params.phi);
  const double v0 = lyapunov_value(state, sigma, params);
  double after_measurement = 0.0;
  double after_control = 0.0;
  for (Outcome s : {Outcome::g, Outcome::e}) {
    const double p = pair.probability(state, s);
    if (p * p < kCollapseFloor * kCollapseFloor) continue;
    const StateVector half = collapse(state, pair, s);
    const double alpha = choose_alpha(law, half, sigma, params);
    after_measurement += p * lyapunov_value(half, sigma, params);
    after_control += p * detail::lyapunov_after_displacement(half, alpha, sigma, params);
  }
  const double total = after_control - v0;
  const double k2 = after_measurement - v0;
  return {total, total - k2, k2};
}

}  // namespace fockstab
