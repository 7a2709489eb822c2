#pragma once

// Truncated Fock-space linear algebra: states, ladder operators, the QND
// measurement pair, the displacement operator and measurement collapse.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "fockstab/errors.hpp"

namespace fockstab {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr int kMinDim = 2;

namespace detail {

inline void require_dim(int dim) {
  if (dim < kMinDim) {
    throw InvalidDimension("Fock truncation must have dim >= 2, got " + std::to_string(dim));
  }
}

inline void require_same_dim(int expected, int actual) {
  if (expected != actual) throw DimensionMismatch(expected, actual);
}

}  // namespace detail

// Amplitudes c_n = <n|psi> over the truncated basis |0>..|dim-1>.
// Construction checks shape and finiteness; normalization is explicit.
class StateVector {
 public:
  explicit StateVector(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
    detail::require_dim(static_cast<int>(amplitudes_.size()));
    if (!amplitudes_.allFinite()) throw InvalidArgument("state amplitudes must be finite");
  }

  // Rescales to unit norm; a zero vector cannot be normalized.
  static StateVector normalized(ComplexVector amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw InvalidArgument("cannot normalize a zero or non-finite vector");
    }
    amplitudes /= n;
    return StateVector(std::move(amplitudes));
  }

  static StateVector basis(int dim, int n) {
    detail::require_dim(dim);
    if (n < 0 || n >= dim) {
      throw InvalidArgument("basis index " + std::to_string(n) + " outside [0, " +
                            std::to_string(dim) + ")");
    }
    ComplexVector v = ComplexVector::Zero(dim);
    v(n) = 1.0;
    return StateVector(std::move(v));
  }

  int dim() const noexcept { return static_cast<int>(amplitudes_.size()); }
  const ComplexVector& amplitudes() const noexcept { return amplitudes_; }
  Complex operator[](int n) const { return amplitudes_(n); }
  double norm() const { return amplitudes_.norm(); }

  // |c_n|^2, zero outside the truncation.
  double population(int n) const {
    return (n < 0 || n >= dim()) ? 0.0 : std::norm(amplitudes_(n));
  }

 private:
  ComplexVector amplitudes_;
};

// Dense square operator on a truncated Fock space.
class FockOperator {
 public:
  explicit FockOperator(ComplexMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) {
      throw InvalidDimension("Fock operator must be square");
    }
    detail::require_dim(static_cast<int>(entries_.rows()));
  }

  static FockOperator identity(int dim) {
    detail::require_dim(dim);
    return FockOperator(ComplexMatrix::Identity(dim, dim));
  }

  int dim() const noexcept { return static_cast<int>(entries_.rows()); }
  const ComplexMatrix& entries() const noexcept { return entries_; }
  Complex operator()(int row, int col) const { return entries_(row, col); }

  FockOperator adjoint() const { return FockOperator(entries_.adjoint()); }

  StateVector apply(const StateVector& state) const {
    detail::require_same_dim(dim(), state.dim());
    return StateVector(entries_ * state.amplitudes());
  }

  friend FockOperator operator*(const FockOperator& lhs, const FockOperator& rhs) {
    detail::require_same_dim(lhs.dim(), rhs.dim());
    return FockOperator(lhs.entries_ * rhs.entries_);
  }

 private:
  ComplexMatrix entries_;
};

// a|n> = sqrt(n)|n-1>
inline FockOperator make_annihilation(int dim) {
  detail::require_dim(dim);
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return FockOperator(std::move(m));
}

inline FockOperator make_creation(int dim) { return make_annihilation(dim).adjoint(); }

// diag(0, 1, ..., dim-1); coincides with a^dagger a in the truncation.
inline FockOperator make_number(int dim) {
  detail::require_dim(dim);
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) m(n, n) = static_cast<double>(n);
  return FockOperator(std::move(m));
}

enum class Outcome : std::uint8_t { g, e };

inline char to_char(Outcome s) noexcept { return s == Outcome::g ? 'g' : 'e'; }

inline Outcome outcome_from_char(char c) {
  if (c == 'g') return Outcome::g;
  if (c == 'e') return Outcome::e;
  throw InvalidArgument(std::string("unknown measurement outcome '") + c + "'");
}

// M_g = cos(theta + N phi), M_e = sin(theta + N phi). Both diagonal and real,
// so the diagonals are kept alongside the dense operators.
class MeasurementPair {
 public:
  MeasurementPair(int dim, double theta, double phi)
      : theta_(theta), phi_(phi), cos_(dim), sin_(dim) {
    detail::require_dim(dim);
    if (!std::isfinite(theta) || !std::isfinite(phi)) {
      throw InvalidArgument("theta and phi must be finite");
    }
    for (int n = 0; n < dim; ++n) {
      const double angle = theta + n * phi;
      cos_(n) = std::cos(angle);
      sin_(n) = std::sin(angle);
    }
  }

  int dim() const noexcept { return static_cast<int>(cos_.size()); }
  double theta() const noexcept { return theta_; }
  double phi() const noexcept { return phi_; }

  // Diagonal entry of M_s at photon number n.
  double eigenvalue(Outcome s, int n) const { return s == Outcome::g ? cos_(n) : sin_(n); }
  const Eigen::VectorXd& diagonal(Outcome s) const noexcept {
    return s == Outcome::g ? cos_ : sin_;
  }

  FockOperator m_g() const { return as_operator(cos_); }
  FockOperator m_e() const { return as_operator(sin_); }

  // ||M_s psi||^2
  double probability(const StateVector& state, Outcome s) const {
    detail::require_same_dim(dim(), state.dim());
    const Eigen::VectorXd& d = diagonal(s);
    double p = 0.0;
    for (int n = 0; n < dim(); ++n) p += d(n) * d(n) * state.population(n);
    return p;
  }

  // M_s psi, unnormalized.
  ComplexVector apply(const StateVector& state, Outcome s) const {
    detail::require_same_dim(dim(), state.dim());
    return diagonal(s).cast<Complex>().cwiseProduct(state.amplitudes());
  }

 private:
  static FockOperator as_operator(const Eigen::VectorXd& d) {
    return FockOperator(d.cast<Complex>().asDiagonal().toDenseMatrix());
  }

  double theta_;
  double phi_;
  Eigen::VectorXd cos_;
  Eigen::VectorXd sin_;
};

inline MeasurementPair make_measurement_pair(int dim, double theta, double phi) {
  return MeasurementPair(dim, theta, phi);
}

// exp(alpha (a^dagger - a)) built from the truncated generator, which is real
// antisymmetric, so the result is real orthogonal in the truncation.
inline FockOperator displacement(int dim, double alpha) {
  detail::require_dim(dim);
  if (!std::isfinite(alpha)) throw InvalidArgument("displacement amplitude must be finite");
  if (alpha == 0.0) return FockOperator::identity(dim);
  Eigen::MatrixXd generator = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) {
    const double s = alpha * std::sqrt(static_cast<double>(n));
    generator(n, n - 1) = s;   // a^dagger
    generator(n - 1, n) = -s;  // -a
  }
  Eigen::MatrixXd d = generator.exp();
  return FockOperator(d.cast<Complex>());
}

// Poisson amplitudes sqrt(mean^n / n!) cut at dim-1 and renormalized.
inline StateVector coherent_state(int dim, double mean) {
  detail::require_dim(dim);
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw InvalidArgument("coherent-state mean photon number must be finite and >= 0");
  }
  ComplexVector c = ComplexVector::Zero(dim);
  // Recurrence c_n = c_{n-1} sqrt(mean / n) avoids factorial overflow.
  double amplitude = 1.0;
  c(0) = amplitude;
  for (int n = 1; n < dim; ++n) {
    amplitude *= std::sqrt(mean / n);
    c(n) = amplitude;
  }
  return StateVector::normalized(std::move(c));
}

// Below this norm a collapsed branch is treated as impossible.
inline constexpr double kCollapseFloor = 1e-12;

// M_s psi / ||M_s psi||.
inline StateVector collapse(const StateVector& state, const MeasurementPair& pair, Outcome s) {
  ComplexVector v = pair.apply(state, s);
  const double n = v.norm();
  if (!(n >= kCollapseFloor)) {
    throw DegenerateCollapse(std::string("branch '") + to_char(s) +
                             "' has norm " + std::to_string(n));
  }
  v /= n;
  return StateVector(std::move(v));
}

struct MeasurementResult {
  Outcome outcome;
  StateVector state;
  double p_g;
};

// Samples one QND measurement from a single uniform draw: outcome g iff u < p_g.
inline MeasurementResult measure_step(const StateVector& state, const MeasurementPair& pair,
                                      double u) {
  if (!(u >= 0.0 && u < 1.0)) throw InvalidArgument("uniform draw must lie in [0, 1)");
  const double p_g = pair.probability(state, Outcome::g);
  const Outcome s = u < p_g ? Outcome::g : Outcome::e;
  return {s, collapse(state, pair, s), p_g};
}

inline double fidelity_to_fock(const StateVector& state, int n) {
  if (n < 0 || n >= state.dim()) {
    throw InvalidArgument("photon number " + std::to_string(n) + " outside the truncation");
  }
  return state.population(n);
}

}  // namespace fockstab
