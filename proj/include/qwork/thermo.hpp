#pragma once

#include <cmath>

#include "qwork/operators.hpp"

namespace qwork {

/// Inverse temperature. Finite and strictly positive; the beta -> 0 and
/// beta -> infinity limits are handled analytically in tests, never here.
struct ThermalContext {
  double beta;

  explicit ThermalContext(double b) : beta(b) {
    if (!std::isfinite(b) || !(b > 0.0))
      throw std::invalid_argument("ThermalContext: beta must be finite and positive");
  }
};

/// ln Tr e^{-beta H} from the spectrum, stabilized by shifting out the
/// ground-state energy before exponentiating.
inline double log_partition_function(const RealVector& eigenvalues, double beta) {
  const double e_min = eigenvalues.minCoeff();
  double acc = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) acc += std::exp(-beta * (eigenvalues(i) - e_min));
  return std::log(acc) - beta * e_min;
}

inline double free_energy_from_eigenvalues(const RealVector& eigenvalues, double beta) {
  return -log_partition_function(eigenvalues, beta) / beta;
}

inline double free_energy(const HermitianOperator& h, const ThermalContext& ctx) {
  return free_energy_from_eigenvalues(eig_hermitian(h).eigenvalues, ctx.beta);
}

/// Normalized Boltzmann weights e^{-beta E_i} / Z, max-shifted so the
/// largest exponent is zero.
inline RealVector gibbs_weights(const RealVector& eigenvalues, double beta) {
  const double e_min = eigenvalues.minCoeff();
  RealVector w(eigenvalues.size());
  for (Index i = 0; i < eigenvalues.size(); ++i) w(i) = std::exp(-beta * (eigenvalues(i) - e_min));
  w /= w.sum();
  return w;
}

inline DensityOperator thermal_state(const SpectralDecomposition& s, const ThermalContext& ctx) {
  return DensityOperator::from_eigensystem(s.eigenvectors, gibbs_weights(s.eigenvalues, ctx.beta));
}

/// e^{-beta H} / Tr e^{-beta H}.
inline DensityOperator thermal_state(const HermitianOperator& h, const ThermalContext& ctx) {
  return thermal_state(eig_hermitian(h), ctx);
}

}  // namespace qwork
