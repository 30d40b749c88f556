#pragma once

#include <cmath>

#include "qwork/dynamics.hpp"
#include "qwork/models.hpp"
#include "qwork/operators.hpp"
#include "qwork/thermo.hpp"

namespace qwork {

/// Effective mean-force system Hamiltonian
/// H*_S(beta, t) = -(1/beta) ln Tr_B{ U_t e^{-beta H_S} (x) rho_B(0) U_t† }.
/// For dephasing interactions this equals H_S identically.
struct EffectiveHamiltonianResult {
  HermitianOperator h_star;
  double beta;
  double time;
};

namespace detail {

inline HermitianOperator effective_h_star(const SpectralDecomposition& full_h,
                                          const DephasingModel& m, double beta, double t) {
  const Index ds = m.system_dim(), db = m.env_dim();
  const double eps_min = m.system_energies.minCoeff();

  // Shifted e^{-beta(H_S - eps_min)} (x) rho_B; the shift returns as an
  // additive eps_min after the matrix logarithm.
  RealVector sys_weights(ds);
  for (Index n = 0; n < ds; ++n) sys_weights(n) = std::exp(-beta * (m.system_energies(n) - eps_min));
  const Matrix rho_b = thermal_state(m.env_hamiltonian, ThermalContext(beta)).mat();
  Matrix seed = Matrix::Zero(ds * db, ds * db);
  for (Index n = 0; n < ds; ++n) seed.block(n * db, n * db, db, db) = sys_weights(n) * rho_b;

  const Matrix u = full_h.propagator(t);
  const Matrix reduced = partial_trace_env(u * seed * u.adjoint(), ds, db);
  if (hermiticity_defect(reduced) > 1e-10)
    throw invariant_violation("effective_system_hamiltonian: reduced operator not Hermitian");

  const auto dec = eig_hermitian(HermitianOperator(reduced, 1e-10));
  if (dec.eigenvalues.minCoeff() <= 1e-300) {
    std::ostringstream os;
    os << "effective_system_hamiltonian: operand eigenvalue " << dec.eigenvalues.minCoeff()
       << " is not positive; matrix logarithm undefined";
    throw std::runtime_error(os.str());
  }
  Matrix h_star = dec.apply([beta](double x) { return Complex(-std::log(x) / beta, 0.0); });
  h_star.diagonal().array() += eps_min;
  return HermitianOperator(std::move(h_star), 1e-10);
}

}  // namespace detail

inline EffectiveHamiltonianResult effective_system_hamiltonian(const DephasingModel& m,
                                                               const ThermalContext& ctx,
                                                               double t) {
  if (t < 0.0) throw std::invalid_argument("effective_system_hamiltonian: time must be >= 0");
  const auto [h0, h] = assemble_total_hamiltonians(m);
  (void)h0;
  return EffectiveHamiltonianResult{detail::effective_h_star(eig_hermitian(h), m, ctx.beta, t),
                                    ctx.beta, t};
}

/// Strong-coupling internal energy
/// <E_S(t)> = Tr{ (H*_S + beta d_beta H*_S) rho_S(t) },
/// with the beta-derivative taken by central finite difference. The step is
/// halved once as a stability audit; for dephasing the derivative term
/// vanishes and the result equals Tr{H_S rho_S(t)}, independent of time.
inline double strong_coupling_internal_energy(const DephasingModel& m, const ThermalContext& ctx,
                                              double t, double delta_beta = 0.0) {
  if (t < 0.0) throw std::invalid_argument("strong_coupling_internal_energy: time must be >= 0");
  if (delta_beta == 0.0) delta_beta = 1e-5 * ctx.beta;
  if (!(delta_beta > 0.0) || !(delta_beta < 0.5 * ctx.beta))
    throw std::invalid_argument("strong_coupling_internal_energy: need 0 < delta_beta << beta");

  const auto [h0, h] = assemble_total_hamiltonians(m);
  const auto full = eig_hermitian(h);
  const Index ds = m.system_dim(), db = m.env_dim();
  const Matrix rho0 = thermal_state(h0, ctx).mat();
  const Matrix u = full.propagator(t);
  const Matrix rho_s_t = partial_trace_env(u * rho0 * u.adjoint(), ds, db);

  const Matrix h_star = detail::effective_h_star(full, m, ctx.beta, t).mat();
  const auto energy_at = [&](double step) {
    const Matrix hp = detail::effective_h_star(full, m, ctx.beta + step, t).mat();
    const Matrix hm = detail::effective_h_star(full, m, ctx.beta - step, t).mat();
    const Matrix deriv = (hp - hm) / (2.0 * step);
    return ((h_star + ctx.beta * deriv) * rho_s_t).trace().real();
  };

  const double coarse = energy_at(delta_beta);
  const double fine = energy_at(0.5 * delta_beta);
  if (std::abs(coarse - fine) > 1e-4) {
    std::ostringstream os;
    os << "strong_coupling_internal_energy: value moved by " << std::abs(coarse - fine)
       << " when the finite-difference step was halved; derivative is unstable";
    throw std::runtime_error(os.str());
  }
  return fine;
}

}  // namespace qwork
