#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "qwork/models.hpp"
#include "qwork/operators.hpp"
#include "qwork/parallel.hpp"
#include "qwork/thermo.hpp"
#include "qwork/work_stats.hpp"

namespace qwork {

/// e^{-iHt}, exact through the spectral decomposition.
inline Matrix propagate(const SpectralDecomposition& s, double t) { return s.propagator(t); }
inline Matrix propagate(const HermitianOperator& h, double t) {
  return eig_hermitian(h).propagator(t);
}

/// Environment branch states |phi_n(t)> = e^{-i(eps_n + H_B + B_n)t} |phi_0>,
/// one per system level. The global phase convention keeps the eps_n factor.
struct BranchStateSet {
  double time = 0.0;
  std::vector<Vector> states;
};

inline BranchStateSet branch_states(const DephasingModel& m, const Vector& phi0, double t) {
  if (phi0.size() != m.env_dim())
    throw std::invalid_argument("branch_states: initial state dimension mismatch");
  if (std::abs(phi0.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("branch_states: initial state must be normalized");
  BranchStateSet bs;
  bs.time = t;
  bs.states.resize(m.system_dim());
  parallel_for(m.system_dim(), [&](std::size_t n) {
    const Complex phase = std::exp(Complex(0.0, -m.system_energies(n) * t));
    bs.states[n] = phase * (eig_hermitian(m.block(n)).propagator(t) * phi0);
  });
  for (const auto& s : bs.states)
    if (std::abs(s.norm() - 1.0) > 1e-10)
      throw invariant_violation("branch_states: branch norm drifted from 1");
  return bs;
}

inline double log_overlap_modulus(Complex overlap) {
  const double a = std::abs(overlap);
  if (a < 1e-300) return -std::numeric_limits<double>::infinity();
  return std::log(a);
}

/// Decoherence function Gamma_nm = ln |<phi_n|phi_m>|, zero on the diagonal.
/// Symmetric and nonpositive; positive values beyond roundoff are a bug.
inline RealMatrix decoherence_function(const BranchStateSet& bs) {
  const Index d = static_cast<Index>(bs.states.size());
  RealMatrix g = RealMatrix::Zero(d, d);
  for (Index n = 0; n < d; ++n)
    for (Index m = n + 1; m < d; ++m) {
      const double v = log_overlap_modulus(bs.states[n].dot(bs.states[m]));
      if (v > 1e-12) throw invariant_violation("decoherence_function: positive Gamma");
      g(n, m) = g(m, n) = std::min(v, 0.0);
    }
  return g;
}

// ---------------------------------------------------------------------------
// Time-dependent couplings
// ---------------------------------------------------------------------------

/// Per-level coupling schedule B_n(t) sampled on a uniform grid of `steps`
/// midpoint intervals covering [0, total_time].
struct CouplingSchedule {
  std::vector<std::function<Matrix(double)>> couplings;
  double total_time = 0.0;
  int steps = 1024;

  const std::function<Matrix(double)>& level(Index n) const { return couplings.at(n); }
  Index levels() const { return static_cast<Index>(couplings.size()); }
};

/// B_n(t) = B_n.
inline CouplingSchedule constant_schedule(const DephasingModel& m, double total_time,
                                          int steps = 1024) {
  CouplingSchedule cs{{}, total_time, steps};
  for (Index n = 0; n < m.system_dim(); ++n) {
    Matrix b = m.couplings[n].mat();
    cs.couplings.push_back([b](double) { return b; });
  }
  return cs;
}

/// B_n(t) = (t / T) B_n, so B_n(0) = 0 and B_n(T) = B_n.
inline CouplingSchedule linear_ramp_schedule(const DephasingModel& m, double total_time,
                                             int steps = 1024) {
  CouplingSchedule cs{{}, total_time, steps};
  for (Index n = 0; n < m.system_dim(); ++n) {
    Matrix b = m.couplings[n].mat();
    const double T = total_time;
    cs.couplings.push_back([b, T](double t) { return Matrix((t / T) * b); });
  }
  return cs;
}

/// B_n(t) = B_n for t <= t1, zero afterwards.
inline CouplingSchedule quench_off_schedule(const DephasingModel& m, double t1, double total_time,
                                            int steps = 1024) {
  CouplingSchedule cs{{}, total_time, steps};
  for (Index n = 0; n < m.system_dim(); ++n) {
    Matrix b = m.couplings[n].mat();
    cs.couplings.push_back(
        [b, t1](double t) { return t <= t1 ? b : Matrix(Matrix::Zero(b.rows(), b.cols())); });
  }
  return cs;
}

/// V_n(t): time-ordered exponential of the interaction-picture coupling.
struct TimeOrderedPropagator {
  Matrix v;
  double time = 0.0;
  double unitarity_defect = 0.0;   // max-abs of V†V - I
  double refinement_defect = 0.0;  // max-abs change when the step is halved
};

namespace detail {

inline Matrix midpoint_product(const CouplingSchedule& cs, const SpectralDecomposition& env,
                               Index level, int steps) {
  const double dt = cs.total_time / steps;
  const Index d = env.dim();
  Matrix v = Matrix::Identity(d, d);
  for (int k = 0; k < steps; ++k) {
    const double tm = (k + 0.5) * dt;
    const Matrix b = cs.level(level)(tm);
    if (hermiticity_defect(b) > kHermitianTol)
      throw std::invalid_argument("time_ordered_V: schedule returned a non-Hermitian coupling");
    const Matrix to_ip = env.propagator(-tm);  // e^{+i H_B tm}
    const HermitianOperator b_ip(to_ip * b * to_ip.adjoint(), 1e-10);
    v = eig_hermitian(b_ip).apply([dt](double x) {
          return std::exp(Complex(0.0, -x * dt));
        }) *
        v;
  }
  return v;
}

}  // namespace detail

/// Midpoint product formula, second order in the step. The result is computed
/// at the schedule's step count and again at half the step; the difference is
/// the accuracy audit and must stay below `audit_tol`. The finer result is
/// returned.
inline TimeOrderedPropagator time_ordered_V(const CouplingSchedule& cs,
                                            const SpectralDecomposition& env, Index level,
                                            double audit_tol = 1e-6) {
  if (cs.steps < 1) throw std::invalid_argument("time_ordered_V: need at least one step");
  const Matrix coarse = detail::midpoint_product(cs, env, level, cs.steps);
  Matrix fine = detail::midpoint_product(cs, env, level, 2 * cs.steps);
  TimeOrderedPropagator p;
  p.time = cs.total_time;
  p.refinement_defect = max_abs(coarse - fine);
  p.unitarity_defect =
      max_abs(fine.adjoint() * fine - Matrix::Identity(env.dim(), env.dim()));
  if (p.unitarity_defect > 1e-8) {
    std::ostringstream os;
    os << "time_ordered_V: unitarity defect " << p.unitarity_defect
       << " exceeds 1e-8; decrease the step size";
    throw std::runtime_error(os.str());
  }
  if (p.refinement_defect > audit_tol) {
    std::ostringstream os;
    os << "time_ordered_V: halving the step moved the result by " << p.refinement_defect
       << " (audit tolerance " << audit_tol << "); the grid does not resolve the schedule";
    throw std::runtime_error(os.str());
  }
  p.v = std::move(fine);
  return p;
}

/// V_n sampled along a uniform grid: entry i is V_n(i T / grid_points),
/// accumulated incrementally with at least the schedule's step density.
inline std::vector<Matrix> time_ordered_V_grid(const CouplingSchedule& cs,
                                               const SpectralDecomposition& env, Index level,
                                               int grid_points) {
  if (grid_points < 1) throw std::invalid_argument("time_ordered_V_grid: need grid_points >= 1");
  const int per_interval = std::max(1, (cs.steps + grid_points - 1) / grid_points);
  const int total = per_interval * grid_points;
  const double dt = cs.total_time / total;
  const Index d = env.dim();
  std::vector<Matrix> out;
  out.reserve(grid_points + 1);
  Matrix v = Matrix::Identity(d, d);
  out.push_back(v);
  for (int g = 0; g < grid_points; ++g) {
    for (int s = 0; s < per_interval; ++s) {
      const double tm = (g * per_interval + s + 0.5) * dt;
      const Matrix b = cs.level(level)(tm);
      const Matrix to_ip = env.propagator(-tm);
      const HermitianOperator b_ip(to_ip * b * to_ip.adjoint(), 1e-10);
      v = eig_hermitian(b_ip).apply([dt](double x) {
            return std::exp(Complex(0.0, -x * dt));
          }) *
          v;
    }
    out.push_back(v);
  }
  return out;
}

/// p^B_{nk|m} = |<E^n_k(t)| e^{-i H_B t} V_n(t) |E_m>|^2 for the final-time
/// block eigenbasis. Doubly stochastic within the product-formula tolerance.
inline RealMatrix td_transition_probs(const Matrix& v, const SpectralDecomposition& env,
                                      const SpectralDecomposition& final_block, double t) {
  const Matrix amp = final_block.eigenvectors.adjoint() * env.propagator(t) * v * env.eigenvectors;
  RealMatrix p = amp.cwiseAbs2();
  detail::check_doubly_stochastic(p, 1e-8);
  return p;
}

/// Mean work for level n under a time-dependent coupling:
/// Tr{(V† H_B V - H_B) rho_B} + Tr{V† B^I_n(t) V rho_B}.
inline double td_mean_work_per_level(const Matrix& v, const CouplingSchedule& cs,
                                     const SpectralDecomposition& env, const DensityOperator& rho_b,
                                     Index level) {
  const double t = cs.total_time;
  const Matrix hb = env.reconstruct();
  const Matrix to_ip = env.propagator(-t);
  const Matrix b_ip = to_ip * cs.level(level)(t) * to_ip.adjoint();
  const Complex term1 = ((v.adjoint() * hb * v - hb) * rho_b.mat()).trace();
  const Complex term2 = (v.adjoint() * b_ip * v * rho_b.mat()).trace();
  return (term1 + term2).real();
}

/// Gamma_nm(t) = ln |Tr{V_m†(t) V_n(t) rho_B(0)}|.
inline double decoherence_from_propagators(const Matrix& v_n, const Matrix& v_m,
                                           const DensityOperator& rho_b) {
  return log_overlap_modulus((v_m.adjoint() * v_n * rho_b.mat()).trace());
}

/// Full pairwise decoherence matrix for a static model at time t, from the
/// exact block propagators: Gamma_nm = ln |Tr{e^{i(H_B+B_m)t} e^{-i(H_B+B_n)t} rho_B}|.
inline RealMatrix decoherence_matrix_static(const DephasingModel& m, const DensityOperator& rho_b,
                                            double t) {
  const Index ds = m.system_dim();
  std::vector<Matrix> props(ds);
  parallel_for(ds, [&](std::size_t n) { props[n] = eig_hermitian(m.block(n)).propagator(t); });
  RealMatrix g = RealMatrix::Zero(ds, ds);
  for (Index n = 0; n < ds; ++n)
    for (Index mm = n + 1; mm < ds; ++mm) {
      const double v = log_overlap_modulus((props[mm].adjoint() * props[n] * rho_b.mat()).trace());
      g(n, mm) = g(mm, n) = std::min(v, 0.0);
    }
  return g;
}

/// Work distribution for a time-dependent protocol ending at time T: blocks
/// H_B + B_n(T), transitions through e^{-i H_B T} V_n(T).
inline BlockWorkSet td_block_work_set(const HermitianOperator& h_b, const CouplingSchedule& cs,
                                      const ThermalContext& ctx) {
  const auto env = eig_hermitian(h_b);
  const Index db = h_b.dim(), ds = cs.levels();
  const double t = cs.total_time;

  BlockWorkSet bw;
  bw.env_spectrum = env.eigenvalues;
  bw.env_populations = gibbs_weights(env.eigenvalues, ctx.beta);
  bw.env_free_energy = free_energy_from_eigenvalues(env.eigenvalues, ctx.beta);
  bw.per_level.resize(ds);
  bw.block_free_energies.resize(ds);
  bw.block_spectra.resize(ds);
  bw.transitions.resize(ds);

  std::vector<SpectralDecomposition> blocks(ds);
  std::vector<Matrix> vs(ds);
  parallel_for(ds, [&](std::size_t n) {
    blocks[n] = eig_hermitian(h_b + HermitianOperator(cs.level(n)(t)));
    vs[n] = time_ordered_V(cs, env, n).v;
  });

  double scale = env.eigenvalues.cwiseAbs().maxCoeff();
  for (Index n = 0; n < ds; ++n)
    scale = std::max(scale, blocks[n].eigenvalues.cwiseAbs().maxCoeff());
  bw.scale = scale;

  for (Index n = 0; n < ds; ++n) {
    RealMatrix probs = td_transition_probs(vs[n], env, blocks[n], t);
    std::vector<WorkAtom> atoms;
    atoms.reserve(db * db);
    for (Index k = 0; k < db; ++k)
      for (Index mm = 0; mm < db; ++mm)
        atoms.push_back(WorkAtom{blocks[n].eigenvalues(k) - env.eigenvalues(mm),
                                 bw.env_populations(mm) * probs(k, mm)});
    bw.per_level[n] = make_work_distribution(std::move(atoms), scale);
    bw.block_free_energies[n] = free_energy_from_eigenvalues(blocks[n].eigenvalues, ctx.beta);
    bw.block_spectra[n] = blocks[n].eigenvalues;
    bw.transitions[n] = std::move(probs);
  }
  return bw;
}

/// <Delta E_S> and the maximum system-population drift at time t, both of
/// which vanish identically for dephasing interactions.
struct SystemEnergyInvariance {
  double delta_e_s = 0.0;
  double max_population_drift = 0.0;
};

inline SystemEnergyInvariance system_energy_invariance(const DephasingModel& m,
                                                       const ThermalContext& ctx, double t) {
  const auto [h0, h] = assemble_total_hamiltonians(m);
  const Index ds = m.system_dim(), db = m.env_dim();
  const Matrix rho0 = thermal_state(h0, ctx).mat();
  const Matrix u = eig_hermitian(h).propagator(t);
  const Matrix rho_t = u * rho0 * u.adjoint();

  Matrix hs_full = Matrix::Zero(ds * db, ds * db);
  for (Index n = 0; n < ds; ++n)
    hs_full.block(n * db, n * db, db, db) =
        m.system_energies(n) * Matrix::Identity(db, db);

  SystemEnergyInvariance r;
  r.delta_e_s = (hs_full * (rho_t - rho0)).trace().real();
  const Matrix rs0 = partial_trace_env(rho0, ds, db);
  const Matrix rst = partial_trace_env(rho_t, ds, db);
  for (Index n = 0; n < ds; ++n)
    r.max_population_drift =
        std::max(r.max_population_drift, std::abs((rst(n, n) - rs0(n, n)).real()));
  return r;
}

}  // namespace qwork
