#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "qwork/models.hpp"
#include "qwork/operators.hpp"
#include "qwork/parallel.hpp"
#include "qwork/thermo.hpp"

namespace qwork {

inline double log_sum_exp(const std::vector<double>& log_terms) {
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

struct WorkAtom {
  double w;  // energy
  double p;  // probability
};

/// Discrete work probability measure: atoms (w_i, p_i) with strictly
/// ascending w after coalescing. `scale` is the spectral scale used for the
/// coalescing window 1e-9 * max(1, scale).
struct WorkDistribution {
  std::vector<WorkAtom> atoms;
  double scale = 1.0;

  double total_probability() const {
    return std::accumulate(atoms.begin(), atoms.end(), 0.0,
                           [](double s, const WorkAtom& a) { return s + a.p; });
  }
  double mean() const {
    return std::accumulate(atoms.begin(), atoms.end(), 0.0,
                           [](double s, const WorkAtom& a) { return s + a.p * a.w; });
  }
  double moment(int order) const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.p * std::pow(a.w, order);
    return s;
  }
  /// ln <e^{-beta w}>, max-shifted.
  double log_exp_moment(double beta) const {
    std::vector<double> terms;
    terms.reserve(atoms.size());
    for (const auto& a : atoms) terms.push_back(std::log(a.p) - beta * a.w);
    return log_sum_exp(terms);
  }
};

// Merged atoms below this weight are discarded: they are squared roundoff of
// orthogonal eigenvector overlaps (~1e-32), far below any thermal population
// at desk scale, and keeping them would clutter rigid-shift distributions
// whose exact answer is a single atom.
inline constexpr double kNegligibleAtomWeight = 1e-28;

/// Sorts, merges atoms closer than the scale-aware window (weights add, the
/// merged position is the probability-weighted mean), clips roundoff-negative
/// weights, drops negligible clusters, and validates normalization.
inline WorkDistribution make_work_distribution(std::vector<WorkAtom> raw, double scale) {
  std::sort(raw.begin(), raw.end(), [](const WorkAtom& a, const WorkAtom& b) { return a.w < b.w; });
  const double window = kCoalesceTol * std::max(1.0, scale);
  WorkDistribution d;
  d.scale = scale;
  d.atoms.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const double anchor = raw[i].w;
    double psum = 0.0, wsum = 0.0;
    std::size_t j = i;
    for (; j < raw.size() && raw[j].w - anchor <= window; ++j) {
      psum += raw[j].p;
      wsum += raw[j].p * raw[j].w;
    }
    if (psum < -1e-14) throw invariant_violation("work distribution: negative atom weight");
    if (psum > kNegligibleAtomWeight) d.atoms.push_back(WorkAtom{wsum / psum, psum});
    i = j;
  }
  const double total = d.total_probability();
  if (std::abs(total - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "work distribution: total probability " << total << " deviates from 1";
    throw invariant_violation(os.str());
  }
  return d;
}

/// Largest probability discrepancy between two coalesced distributions.
/// Atoms within the shared coalescing window are matched pairwise; an
/// unmatched atom contributes its whole weight. This is the metric used for
/// oracle-equivalence checks between the block route and the full-space TPM.
inline double atomwise_distance(const WorkDistribution& a, const WorkDistribution& b) {
  const double window = 2.0 * kCoalesceTol * std::max(1.0, std::max(a.scale, b.scale));
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.atoms.size() && j < b.atoms.size()) {
    if (std::abs(a.atoms[i].w - b.atoms[j].w) <= window) {
      worst = std::max(worst, std::abs(a.atoms[i].p - b.atoms[j].p));
      ++i;
      ++j;
    } else if (a.atoms[i].w < b.atoms[j].w) {
      worst = std::max(worst, a.atoms[i].p);
      ++i;
    } else {
      worst = std::max(worst, b.atoms[j].p);
      ++j;
    }
  }
  for (; i < a.atoms.size(); ++i) worst = std::max(worst, a.atoms[i].p);
  for (; j < b.atoms.size(); ++j) worst = std::max(worst, b.atoms[j].p);
  return worst;
}

/// Per-level work data from the block decomposition: distributions p_n(w),
/// block spectra {E^n_k}, block free energies F^n_B, environment spectrum and
/// thermal populations, and the transition matrices |<E^n_k|E_m>|^2.
///
/// When `identity_transitions` is set (commuting fast path), block_spectra[n]
/// is aligned index-by-index with env_spectrum and the transition matrices
/// are identity; `transitions` is left empty.
struct BlockWorkSet {
  std::vector<WorkDistribution> per_level;
  std::vector<double> block_free_energies;
  double env_free_energy = 0.0;
  RealVector env_spectrum;
  RealVector env_populations;
  std::vector<RealVector> block_spectra;
  std::vector<RealMatrix> transitions;
  bool identity_transitions = false;
  double scale = 1.0;

  Index levels() const { return static_cast<Index>(per_level.size()); }
};

namespace detail {

inline void check_doubly_stochastic(const RealMatrix& p, double tol) {
  for (Index k = 0; k < p.rows(); ++k)
    if (std::abs(p.row(k).sum() - 1.0) > tol)
      throw invariant_violation("transition matrix: row sum deviates from 1");
  for (Index m = 0; m < p.cols(); ++m)
    if (std::abs(p.col(m).sum() - 1.0) > tol)
      throw invariant_violation("transition matrix: column sum deviates from 1");
}

}  // namespace detail

/// Diagonalizes H_B and every block H_B + B_n, then builds each p_n(w) from
/// atoms at w = E^n_k - E_m weighted by p^B_m |<E^n_k|E_m>|^2.
inline BlockWorkSet block_work_set(const DephasingModel& m, const ThermalContext& ctx) {
  const auto env = eig_hermitian(m.env_hamiltonian);
  const Index db = m.env_dim(), ds = m.system_dim();

  BlockWorkSet bw;
  bw.env_spectrum = env.eigenvalues;
  bw.env_populations = gibbs_weights(env.eigenvalues, ctx.beta);
  bw.env_free_energy = free_energy_from_eigenvalues(env.eigenvalues, ctx.beta);
  bw.per_level.resize(ds);
  bw.block_free_energies.resize(ds);
  bw.block_spectra.resize(ds);
  bw.transitions.resize(ds);

  std::vector<SpectralDecomposition> blocks(ds);
  parallel_for(ds, [&](std::size_t n) { blocks[n] = eig_hermitian(m.block(n)); });

  double scale = env.eigenvalues.cwiseAbs().maxCoeff();
  for (Index n = 0; n < ds; ++n)
    scale = std::max(scale, blocks[n].eigenvalues.cwiseAbs().maxCoeff());
  bw.scale = scale;

  for (Index n = 0; n < ds; ++n) {
    const auto& bs = blocks[n];
    RealMatrix probs = (bs.eigenvectors.adjoint() * env.eigenvectors).cwiseAbs2();
    detail::check_doubly_stochastic(probs, 1e-10);
    std::vector<WorkAtom> atoms;
    atoms.reserve(db * db);
    for (Index k = 0; k < db; ++k)
      for (Index mm = 0; mm < db; ++mm)
        atoms.push_back(WorkAtom{bs.eigenvalues(k) - env.eigenvalues(mm),
                                 bw.env_populations(mm) * probs(k, mm)});
    bw.per_level[n] = make_work_distribution(std::move(atoms), scale);
    bw.block_free_energies[n] = free_energy_from_eigenvalues(bs.eigenvalues, ctx.beta);
    bw.block_spectra[n] = bs.eigenvalues;
    bw.transitions[n] = std::move(probs);
  }
  return bw;
}

/// Convex combination p(w) = sum_n p_n^S p_n(w).
inline WorkDistribution work_distribution(const BlockWorkSet& bw, const RealVector& populations) {
  if (populations.size() != bw.levels())
    throw std::invalid_argument("work_distribution: population count mismatch");
  if (std::abs(populations.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("work_distribution: populations not normalized");
  std::vector<WorkAtom> atoms;
  for (Index n = 0; n < bw.levels(); ++n)
    for (const auto& a : bw.per_level[n].atoms)
      atoms.push_back(WorkAtom{a.w, populations(n) * a.p});
  return make_work_distribution(std::move(atoms), bw.scale);
}

/// <w^k> for k = 1..max_order.
inline std::vector<double> moments(const WorkDistribution& d, int max_order) {
  if (max_order < 1) throw std::invalid_argument("moments: max_order must be >= 1");
  std::vector<double> out(max_order);
  for (int k = 1; k <= max_order; ++k) out[k - 1] = d.moment(k);
  return out;
}

struct JarzynskiPair {
  double exp_mean;      // <e^{-beta w}>
  double exp_delta_f;   // e^{-beta dF}
  double residual;      // |ratio - 1|
};

/// Per-level fluctuation relation <e^{-beta w}>_n = e^{-beta (F^n_B - F_B)}.
inline std::vector<JarzynskiPair> jarzynski_block(const BlockWorkSet& bw,
                                                  const ThermalContext& ctx) {
  std::vector<JarzynskiPair> out;
  out.reserve(bw.per_level.size());
  for (Index n = 0; n < bw.levels(); ++n) {
    const double log_lhs = bw.per_level[n].log_exp_moment(ctx.beta);
    const double log_rhs = -ctx.beta * (bw.block_free_energies[n] - bw.env_free_energy);
    out.push_back(JarzynskiPair{std::exp(log_lhs), std::exp(log_rhs),
                                std::abs(std::expm1(log_lhs - log_rhs))});
  }
  return out;
}

struct JarzynskiGlobal {
  double exp_mean;     // <e^{-beta w}> over the mixture
  double exp_delta_f;  // e^{-beta dF}
  double delta_f;      // dF = -(1/beta) ln sum_n p^S_n e^{-beta dF^n_B}
  double residual;
};

/// Population-weighted free energy difference of the quench. This is the
/// right-hand form of the global fluctuation relation; the full-tensor-space
/// partition function identity is checked separately.
inline double quench_free_energy_difference(const BlockWorkSet& bw, const RealVector& populations,
                                            const ThermalContext& ctx) {
  std::vector<double> terms;
  terms.reserve(bw.levels());
  for (Index n = 0; n < bw.levels(); ++n)
    terms.push_back(std::log(populations(n)) -
                    ctx.beta * (bw.block_free_energies[n] - bw.env_free_energy));
  return -log_sum_exp(terms) / ctx.beta;
}

inline JarzynskiGlobal jarzynski_global(const WorkDistribution& d, const BlockWorkSet& bw,
                                        const RealVector& populations, const ThermalContext& ctx) {
  const double log_lhs = d.log_exp_moment(ctx.beta);
  const double delta_f = quench_free_energy_difference(bw, populations, ctx);
  const double log_rhs = -ctx.beta * delta_f;
  return JarzynskiGlobal{std::exp(log_lhs), std::exp(log_rhs), delta_f,
                         std::abs(std::expm1(log_lhs - log_rhs))};
}

struct FullSpaceCheck {
  double z_ratio;          // Z / Z_0 from the assembled Hamiltonians
  double exp_delta_f;      // e^{-beta dF} from the block route
  double residual;         // relative deviation
};

/// Cross-check of e^{-beta dF} = Z/Z_0 on the full tensor space. Requires the
/// assembled dimension to fit the dense budget.
inline FullSpaceCheck jarzynski_full_space_check(const DephasingModel& m,
                                                 const ThermalContext& ctx) {
  const auto [h0, h] = assemble_total_hamiltonians(m);
  const double log_z0 = log_partition_function(eig_hermitian(h0).eigenvalues, ctx.beta);
  const double log_z = log_partition_function(eig_hermitian(h).eigenvalues, ctx.beta);

  std::vector<double> terms;
  const RealVector pops = system_populations(m, ctx);
  const double f_b = free_energy(m.env_hamiltonian, ctx);
  for (Index n = 0; n < m.system_dim(); ++n)
    terms.push_back(std::log(pops(n)) - ctx.beta * (free_energy(m.block(n), ctx) - f_b));
  const double log_rhs = log_sum_exp(terms);

  const double log_ratio = log_z - log_z0;
  return FullSpaceCheck{std::exp(log_ratio), std::exp(log_rhs),
                        std::abs(std::expm1(log_ratio - log_rhs))};
}

/// Work statistics summary with the free-energy bound chain.
struct ThermoReport {
  double mean_work = 0.0;
  std::vector<double> work_moments;   // <w^k>, k = 1..order
  double exp_beta_work = 0.0;         // <e^{-beta w}>
  double delta_f = 0.0;
  double intermediate_bound = 0.0;    // sum_n p^S_n F^n_B - F_B
  double irreversible_work = 0.0;     // <w> - dF
  double gap_mean_vs_bound = 0.0;     // <w> - intermediate bound
  double gap_bound_vs_delta_f = 0.0;  // intermediate bound - dF
};

/// Evaluates <w> >= sum_n p^S_n F^n_B - F_B >= dF and reports the gaps.
/// A violation beyond 1e-9 indicates an implementation bug and throws.
inline ThermoReport bound_chain(const BlockWorkSet& bw, const RealVector& populations,
                                const ThermalContext& ctx, int moment_order = 2) {
  const WorkDistribution mix = work_distribution(bw, populations);
  ThermoReport r;
  r.mean_work = mix.mean();
  r.work_moments = moments(mix, moment_order);
  r.exp_beta_work = std::exp(mix.log_exp_moment(ctx.beta));
  r.delta_f = quench_free_energy_difference(bw, populations, ctx);
  r.intermediate_bound = -bw.env_free_energy;
  double weighted_f = 0.0;
  for (Index n = 0; n < bw.levels(); ++n) weighted_f += populations(n) * bw.block_free_energies[n];
  r.intermediate_bound += weighted_f;
  r.irreversible_work = r.mean_work - r.delta_f;
  r.gap_mean_vs_bound = r.mean_work - r.intermediate_bound;
  r.gap_bound_vs_delta_f = r.intermediate_bound - r.delta_f;
  if (r.gap_mean_vs_bound < -1e-9 || r.gap_bound_vs_delta_f < -1e-9 ||
      r.irreversible_work < -1e-9) {
    std::ostringstream os;
    os << "bound chain violated: <w> = " << r.mean_work << ", intermediate = "
       << r.intermediate_bound << ", dF = " << r.delta_f;
    throw invariant_violation(os.str());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Commuting fast path
// ---------------------------------------------------------------------------

namespace detail {

inline double commutator_max_abs(const Matrix& a, const Matrix& b) {
  return max_abs(a * b - b * a);
}

// [H, diag(d)](i,j) = H(i,j) (d(j) - d(i)): O(dim^2) commutator norm.
inline double commutator_max_abs_diagonal(const Matrix& h, const RealVector& d) {
  double worst = 0.0;
  for (Index j = 0; j < h.cols(); ++j)
    for (Index i = 0; i < h.rows(); ++i) {
      const double v = std::abs(h(i, j)) * std::abs(d(j) - d(i));
      if (v > worst) worst = v;
    }
  return worst;
}

inline bool is_exactly_diagonal(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != Complex(0.0, 0.0)) return false;
  return true;
}

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(n) { std::iota(parent.begin(), parent.end(), Index(0)); }
  Index find(Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Connected components of the exact nonzero pattern of h.
inline std::vector<std::vector<Index>> nonzero_components(const Matrix& h) {
  UnionFind uf(h.rows());
  for (Index j = 0; j < h.cols(); ++j)
    for (Index i = j + 1; i < h.rows(); ++i)
      if (h(i, j) != Complex(0.0, 0.0)) uf.unite(i, j);
  std::vector<std::vector<Index>> comps(h.rows());
  for (Index i = 0; i < h.rows(); ++i) comps[uf.find(i)].push_back(i);
  comps.erase(std::remove_if(comps.begin(), comps.end(),
                             [](const std::vector<Index>& c) { return c.empty(); }),
              comps.end());
  return comps;
}

}  // namespace detail

/// True when every [H_B, B_n] vanishes within tol in max-abs norm. Diagonal
/// couplings use the O(dim^2) entrywise form, so large lattice baths stay
/// cheap to classify.
inline bool couplings_commute(const DephasingModel& m, double tol = 1e-10) {
  for (Index n = 0; n < m.system_dim(); ++n) {
    const Matrix& b = m.couplings[n].mat();
    const double c = detail::is_exactly_diagonal(b)
                         ? detail::commutator_max_abs_diagonal(m.env_hamiltonian.mat(),
                                                               b.diagonal().real())
                         : detail::commutator_max_abs(m.env_hamiltonian.mat(), b);
    if (!(c < tol)) return false;
  }
  return true;
}

/// Work statistics for commuting couplings, [H_B, B_n] = 0: one simultaneous
/// diagonalization instead of one per block, with p_n(w) supported on the
/// eigenvalue differences of B_n in the shared eigenbasis.
///
/// Two routes. When every B_n is diagonal in the stored basis (fermionic
/// density couplings, diagonal test models), H_B is exactly block diagonal
/// over the connected components of its nonzero pattern and each component is
/// diagonalized separately, which keeps large lattice baths cheap. Otherwise
/// H_B is diagonalized once and each B_n is rediagonalized inside the
/// degenerate eigenspaces.
inline BlockWorkSet commuting_fast_path(const DephasingModel& m, const ThermalContext& ctx) {
  const Index db = m.env_dim(), ds = m.system_dim();
  const Matrix& h = m.env_hamiltonian.mat();

  bool all_diagonal = true;
  for (Index n = 0; n < ds && all_diagonal; ++n)
    all_diagonal = detail::is_exactly_diagonal(m.couplings[n].mat());

  // Precondition: max-abs commutator below 1e-10 for every level.
  for (Index n = 0; n < ds; ++n) {
    const double c =
        all_diagonal
            ? detail::commutator_max_abs_diagonal(h, m.couplings[n].mat().diagonal().real())
            : detail::commutator_max_abs(h, m.couplings[n].mat());
    if (!(c < 1e-10)) {
      std::ostringstream os;
      os << "commuting_fast_path: [H_B, B_" << n << "] max-abs " << c
         << " >= 1e-10; use block_work_set for non-commuting couplings";
      throw std::invalid_argument(os.str());
    }
  }

  // env_spectrum entries (unsorted yet), per-state b values per level.
  RealVector env(db);
  RealMatrix bvals(ds, db);

  bool sector_route = false;
  std::vector<std::vector<Index>> comps;
  if (all_diagonal) {
    comps = detail::nonzero_components(h);
    sector_route = true;
    for (const auto& comp : comps) {
      for (Index n = 0; n < ds && sector_route; ++n) {
        const auto d = m.couplings[n].mat().diagonal();
        for (std::size_t i = 1; i < comp.size(); ++i)
          if (std::abs(d(comp[i]).real() - d(comp[0]).real()) > 1e-12) {
            sector_route = false;
            break;
          }
      }
      if (!sector_route) break;
    }
  }

  if (sector_route) {
    // Diagonalize H_B inside each component; B_n is constant there.
    std::vector<RealVector> comp_eigs(comps.size());
    parallel_for(comps.size(), [&](std::size_t ci) {
      const auto& comp = comps[ci];
      const Index nc = static_cast<Index>(comp.size());
      if (nc == 1) {
        comp_eigs[ci] = RealVector::Constant(1, h(comp[0], comp[0]).real());
        return;
      }
      Matrix sub(nc, nc);
      for (Index a = 0; a < nc; ++a)
        for (Index b = 0; b < nc; ++b) sub(a, b) = h(comp[a], comp[b]);
      comp_eigs[ci] = eig_hermitian(HermitianOperator(std::move(sub))).eigenvalues;
    });
    Index pos = 0;
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
      const auto& comp = comps[ci];
      for (std::size_t i = 0; i < comp.size(); ++i, ++pos) {
        env(pos) = comp_eigs[ci](static_cast<Index>(i));
        for (Index n = 0; n < ds; ++n)
          bvals(n, pos) = m.couplings[n].mat().diagonal()(comp[0]).real();
      }
    }
  } else {
    // Generic commuting route: refine B_n within degenerate eigenspaces.
    const auto envdec = eig_hermitian(m.env_hamiltonian);
    env = envdec.eigenvalues;
    const double deg_tol = 1e-10 * std::max(1.0, env.cwiseAbs().maxCoeff());
    for (Index n = 0; n < ds; ++n) {
      const Matrix bt = envdec.eigenvectors.adjoint() * m.couplings[n].mat() * envdec.eigenvectors;
      Index start = 0;
      while (start < db) {
        Index stop = start + 1;
        while (stop < db && env(stop) - env(stop - 1) <= deg_tol) ++stop;
        const Index nc = stop - start;
        if (nc == 1) {
          bvals(n, start) = bt(start, start).real();
        } else {
          Eigen::SelfAdjointEigenSolver<Matrix> sub(
              0.5 * (bt.block(start, start, nc, nc) +
                     bt.block(start, start, nc, nc).adjoint().eval()));
          for (Index i = 0; i < nc; ++i) bvals(n, start + i) = sub.eigenvalues()(i);
        }
        start = stop;
      }
      // Residual coupling between distinct eigenspaces must be negligible,
      // otherwise the simultaneous-diagonalization premise is broken.
      double cross = 0.0;
      Index gstart = 0;
      while (gstart < db) {
        Index gstop = gstart + 1;
        while (gstop < db && env(gstop) - env(gstop - 1) <= deg_tol) ++gstop;
        for (Index i = gstart; i < gstop; ++i)
          for (Index j = gstop; j < db; ++j) cross = std::max(cross, std::abs(bt(i, j)));
        gstart = gstop;
      }
      if (cross > 1e-9)
        throw invariant_violation(
            "commuting_fast_path: coupling mixes distinct H_B eigenspaces beyond tolerance");
    }
  }

  // Canonical ordering: ascending environment energy, stable.
  std::vector<Index> order(db);
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return env(a) < env(b); });

  BlockWorkSet bw;
  bw.identity_transitions = true;
  bw.env_spectrum.resize(db);
  for (Index i = 0; i < db; ++i) bw.env_spectrum(i) = env(order[i]);
  bw.env_populations = gibbs_weights(bw.env_spectrum, ctx.beta);
  bw.env_free_energy = free_energy_from_eigenvalues(bw.env_spectrum, ctx.beta);

  double scale = bw.env_spectrum.cwiseAbs().maxCoeff();
  bw.per_level.resize(ds);
  bw.block_spectra.resize(ds);
  bw.block_free_energies.resize(ds);
  for (Index n = 0; n < ds; ++n) {
    RealVector spec(db);
    for (Index i = 0; i < db; ++i) spec(i) = bw.env_spectrum(i) + bvals(n, order[i]);
    scale = std::max(scale, spec.cwiseAbs().maxCoeff());
    bw.block_spectra[n] = std::move(spec);
    bw.block_free_energies[n] = free_energy_from_eigenvalues(bw.block_spectra[n], ctx.beta);
  }
  bw.scale = scale;
  for (Index n = 0; n < ds; ++n) {
    std::vector<WorkAtom> atoms;
    atoms.reserve(db);
    for (Index i = 0; i < db; ++i)
      atoms.push_back(WorkAtom{bvals(n, order[i]), bw.env_populations(i)});
    bw.per_level[n] = make_work_distribution(std::move(atoms), bw.scale);
  }
  return bw;
}

// ---------------------------------------------------------------------------
// Independent oracle and the cyclic protocol
// ---------------------------------------------------------------------------

/// Standard sudden-quench two-point-measurement distribution computed on the
/// full space, with no use of the block decomposition—the independent oracle
/// the block route is validated against.
inline WorkDistribution brute_force_tpm(const HermitianOperator& h0, const HermitianOperator& h,
                                        const ThermalContext& ctx) {
  if (h0.dim() != h.dim()) throw std::invalid_argument("brute_force_tpm: dimension mismatch");
  const auto s0 = eig_hermitian(h0);
  const auto s1 = eig_hermitian(h);
  const RealVector pops = gibbs_weights(s0.eigenvalues, ctx.beta);
  const RealMatrix overlap = (s1.eigenvectors.adjoint() * s0.eigenvectors).cwiseAbs2();
  const double scale = std::max(s0.eigenvalues.cwiseAbs().maxCoeff(),
                                s1.eigenvalues.cwiseAbs().maxCoeff());
  std::vector<WorkAtom> atoms;
  atoms.reserve(h.dim() * h.dim());
  for (Index b = 0; b < h.dim(); ++b)
    for (Index a = 0; a < h.dim(); ++a)
      atoms.push_back(
          WorkAtom{s1.eigenvalues(b) - s0.eigenvalues(a), pops(a) * overlap(b, a)});
  return make_work_distribution(std::move(atoms), scale);
}

/// Mean total work for switching the interaction on at time 0 and off at
/// time t: <w_tot> = Tr{H_I rho(0)} - Tr{H_I rho(t)}. The protocol is cyclic,
/// so the result is non-negative and equals the environment energy change.
inline double cyclic_switchoff_work(const DephasingModel& m, const ThermalContext& ctx, double t) {
  if (t < 0.0) throw std::invalid_argument("cyclic_switchoff_work: time must be >= 0");
  const auto [h0, h] = assemble_total_hamiltonians(m);
  const Matrix hi = h.mat() - h0.mat();
  const Matrix rho0 = thermal_state(h0, ctx).mat();
  const Matrix u = eig_hermitian(h).propagator(t);
  const Matrix rho_t = u * rho0 * u.adjoint();
  const double w_on = (hi * rho0).trace().real();
  const double w_off = -(hi * rho_t).trace().real();
  const double w_tot = w_on + w_off;
  if (w_tot < -1e-9) {
    std::ostringstream os;
    os << "cyclic_switchoff_work: negative total work " << w_tot;
    throw invariant_violation(os.str());
  }
  return w_tot;
}

}  // namespace qwork
