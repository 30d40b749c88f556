#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "qwork/operators.hpp"
#include "qwork/thermo.hpp"

namespace qwork {

/// A pure-dephasing model: system levels eps_n (the system Hamiltonian is
/// diagonal in the level basis by construction), an environment Hamiltonian
/// H_B, and one coupling operator B_n per level. The assembled total
/// Hamiltonian is block diagonal in the level basis; block n reads
/// eps_n + H_B + B_n.
struct DephasingModel {
  RealVector system_energies;
  HermitianOperator env_hamiltonian;
  std::vector<HermitianOperator> couplings;

  DephasingModel(RealVector energies, HermitianOperator h_b, std::vector<HermitianOperator> b)
      : system_energies(std::move(energies)),
        env_hamiltonian(std::move(h_b)),
        couplings(std::move(b)) {
    if (system_energies.size() < 1)
      throw std::invalid_argument("DephasingModel: need at least one system level");
    if (static_cast<Index>(couplings.size()) != system_energies.size())
      throw std::invalid_argument("DephasingModel: one coupling operator per system level");
    for (const auto& c : couplings)
      if (c.dim() != env_hamiltonian.dim())
        throw std::invalid_argument("DephasingModel: coupling dimension differs from H_B");
  }

  Index system_dim() const { return system_energies.size(); }
  Index env_dim() const { return env_hamiltonian.dim(); }

  /// Environment-space block H_B + B_n. The system offset eps_n is excluded:
  /// it cancels in all two-measurement energy differences.
  HermitianOperator block(Index n) const { return env_hamiltonian + couplings.at(n); }
};

inline RealVector system_populations(const DephasingModel& m, const ThermalContext& ctx) {
  return gibbs_weights(m.system_energies, ctx.beta);
}

// ---------------------------------------------------------------------------
// Qubit system
// ---------------------------------------------------------------------------

/// H_S = -omega sigma_z / 2, levels |0> and |1> with sigma_z eigenvalues +1, -1.
struct QubitSpec {
  double omega = 0.0;
};

/// Qubit dephasing model with H_I = sigma_z (x) B, i.e. couplings (B, -B) and
/// level energies (-omega/2, +omega/2).
inline DephasingModel build_qubit_model(const QubitSpec& q, const HermitianOperator& env_h,
                                        const HermitianOperator& b) {
  RealVector energies(2);
  energies << -q.omega / 2.0, q.omega / 2.0;
  return DephasingModel(energies, env_h, {b, -b});
}

// ---------------------------------------------------------------------------
// Bosonic bath: H_B = sum_k omega_k a_k† a_k, B = sum_k g_k (a_k + a_k†)
// ---------------------------------------------------------------------------

struct BathOperators {
  HermitianOperator hamiltonian;
  HermitianOperator coupling;
};

struct BosonBathSpec {
  std::vector<double> mode_frequencies;  // omega_k > 0
  std::vector<double> couplings;         // g_k
  std::vector<int> fock_cutoffs;         // n_max per mode, >= 1

  std::size_t modes() const { return mode_frequencies.size(); }
};

namespace detail {

inline Index boson_space_dim(const BosonBathSpec& s) {
  if (s.mode_frequencies.empty()) throw std::invalid_argument("boson bath: need at least one mode");
  if (s.couplings.size() != s.modes() || s.fock_cutoffs.size() != s.modes())
    throw std::invalid_argument("boson bath: per-mode lists must have equal length");
  Index dim = 1;
  for (std::size_t k = 0; k < s.modes(); ++k) {
    if (!(s.mode_frequencies[k] > 0.0))
      throw std::invalid_argument("boson bath: mode frequencies must be positive");
    if (s.fock_cutoffs[k] < 1) throw std::invalid_argument("boson bath: fock cutoff must be >= 1");
    dim *= s.fock_cutoffs[k] + 1;
    if (dim > kMaxOperatorDim) {
      std::ostringstream os;
      os << "boson bath: truncated space dimension " << dim << " (after mode " << k
         << ") exceeds dense budget " << kMaxOperatorDim;
      throw std::invalid_argument(os.str());
    }
  }
  return dim;
}

}  // namespace detail

/// Annihilator of mode k on the truncated multimode Fock space, mode 0 slow.
/// Matrix elements sqrt(n) with hard truncation at the per-mode cutoff.
inline Matrix boson_annihilator(const BosonBathSpec& s, std::size_t k) {
  const Index dim = detail::boson_space_dim(s);
  if (k >= s.modes()) throw std::invalid_argument("boson_annihilator: mode index out of range");
  // stride of mode k in the (mode 0 slow) mixed-radix index
  Index stride = 1;
  for (std::size_t j = s.modes() - 1; j > k; --j) stride *= s.fock_cutoffs[j] + 1;
  const Index dk = s.fock_cutoffs[k] + 1;
  Matrix a = Matrix::Zero(dim, dim);
  for (Index idx = 0; idx < dim; ++idx) {
    const Index nk = (idx / stride) % dk;
    if (nk >= 1) a(idx - stride, idx) = std::sqrt(static_cast<double>(nk));
  }
  return a;
}

inline BathOperators build_boson_bath(const BosonBathSpec& s) {
  const Index dim = detail::boson_space_dim(s);
  RealVector energies = RealVector::Zero(dim);
  Matrix b = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < s.modes(); ++k) {
    Index stride = 1;
    for (std::size_t j = s.modes() - 1; j > k; --j) stride *= s.fock_cutoffs[j] + 1;
    const Index dk = s.fock_cutoffs[k] + 1;
    for (Index idx = 0; idx < dim; ++idx)
      energies(idx) += s.mode_frequencies[k] * static_cast<double>((idx / stride) % dk);
    if (s.couplings[k] != 0.0) {
      const Matrix a = boson_annihilator(s, k);
      b += s.couplings[k] * (a + a.adjoint());
    }
  }
  return BathOperators{HermitianOperator::diagonal(energies), HermitianOperator(b)};
}

/// Thermal weight above the cutoff for the worst single mode, from the
/// untruncated geometric distribution: max_k e^{-beta omega_k (n_max_k + 1)}
/// (relative to the full mode partition sum). Small values certify that the
/// hard truncation is inert at this temperature.
inline double boson_tail_population(const BosonBathSpec& s, double beta) {
  double worst = 0.0;
  for (std::size_t k = 0; k < s.modes(); ++k) {
    const double x = std::exp(-beta * s.mode_frequencies[k]);
    worst = std::max(worst, std::pow(x, s.fock_cutoffs[k] + 1));
  }
  return worst;
}

/// Truncation self-audit: doubles every cutoff and returns the relative drift
/// of a scalar observable computed from the bath operators.
template <typename Observable>
double boson_truncation_drift(const BosonBathSpec& s, Observable&& observable) {
  BosonBathSpec doubled = s;
  for (auto& c : doubled.fock_cutoffs) c *= 2;
  const double coarse = observable(build_boson_bath(s));
  const double fine = observable(build_boson_bath(doubled));
  return std::abs(coarse - fine) / std::max(1.0, std::abs(fine));
}

// ---------------------------------------------------------------------------
// Fermionic bath: tight-binding chain with density coupling, Jordan-Wigner
// representation on the 2^L Fock space. Site j maps to bit j of the basis
// index; the string acts on sites below j.
// ---------------------------------------------------------------------------

enum class Boundary { periodic, open };

struct FermionBathSpec {
  double hopping = 0.0;            // t
  double chemical_potential = 0.0; // mu
  int sites = 2;                   // L
  std::vector<double> site_couplings;
  Boundary boundary = Boundary::periodic;

  bool homogeneous() const {
    for (std::size_t j = 1; j < site_couplings.size(); ++j)
      if (site_couplings[j] != site_couplings[0]) return false;
    return true;
  }
};

namespace detail {

inline Index fermion_space_dim(const FermionBathSpec& s) {
  if (s.sites < 2) throw std::invalid_argument("fermion bath: need at least two sites");
  if (s.sites > 12) {
    std::ostringstream os;
    os << "fermion bath: L = " << s.sites << " gives dimension " << (1LL << s.sites)
       << " beyond dense budget " << kMaxOperatorDim;
    throw std::invalid_argument(os.str());
  }
  if (static_cast<int>(s.site_couplings.size()) != s.sites)
    throw std::invalid_argument("fermion bath: need one coupling per site");
  return Index(1) << s.sites;
}

inline int parity_below(std::uint32_t state, int site) {
  const std::uint32_t mask = (site > 0) ? ((1u << site) - 1u) : 0u;
  return __builtin_popcount(state & mask) & 1;
}

}  // namespace detail

/// Jordan-Wigner annihilator c_j on the 2^L occupation basis.
inline Matrix jordan_wigner_annihilator(int sites, int j) {
  if (j < 0 || j >= sites) throw std::invalid_argument("jordan_wigner_annihilator: bad site");
  const Index dim = Index(1) << sites;
  Matrix c = Matrix::Zero(dim, dim);
  for (std::uint32_t b = 0; b < static_cast<std::uint32_t>(dim); ++b) {
    if (b & (1u << j)) {
      const double sign = detail::parity_below(b, j) ? -1.0 : 1.0;
      c(b & ~(1u << j), b) = sign;
    }
  }
  return c;
}

/// H_B = -t sum_j (c_j† c_{j+1} + h.c.) - mu sum_j n_j with c_{L+1} = c_1
/// under periodic boundary, B = sum_j g_j n_j. Assembled directly in the
/// occupation basis; hopping across the periodic seam carries the string
/// sign (-1)^{N-1}.
inline BathOperators build_fermion_bath(const FermionBathSpec& s) {
  const Index dim = detail::fermion_space_dim(s);
  const int L = s.sites;
  Matrix h = Matrix::Zero(dim, dim);
  RealVector b_diag = RealVector::Zero(dim);
  for (std::uint32_t b = 0; b < static_cast<std::uint32_t>(dim); ++b) {
    double diag = 0.0, coupling = 0.0;
    for (int j = 0; j < L; ++j) {
      if (b & (1u << j)) {
        diag -= s.chemical_potential;
        coupling += s.site_couplings[j];
      }
    }
    h(b, b) = diag;
    b_diag(b) = coupling;
    const int last_bond = (s.boundary == Boundary::periodic) ? L : L - 1;
    for (int bond = 0; bond < last_bond; ++bond) {
      const int from = (bond + 1) % L;  // annihilate here
      const int to = bond;              // create here
      if ((b & (1u << from)) && !(b & (1u << to))) {
        const std::uint32_t b1 = b & ~(1u << from);
        const int sign =
            (detail::parity_below(b, from) + detail::parity_below(b1, to)) & 1;
        const std::uint32_t b2 = b1 | (1u << to);
        const double amp = sign ? s.hopping : -s.hopping;  // -t * (-1)^parity
        h(b2, b) += amp;
        h(b, b2) += amp;
      }
    }
  }
  return BathOperators{HermitianOperator(h), HermitianOperator::diagonal(b_diag)};
}

/// Single-particle dispersion eps_k = -mu - 2t cos k at k = 2 pi m / L,
/// ascending. Only the periodic chain has this closed form.
inline std::vector<double> single_particle_spectrum(const FermionBathSpec& s) {
  if (s.boundary != Boundary::periodic)
    throw std::invalid_argument(
        "single_particle_spectrum: analytic dispersion requires periodic boundary");
  if (s.sites < 2) throw std::invalid_argument("single_particle_spectrum: need at least two sites");
  std::vector<double> eps(s.sites);
  for (int m = 0; m < s.sites; ++m) {
    const double k = 2.0 * M_PI * m / s.sites;
    eps[m] = -s.chemical_potential - 2.0 * s.hopping * std::cos(k);
  }
  std::sort(eps.begin(), eps.end());
  return eps;
}

// ---------------------------------------------------------------------------
// Assembly on the full tensor space
// ---------------------------------------------------------------------------

/// H_I = sum_n |n><n| (x) B_n.
inline HermitianOperator interaction_hamiltonian(const DephasingModel& m) {
  const Index ds = m.system_dim(), db = m.env_dim();
  Matrix h = Matrix::Zero(ds * db, ds * db);
  for (Index n = 0; n < ds; ++n)
    h.block(n * db, n * db, db, db) = m.couplings[n].mat();
  return HermitianOperator(h);
}

/// (H_0, H) with H_0 = H_S (x) I + I (x) H_B and H = H_0 + H_I.
inline std::pair<HermitianOperator, HermitianOperator> assemble_total_hamiltonians(
    const DephasingModel& m) {
  const Index ds = m.system_dim(), db = m.env_dim();
  Matrix h0 = Matrix::Zero(ds * db, ds * db);
  for (Index n = 0; n < ds; ++n) {
    h0.block(n * db, n * db, db, db) = m.env_hamiltonian.mat();
    h0.block(n * db, n * db, db, db).diagonal().array() += m.system_energies(n);
  }
  Matrix h = h0;
  for (Index n = 0; n < ds; ++n) h.block(n * db, n * db, db, db) += m.couplings[n].mat();
  return {HermitianOperator(std::move(h0)), HermitianOperator(std::move(h))};
}

}  // namespace qwork
