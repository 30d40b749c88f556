#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace qwork {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Tolerances shared across the library. Construction-time checks use the
// absolute values below; spectral checks scale with dimension and norm.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kCoalesceTol = 1e-9;

// Dense-storage budget: a single operator never exceeds this dimension.
inline constexpr Index kMaxOperatorDim = 4096;

/// Thrown when a mathematical identity that must hold for a correct
/// implementation fails beyond tolerance. Indicates a bug, not physics.
class invariant_violation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& m) {
  return max_abs(m - m.adjoint());
}

/// Dense complex square matrix with Hermiticity enforced at construction.
/// The stored matrix is symmetrized, so entries(i,j) == conj(entries(j,i))
/// holds exactly and is preserved under sums and real scaling.
class HermitianOperator {
 public:
  explicit HermitianOperator(Matrix m, double tol = kHermitianTol) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw std::invalid_argument("HermitianOperator: matrix must be square with dim >= 1");
    if (m.rows() > kMaxOperatorDim) {
      std::ostringstream os;
      os << "HermitianOperator: dim " << m.rows() << " exceeds dense budget " << kMaxOperatorDim;
      throw std::invalid_argument(os.str());
    }
    const double defect = hermiticity_defect(m);
    if (!(defect <= tol)) {
      std::ostringstream os;
      os << "HermitianOperator: Hermiticity defect " << defect << " exceeds tolerance " << tol;
      throw std::invalid_argument(os.str());
    }
    mat_ = 0.5 * (m + m.adjoint().eval());
  }

  static HermitianOperator zero(Index dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }
  static HermitianOperator identity(Index dim) {
    return HermitianOperator(Matrix::Identity(dim, dim));
  }
  static HermitianOperator diagonal(const RealVector& d) {
    return HermitianOperator(d.cast<Complex>().asDiagonal());
  }

  Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

  friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(a.mat_ + b.mat_);
  }
  friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(a.mat_ - b.mat_);
  }
  friend HermitianOperator operator-(const HermitianOperator& a) {
    return HermitianOperator(-a.mat_);
  }
  friend HermitianOperator operator*(double s, const HermitianOperator& a) {
    return HermitianOperator(s * a.mat_);
  }

 private:
  Matrix mat_;
};

/// Kronecker product with the system index slow: for C = tensor_product(A, B),
/// C(i*dB + p, j*dB + q) = A(i,j) * B(p,q). All composite-space indexing in
/// the library follows this (system ⊗ environment) convention.
inline Matrix tensor_product(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols())
    throw std::invalid_argument("tensor_product: operands must be square");
  const Index da = a.rows(), db = b.rows();
  Matrix c(da * db, da * db);
  for (Index j = 0; j < da; ++j)
    for (Index q = 0; q < db; ++q)
      for (Index i = 0; i < da; ++i)
        for (Index p = 0; p < db; ++p) c(i * db + p, j * db + q) = a(i, j) * b(p, q);
  return c;
}

inline HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(tensor_product(a.mat(), b.mat()));
}

/// Trace over the environment factor of a (dim_s * dim_b)-dimensional
/// operator, using the index convention of tensor_product.
inline Matrix partial_trace_env(const Matrix& o, Index dim_s, Index dim_b) {
  if (o.rows() != o.cols() || o.rows() != dim_s * dim_b)
    throw std::invalid_argument("partial_trace_env: dimension mismatch");
  Matrix r = Matrix::Zero(dim_s, dim_s);
  for (Index i = 0; i < dim_s; ++i)
    for (Index j = 0; j < dim_s; ++j)
      for (Index k = 0; k < dim_b; ++k) r(i, j) += o(i * dim_b + k, j * dim_b + k);
  return r;
}

namespace detail {

// Multiplies each eigenvector by a phase making its first significant
// component real positive. Deterministic output for reproducible runs.
inline void fix_eigenvector_phases(Matrix& v) {
  for (Index c = 0; c < v.cols(); ++c) {
    for (Index i = 0; i < v.rows(); ++i) {
      const double a = std::abs(v(i, c));
      if (a > 1e-8) {
        v.col(c) *= std::conj(v(i, c)) / a;
        break;
      }
    }
  }
}

}  // namespace detail

/// Eigenvalues (ascending) and phase-fixed orthonormal eigenvectors of a
/// HermitianOperator. Columns of `eigenvectors` pair with `eigenvalues`.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }

  /// V diag(f(lambda)) V† for a scalar function evaluated on the spectrum.
  Matrix apply(const std::function<Complex(double)>& f) const {
    Vector d(eigenvalues.size());
    for (Index i = 0; i < eigenvalues.size(); ++i) d(i) = f(eigenvalues(i));
    return eigenvectors * d.asDiagonal() * eigenvectors.adjoint();
  }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }

  /// e^{-iHt} for the operator this decomposition represents.
  Matrix propagator(double t) const {
    return apply([t](double x) { return std::exp(Complex(0.0, -x * t)); });
  }
};

inline SpectralDecomposition eig_hermitian(const HermitianOperator& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eig_hermitian: eigensolver failed to converge (dim " << a.dim() << ", max|A| "
       << max_abs(a.mat()) << ")";
    throw std::runtime_error(os.str());
  }
  Matrix v = solver.eigenvectors();
  detail::fix_eigenvector_phases(v);
  return SpectralDecomposition{solver.eigenvalues(), std::move(v)};
}

/// V diag(f(lambda)) V†. Overflow-prone functions (Boltzmann weights) are the
/// caller's concern; thermo routines shift the spectrum before exponentiating.
inline Matrix operator_function(const SpectralDecomposition& s,
                                const std::function<Complex(double)>& f) {
  return s.apply(f);
}

/// Unit-trace positive semidefinite Hermitian matrix.
class DensityOperator {
 public:
  explicit DensityOperator(Matrix m, double tol = kHermitianTol) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw std::invalid_argument("DensityOperator: matrix must be square with dim >= 1");
    const double defect = hermiticity_defect(m);
    if (!(defect <= tol))
      throw std::invalid_argument("DensityOperator: matrix not Hermitian within tolerance");
    const double trace_defect = std::abs(m.trace() - Complex(1.0, 0.0));
    if (!(trace_defect <= kTraceTol))
      throw std::invalid_argument("DensityOperator: trace deviates from 1 beyond tolerance");
    mat_ = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(mat_, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("DensityOperator: negative eigenvalue beyond tolerance");
  }

  /// Builds V diag(p) V† from known spectral data, skipping the O(dim^3)
  /// positivity re-check. `probs` must be clipped-nonnegative and sum to 1.
  static DensityOperator from_eigensystem(const Matrix& vectors, const RealVector& probs) {
    if (vectors.cols() != probs.size())
      throw std::invalid_argument("DensityOperator: eigensystem size mismatch");
    if (probs.minCoeff() < -1e-12 || std::abs(probs.sum() - 1.0) > kTraceTol)
      throw std::invalid_argument("DensityOperator: invalid probability vector");
    DensityOperator r;
    Matrix m = vectors * probs.cast<Complex>().asDiagonal() * vectors.adjoint();
    r.mat_ = 0.5 * (m + m.adjoint().eval());
    return r;
  }

  Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  DensityOperator() = default;
  Matrix mat_;
};

}  // namespace qwork
