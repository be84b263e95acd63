#ifndef FEEDKAL_LINALG_HPP
#define FEEDKAL_LINALG_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace feedkal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues above this (after symmetrization) count as nonnegative.
inline constexpr double kPsdTolerance = -1e-10;

/// Smallest admissible ratio of min to max singular value for a solve.
inline constexpr double kConditionFloor = 1e-12;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct NotPsdError : Error {
  using Error::Error;
};

/// The innovation covariance (or any conditioning block) cannot be inverted.
struct SingularInnovation : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Minimum eigenvalue of ½(M+Mᵀ); +inf for an empty matrix.
inline double min_sym_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Matrix& m, double tol = kPsdTolerance) {
  return m.rows() == m.cols() && min_sym_eigenvalue(m) >= tol;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Cholesky solver for symmetric positive definite blocks with a conditioning
/// guard. Every S⁻¹ and P₂₂⁻¹ in the library goes through here.
class SpdSolver {
 public:
  SpdSolver(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols()) {
      throw DimensionError(what + " is not square");
    }
    if (!m.allFinite()) {
      throw NonFiniteError(what + " has non-finite entries");
    }
    const Matrix s = symmetrize(m);
    if (s.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
      if (!(lo > kConditionFloor * hi) || hi == 0.0) {
        throw SingularInnovation(what + " is singular or not positive definite (min eig " +
                                 std::to_string(lo) + ", max |eig| " + std::to_string(hi) + ")");
      }
    }
    llt_.compute(s);
    if (llt_.info() != Eigen::Success) {
      throw SingularInnovation(what + " failed Cholesky factorization");
    }
  }

  /// Returns M⁻¹·rhs.
  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.solve(rhs);
  }

  /// Returns lhs·M⁻¹ (M symmetric).
  template <typename Derived>
  Matrix solve_right(const Eigen::MatrixBase<Derived>& lhs) const {
    return llt_.solve(lhs.transpose()).transpose();
  }

  Eigen::Index size() const { return llt_.rows(); }

 private:
  Eigen::LLT<Matrix> llt_;
};

}  // namespace feedkal

#endif  // FEEDKAL_LINALG_HPP
