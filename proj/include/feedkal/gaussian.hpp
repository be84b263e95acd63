#ifndef FEEDKAL_GAUSSIAN_HPP
#define FEEDKAL_GAUSSIAN_HPP

#include "feedkal/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace feedkal {

/**
 * Counter-based normal generator.
 *
 * Every draw is a pure function of (key, index): uniform words come from the
 * SplitMix64 finalizer applied to key + (counter + 1)·γ, and normals are
 * produced in Box–Muller pairs, so normal(2k) and normal(2k+1) share the
 * uniforms at counters 2k and 2k+1. Any block of indices can be generated
 * independently and in any order.
 *
 * Streams: split(s) derives the key of child stream s as
 *   mix(key ^ mix(s + γ)).
 * Streams with different s (or different parent keys) do not overlap in
 * practice; the simulator uses stream 0 for (w, v) and stream 1 for the
 * random-walk bias increments.
 */
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed)) {}

  CounterRng split(std::uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream + kGamma));
    return child;
  }

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGamma); }

  /// Uniform in (0, 1].
  double uniform(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  double normal(std::uint64_t index) const {
    const std::uint64_t pair = index >> 1;
    const double r = std::sqrt(-2.0 * std::log(uniform(2 * pair)));
    const double theta = 2.0 * std::numbers::pi * uniform(2 * pair + 1);
    return (index & 1) ? r * std::sin(theta) : r * std::cos(theta);
  }

  /// rows×cols standard normals; entry (i, j) is normal(offset + i·cols + j).
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t offset = 0) const {
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const std::uint64_t base = offset + static_cast<std::uint64_t>(i * cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        out(i, j) = normal(base + static_cast<std::uint64_t>(j));
      }
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

struct Gaussian {
  Vector mean;
  Matrix cov;
};

/// Joint Gaussian over (x₁, x₂), partitioned for conditioning on x₂.
struct JointPartition {
  Vector mean1;
  Vector mean2;
  Matrix P11;
  Matrix P12;
  Matrix P22;

  Matrix assembled_cov() const {
    const auto n1 = mean1.size();
    const auto n2 = mean2.size();
    Matrix m(n1 + n2, n1 + n2);
    m << P11, P12, P12.transpose(), P22;
    return m;
  }
};

/// Distribution of x₁ given x₂ = z₂:
///   mean = m₁ + P₁₂ P₂₂⁻¹ (z₂ − m₂),  cov = P₁₁ − P₁₂ P₂₂⁻¹ P₁₂ᵀ.
inline Gaussian condition(const JointPartition& jp, const Vector& z2) {
  const auto n1 = jp.mean1.size();
  const auto n2 = jp.mean2.size();
  if (jp.P11.rows() != n1 || jp.P11.cols() != n1 || jp.P12.rows() != n1 ||
      jp.P12.cols() != n2 || jp.P22.rows() != n2 || jp.P22.cols() != n2 || z2.size() != n2) {
    throw DimensionError("condition: partition blocks have inconsistent dimensions");
  }
  const SpdSolver p22(jp.P22, "P22");
  const Matrix gain = p22.solve_right(jp.P12);
  Gaussian out;
  out.mean = jp.mean1 + gain * (z2 - jp.mean2);
  out.cov = symmetrize(jp.P11 - gain * jp.P12.transpose());
  return out;
}

/// Factor L with L·Lᵀ = M for symmetric PSD M. Cholesky when M is positive
/// definite; otherwise an eigendecomposition with eigenvalues clamped at 0,
/// which also covers rank-deficient M.
inline Matrix psd_factor(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("psd_factor: matrix is not square");
  if (!m.allFinite()) throw NonFiniteError("psd_factor: non-finite entries");
  const Matrix s = symmetrize(m);
  if (s.size() == 0) return s;

  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) {
    const Matrix l = llt.matrixL();
    // LLT accepts some nearly singular inputs with poor reconstruction.
    if (max_abs(l * l.transpose() - s) <= 1e-12 * (1.0 + max_abs(s))) return l;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() < kPsdTolerance) {
    throw NotPsdError("psd_factor: matrix is indefinite (min eigenvalue " +
                      std::to_string(ev.minCoeff()) + ")");
  }
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct JointNoise {
  Matrix W;  ///< count × nw
  Matrix V;  ///< count × nz
};

/// count i.i.d. draws of (w, v) with covariance [[Q, N], [Nᵀ, R]]. Row k uses
/// normals k·(nw+nz) .. (k+1)·(nw+nz)−1 of the generator keyed by seed.
inline JointNoise sample_joint_noise(const Matrix& Q, const Matrix& R, const Matrix& N,
                                     Eigen::Index count, std::uint64_t seed) {
  const auto nw = Q.rows();
  const auto nz = R.rows();
  if (Q.cols() != nw || R.cols() != nz || N.rows() != nw || N.cols() != nz) {
    throw DimensionError("sample_joint_noise: Q, R, N have inconsistent dimensions");
  }
  if (count < 0) throw Error("sample_joint_noise: negative count");

  Matrix joint(nw + nz, nw + nz);
  joint << Q, N, N.transpose(), R;
  const Matrix L = psd_factor(joint);

  const CounterRng rng(seed);
  const Matrix e = rng.normal_matrix(count, nw + nz);
  const Matrix s = e * L.transpose();
  return JointNoise{s.leftCols(nw), s.rightCols(nz)};
}

}  // namespace feedkal

#endif  // FEEDKAL_GAUSSIAN_HPP
