#ifndef FEEDKAL_TEST_SUPPORT_HPP
#define FEEDKAL_TEST_SUPPORT_HPP

#include "feedkal/feedkal.hpp"

#include <random>

namespace feedkal::testing {

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

/// ẋ = −0.1x + 2w, y = [1; 0]x + [1; 1]w, z = y(1) + v, Q = 1, R = 0.1, N = 0.
inline ContinuousSystem feedthrough_example_continuous() {
  ContinuousSystem c;
  c.A = mat({{-0.1}});
  c.B = Matrix::Zero(1, 0);
  c.G = mat({{2.0}});
  c.C = mat({{1.0}, {0.0}});
  c.D = Matrix::Zero(2, 0);
  c.H = mat({{1.0}, {1.0}});
  c.Cm = mat({{1.0}});
  c.Dm = Matrix::Zero(1, 0);
  c.Hm = mat({{1.0}});
  c.Q = mat({{1.0}});
  c.R = mat({{0.1}});
  c.N = mat({{0.0}});
  return c;
}

inline DiscreteSystem feedthrough_example(
    DiscretizationMethod m = DiscretizationMethod::Euler) {
  return discretize(feedthrough_example_continuous(), 0.1, m);
}

/// Steady-state Riccati solution of the Euler-discretized example, from an
/// independent scalar long-double fixed-point iteration (see test_filter_ss).
inline constexpr double kExampleRiccatiP = 0.010304123021909438;

struct RandomSystemOptions {
  bool feedthrough = true;   ///< nonzero Hm
  bool correlated = true;    ///< nonzero N
  bool outputs_are_measurements = false;  ///< C = Cm, D = Dm, H = Hm
};

/// Seeded random system with Schur-stable A (spectral radius 0.9), positive
/// definite joint noise covariance and nonzero known inputs.
inline DiscreteSystem random_system(std::uint64_t seed, RandomSystemOptions opt = {}) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = unif(gen);
    return m;
  };

  const Eigen::Index nx = dim(gen), nu = dim(gen) - 1, nw = dim(gen), nz = dim(gen),
                     ny = dim(gen);
  DiscreteSystem s;
  s.A = rnd(nx, nx);
  const double rho = spectral_radius(s.A);
  if (rho > 0) s.A *= 0.9 / rho;
  s.B = rnd(nx, nu);
  s.G = rnd(nx, nw);
  s.Cm = rnd(nz, nx);
  s.Dm = rnd(nz, nu);
  s.Hm = opt.feedthrough ? rnd(nz, nw) : Matrix::Zero(nz, nw);
  if (opt.outputs_are_measurements) {
    s.C = s.Cm;
    s.D = s.Dm;
    s.H = s.Hm;
  } else {
    s.C = rnd(ny, nx);
    s.D = rnd(ny, nu);
    s.H = rnd(ny, nw);
  }

  const Matrix X = rnd(nw + nz, nw + nz);
  Matrix J = X * X.transpose() / static_cast<double>(nw + nz) +
             0.2 * Matrix::Identity(nw + nz, nw + nz);
  s.Q = J.topLeftCorner(nw, nw);
  s.R = J.bottomRightCorner(nz, nz);
  s.N = opt.correlated ? Matrix(J.topRightCorner(nw, nz)) : Matrix::Zero(nw, nz);
  s.dt = 0.1;
  return s;
}

/// Seeded random PSD partition (positive definite overall).
inline JointPartition random_partition(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Eigen::Index n1 = dim(gen), n2 = dim(gen), n = n1 + n2;
  Matrix X(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) X(i, j) = unif(gen);
  const Matrix S = X * X.transpose() / static_cast<double>(n) + 0.1 * Matrix::Identity(n, n);
  Vector m(n);
  for (Eigen::Index i = 0; i < n; ++i) m(i) = unif(gen);
  return JointPartition{m.head(n1), m.tail(n2), S.topLeftCorner(n1, n1), S.topRightCorner(n1, n2),
                        S.bottomRightCorner(n2, n2)};
}

inline Vector random_vector(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

}  // namespace feedkal::testing

#endif  // FEEDKAL_TEST_SUPPORT_HPP
