#ifndef FEEDKAL_SIM_HPP
#define FEEDKAL_SIM_HPP

#include "feedkal/filter_tv.hpp"
#include "feedkal/gaussian.hpp"
#include "feedkal/model.hpp"

#include <cstdint>
#include <vector>

namespace feedkal {

enum class ScenarioKind { Nominal, RandomWalkBias };

struct Scenario {
  ScenarioKind kind = ScenarioKind::Nominal;
  Eigen::Index n_steps = 100000;
  std::uint64_t seed = 1;
  /// Std-dev of the per-step random-walk increment added to w.
  double bias_step_std = 0.01;
  /// Known input: empty → zero, one row → held constant, n_steps rows → per step.
  Matrix u_profile;

  Matrix inputs(Eigen::Index nu) const {
    if (u_profile.size() == 0) return Matrix::Zero(n_steps, nu);
    if (u_profile.cols() != nu) throw DimensionError("u_profile has wrong column count");
    if (u_profile.rows() == 1) return u_profile.replicate(n_steps, 1);
    if (u_profile.rows() == n_steps) return u_profile;
    throw DimensionError("u_profile must have 1 or n_steps rows");
  }
};

/// Row k of every matrix holds the signals at step k.
struct Trajectory {
  Matrix X;      ///< true states
  Matrix Ytrue;  ///< true auxiliary outputs
  Matrix Z;      ///< measurements
  Matrix W;      ///< realized process noise (including any bias)
  Matrix V;      ///< realized measurement noise
  Matrix U;      ///< known inputs
};

struct ErrorStats {
  Vector y_err_var;  ///< per-output sample variance of Ytrue − y_post (n−1 divisor)
  Vector y_rms;
  Vector x_rms;
  Vector w_rms;  ///< RMS of W − w_hat
  Eigen::Index samples = 0;
};

/// Random-walk bias: cumulative sums of N(0, std²) increments drawn from
/// stream 1 of the scenario seed, one walk per noise channel.
inline Matrix random_walk_bias(Eigen::Index n_steps, Eigen::Index nw, double step_std,
                               std::uint64_t seed) {
  const Matrix inc = CounterRng(seed).split(1).normal_matrix(n_steps, nw) * step_std;
  Matrix bias(n_steps, nw);
  Vector acc = Vector::Zero(nw);
  for (Eigen::Index k = 0; k < n_steps; ++k) {
    acc += inc.row(k).transpose();
    bias.row(k) = acc.transpose();
  }
  return bias;
}

inline Trajectory simulate(const DiscreteSystem& sys, const Scenario& sc) {
  require_valid(sys);
  if (sc.n_steps <= 0) throw Error("simulate: n_steps must be positive");
  if (!(sc.bias_step_std >= 0.0)) throw Error("simulate: bias_step_std must be nonnegative");

  const auto n = sc.n_steps;
  // Stream 0 carries (w, v).
  JointNoise noise = sample_joint_noise(sys.Q, sys.R, sys.N, n, sc.seed);
  if (sc.kind == ScenarioKind::RandomWalkBias) {
    noise.W += random_walk_bias(n, sys.nw(), sc.bias_step_std, sc.seed);
  }

  Trajectory t;
  t.U = sc.inputs(sys.nu());
  t.W = std::move(noise.W);
  t.V = std::move(noise.V);
  t.X.resize(n, sys.nx());
  t.Ytrue.resize(n, sys.ny());
  t.Z.resize(n, sys.nz());

  Vector x = Vector::Zero(sys.nx());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vector u = t.U.row(k).transpose();
    const Vector w = t.W.row(k).transpose();
    const Vector v = t.V.row(k).transpose();
    t.X.row(k) = x.transpose();
    t.Ytrue.row(k) = (sys.C * x + sys.D * u + sys.H * w).transpose();
    t.Z.row(k) = (sys.Cm * x + sys.Dm * u + sys.Hm * w + v).transpose();
    x = sys.A * x + sys.B * u + sys.G * w;
  }
  return t;
}

namespace detail {

inline Vector column_variance(const Matrix& e) {
  const auto n = e.rows();
  if (n < 2) return Vector::Zero(e.cols());
  const Eigen::RowVectorXd mean = e.colwise().mean();
  return ((e.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(n - 1)).transpose();
}

inline Vector column_rms(const Matrix& e) {
  if (e.rows() == 0) return Vector::Zero(e.cols());
  return (e.colwise().squaredNorm() / static_cast<double>(e.rows())).cwiseSqrt().transpose();
}

}  // namespace detail

/// Error statistics of frames against the trajectory, skipping the first
/// burn_in steps.
inline ErrorStats evaluate(const Trajectory& traj, const std::vector<EstimateFrame>& frames,
                           Eigen::Index burn_in = 100) {
  const auto n = traj.X.rows();
  if (static_cast<Eigen::Index>(frames.size()) != n) {
    throw DimensionError("evaluate: " + std::to_string(frames.size()) + " frames for " +
                         std::to_string(n) + " trajectory steps");
  }
  if (burn_in < 0) throw Error("evaluate: negative burn-in");
  const auto start = std::min(burn_in, n);
  const auto m = n - start;

  Matrix ey(m, traj.Ytrue.cols()), ex(m, traj.X.cols()), ew(m, traj.W.cols());
  for (Eigen::Index k = start; k < n; ++k) {
    const auto& f = frames[static_cast<std::size_t>(k)];
    ey.row(k - start) = traj.Ytrue.row(k) - f.y_post.transpose();
    ex.row(k - start) = traj.X.row(k) - f.x_post.transpose();
    ew.row(k - start) = traj.W.row(k) - f.w_hat().transpose();
  }
  return ErrorStats{detail::column_variance(ey), detail::column_rms(ey), detail::column_rms(ex),
                    detail::column_rms(ew), m};
}

}  // namespace feedkal

#endif  // FEEDKAL_SIM_HPP
