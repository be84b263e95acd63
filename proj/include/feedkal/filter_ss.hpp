#ifndef FEEDKAL_FILTER_SS_HPP
#define FEEDKAL_FILTER_SS_HPP

#include "feedkal/filter_tv.hpp"

#include <string>
#include <vector>

namespace feedkal {

/// Raised when the Riccati iteration does not settle within max_iter.
struct NonConvergence : Error {
  NonConvergence(const std::string& what, double last_step, std::size_t iterations)
      : Error(what), last_step(last_step), iterations(iterations) {}
  double last_step;
  std::size_t iterations;
};

struct RiccatiOptions {
  double tol = 1e-12;  ///< on ‖P_{k+1} − P_k‖_max
  std::size_t max_iter = 100000;
  bool record_history = false;
};

struct RiccatiSolution {
  Matrix P;
  std::size_t iterations = 0;
  double last_step = 0.0;  ///< ‖P_k − P_{k-1}‖_max at exit
  double residual = 0.0;   ///< ‖rhs(P) − P‖_max
  std::vector<double> step_history;
};

inline double riccati_residual(const DiscreteSystem& sys, const Matrix& P) {
  return max_abs(riccati_step(sys, P) - P);
}

/// Fixed-point iteration of the Riccati difference equation from P0.
inline RiccatiSolution solve_riccati(const DiscreteSystem& sys, const Matrix& P0,
                                     const RiccatiOptions& opt = {}) {
  if (P0.rows() != sys.nx() || P0.cols() != sys.nx()) {
    throw DimensionError("solve_riccati: P0 has wrong shape");
  }
  if (!is_psd(P0)) throw NotPsdError("solve_riccati: P0 not PSD");
  if (!(opt.tol > 0.0)) throw Error("solve_riccati: tol must be positive");

  RiccatiSolution sol;
  Matrix P = symmetrize(P0);
  double step = std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  while (k < opt.max_iter) {
    Matrix next = riccati_step(sys, P);
    step = max_abs(next - P);
    P = std::move(next);
    ++k;
    if (opt.record_history) sol.step_history.push_back(step);
    if (!P.allFinite()) throw NonFiniteError("solve_riccati: iterate became non-finite");
    if (step <= opt.tol) break;
  }
  if (step > opt.tol) {
    throw NonConvergence("solve_riccati: no convergence after " + std::to_string(k) +
                             " iterations (last step " + std::to_string(step) + ")",
                         step, k);
  }
  sol.P = std::move(P);
  sol.iterations = k;
  sol.last_step = step;
  sol.residual = riccati_residual(sys, sol.P);
  return sol;
}

inline RiccatiSolution solve_riccati(const DiscreteSystem& sys, const RiccatiOptions& opt = {}) {
  return solve_riccati(sys, Matrix::Zero(sys.nx(), sys.nx()), opt);
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Linear time-invariant filter evaluated at a Riccati fixed point P*.
///
///   x_{n+1|n} = A_cl x_{n|n-1} + M_AG z + (B − M_AG Dm) u
///   x_{n|n}   = (I − Kg Cm) x_{n|n-1} + Kg z − Kg Dm u
///   y_{n|n}   = (C − M Cm) x_{n|n-1} + M z + (D − M Dm) u
///
/// where A_cl = A − M_AG Cm and M = M_CH (Corrected) or C Kg (Legacy).
class SteadyFilter {
 public:
  SteadyFilter(DiscreteSystem sys, Matrix P_star) : sys_(std::move(sys)), P_(std::move(P_star)) {
    if (P_.rows() != sys_.nx() || P_.cols() != sys_.nx()) {
      throw DimensionError("SteadyFilter: P* has wrong shape");
    }
    const double res = riccati_residual(sys_, P_);
    if (!(res <= 1e-9 * (1.0 + max_abs(P_)))) {
      throw Error("SteadyFilter: P* is not a Riccati fixed point (residual " +
                  std::to_string(res) + ")");
    }
    g_ = feedkal::gains(sys_, P_);

    const auto nx = sys_.nx();
    A_cl_ = sys_.A - g_.M_AG * sys_.Cm;
    B_z_ = g_.M_AG;
    B_u_ = sys_.B - g_.M_AG * sys_.Dm;

    X_x_ = Matrix::Identity(nx, nx) - g_.Kg * sys_.Cm;
    X_z_ = g_.Kg;
    X_u_ = -g_.Kg * sys_.Dm;

    const Matrix m_legacy = sys_.C * g_.Kg;
    Y_x_[0] = sys_.C - g_.M_CH * sys_.Cm;
    Y_z_[0] = g_.M_CH;
    Y_u_[0] = sys_.D - g_.M_CH * sys_.Dm;
    Y_x_[1] = sys_.C - m_legacy * sys_.Cm;
    Y_z_[1] = m_legacy;
    Y_u_[1] = sys_.D - m_legacy * sys_.Dm;

    var_y_ = output_variance(sys_, P_, g_);
    var_x_ = symmetrize(P_ - g_.Kg * g_.S * g_.Kg.transpose());
    rho_ = spectral_radius(A_cl_);
  }

  const DiscreteSystem& system() const { return sys_; }
  const Matrix& P_star() const { return P_; }
  const GainSet& gains() const { return g_; }
  const Matrix& closed_loop() const { return A_cl_; }
  double closed_loop_spectral_radius() const { return rho_; }
  bool is_stable() const { return rho_ < 1.0; }

  const Matrix& predictor_z() const { return B_z_; }
  const Matrix& predictor_u() const { return B_u_; }
  const Matrix& output_x(OutputMode m) const { return Y_x_[index(m)]; }
  const Matrix& output_z(OutputMode m) const { return Y_z_[index(m)]; }
  const Matrix& output_u(OutputMode m) const { return Y_u_[index(m)]; }

  /// Applies the LTI maps to the prior estimate x_{n|n-1}; returns the frame
  /// and x_{n+1|n}.
  std::pair<EstimateFrame, Vector> step(const Vector& x_prior, const Vector& z, const Vector& u,
                                        OutputMode mode) const {
    detail::check_vector(x_prior, sys_.nx(), "x_prior");
    detail::check_vector(z, sys_.nz(), "z");
    detail::check_vector(u, sys_.nu(), "u");
    const std::size_t i = index(mode);

    EstimateFrame f;
    f.mode = mode;
    f.innovation = z - (sys_.Cm * x_prior + sys_.Dm * u);
    f.x_post = X_x_ * x_prior + X_z_ * z + X_u_ * u;
    f.w_post = g_.Kg2 * f.innovation;
    f.y_post = Y_x_[i] * x_prior + Y_z_[i] * z + Y_u_[i] * u;
    f.x_next = A_cl_ * x_prior + B_z_ * z + B_u_ * u;
    f.var_y = var_y_;
    f.var_x = var_x_;
    Vector next = f.x_next;
    return {std::move(f), std::move(next)};
  }

  std::vector<EstimateFrame> run(const Vector& x0, const Matrix& Z, const Matrix& U,
                                 OutputMode mode) const {
    if (Z.rows() != U.rows()) throw DimensionError("SteadyFilter::run: Z/U length mismatch");
    std::vector<EstimateFrame> frames;
    frames.reserve(static_cast<std::size_t>(Z.rows()));
    Vector x = x0;
    for (Eigen::Index k = 0; k < Z.rows(); ++k) {
      auto [f, next] = step(x, Z.row(k).transpose(), U.row(k).transpose(), mode);
      frames.push_back(std::move(f));
      x = std::move(next);
    }
    return frames;
  }

 private:
  static std::size_t index(OutputMode m) { return m == OutputMode::Corrected ? 0 : 1; }

  DiscreteSystem sys_;
  Matrix P_;
  GainSet g_;
  Matrix A_cl_, B_z_, B_u_;
  Matrix X_x_, X_z_, X_u_;
  Matrix Y_x_[2], Y_z_[2], Y_u_[2];
  Matrix var_y_, var_x_;
  double rho_ = 0.0;
};

inline SteadyFilter build(const DiscreteSystem& sys, const Matrix& P_star) {
  return SteadyFilter(sys, P_star);
}

}  // namespace feedkal

#endif  // FEEDKAL_FILTER_SS_HPP
