#ifndef FEEDKAL_FILTER_TV_HPP
#define FEEDKAL_FILTER_TV_HPP

#include "feedkal/gaussian.hpp"
#include "feedkal/model.hpp"

#include <cstdint>
#include <vector>

namespace feedkal {

/// How y_{n|n} is formed.
///  Corrected: y = C x_{n|n} + D u + H w_{n|n}
///  Legacy:    y = C x_{n|n} + D u
/// The legacy form is only minimum-variance when Hm = 0 and N = 0.
enum class OutputMode { Corrected, Legacy };

/// Covariance recursion form. Subtraction is the plain conditional-variance
/// update; Joseph evaluates the same quantity as a sum of PSD terms.
enum class CovarianceForm { Subtraction, Joseph };

struct FilterState {
  Vector x_prior;  ///< x_{n|n-1}
  Matrix P_prior;  ///< P_{n|n-1}
  std::uint64_t step = 0;

  static FilterState initial(Eigen::Index nx, double p0_scale) {
    return FilterState{Vector::Zero(nx), p0_scale * Matrix::Identity(nx, nx), 0};
  }
};

struct GainSet {
  Matrix Kg;    ///< P Cmᵀ S⁻¹
  Matrix Kg2;   ///< (Q Hmᵀ + N) S⁻¹
  Matrix M_AG;  ///< A Kg + G Kg2
  Matrix M_CH;  ///< C Kg + H Kg2
  Matrix S;     ///< Cm P Cmᵀ + R̄
};

struct EstimateFrame {
  Vector x_post;      ///< x_{n|n}
  Vector y_post;      ///< y_{n|n}
  Vector w_post;      ///< E(w_n | z_n), computed in both modes
  Vector x_next;      ///< x_{n+1|n}
  Matrix var_y;       ///< posterior variance of y (corrected estimator)
  Matrix var_x;       ///< posterior state covariance P − Kg S Kgᵀ
  Vector innovation;  ///< z − (Cm x_prior + Dm u)
  OutputMode mode = OutputMode::Corrected;

  /// var_y is the corrected estimator's variance even in Legacy mode; the
  /// legacy estimate has no closed-form counterpart here.
  bool var_y_is_corrected_only() const { return mode == OutputMode::Legacy; }

  /// The estimator's unknown-input estimate. The legacy estimator implicitly
  /// takes E(w|z) = 0.
  Vector w_hat() const {
    return mode == OutputMode::Corrected ? w_post : Vector::Zero(w_post.size());
  }
};

struct FilterOptions {
  OutputMode mode = OutputMode::Corrected;
  CovarianceForm covariance_form = CovarianceForm::Subtraction;
};

namespace detail {

inline void check_vector(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + " has size " + std::to_string(v.size()) +
                         ", expected " + std::to_string(n));
  }
  if (!v.allFinite()) throw NonFiniteError(std::string(what) + " has non-finite entries");
}

}  // namespace detail

inline GainSet gains(const DiscreteSystem& sys, const Matrix& P) {
  GainSet g;
  g.S = symmetrize(sys.Cm * P * sys.Cm.transpose() + sys.effective_measurement_noise());
  const SpdSolver s(g.S, "innovation covariance S");
  g.Kg = s.solve_right(P * sys.Cm.transpose());
  g.Kg2 = s.solve_right(sys.Q * sys.Hm.transpose() + sys.N);
  g.M_AG = sys.A * g.Kg + sys.G * g.Kg2;
  g.M_CH = sys.C * g.Kg + sys.H * g.Kg2;
  return g;
}

/// One step of the Riccati difference equation:
///   P⁺ = (A P Aᵀ + G Q Gᵀ) − T S⁻¹ Tᵀ,  T = A P Cmᵀ + G Q Hmᵀ + G N.
inline Matrix riccati_step(const DiscreteSystem& sys, const Matrix& P,
                           CovarianceForm form = CovarianceForm::Subtraction) {
  const Matrix S = symmetrize(sys.Cm * P * sys.Cm.transpose() + sys.effective_measurement_noise());
  const SpdSolver s(S, "innovation covariance S");
  const Matrix T = sys.A * P * sys.Cm.transpose() + sys.G * (sys.Q * sys.Hm.transpose() + sys.N);
  if (form == CovarianceForm::Subtraction) {
    const Matrix prior = sys.A * P * sys.A.transpose() + sys.G * sys.Q * sys.G.transpose();
    return symmetrize(prior - T * s.solve(T.transpose()));
  }
  // Error recursion e⁺ = (A − M Cm) e + (G − M Hm) w − M v with M = T S⁻¹.
  const Matrix M = s.solve_right(T);
  const Matrix Acl = sys.A - M * sys.Cm;
  const Matrix Gw = sys.G - M * sys.Hm;
  const Matrix cross = Gw * sys.N * M.transpose();
  return symmetrize(Acl * P * Acl.transpose() + Gw * sys.Q * Gw.transpose() - cross -
                    cross.transpose() + M * sys.R * M.transpose());
}

/// Posterior output variance:
///   (C P Cᵀ + H Q Hᵀ) − U S⁻¹ Uᵀ,  U = C P Cmᵀ + H Q Hmᵀ + H N.
inline Matrix output_variance(const DiscreteSystem& sys, const Matrix& P, const GainSet& g) {
  const Matrix U = sys.C * P * sys.Cm.transpose() + sys.H * (sys.Q * sys.Hm.transpose() + sys.N);
  const Matrix prior = sys.C * P * sys.C.transpose() + sys.H * sys.Q * sys.H.transpose();
  return symmetrize(prior - g.M_CH * U.transpose());
}

/// Measurement update and one-step prediction for measurement z at input u.
inline std::pair<EstimateFrame, FilterState> update(const DiscreteSystem& sys,
                                                    const FilterState& fs, const Vector& z,
                                                    const Vector& u,
                                                    const FilterOptions& opt = {}) {
  detail::check_vector(fs.x_prior, sys.nx(), "x_prior");
  if (fs.P_prior.rows() != sys.nx() || fs.P_prior.cols() != sys.nx()) {
    throw DimensionError("P_prior has wrong shape");
  }
  detail::check_vector(z, sys.nz(), "z");
  detail::check_vector(u, sys.nu(), "u");

  const Matrix& P = fs.P_prior;
  const GainSet g = gains(sys, P);

  EstimateFrame f;
  f.mode = opt.mode;
  f.innovation = z - (sys.Cm * fs.x_prior + sys.Dm * u);
  f.x_post = fs.x_prior + g.Kg * f.innovation;
  f.w_post = g.Kg2 * f.innovation;
  f.y_post = sys.C * f.x_post + sys.D * u;
  if (opt.mode == OutputMode::Corrected) f.y_post += sys.H * f.w_post;
  f.x_next = sys.A * fs.x_prior + sys.B * u + g.M_AG * f.innovation;
  f.var_y = output_variance(sys, P, g);
  f.var_x = symmetrize(P - g.Kg * g.S * g.Kg.transpose());

  FilterState next{f.x_next, riccati_step(sys, P, opt.covariance_form), fs.step + 1};
  return {std::move(f), std::move(next)};
}

inline std::pair<EstimateFrame, FilterState> update(const DiscreteSystem& sys,
                                                    const FilterState& fs, const Vector& z,
                                                    const Vector& u, OutputMode mode) {
  return update(sys, fs, z, u, FilterOptions{mode, CovarianceForm::Subtraction});
}

/// Runs the filter over Z and U (one measurement / input per row).
inline std::vector<EstimateFrame> run(const DiscreteSystem& sys, const FilterState& init,
                                      const Matrix& Z, const Matrix& U,
                                      const FilterOptions& opt = {}) {
  if (Z.rows() != U.rows()) {
    throw DimensionError("run: Z has " + std::to_string(Z.rows()) + " rows but U has " +
                         std::to_string(U.rows()));
  }
  std::vector<EstimateFrame> frames;
  frames.reserve(static_cast<std::size_t>(Z.rows()));
  FilterState fs = init;
  for (Eigen::Index k = 0; k < Z.rows(); ++k) {
    auto [frame, next] = update(sys, fs, Z.row(k).transpose(), U.row(k).transpose(), opt);
    frames.push_back(std::move(frame));
    fs = std::move(next);
  }
  return frames;
}

inline std::vector<EstimateFrame> run(const DiscreteSystem& sys, const FilterState& init,
                                      const Matrix& Z, const Matrix& U, OutputMode mode) {
  return run(sys, init, Z, U, FilterOptions{mode, CovarianceForm::Subtraction});
}

/**
 * Block form of one update:
 *
 *   [x_{n|n}; y_{n|n}; x_{n+1|n}] = Phi · [x_{n|n-1}; u_n] + Gamma · z_n
 *
 * with Phi = [[I − Kg Cm, −Kg Dm], [C − M Cm, D − M Dm], [A − M_AG Cm, B − M_AG Dm]]
 * and Gamma = [Kg; M; M_AG], where M = M_CH (Corrected) or C Kg (Legacy).
 */
struct BlockUpdate {
  Matrix Phi;
  Matrix Gamma;
};

inline BlockUpdate assemble_block_update(const DiscreteSystem& sys, const GainSet& g,
                                         OutputMode mode) {
  const auto nx = sys.nx();
  const auto nu = sys.nu();
  const auto ny = sys.ny();
  const auto nz = sys.nz();
  const Matrix M = mode == OutputMode::Corrected ? g.M_CH : Matrix(sys.C * g.Kg);

  BlockUpdate b{Matrix(2 * nx + ny, nx + nu), Matrix(2 * nx + ny, nz)};
  b.Phi << Matrix::Identity(nx, nx) - g.Kg * sys.Cm, -g.Kg * sys.Dm,
      sys.C - M * sys.Cm, sys.D - M * sys.Dm,
      sys.A - g.M_AG * sys.Cm, sys.B - g.M_AG * sys.Dm;
  b.Gamma << g.Kg, M, g.M_AG;
  return b;
}

}  // namespace feedkal

#endif  // FEEDKAL_FILTER_TV_HPP
