#ifndef FEEDKAL_MODEL_HPP
#define FEEDKAL_MODEL_HPP

#include "feedkal/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <string>
#include <vector>

namespace feedkal {

/**
 * Discrete-time system with process-noise feedthrough.
 *
 *   x[n+1] = A x + B u + G w
 *   y      = C x + D u + H w          (auxiliary outputs)
 *   z      = Cm x + Dm u + Hm w + v   (measurements)
 *
 * with E(wwᵀ) = Q, E(vvᵀ) = R, E(wvᵀ) = N. Setting a row of C to zero and the
 * matching row of H to the identity makes that output an estimate of w.
 */
struct DiscreteSystem {
  Matrix A, B, G;
  Matrix C, D, H;
  Matrix Cm, Dm, Hm;
  Matrix Q, R, N;
  double dt = 1.0;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index nw() const { return G.cols(); }
  Eigen::Index ny() const { return C.rows(); }
  Eigen::Index nz() const { return Cm.rows(); }

  /// R + Hm Q Hmᵀ + Hm N + Nᵀ Hmᵀ, the covariance of Hm w + v.
  Matrix effective_measurement_noise() const {
    const Matrix hn = Hm * N;
    return symmetrize(R + Hm * Q * Hm.transpose() + hn + hn.transpose());
  }

  /// [[Q, N], [Nᵀ, R]]
  Matrix joint_noise_covariance() const {
    Matrix j(nw() + nz(), nw() + nz());
    j << Q, N, N.transpose(), R;
    return j;
  }
};

/// Continuous-time counterpart of DiscreteSystem. Only A, B and G are
/// integrated by discretize(); the remaining matrices and the noise
/// covariances are carried over as-is.
struct ContinuousSystem {
  Matrix A, B, G;
  Matrix C, D, H;
  Matrix Cm, Dm, Hm;
  Matrix Q, R, N;

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }
  Eigen::Index nw() const { return G.cols(); }
  Eigen::Index ny() const { return C.rows(); }
  Eigen::Index nz() const { return Cm.rows(); }
};

enum class DiscretizationMethod { Euler, ZeroOrderHold };

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }

  bool mentions(const std::string& needle) const {
    for (const auto& s : issues) {
      if (s.find(needle) != std::string::npos) return true;
    }
    return false;
  }
};

namespace detail {

inline void check_shape(ValidationReport& rep, const char* name, const Matrix& m,
                        Eigen::Index rows, const char* rows_from, Eigen::Index cols,
                        const char* cols_from) {
  if (m.rows() != rows) {
    rep.issues.push_back("dimension mismatch: " + std::string(name) + " rows (" +
                         std::to_string(m.rows()) + ") != " + rows_from + " (" +
                         std::to_string(rows) + ")");
  }
  if (m.cols() != cols) {
    rep.issues.push_back("dimension mismatch: " + std::string(name) + " cols (" +
                         std::to_string(m.cols()) + ") != " + cols_from + " (" +
                         std::to_string(cols) + ")");
  }
}

template <typename System>
ValidationReport validate_common(const System& s) {
  ValidationReport rep;
  const auto nx = s.A.rows();
  const auto nu = s.B.cols();
  const auto nw = s.G.cols();
  const auto ny = s.C.rows();
  const auto nz = s.Cm.rows();

  check_shape(rep, "A", s.A, nx, "nx", nx, "nx");
  check_shape(rep, "B", s.B, nx, "nx", nu, "nu");
  check_shape(rep, "G", s.G, nx, "nx", nw, "nw");
  check_shape(rep, "C", s.C, ny, "ny", nx, "nx");
  check_shape(rep, "D", s.D, ny, "ny", nu, "nu");
  // ny is taken from C, so a C/H row conflict is reported against H.
  check_shape(rep, "H", s.H, ny, "C rows", nw, "nw");
  check_shape(rep, "Cm", s.Cm, nz, "nz", nx, "nx");
  check_shape(rep, "Dm", s.Dm, nz, "nz", nu, "nu");
  check_shape(rep, "Hm", s.Hm, nz, "Cm rows", nw, "nw");
  check_shape(rep, "Q", s.Q, nw, "nw", nw, "nw");
  check_shape(rep, "R", s.R, nz, "nz", nz, "nz");
  check_shape(rep, "N", s.N, nw, "nw", nz, "nz");

  for (const auto* m : {&s.A, &s.B, &s.G, &s.C, &s.D, &s.H, &s.Cm, &s.Dm, &s.Hm, &s.Q, &s.R,
                        &s.N}) {
    if (!m->allFinite()) {
      rep.issues.push_back("non-finite matrix entries");
      break;
    }
  }
  if (!rep.ok()) return rep;

  if (!is_psd(s.Q)) rep.issues.push_back("Q not PSD");
  if (!is_psd(s.R)) rep.issues.push_back("R not PSD");
  Matrix joint(nw + nz, nw + nz);
  joint << s.Q, s.N, s.N.transpose(), s.R;
  if (!is_psd(joint)) rep.issues.push_back("joint noise covariance [[Q,N],[N',R]] not PSD");
  return rep;
}

}  // namespace detail

inline ValidationReport validate(const DiscreteSystem& sys) {
  ValidationReport rep = detail::validate_common(sys);
  if (!(sys.dt > 0.0) || !std::isfinite(sys.dt)) rep.issues.push_back("dt must be positive");
  return rep;
}

inline ValidationReport validate(const ContinuousSystem& sys) {
  return detail::validate_common(sys);
}

/// Throws Error listing every issue when the system is invalid.
template <typename System>
void require_valid(const System& sys) {
  const ValidationReport rep = validate(sys);
  if (rep.ok()) return;
  std::string msg = "invalid system:";
  for (const auto& s : rep.issues) msg += "\n  " + s;
  throw Error(msg);
}

/// Matrix exponential (Padé scaling-and-squaring).
inline Matrix expm(const Matrix& m) {
  if (m.size() == 0) return m;
  Matrix e = m.exp();
  if (!e.allFinite()) throw NonFiniteError("matrix exponential produced non-finite entries");
  return e;
}

inline DiscreteSystem discretize(const ContinuousSystem& csys, double dt,
                                 DiscretizationMethod method) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error("discretize: dt must be positive, got " + std::to_string(dt));
  }
  require_valid(csys);

  const auto nx = csys.nx();
  const auto nu = csys.nu();
  const auto nw = csys.nw();

  DiscreteSystem d{.A = Matrix(),
                   .B = Matrix(),
                   .G = Matrix(),
                   .C = csys.C,
                   .D = csys.D,
                   .H = csys.H,
                   .Cm = csys.Cm,
                   .Dm = csys.Dm,
                   .Hm = csys.Hm,
                   .Q = csys.Q,
                   .R = csys.R,
                   .N = csys.N,
                   .dt = dt};

  switch (method) {
    case DiscretizationMethod::Euler:
      d.A = Matrix::Identity(nx, nx) + csys.A * dt;
      d.B = csys.B * dt;
      d.G = csys.G * dt;
      break;
    case DiscretizationMethod::ZeroOrderHold: {
      // exp([[A, B, G], [0, 0, 0]]·dt) = [[Ad, ∫e^{Aτ}dτ B, ∫e^{Aτ}dτ G], [0, I, ...]]
      const auto n = nx + nu + nw;
      Matrix aug = Matrix::Zero(n, n);
      aug.topLeftCorner(nx, nx) = csys.A;
      aug.block(0, nx, nx, nu) = csys.B;
      aug.block(0, nx + nu, nx, nw) = csys.G;
      const Matrix e = expm(aug * dt);
      d.A = e.topLeftCorner(nx, nx);
      d.B = e.block(0, nx, nx, nu);
      d.G = e.block(0, nx + nu, nx, nw);
      break;
    }
  }
  return d;
}

}  // namespace feedkal

#endif  // FEEDKAL_MODEL_HPP
