#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace feedkal;
using feedkal::testing::mat;

namespace {

struct ScalarFrame {
  long double x_post, y1, y2, w_post, x_next, P_next, var_y1;
};

// Scalar single step written out term by term in long double.
ScalarFrame scalar_step(long double a, long double g, long double c, long double h,
                        long double cm, long double hm, long double q, long double r,
                        long double n, long double x, long double p, long double z) {
  const long double rbar = r + hm * q * hm + 2 * hm * n;
  const long double s = cm * p * cm + rbar;
  const long double nu = z - cm * x;
  const long double kg = p * cm / s;
  const long double kg2 = (q * hm + n) / s;
  ScalarFrame f{};
  f.x_post = x + kg * nu;
  f.w_post = kg2 * nu;
  // Prior form: y = C x + (C P Cm + H Q Hm + H N) S⁻¹ ν
  f.y1 = c * x + (c * p * cm + h * q * hm + h * n) / s * nu;
  f.y2 = 0 * x + (0 * p * cm + 1 * q * hm + 1 * n) / s * nu;
  f.x_next = a * x + (a * p * cm + g * q * hm + g * n) / s * nu;
  const long double t = a * p * cm + g * q * hm + g * n;
  f.P_next = a * p * a + g * q * g - t * t / s;
  const long double u = c * p * cm + h * q * hm + h * n;
  f.var_y1 = c * p * c + h * q * h - u * u / s;
  return f;
}

}  // namespace

TEST_CASE("gains") {
  SUBCASE("no feedthrough, no correlation: Kg2 is exactly zero") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = feedkal::testing::random_system(seed, {.feedthrough = false, .correlated = false});
      const auto g = gains(s, Matrix::Identity(s.nx(), s.nx()));
      CHECK(g.Kg2.cwiseAbs().maxCoeff() == 0.0);
      CHECK(g.M_CH == s.C * g.Kg);
    }
  }
  SUBCASE("Kg2 S reproduces Q Hmᵀ + N at the example's steady state") {
    const auto s = feedkal::testing::feedthrough_example();
    const auto g = gains(s, mat({{feedkal::testing::kExampleRiccatiP}}));
    CHECK(max_abs(g.Kg2 * g.S - (s.Q * s.Hm.transpose() + s.N)) <= 1e-12);
    CHECK(max_abs(g.M_AG - (s.A * g.Kg + s.G * g.Kg2)) <= 1e-12);
    CHECK(max_abs(g.M_CH - (s.C * g.Kg + s.H * g.Kg2)) <= 1e-12);
  }
  SUBCASE("measurement without state information") {
    auto s = feedkal::testing::feedthrough_example();
    s.Cm = Matrix::Zero(1, 1);
    const auto g = gains(s, mat({{3.0}}));
    CHECK(g.Kg.cwiseAbs().maxCoeff() == 0.0);
    const FilterState fs{Vector::Constant(1, 0.7), mat({{3.0}}), 0};
    const auto [f, next] = update(s, fs, Vector::Constant(1, 4.0), Vector::Zero(0));
    CHECK(f.x_post == fs.x_prior);
  }
  SUBCASE("singular innovation covariance") {
    auto s = feedkal::testing::feedthrough_example();
    s.R = Matrix::Zero(1, 1);
    s.Hm = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(gains(s, Matrix::Zero(1, 1)), SingularInnovation);
  }
}

TEST_CASE("update") {
  const auto sys = feedkal::testing::feedthrough_example();
  const double Pstar = feedkal::testing::kExampleRiccatiP;

  SUBCASE("single step against the long-double oracle") {
    const FilterState fs{Vector::Constant(1, 0.4), mat({{Pstar}}), 0};
    const Vector z = Vector::Constant(1, -0.9);
    const auto [f, next] = update(sys, fs, z, Vector::Zero(0));
    const auto o = scalar_step(0.99L, 0.2L, 1, 1, 1, 1, 1, 0.1L, 0, 0.4L, Pstar, -0.9L);
    CHECK(std::abs(f.x_post(0) - static_cast<double>(o.x_post)) <= 1e-15);
    CHECK(std::abs(f.w_post(0) - static_cast<double>(o.w_post)) <= 1e-15);
    CHECK(std::abs(f.y_post(0) - static_cast<double>(o.y1)) <= 1e-15);
    CHECK(std::abs(f.y_post(1) - static_cast<double>(o.y2)) <= 1e-15);
    CHECK(std::abs(f.x_next(0) - static_cast<double>(o.x_next)) <= 1e-15);
    CHECK(std::abs(next.P_prior(0, 0) - static_cast<double>(o.P_next)) <= 1e-15);
    CHECK(std::abs(f.var_y(0, 0) - static_cast<double>(o.var_y1)) <= 1e-15);
    CHECK(next.step == 1);
  }

  SUBCASE("measured-output variance at steady state") {
    const FilterState fs{Vector::Zero(1), mat({{Pstar}}), 0};
    const auto [f, next] = update(sys, fs, Vector::Zero(1), Vector::Zero(0));
    const double closed_form = (Pstar + 1) / (Pstar + 1.1) * 0.1;
    CHECK(f.var_y(0, 0) == doctest::Approx(closed_form).epsilon(1e-13));
    CHECK(std::abs(f.var_y(0, 0) - 0.0910) <= 0.0015);
    CHECK(f.var_y(0, 0) <= sys.R(0, 0));
  }

  SUBCASE("legacy equals corrected without feedthrough") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = feedkal::testing::random_system(seed, {.feedthrough = false, .correlated = false});
      std::mt19937_64 gen(seed);
      const FilterState fs{feedkal::testing::random_vector(gen, s.nx()),
                           Matrix::Identity(s.nx(), s.nx()), 0};
      const Vector z = feedkal::testing::random_vector(gen, s.nz());
      const Vector u = feedkal::testing::random_vector(gen, s.nu());
      const auto a = update(s, fs, z, u, OutputMode::Corrected).first;
      const auto b = update(s, fs, z, u, OutputMode::Legacy).first;
      CHECK(max_abs(a.y_post - b.y_post) <= 1e-15);
    }
  }

  SUBCASE("legacy frames flag var_y and zero the unknown-input estimate") {
    const FilterState fs{Vector::Zero(1), mat({{Pstar}}), 0};
    const auto f = update(sys, fs, Vector::Constant(1, 1.0), Vector::Zero(0), OutputMode::Legacy).first;
    CHECK(f.var_y_is_corrected_only());
    CHECK(f.w_post(0) != 0.0);
    CHECK(f.w_hat()(0) == 0.0);
    CHECK(f.y_post(1) == 0.0);
  }

  SUBCASE("input validation") {
    const FilterState fs{Vector::Zero(1), mat({{1.0}}), 0};
    CHECK_THROWS_AS(update(sys, fs, Vector::Zero(2), Vector::Zero(0)), DimensionError);
    CHECK_THROWS_AS(update(sys, fs, Vector::Constant(1, INFINITY), Vector::Zero(0)), NonFiniteError);
    const FilterState bad{Vector::Zero(2), mat({{1.0}}), 0};
    CHECK_THROWS_AS(update(sys, bad, Vector::Zero(1), Vector::Zero(0)), DimensionError);
  }
}

TEST_CASE("update invariants on random systems") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = feedkal::testing::random_system(seed);
    std::mt19937_64 gen(seed + 1000);
    const Matrix X = feedkal::testing::random_vector(gen, s.nx() * s.nx())
                         .reshaped(s.nx(), s.nx());
    const FilterState fs{feedkal::testing::random_vector(gen, s.nx()),
                         X * X.transpose() + 0.1 * Matrix::Identity(s.nx(), s.nx()), 0};
    const Vector z = feedkal::testing::random_vector(gen, s.nz());
    const Vector u = feedkal::testing::random_vector(gen, s.nu());

    const auto [fc, nc] = update(s, fs, z, u, OutputMode::Corrected);
    const auto [fl, nl] = update(s, fs, z, u, OutputMode::Legacy);

    // Mode affects only the output row.
    CHECK(fc.x_post == fl.x_post);
    CHECK(fc.x_next == fl.x_next);
    CHECK(nc.P_prior == nl.P_prior);
    CHECK(fc.w_post == fl.w_post);

    // Posterior state covariance never exceeds the prior.
    CHECK(min_sym_eigenvalue(fs.P_prior - fc.var_x) >= kPsdTolerance);
    CHECK(min_sym_eigenvalue(fc.var_x) >= kPsdTolerance);
    CHECK(min_sym_eigenvalue(fc.var_y) >= kPsdTolerance);
    CHECK(min_sym_eigenvalue(nc.P_prior) >= kPsdTolerance);

    // Prior-form output equals posterior form with H w_post.
    const Matrix U = s.C * fs.P_prior * s.Cm.transpose() + s.H * s.Q * s.Hm.transpose() + s.H * s.N;
    const Matrix S = s.Cm * fs.P_prior * s.Cm.transpose() + s.effective_measurement_noise();
    const Vector y_prior_form = s.C * fs.x_prior + s.D * u + U * S.ldlt().solve(fc.innovation);
    CHECK(max_abs(fc.y_post - y_prior_form) <= 1e-12 * (1 + max_abs(y_prior_form)));

    // Joseph form agrees with the subtraction form on well-conditioned cases.
    const Matrix pj = riccati_step(s, fs.P_prior, CovarianceForm::Joseph);
    CHECK(max_abs(pj - nc.P_prior) <= 1e-8 * (1 + max_abs(pj)));
  }
}

TEST_CASE("block-matrix form reproduces the per-equation update") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = feedkal::testing::random_system(seed);
    std::mt19937_64 gen(seed + 77);
    const FilterState fs{feedkal::testing::random_vector(gen, s.nx()),
                         Matrix::Identity(s.nx(), s.nx()), 0};
    const Vector z = feedkal::testing::random_vector(gen, s.nz());
    const Vector u = feedkal::testing::random_vector(gen, s.nu());
    for (auto mode : {OutputMode::Corrected, OutputMode::Legacy}) {
      const auto f = update(s, fs, z, u, mode).first;
      const auto blk = assemble_block_update(s, gains(s, fs.P_prior), mode);
      Vector xu(s.nx() + s.nu());
      xu << fs.x_prior, u;
      const Vector out = blk.Phi * xu + blk.Gamma * z;
      Vector want(2 * s.nx() + s.ny());
      want << f.x_post, f.y_post, f.x_next;
      CHECK(max_abs(out - want) <= 1e-12 * (1 + max_abs(want)));
    }
  }
}

TEST_CASE("measured-output variance special case") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = feedkal::testing::random_system(
        seed, {.feedthrough = true, .correlated = false, .outputs_are_measurements = true});
    const Matrix P = Matrix::Identity(s.nx(), s.nx()) * 0.5;
    const auto f = update(s, FilterState{Vector::Zero(s.nx()), P, 0}, Vector::Zero(s.nz()),
                          Vector::Zero(s.nu()))
                       .first;
    const Matrix core = s.Cm * P * s.Cm.transpose() + s.Hm * s.Q * s.Hm.transpose();
    const Matrix closed = core * (core + s.R).inverse() * s.R;
    CHECK(max_abs(f.var_y - closed) <= 1e-12 * (1 + max_abs(closed)));
    CHECK(min_sym_eigenvalue(s.R - f.var_y) >= kPsdTolerance);
  }
}

TEST_CASE("run") {
  const auto sys = feedkal::testing::feedthrough_example();

  SUBCASE("empty sequences") {
    const auto frames = run(sys, FilterState::initial(1, 1.0), Matrix(0, 1), Matrix(0, 0));
    CHECK(frames.empty());
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(run(sys, FilterState::initial(1, 1.0), Matrix::Zero(3, 1), Matrix::Zero(2, 0)),
                    DimensionError);
  }
  SUBCASE("fold equals repeated update") {
    const Matrix Z = mat({{0.3}, {-0.2}, {1.1}});
    const auto frames = run(sys, FilterState::initial(1, 1.0), Z, Matrix::Zero(3, 0));
    FilterState fs = FilterState::initial(1, 1.0);
    for (int k = 0; k < 3; ++k) {
      auto [f, next] = update(sys, fs, Z.row(k).transpose(), Vector::Zero(0));
      CHECK(f.x_post == frames[static_cast<std::size_t>(k)].x_post);
      CHECK(f.y_post == frames[static_cast<std::size_t>(k)].y_post);
      fs = next;
    }
  }
  SUBCASE("noise-free data with a known initial state is tracked exactly") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = feedkal::testing::random_system(seed);
      std::mt19937_64 gen(seed);
      const Vector x0 = feedkal::testing::random_vector(gen, s.nx());
      const Eigen::Index n = 200;
      Matrix Z(n, s.nz()), U(n, s.nu()), X(n, s.nx());
      Vector x = x0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const Vector u = feedkal::testing::random_vector(gen, s.nu());
        U.row(k) = u.transpose();
        X.row(k) = x.transpose();
        Z.row(k) = (s.Cm * x + s.Dm * u).transpose();
        x = s.A * x + s.B * u;
      }
      const FilterState init{x0, 1e-12 * Matrix::Identity(s.nx(), s.nx()), 0};
      const auto frames = run(s, init, Z, U);
      double worst = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        worst = std::max(worst, max_abs(frames[static_cast<std::size_t>(k)].x_post - X.row(k).transpose()));
      }
      CHECK(worst <= 1e-6);
    }
  }
}
