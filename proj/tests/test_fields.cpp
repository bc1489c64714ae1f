#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "staticext/fields.hpp"
#include "staticext/modes.hpp"
#include "staticext/norms.hpp"

using namespace staticext;

namespace {
const Discretization& disc() {
  static Discretization D(32, 6);
  return D;
}
}  // namespace

TEST_CASE("radial grid basics") {
  const auto& D = disc();
  CHECK(D.rad.s(0) == 1.0);
  CHECK(D.rad.s(D.nr() - 1) == 0.0);
  for (int j = 1; j < D.nr(); ++j) CHECK(D.rad.s(j) < D.rad.s(j - 1));

  // spectral differentiation is exact on polynomials in s
  Eigen::VectorXd p(D.nr()), dp(D.nr());
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    p[j] = 1.0 + 2.0 * s - 3.0 * s * s + 0.5 * s * s * s;
    dp[j] = 2.0 - 6.0 * s + 1.5 * s * s;
  }
  Eigen::VectorXd err = D.rad.Ds() * p - dp;
  CHECK(err.cwiseAbs().maxCoeff() < 1e-11);

  // Clenshaw-Curtis integrates polynomials exactly: int_0^1 s^5 = 1/6
  Eigen::VectorXd s5 = D.rad.s().array().pow(5.0);
  CHECK(D.rad.ws().dot(s5) == doctest::Approx(1.0 / 6.0).epsilon(1e-13));

  // d/dr of r^-2 = -2 r^-3, i.e. s^2 -> -2 s^3
  Eigen::VectorXd u = D.rad.s().array().square();
  Eigen::VectorXd dr = D.rad.Dr() * u;
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    CHECK(dr[j] == doctest::Approx(-2.0 * s * s * s).epsilon(1e-10));
  }
}

TEST_CASE("angular quadrature and harmonic orthonormality") {
  const auto& D = disc();
  CHECK(D.ang.w().sum() == doctest::Approx(4.0 * M_PI).epsilon(1e-13));

  const auto& H = D.harm;
  // Schmidt normalization: int Y^2 = 4 pi / (2L+1), cross terms vanish
  for (int c1 = 0; c1 < H.ncoef(); c1 += 7) {
    for (int c2 = 0; c2 < H.ncoef(); c2 += 5) {
      double ip = (D.ang.w().asDiagonal() * H.Yv().col(c1)).dot(H.Yv().col(c2));
      double want = (c1 == c2) ? H.NL(c1) : 0.0;
      CHECK(ip == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    }
  }
  // degree-1 harmonics are exactly the coordinate functions
  int cz = H.coef_index(1, 0, true);
  int cx = H.coef_index(1, 1, true);
  int cy = H.coef_index(1, 1, false);
  for (int k = 0; k < D.ang.nang(); k += 17) {
    CHECK(H.Yv()(k, cz) == doctest::Approx(D.rhat(k, 2)).epsilon(1e-14));
    CHECK(H.Yv()(k, cx) == doctest::Approx(D.rhat(k, 0)).epsilon(1e-14));
    CHECK(H.Yv()(k, cy) == doctest::Approx(D.rhat(k, 1)).epsilon(1e-14));
  }
  // gradient tables: int |dY|^2 = L(L+1) N_L
  for (int c : {2, 5, 9, 14, 23}) {
    double ip = (D.ang.w().asDiagonal() * H.Yt().col(c)).dot(H.Yt().col(c)) +
                (D.ang.w().asDiagonal() * H.Yp().col(c)).dot(H.Yp().col(c));
    CHECK(ip == doctest::Approx(H.Lambda(c) * H.NL(c)).epsilon(1e-12));
  }
  // trace-free Hessian tables: int |Htf|^2 = P_L (with |S|^2 = 2(S1^2+S2^2))
  for (int c : {5, 9, 14, 23}) {
    double ip = 2.0 * ((D.ang.w().asDiagonal() * H.Htf1().col(c)).dot(H.Htf1().col(c)) +
                       (D.ang.w().asDiagonal() * H.Htf2().col(c)).dot(H.Htf2().col(c)));
    CHECK(ip == doctest::Approx(H.PL(c)).epsilon(1e-12));
  }
}

TEST_CASE("cartesian gradient is spectrally exact") {
  const auto& D = disc();
  // u = x y / r^3 = nx ny s: du/dx = y/r^3 - 3 x^2 y/r^5
  Grid2 u(D.nr(), D.nang()), gx(D.nr(), D.nang()), uh(D.nr(), D.nang());
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    for (int k = 0; k < D.ang.nang(); ++k) {
      double nx = D.rhat(k, 0), ny = D.rhat(k, 1);
      u(j, k) = nx * ny * s;
      gx(j, k) = ny * s * s - 3.0 * nx * nx * ny * s * s;
      uh(j, k) = nx * ny * s * s * s;  // x y / r^5, a decaying harmonic
    }
  }
  Cart3 g = cart_gradient(D, u);
  CHECK((g[0] - gx).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(cart_laplacian(D, uh).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("frame <-> cartesian round trip") {
  const auto& D = disc();
  Rng rng(11);
  SymTensorField T = random_tensor_field(D, rng, 1.0);
  SymTensorField R = from_cartesian(D, to_cartesian(T));
  for (int c = 0; c < 6; ++c) CHECK((T.comp(c) - R.comp(c)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("pure trace radial tensor has only L=0 modes") {
  const auto& D = disc();
  // Theta = r^-1 g_o: frame diag(r^-1, r^-1, r^-1)
  SymTensorField T(D);
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    T.comp(SymTensorField::RR).row(j).setConstant(s);
    T.comp(SymTensorField::TT).row(j).setConstant(s);
    T.comp(SymTensorField::PP).row(j).setConstant(s);
  }
  TensorModes M = transform_to_modes(T);
  int c0 = D.harm.coef_index(0, 0, true);
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    CHECK(M.a(j, c0) == doctest::Approx(s).epsilon(1e-12).scale(1.0));
    CHECK(M.d(j, c0) == doctest::Approx(s).epsilon(1e-12).scale(1.0));
  }
  double off = 0.0;
  for (int c = 1; c < D.harm.ncoef(); ++c)
    off = std::max(off, M.a.col(c).cwiseAbs().maxCoeff() + M.d.col(c).cwiseAbs().maxCoeff() +
                            M.b.col(c).cwiseAbs().maxCoeff() + M.c.col(c).cwiseAbs().maxCoeff() +
                            M.bo.col(c).cwiseAbs().maxCoeff() + M.co.col(c).cwiseAbs().maxCoeff());
  CHECK(off < 1e-13);
}

TEST_CASE("mode round trip on random band-limited fields") {
  const auto& D = disc();
  Rng rng(5);
  SymTensorField T = random_tensor_field(D, rng, 1.0);
  SymTensorField R = transform_from_modes(transform_to_modes(T));
  double num = 0, den = 0;
  for (int c = 0; c < 6; ++c) {
    num += (T.comp(c) - R.comp(c)).squaredNorm();
    den += T.comp(c).squaredNorm();
  }
  CHECK(std::sqrt(num / den) < 1e-10);

  // single (L=2, even, c-profile) synthesized then re-decomposed
  TensorModes M;
  M.D = &D;
  for (auto* m : {&M.a, &M.b, &M.c, &M.d, &M.bo, &M.co}) m->setZero(D.nr(), D.harm.ncoef());
  int c22 = D.harm.coef_index(2, 2, true);
  for (int j = 0; j < D.nr(); ++j) M.c(j, c22) = std::pow(D.rad.s(j), 3);
  TensorModes M2 = transform_to_modes(transform_from_modes(M));
  CHECK((M2.c.col(c22) - M.c.col(c22)).cwiseAbs().maxCoeff() < 1e-11);
  M2.c.col(c22).setZero();
  for (auto* m : {&M2.a, &M2.b, &M2.c, &M2.d, &M2.bo, &M2.co})
    CHECK(m->cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one-form mode round trip") {
  const auto& D = disc();
  OneFormModes M;
  M.D = &D;
  for (auto* m : {&M.n, &M.g, &M.s}) m->setZero(D.nr(), D.harm.ncoef());
  int c = D.harm.coef_index(3, 2, false);
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    M.n(j, c) = s * s;
    M.g(j, c) = s * s * (1 - s);
    M.s(j, c) = s * s * s;
  }
  OneFormField V = transform_from_modes_oneform(M);
  OneFormModes M2 = transform_to_modes(V);
  CHECK((M2.n - M.n).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((M2.g - M.g).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((M2.s - M.s).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("parseval consistency for band-limited scalars") {
  const auto& D = disc();
  Rng rng(7);
  ScalarField f = random_scalar_field(D, rng, 1.0);
  ScalarModes M = transform_to_modes(f);
  // compare the surface L2 product on the boundary row with the
  // coefficient sum weighted by N_L
  double grid_ip = f.v().row(0).cwiseAbs2().dot(D.ang.w());
  double mode_ip = 0.0;
  for (int c = 0; c < D.harm.ncoef(); ++c) mode_ip += M.p(0, c) * M.p(0, c) * D.harm.NL(c);
  CHECK(grid_ip == doctest::Approx(mode_ip).epsilon(1e-10));
}

TEST_CASE("epsilon rotation is a parallel isometry with eps^2 = -1") {
  double v1 = 0.3, v2 = -1.7;
  auto [w1, w2] = EpsilonRotation::vec(v1, v2);
  CHECK(w1 * w1 + w2 * w2 == doctest::Approx(v1 * v1 + v2 * v2));
  auto [u1, u2] = EpsilonRotation::vec(w1, w2);
  CHECK(u1 == doctest::Approx(-v1));
  CHECK(u2 == doctest::Approx(-v2));
  // odd vector tables are the rotated even ones
  const auto& D = disc();
  const auto& H = D.harm;
  int c = H.coef_index(2, 1, true);
  for (int k = 0; k < D.ang.nang(); k += 13) {
    auto [s1, s2] = EpsilonRotation::form(H.Yt()(k, c), H.Yp()(k, c));
    CHECK(s1 == doctest::Approx(-H.Yp()(k, c)));
    CHECK(s2 == doctest::Approx(H.Yt()(k, c)));
  }
}

TEST_CASE("reflection projection: idempotent, fixes invariant fields") {
  const auto& D = disc();
  Rng rng(3);
  SymTensorField F = random_tensor_field(D, rng, 1.0);
  SymTensorField P1 = reflection_project(F);
  SymTensorField P2 = reflection_project(P1);
  for (int c = 0; c < 6; ++c) CHECK((P1.comp(c) - P2.comp(c)).cwiseAbs().maxCoeff() < 1e-13);

  SymTensorField S = random_tensor_field(D, rng, 1.0, /*symmetric_only=*/true);
  SymTensorField PS = reflection_project(S);
  for (int c = 0; c < 6; ++c) CHECK((S.comp(c) - PS.comp(c)).cwiseAbs().maxCoeff() < 1e-12);

  // grid projection annihilates exactly the non-symmetric mode families
  TensorModes M = transform_to_modes(P1);
  for (int c = 0; c < D.harm.ncoef(); ++c) {
    ModeKey k = D.harm.key_of(c);
    if (!HarmonicTables::scalar_family_symmetric(k)) {
      CHECK(M.a.col(c).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(M.d.col(c).cwiseAbs().maxCoeff() < 1e-12);
    }
    if (!HarmonicTables::odd_family_symmetric(k))
      CHECK(M.bo.col(c).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("weighted norms: closed-form values and homogeneity") {
  const auto& D = disc();
  ScalarField u(D);
  for (int j = 0; j < D.nr(); ++j) u.v().row(j).setConstant(D.rad.s(j));  // u = 1/r

  WeightedNormSpec k0{0, -0.5};
  CHECK(weighted_norm(u, k0) == doctest::Approx(std::sqrt(4.0 * M_PI)).epsilon(1e-6));

  // k = 1 adds a second layer with the same closed-form value sqrt(4 pi)
  WeightedNormSpec k1{1, -0.5};
  CHECK(weighted_norm(u, k1) == doctest::Approx(2.0 * std::sqrt(4.0 * M_PI)).epsilon(1e-6));

  ScalarField zero(D);
  CHECK(weighted_norm(zero, k1) == 0.0);

  ScalarField u3(D, 3.0 * u.v());
  CHECK(weighted_norm(u3, k0) == doctest::Approx(3.0 * weighted_norm(u, k0)).epsilon(1e-12));

  CHECK_THROWS_AS(weighted_norm(u, WeightedNormSpec{0, -1.5}), InputError);
}
