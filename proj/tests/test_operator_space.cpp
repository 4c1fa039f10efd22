#include "fixtures.hpp"
#include "resonance/operator_space.hpp"

#include <gtest/gtest.h>

using namespace resonance;
using namespace fixtures;

namespace {

// Roots of s -> det(H0 + sV - z) from its coefficients, recovered by sampling the
// polynomial on roots of unity and solving the companion eigenproblem.
std::vector<cplx> determinant_roots(cplx z, const Matrix& h0, const Matrix& v) {
  const int n = static_cast<int>(h0.rows());
  const int m = n + 1;
  std::vector<cplx> samples(m), coeff(m, 0.0);
  for (int k = 0; k < m; ++k) {
    cplx s = std::polar(1.0, 2.0 * kPi * k / m);
    samples[k] = (h0 + s * v - z * Matrix::Identity(n, n)).determinant();
  }
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) coeff[j] += samples[k] * std::polar(1.0, -2.0 * kPi * j * k / m);
    coeff[j] /= static_cast<double>(m);
  }
  int deg = n;
  double big = 0.0;
  for (cplx c : coeff) big = std::max(big, std::abs(c));
  while (deg > 0 && std::abs(coeff[deg]) <= 1e-12 * big) --deg;
  Matrix comp = Matrix::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coeff[i] / coeff[deg];
  return deg > 0 ? eigenvalues(comp) : std::vector<cplx>{};
}

}  // namespace

TEST(Resolvent, DiagonalInverse) {
  Matrix r = resolvent(diag({1.0, 2.0}), 0.0);
  EXPECT_LE(max_abs(r - diag({1.0, 0.5})), 1e-15);
}

TEST(Resolvent, ClosedFormTwoByTwo) {
  Branching f;
  const double v = 0.5;
  Matrix r = resolvent(f.n0 + v * f.w, 1.0);
  Matrix expected(2, 2);
  expected << 2.0 / (v * v), 1.0 / v, 1.0 / v, 0.0;
  EXPECT_LE(max_abs(r - expected), 1e-13);
  EXPECT_NEAR(r(0, 0).real(), 8.0, 1e-13);
}

TEST(Resolvent, ShiftInSpectrumThrows) {
  try {
    resolvent(diag({1.0, 2.0}), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingularShift);
  }
}

TEST(SpectralData, Diagonal) {
  auto sd = spectral_data(diag({1.0, 2.0}));
  ASSERT_EQ(sd.clusters.size(), 2u);
  for (const auto& c : sd.clusters) {
    EXPECT_EQ(c.algebraic, 1);
    EXPECT_EQ(c.geometric, 1);
  }
}

TEST(SpectralData, NilpotentJordanBlock) {
  Matrix n(2, 2);
  n << 1.0, kI, kI, -1.0;
  auto sd = spectral_data(n);
  ASSERT_EQ(sd.clusters.size(), 1u);
  EXPECT_NEAR(std::abs(sd.clusters[0].value), 0.0, 1e-7);
  EXPECT_EQ(sd.clusters[0].algebraic, 2);
  EXPECT_EQ(sd.clusters[0].geometric, 1);
}

TEST(SpectralData, RepeatedSemisimple) {
  auto sd = spectral_data(diag({3.0, 3.0}));
  ASSERT_EQ(sd.clusters.size(), 1u);
  EXPECT_EQ(sd.clusters[0].algebraic, 2);
  EXPECT_EQ(sd.clusters[0].geometric, 2);
}

TEST(SpectralData, AmbiguousClustering) {
  try {
    spectral_data(diag({0.0, 1.5e-6}), 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AmbiguousClustering);
  }
}

TEST(SpectralData, RightVectorsAreEigenvectors) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix n = rng.general(5);
    auto sd = spectral_data(n);
    int total = 0;
    for (const auto& c : sd.clusters) {
      total += c.algebraic;
      EXPECT_GE(c.geometric, 1);
      EXPECT_LE(c.geometric, c.algebraic);
      EXPECT_LE((n * c.right - c.value * c.right).norm(), 1e-8 * opnorm(n));
      EXPECT_LE((n.adjoint() * c.left - std::conj(c.value) * c.left).norm(), 1e-8 * opnorm(n));
    }
    EXPECT_EQ(total, 5);
  }
}

TEST(ResonancePoints, RankOneCoupling) {
  auto pts = resonance_points_at(0.0, diag({1.0, 2.0}), unit_projector(2, 0));
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NEAR(std::abs(pts[0].s - cplx(-1.0)), 0.0, 1e-12);
}

TEST(ResonancePoints, NegativeIdentity) {
  Matrix v = -Matrix::Identity(2, 2);
  auto pts = resonance_points_at(1.5, diag({0.0, 2.0}), v);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(std::abs(pts[0].s - cplx(-1.5)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(pts[1].s - cplx(0.5)), 0.0, 1e-12);
}

TEST(ResonancePoints, OffDiagonalSquareRoot) {
  auto pts = resonance_points_at(3.0, diag({1.0, -1.0}), offdiag());
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(pts[0].s.real(), -std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(pts[1].s.real(), std::sqrt(8.0), 1e-12);
}

TEST(ResonancePoints, ShiftInSpectrumThrows) {
  EXPECT_THROW(resonance_points_at(1.0, diag({1.0, 2.0}), unit_projector(2, 0)), Error);
}

TEST(ResonancePoints, AgreeWithDeterminantRoots) {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    int n = rng.integer(2, 6);
    Matrix h0 = rng.hermitian(n), v = rng.hermitian(n);
    cplx z{rng.uniform(-2, 2), rng.uniform(-1, 1)};
    auto pts = resonance_points_at(z, h0, v);
    auto roots = determinant_roots(z, h0, v);
    ASSERT_EQ(pts.size(), roots.size());
    for (const auto& p : pts) {
      double best = 1e300;
      for (cplx r : roots) best = std::min(best, std::abs(r - p.s) / std::max(1.0, std::abs(r)));
      EXPECT_LE(best, 1e-8);
    }
  }
}

TEST(ResonancePoints, SecondResolventIdentity) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix n0 = rng.hermitian(6), w = rng.hermitian(6);
    cplx u = rng.cnormal(), v = rng.cnormal(), z{rng.uniform(-1, 1), 2.0 + rng.uniform(0, 1)};
    Matrix rv = resolvent(n0 + v * w, z), ru = resolvent(n0 + u * w, z);
    double scale = opnorm(rv) * opnorm(ru) * opnorm(w) * std::abs(u - v) + opnorm(rv) + opnorm(ru);
    EXPECT_LE(opnorm(rv - ru - (u - v) * rv * w * ru) / scale, 1e-8);
  }
}

TEST(ResonancePoints, EigenspaceOfCouplingOperator) {
  // ker(N0 - z0) equals the eigenspace of R_{z0}(N_v) W at 1/v.
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix n0 = rng.hermitian(5), w = rng.hermitian(5);
    auto sd = spectral_data(n0);
    const auto& c = sd.clusters[2];
    cplx v{0.05, 0.03};
    Matrix t = resolvent(n0 + v * w, c.value) * w - (1.0 / v) * Matrix::Identity(5, 5);
    SvdSplit split = svd_split(t, 1e-8 * opnorm(t));
    EXPECT_LE(subspace_distance(split.kernel, c.right), 1e-6);
  }
}

TEST(MatrixOperator, Invariants) {
  EXPECT_NO_THROW(MatrixOperator::hermitian(offdiag()));
  Matrix m(2, 2);
  m << 0.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(MatrixOperator::hermitian(m), Error);
  EXPECT_THROW(MatrixOperator::general(Matrix(0, 0)), Error);
  AffinePoint p{MatrixOperator::general(diag({1.0, -1.0})), MatrixOperator::hermitian(offdiag()), 0.5};
  EXPECT_NEAR(p.realize()(0, 1).real(), 0.5, 0.0);
}
