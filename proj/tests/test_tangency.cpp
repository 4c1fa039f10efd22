#include "instances.hpp"
#include "resonance/tangency.hpp"

#include <gtest/gtest.h>

using namespace resonance;
using namespace fixtures;

namespace {

std::vector<cplx> line_grid(cplx end, int count) {
  std::vector<cplx> g;
  for (int k = 1; k <= count; ++k) g.push_back(end * (static_cast<double>(k) / count));
  return g;
}

template <class F>
void expect_error(Errc code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(ResonantCurve, BranchingFixtureIsParabola) {
  Branching f;
  auto c = resonant_curve(f.z0, f.n0, f.w, line_grid(cplx(0.3, 0.2), 12));
  EXPECT_LE(std::abs(c.taylor_s[0]), 1e-12);
  EXPECT_LE(std::abs(c.taylor_s[1]), 1e-12);
  EXPECT_LE(std::abs(c.taylor_s[2] + 0.5), 1e-10);
  for (const auto& p : c.samples) EXPECT_LE(std::abs(p.s + 0.5 * p.v * p.v), 1e-10);
  EXPECT_LE(c.max_residual, 1e-9);
  auto t = tangency_order(c);
  EXPECT_EQ(t.tangency_order, 2);
  EXPECT_TRUE(t.standard_flag);
}

TEST(ResonantCurve, RankOneFixtureRetracesDirection) {
  RankOne f;
  auto c = resonant_curve(f.z0, f.n0, f.w, line_grid(0.5, 5));
  for (const auto& p : c.samples) EXPECT_LE(std::abs(p.s + p.v), 1e-12);
  EXPECT_LE(std::abs(c.taylor_s[1] + 1.0), 1e-12);
  EXPECT_EQ(tangency_order(c).tangency_order, 1);
}

TEST(ResonantCurve, ZeroDirectionIsConstant) {
  Branching f;
  auto c = resonant_curve(f.z0, f.n0, Matrix::Zero(2, 2), line_grid(1.0, 4));
  for (const auto& p : c.samples) EXPECT_EQ(p.s, cplx(0.0));
  EXPECT_EQ(tangency_order(c).tangency_order, kInfiniteTangency);
}

TEST(ResonantCurve, Errors) {
  expect_error(Errc::NotSimple, [] { resonant_curve(1.0, Matrix::Identity(2, 2), offdiag()); });
  expect_error(Errc::PreconditionViolated, [] { resonant_curve(3.0, diag({1.0, 2.0}), offdiag()); });
  // the eigenvalue 2 - v reaches z0 = 1 at v = 1
  expect_error(Errc::MultiplicityCollision,
               [] { resonant_curve(1.0, diag({1.0, 2.0}), -unit_projector(2, 1), {0.5, 1.0}); });
  // s = v^2 leaves every reasonable range
  expect_error(Errc::NewtonDiverged, [] { resonant_curve(1.0, diag({1.0, 2.0}), offdiag(), {1e4}); });
}

TEST(Tangency, OrderThreeFixture) {
  OrderThree f;
  auto c = resonant_curve(f.z0, f.n0, f.w);
  auto t = tangency_order(c);
  EXPECT_EQ(t.tangency_order, 3);
  ASSERT_EQ(t.chain_vectors.size(), 3u);
  auto rep = verify_tangency_theorems(f.z0, f.n0, f.w);
  EXPECT_EQ(rep.tangency_order, 3);
  EXPECT_EQ(rep.depth, 2);
  EXPECT_EQ(rep.path_order, 3);
  EXPECT_TRUE(rep.holds()) << rep.chain_residual;
}

TEST(Tangency, TheoremsOnFixtures) {
  Branching b;
  auto rb = verify_tangency_theorems(b.z0, b.n0, b.w);
  EXPECT_EQ(rb.tangency_order, 2);
  EXPECT_EQ(rb.depth, 1);
  EXPECT_TRUE(rb.holds());
  RankOne r;
  auto rr = verify_tangency_theorems(r.z0, r.n0, r.w);
  EXPECT_EQ(rr.tangency_order, 1);
  EXPECT_EQ(rr.depth, 0);
  EXPECT_TRUE(rr.holds());
}

TEST(Tangency, ResonantDirectionIsRejected) {
  // W annihilates the eigenvector: z0 stays an eigenvalue along the whole line
  Matrix w = unit_projector(2, 1);
  expect_error(Errc::DegenerateDirection, [&] { verify_tangency_theorems(1.0, diag({1.0, 2.0}), w); });
}

TEST(Tangency, SeededTheoremSweep) {
  Rng rng(606);
  int by_order[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 24; ++trial) {
    int n = rng.integer(3, 6);
    Instance in;
    switch (trial % 3) {
      case 0: in = random_simple(rng, n, false); break;
      case 1: in = order_two_real(rng, n); break;
      default: in = order_three(rng, n); break;
    }
    SCOPED_TRACE(std::to_string(trial) + " " + in.kind);
    auto rep = verify_tangency_theorems(in.z0, in.n0(), in.v);
    EXPECT_TRUE(rep.holds()) << rep.tangency_order << " " << rep.depth << " " << rep.path_order << " "
                             << rep.chain_residual;
    if (in.expected_order > 0) EXPECT_EQ(rep.tangency_order, in.expected_order);
    EXPECT_LE(rep.curve_residual, 1e-9);
    if (rep.tangency_order <= 3) ++by_order[rep.tangency_order];
  }
  EXPECT_GT(by_order[1], 0);
  EXPECT_GT(by_order[2], 0);
  EXPECT_GT(by_order[3], 0);
}

TEST(Tangency, ReparametrizationInvariance) {
  Rng rng(707);
  for (int trial = 0; trial < 9; ++trial) {
    int n = rng.integer(3, 6);
    Instance in = trial % 3 == 0 ? random_simple(rng, n, false) : trial % 3 == 1 ? order_two_real(rng, n)
                                                                                 : order_three(rng, n);
    auto c = resonant_curve(in.z0, in.n0(), in.v);
    const int k = tangency_order(c).tangency_order;
    // u -> v = c1 u + c2 u^2, sampled on a u-circle where the image stays in the disc of the curve
    cplx c1 = std::polar(rng.uniform(0.5, 2.0), rng.uniform(0.0, 6.28)), c2 = rng.cnormal();
    double ru = 0.5 * c.radius / (std::abs(c1) + std::abs(c2) * c.radius);
    auto nodes = circle_nodes(0.0, ru, 64);
    std::vector<cplx> grid;
    for (cplx u : nodes) grid.push_back(c1 * u + c2 * u * u);
    auto re = resonant_curve(in.z0, in.n0(), in.v, grid);
    std::vector<cplx> a(n + 2, 0.0), b;
    a[1] = c1;
    a[2] = c2;
    std::vector<cplx> svals;
    for (const auto& p : re.samples) svals.push_back(p.s);
    for (int j = 0; j < n + 2; ++j) b.push_back(taylor_coefficient(svals, nodes, j));
    auto t = tangency_order_of(a, b, ru, opnorm(in.v));
    EXPECT_EQ(t.tangency_order, k) << trial;
    EXPECT_FALSE(t.standard_flag);
  }
}

TEST(Tangency, CurveIsUniqueAcrossNewtonStarts) {
  Rng rng(808);
  for (int trial = 0; trial < 6; ++trial) {
    auto in = trial % 2 ? order_two_real(rng, 4) : random_simple(rng, 5, false);
    Matrix n0 = in.n0();
    auto grid = line_grid(cplx(0.05, 0.03), 8);
    auto c = resonant_curve(in.z0, n0, in.v, grid);
    for (const auto& p : c.samples) {
      Vector ref = c.chi;
      cplx s = curve_point(in.z0, n0, in.v, c.W0, p.v, p.s + 1e-3 * cplx(1.0, -1.0), ref);
      EXPECT_LE(std::abs(s - p.s), 1e-8);
    }
  }
}

TEST(Tangency, ResonanceParametersAreDiscrete) {
  Rng rng(909);
  for (int trial = 0; trial < 10; ++trial) {
    auto in = random_simple(rng, rng.integer(2, 6), false);
    // along the line H0 + tV, z0 recurs only at isolated parameters, s0 among them
    auto pts = raw_resonance_points(in.z0, in.h0, in.v);
    double nearest = 1e300;
    for (cplx t : pts) nearest = std::min(nearest, std::abs(t - in.s0));
    EXPECT_LE(nearest, 1e-8);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) EXPECT_GT(std::abs(pts[i] - pts[j]), 1e-6);
    EXPECT_LE(pts.size(), static_cast<std::size_t>(in.h0.rows()));
  }
}

TEST(Lax, CommutatorPairingVanishes) {
  Branching f;
  Matrix comm = f.n0 * f.w - f.w * f.n0;
  Matrix expected(2, 2);
  expected << 0.0, 2.0, -2.0, 0.0;
  EXPECT_LE(max_abs(comm - expected), 1e-15);
  auto rep = lax_tangency_check(f.n0, f.w);
  EXPECT_LE(rep.max_pairing, 1e-14);
  EXPECT_LE(rep.eigen_drift, 1e-6);
  auto trivial = lax_tangency_check(diag({1.0, 2.0}), diag({3.0, -1.0}));
  EXPECT_EQ(trivial.max_pairing, 0.0);
  EXPECT_LE(trivial.eigen_drift, 1e-14);
  expect_error(Errc::NotSimple, [] { lax_tangency_check(Matrix::Identity(2, 2), offdiag()); });
}

TEST(Lax, IsospectralFlowOnRandomPairs) {
  Rng rng(1001);
  for (int trial = 0; trial < 10; ++trial) {
    int n = rng.integer(2, 6);
    auto rep = lax_tangency_check(rng.hermitian(n), rng.hermitian(n));
    EXPECT_LE(rep.max_pairing, 1e-12);
    EXPECT_LE(rep.eigen_drift, 1e-6);
    EXPECT_LE(rep.exact_deviation, 1e-6);
  }
}
