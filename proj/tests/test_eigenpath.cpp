#include "instances.hpp"
#include "resonance/eigenpath.hpp"

#include <gtest/gtest.h>

using namespace resonance;
using namespace fixtures;

namespace {

Matrix jordan_pair() {
  Matrix n(2, 2);
  n << 1.0, kI, kI, -1.0;
  return n;
}

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Eigenpath, BranchingFixture) {
  Branching f;
  auto set = trace_eigenpaths(f.z0, f.n0, f.w);
  ASSERT_EQ(set.paths.size(), 1u);
  const auto& p = set.paths[0];
  EXPECT_EQ(p.gauge, "dual");
  EXPECT_LE(std::abs(p.z_derivs[0] - 1.0), 1e-12);
  EXPECT_LE(std::abs(p.z_derivs[1]), 1e-10);
  EXPECT_LE(std::abs(p.z_derivs[2] - 1.0), 1e-9);
  EXPECT_LE(p.eigen_residual, 1e-8);
  // closed form sqrt(1 + v^2) at every sample
  for (std::size_t k = 0; k < set.nodes.size(); ++k)
    EXPECT_LE(std::abs(p.z[k] - std::sqrt(1.0 + set.nodes[k] * set.nodes[k])), 1e-12);
  EXPECT_LE(subspace_distance(p.phi0().normalized(), unit(2, 0)), 1e-10);
  auto conj = conjugate_paths(set);
  ASSERT_EQ(conj.size(), 1u);
  EXPECT_LE(conj[0].pairing_error, 1e-8);
  EXPECT_LE(conj[0].anti_holomorphy_residual, 1e-6);
  Vector expected = unit(2, 0) / unit(2, 0).dot(p.phi0());
  EXPECT_LE((conj[0].dual_derivs[0] - expected).norm(), 1e-9);
  auto po = path_order(set, p, &conj[0]);
  EXPECT_EQ(po.order, 2);
  EXPECT_EQ(po.criterion_order, 2);
  EXPECT_EQ(po.conjugate_order, 2);
}

TEST(Eigenpath, RankOneFixture) {
  RankOne f;
  auto set = trace_eigenpaths(f.z0, f.n0, f.w);
  ASSERT_EQ(set.paths.size(), 1u);
  const auto& p = set.paths[0];
  EXPECT_LE(std::abs(p.z_derivs[1] - 1.0), 1e-12);
  for (std::size_t j = 2; j < p.z_derivs.size(); ++j) EXPECT_LE(std::abs(p.z_derivs[j]), 1e-10);
  auto conj = conjugate_paths(set);
  EXPECT_EQ(path_order(set, p, &conj[0]).order, 1);
}

TEST(Eigenpath, NilpotentShiftedByIdentity) {
  auto set = trace_eigenpaths(0.0, jordan_pair(), Matrix::Identity(2, 2));
  ASSERT_EQ(set.paths.size(), 1u);
  const auto& p = set.paths[0];
  EXPECT_EQ(p.gauge, "pinned");
  EXPECT_LE(std::abs(p.z_derivs[1] - 1.0), 1e-9);
  EXPECT_LE(std::abs(p.z_derivs[2]), 1e-8);
  EXPECT_EQ(code_of([&] { conjugate_paths(set); }), Errc::AssumptionViolated);
}

TEST(Eigenpath, RepeatedEigenvalueGivesTwoPaths) {
  auto set = trace_eigenpaths(3.0, diag({3.0, 3.0}), Matrix::Identity(2, 2));
  ASSERT_EQ(set.paths.size(), 2u);
  auto conj = conjugate_paths(set);
  for (const auto& p : set.paths) {
    EXPECT_LE(std::abs(p.z_derivs[1] - 1.0), 1e-10);
    EXPECT_EQ(path_order(set, p).order, 1);
  }
  for (const auto& c : conj) EXPECT_LE(c.pairing_error, 1e-8);
}

TEST(Eigenpath, BranchingDetected) {
  Matrix w = offdiag();
  EXPECT_EQ(code_of([&] { trace_eigenpaths(0.0, jordan_pair(), w); }), Errc::BranchingDetected);
  auto rep = assumption_check(0.0, jordan_pair(), w);
  EXPECT_FALSE(rep.holds);
  EXPECT_FALSE(rep.no_branching);
  EXPECT_FALSE(rep.semisimple);
  EXPECT_FALSE(rep.diagnostic.empty());
}

TEST(Eigenpath, AssumptionHoldsOnFixtures) {
  Branching b;
  RankOne r;
  EXPECT_TRUE(assumption_check(b.z0, b.n0, b.w).holds);
  EXPECT_TRUE(assumption_check(r.z0, r.n0, r.w).holds);
  Rng rng(8);
  Matrix n0 = rng.general(5), w = rng.hermitian(5);
  EXPECT_TRUE(assumption_check(eigenvalues(n0)[2], n0, w).holds);
}

TEST(Eigenpath, ZeroDirectionRejected) {
  RankOne f;
  EXPECT_EQ(code_of([&] { trace_eigenpaths(f.z0, f.n0, Matrix::Zero(2, 2)); }), Errc::DegenerateDirection);
}

TEST(BranchingReport, Fixtures) {
  Branching b;
  auto yes = branching_report(b.z0, 0.0, b.n0, b.w);
  for (bool c : yes.criteria()) EXPECT_TRUE(c);
  EXPECT_EQ(yes.order, 2);
  EXPECT_EQ(yes.depth, 1);
  EXPECT_EQ(yes.periods, std::vector<int>({2}));

  RankOne r;
  auto no = branching_report(r.z0, 0.0, r.n0, r.w);
  for (bool c : no.criteria()) EXPECT_FALSE(c);
  EXPECT_TRUE(no.all_agree());

  auto lin = branching_report(0.0, 0.0, diag({0.0, 2.0}), -Matrix::Identity(2, 2));
  for (bool c : lin.criteria()) EXPECT_FALSE(c);
}

TEST(BranchingReport, NotSimple) {
  EXPECT_EQ(code_of([] { branching_report(3.0, 0.0, diag({3.0, 3.0, 1.0}), Matrix::Identity(3, 3)); }),
            Errc::NotSimple);
}

TEST(Monodromy, Fixtures) {
  Branching b;
  auto c = monodromy_cycles(b.z0, 0.0, b.n0, b.w, 0.1);
  EXPECT_EQ(c.periods, std::vector<int>({2}));
  EXPECT_EQ(c.permutation, std::vector<int>({1, 0}));

  RankOne r;
  auto d = monodromy_cycles(r.z0, 0.0, r.n0, r.w, 0.1);
  EXPECT_EQ(d.periods, std::vector<int>({1}));
  EXPECT_FALSE(d.nontrivial());
  // tracked point follows s(z) = z - 1
  for (std::size_t k = 0; k < d.loop_nodes.size(); ++k) EXPECT_LE(std::abs(d.tracked[k][0] - (d.loop_nodes[k] - 1.0)), 1e-10);

  TwoCycles t;
  EXPECT_EQ(monodromy_cycles(t.z0, 0.0, t.n0, t.w).periods, std::vector<int>({2, 1}));
  OrderThree o;
  EXPECT_EQ(monodromy_cycles(o.z0, 0.0, o.n0, o.w).periods, std::vector<int>({3}));
}

TEST(Monodromy, PeriodsSumToGroupSize) {
  Rng rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    auto in = order_three(rng, rng.integer(3, 6));
    auto c = monodromy_cycles(in.z0, in.s0, in.h0, in.v);
    int total = std::accumulate(c.periods.begin(), c.periods.end(), 0);
    EXPECT_EQ(total, static_cast<int>(c.permutation.size()));
    EXPECT_EQ(c.periods, std::vector<int>({3}));
    // permutation is the product of its cycles
    for (const auto& cyc : c.cycles)
      for (std::size_t i = 0; i < cyc.size(); ++i) EXPECT_EQ(c.permutation[cyc[i]], cyc[(i + 1) % cyc.size()]);
  }
}

namespace {

// Path-level invariants on an instance satisfying the Assumption.
void check_paths(const Instance& in, const std::string& label) {
  SCOPED_TRACE(label + " " + in.kind);
  Matrix n0 = in.n0();
  auto set = trace_eigenpaths(in.z0, n0, in.v);
  auto conj = conjugate_paths(set);
  auto ops = resonance_operators(laurent_coefficients(in.z0, n0, in.v));
  auto jd = jordan_structure(ops, upsilon_filtration(in.z0, n0, in.v));
  auto cyc = monodromy_cycles(in.z0, in.s0, in.h0, in.v);
  std::vector<int> orders;
  const Matrix id = identity(n0.rows());
  for (std::size_t t = 0; t < set.paths.size(); ++t) {
    const auto& p = set.paths[t];
    EXPECT_LE(p.eigen_residual, 1e-8);
    EXPECT_LE(p.cauchy_residual, 1e-6);
    EXPECT_LE(conj[t].pairing_error, 1e-8);
    EXPECT_LE(conj[t].anti_holomorphy_residual, 1e-6);
    auto po = path_order(set, p, &conj[t]);
    orders.push_back(po.order);
    EXPECT_EQ(po.conjugate_order, po.order);
    EXPECT_TRUE(po.within_rank_bound);
    if (in.expected_order > 0 && set.paths.size() == 1) EXPECT_EQ(po.order, in.expected_order);
    EXPECT_EQ(depth(p.phi0(), ops), po.order - 1);
    for (int j = 1; j < po.order; ++j) {
      const Vector& cur = p.phi_derivs[j];
      const Vector& prev = p.phi_derivs[j - 1];
      double scale = j * prev.norm() + opnorm(ops.A()) * cur.norm();
      EXPECT_LE((ops.A() * cur - double(j) * prev).norm(), 1e-6 * scale) << "chain j=" << j;
      double escale = opnorm(n0) * cur.norm() + j * opnorm(in.v) * prev.norm();
      EXPECT_LE(((n0 - in.z0 * id) * cur + double(j) * in.v * prev).norm(), 1e-6 * escale) << "equation j=" << j;
    }
  }
  std::sort(orders.rbegin(), orders.rend());
  EXPECT_EQ(orders, jd.block_sizes);
  EXPECT_EQ(cyc.periods, jd.block_sizes);
}

}  // namespace

TEST(Eigenpath, InvariantsOnSeededInstances) {
  Rng rng(101);
  for (int trial = 0; trial < 6; ++trial) {
    int n = rng.integer(3, 6);
    check_paths(random_simple(rng, n, trial % 2), std::to_string(trial));
    check_paths(order_two_real(rng, n), std::to_string(trial));
    check_paths(order_three(rng, n), std::to_string(trial));
    check_paths(double_eigenvalue(rng, n), std::to_string(trial));
  }
  for (int trial = 0; trial < 3; ++trial) check_paths(order_two_complex(rng, rng.integer(3, 5)), "c" + std::to_string(trial));
}

TEST(Eigenpath, CrossBranchOrthogonality) {
  TwoCycles f;
  auto set = trace_eigenpaths(f.z0, f.n0, f.w);
  ASSERT_EQ(set.paths.size(), 2u);
  auto conj = conjugate_paths(set);
  for (std::size_t k = 0; k < set.nodes.size(); ++k) {
    EXPECT_LE(std::abs(set.paths[0].dual[k].dot(set.paths[1].phi[k])), 1e-8);
    EXPECT_LE(std::abs(set.paths[1].dual[k].dot(set.paths[0].phi[k])), 1e-8);
  }
}

TEST(Eigenpath, DerivativesStableUnderRadiusHalving) {
  OrderThree f;
  auto a = trace_eigenpaths(f.z0, f.n0, f.w);
  PathOptions opt;
  opt.radius = 0.5 * a.radius;
  auto b = trace_eigenpaths(f.z0, f.n0, f.w, opt);
  for (int j = 0; j <= 3; ++j) EXPECT_LE(std::abs(a.paths[0].z_derivs[j] - b.paths[0].z_derivs[j]), 1e-8);
  EXPECT_LE(std::abs(a.paths[0].z_derivs[3] - b.paths[0].z_derivs[3]), 1e-8);
  EXPECT_GT(std::abs(a.paths[0].z_derivs[3]), 1e-2);
}

TEST(BranchingReport, SevenCriteriaAgreeOnSeededInstances) {
  Rng rng(202);
  int branching = 0;
  for (int trial = 0; trial < 16; ++trial) {
    int n = rng.integer(2, 6);
    Instance in;
    switch (trial % 4) {
      case 0: in = random_simple(rng, n, trial % 8 == 0); break;
      case 1: in = order_two_real(rng, n); break;
      case 2: in = order_three(rng, std::max(n, 3)); break;
      default: in = order_two_complex(rng, std::max(n, 3)); break;
    }
    auto rep = branching_report(in.z0, in.s0, in.h0, in.v);
    EXPECT_TRUE(rep.all_agree()) << trial << " " << in.kind;
    branching += rep.path_order_at_least_two;
  }
  EXPECT_EQ(branching, 12);
}
