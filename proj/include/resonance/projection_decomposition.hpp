#pragma once

#include "resonance/eigenpath.hpp"

namespace resonance {

struct CycleProjection {
  int tau = 0;
  int period = 0;
  Matrix P;
  int path = -1;                   // eigenpath whose generating eigenvector lies in im P
  std::vector<Vector> span_basis;  // phi^(j)(0)/j!, j < period
  int rank = 0;
  int eigen_intersection = 0;      // dim(im P ∩ ker(N0 - z0))
  bool single_cell = false;
  double idempotent_residual = 0.0;
  double commutator_residual = 0.0;
  double radius_disagreement = 0.0;
};

namespace detail {

// Riesz projections of R_z(N0)V onto the eigenvalues -1/t of each cycle, averaged over the loop.
inline std::vector<Matrix> loop_cycle_projections(const CycleDecomposition& cyc, const Matrix& n0, const Matrix& v) {
  const int m = static_cast<int>(cyc.loop_nodes.size());
  std::vector<Matrix> acc(cyc.cycles.size(), Matrix::Zero(n0.rows(), n0.cols()));
  for (int k = 0; k < m; ++k) {
    Matrix t = shifted_inverse(n0, cyc.loop_nodes[k]) * v;
    auto ev = eigenvalues(t);
    for (std::size_t c = 0; c < cyc.cycles.size(); ++c)
      for (int j : cyc.cycles[c]) {
        cplx mu = -1.0 / (cyc.tracked[k][j] - cyc.s0);
        double gap = std::numeric_limits<double>::infinity();
        for (cplx e : ev)
          if (std::abs(e - mu) > 1e-8 * std::abs(mu)) gap = std::min(gap, std::abs(e - mu));
        double r = std::isfinite(gap) ? 0.5 * gap : 0.5 * std::abs(mu);
        acc[c] += riesz_projection(t, mu, r);
      }
  }
  for (auto& a : acc) a /= static_cast<double>(m);
  return acc;
}

}  // namespace detail

inline std::vector<CycleProjection> cycle_projections(cplx z0, const Matrix& h0, const Matrix& v,
                                                      const CycleDecomposition& cyc, const ResonanceOperators& ops,
                                                      double tol = 1e-6) {
  Matrix n0 = h0 + cyc.s0 * v;
  auto first = detail::loop_cycle_projections(cyc, n0, v);
  auto half = monodromy_cycles(z0, cyc.s0, h0, v, 0.5 * cyc.loop_radius, static_cast<int>(cyc.loop_nodes.size()));
  auto second = detail::loop_cycle_projections(half, n0, v);
  require(first.size() == second.size(), Errc::ExtrapolationUnstable, "cycle structure changes with the loop radius");

  Matrix kernel = right_eigenspace(z0, n0);
  Matrix a = ops.A();
  std::vector<CycleProjection> out;
  std::vector<bool> used(second.size(), false);
  for (std::size_t c = 0; c < first.size(); ++c) {
    CycleProjection p;
    p.tau = static_cast<int>(c);
    p.period = static_cast<int>(cyc.cycles[c].size());
    p.P = first[c];
    double pn = std::max(opnorm(p.P), 1e-300);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t d = 0; d < second.size(); ++d)
      if (!used[d] && opnorm(second[d] - p.P) < best) {
        best = opnorm(second[d] - p.P);
        arg = d;
      }
    used[arg] = true;
    p.radius_disagreement = best / pn;
    require(p.radius_disagreement <= tol, Errc::ExtrapolationUnstable,
            "cycle projection differs between loop radii by " + std::to_string(p.radius_disagreement));
    p.idempotent_residual = opnorm(p.P * p.P - p.P) / pn;
    p.commutator_residual =
        opnorm(p.P * a - a * p.P) / (pn * std::max(opnorm(a), opnorm(ops.P) / direction_scale(ops.W)));
    Matrix range = svd_split(p.P, 1e-6 * pn).range;
    p.rank = static_cast<int>(range.cols());
    // intersection with the eigenspace: kernel of [range, -kernel]
    Matrix stacked(n0.rows(), range.cols() + kernel.cols());
    stacked << range, -kernel;
    p.eigen_intersection = static_cast<int>(svd_split(stacked, 1e-6).kernel.cols());
    // one Jordan cell: A restricted to im P has rank period - 1
    Matrix ar = range.adjoint() * a * range;
    p.single_cell = svd_split(ar, nilpotent_threshold(ops, 1)).decision.rank == p.rank - 1;
    out.push_back(std::move(p));
  }
  return out;
}

// Associates each cycle projection with the eigenpath whose generating eigenvector it contains.
inline void attach_paths(std::vector<CycleProjection>& projections, const EigenpathSet& set) {
  std::vector<bool> used(set.paths.size(), false);
  for (auto& p : projections) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t t = 0; t < set.paths.size(); ++t) {
      const Vector& x = set.paths[t].phi0();
      double res = (p.P * x - x).norm() / x.norm();
      if (!used[t] && res < best) {
        best = res;
        arg = static_cast<int>(t);
      }
    }
    if (arg < 0) continue;
    used[arg] = true;
    p.path = arg;
    p.span_basis.clear();
    for (int j = 0; j < p.period && j < static_cast<int>(set.paths[arg].phi_derivs.size()); ++j)
      p.span_basis.push_back(set.paths[arg].phi_derivs[j] / factorial(j));
  }
}

struct HankelPair {
  std::vector<int> block_paths;  // eigenpath index of each block
  std::vector<int> block_sizes;
  std::vector<Matrix> beta, alpha;
  Matrix beta_full;
  double cross_block_max = 0.0;   // relative to the largest beta entry
  double hankel_residual = 0.0;
  double skew_zero_max = 0.0;
  double alpha_skew_zero_max = 0.0;
  double inverse_residual = 0.0;
};

namespace detail {

inline Vector scaled_phi(const Eigenpath& p, int j) { return p.phi_derivs[j] / factorial(j); }
inline Vector scaled_dual(const Eigenpath& p, int j) { return p.dual_derivs[j] / factorial(j); }

}  // namespace detail

// orders[t] is the path order of set.paths[t].
inline HankelPair beta_alpha(const EigenpathSet& set, const std::vector<int>& orders, double tol = 1e-8) {
  const Matrix& w = set.direction;
  HankelPair hp;
  std::vector<int> idx(set.paths.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return orders[a] > orders[b]; });
  std::vector<std::pair<int, int>> labels;  // (path, derivative)
  for (int t : idx) {
    require(set.paths[t].has_dual(), Errc::AssumptionViolated, "beta needs conjugate paths");
    require(static_cast<int>(set.paths[t].phi_derivs.size()) >= orders[t], Errc::InvalidArgument,
            "not enough derivatives for the path order");
    hp.block_paths.push_back(t);
    hp.block_sizes.push_back(orders[t]);
    for (int j = 0; j < orders[t]; ++j) labels.emplace_back(t, j);
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  hp.beta_full = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& mu = set.paths[labels[r].first];
      const auto& tau = set.paths[labels[c].first];
      hp.beta_full(r, c) = detail::scaled_dual(mu, labels[r].second).dot(w * detail::scaled_phi(tau, labels[c].second));
    }
  const double scale = std::max(hp.beta_full.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      if (labels[r].first != labels[c].first)
        hp.cross_block_max = std::max(hp.cross_block_max, std::abs(hp.beta_full(r, c)) / scale);
  Eigen::Index offset = 0;
  for (int d : hp.block_sizes) {
    Matrix b = hp.beta_full.block(offset, offset, d, d);
    offset += d;
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j) {
        if (k > 0 && j + 1 < d)
          hp.hankel_residual = std::max(hp.hankel_residual, std::abs(b(k, j) - b(k - 1, j + 1)) / scale);
        if (k + j <= d - 2) hp.skew_zero_max = std::max(hp.skew_zero_max, std::abs(b(k, j)) / scale);
      }
    Eigen::VectorXd sv = singular_values(b);
    require(sv(d - 1) > 1e-10 * sv(0), Errc::SingularBeta, "a beta block is numerically singular");
    Matrix a = b.inverse().transpose();
    double ascale = a.cwiseAbs().maxCoeff();
    for (int k = 0; k < d; ++k)
      for (int j = 0; j < d; ++j)
        if (k + j >= d) hp.alpha_skew_zero_max = std::max(hp.alpha_skew_zero_max, std::abs(a(k, j)) / ascale);
    hp.inverse_residual = std::max(hp.inverse_residual, (a.transpose() * b - Matrix::Identity(d, d)).cwiseAbs().maxCoeff());
    hp.beta.push_back(b);
    hp.alpha.push_back(a);
  }
  (void)tol;
  return hp;
}

// P = sum over blocks of sum_{k,j} alpha^{kj} <W* dual_k, .> phi_j with scaled derivatives (W* = W for hermitian W).
inline Matrix schmidt_reconstruction(const HankelPair& hp, const EigenpathSet& set) {
  const Matrix& w = set.direction;
  Matrix p = Matrix::Zero(w.rows(), w.cols());
  for (std::size_t b = 0; b < hp.block_paths.size(); ++b) {
    const auto& path = set.paths[hp.block_paths[b]];
    const int d = hp.block_sizes[b];
    for (int k = 0; k < d; ++k) {
      Vector g = w.adjoint() * detail::scaled_dual(path, k);
      for (int j = 0; j < d; ++j) p += hp.alpha[b](k, j) * detail::scaled_phi(path, j) * g.adjoint();
    }
  }
  return p;
}

}  // namespace resonance
