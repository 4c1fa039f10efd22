#pragma once

#include "resonance/laurent.hpp"

namespace resonance {

inline constexpr int kInfiniteDepth = std::numeric_limits<int>::max();

struct UpsilonFiltration {
  cplx z0;
  std::vector<Matrix> bases;  // bases[k-1] spans the order-k resonance vectors
  std::vector<int> dims;
  int m = 0;
  int n = 0;
  int order_d = 0;
  cplx probe;
  double probe_disagreement = 0.0;  // max principal-angle sine against the second probe
  std::vector<RankDecision> decisions;

  const Matrix& full() const { return bases.back(); }
};

namespace detail {

struct KernelChain {
  std::vector<Matrix> bases;
  std::vector<RankDecision> decisions;
};

// Upsilon^k = {x : T x in Upsilon^(k-1)} with T = R_{z0}(N_u)(N0 - z0) = 1 - u R_{z0}(N_u) W.
inline KernelChain probe_kernels(cplx z0, const Matrix& n0, const Matrix& w, cplx u, double tol) {
  const auto id = identity(n0.rows());
  Matrix a = n0 + u * w - z0 * id;
  require(smallest_singular_ratio(a) > 1e-7, Errc::ProbeAtResonance, "probe coupling is itself a resonance point");
  Matrix t = Eigen::PartialPivLU<Matrix>(a).solve(n0 - z0 * id);
  const double cut = tol * std::max(opnorm(t), 1.0);
  KernelChain out;
  Matrix prev(n0.rows(), 0);
  for (int k = 1; k <= n0.rows(); ++k) {
    Matrix reduced = t - prev * (prev.adjoint() * t);
    SvdSplit split = svd_split(reduced, cut);
    require(!split.decision.ambiguous, Errc::RankDecisionAmbiguous, "kernel cut of the filtration is ambiguous");
    if (split.kernel.cols() == prev.cols()) break;
    out.bases.push_back(split.kernel);
    out.decisions.push_back(split.decision);
    prev = split.kernel;
  }
  return out;
}

inline cplx clear_probe(cplx z0, const Matrix& n0, const Matrix& w, double start, double angle) {
  const auto id = identity(n0.rows());
  cplx best = start * std::polar(1.0, angle);
  double best_ratio = -1.0;
  for (int k = 0; k < 6; ++k) {
    cplx u = start * std::pow(4.0, k) * std::polar(1.0, angle);
    double ratio = smallest_singular_ratio(Matrix(n0 + u * w - z0 * id));
    if (ratio > best_ratio) best = u, best_ratio = ratio;
    if (ratio > 1e-5) break;
  }
  return best;
}

}  // namespace detail

inline UpsilonFiltration upsilon_filtration(cplx z0, const Matrix& n0, const Matrix& w, cplx probe = 0.0,
                                            double tol = 1e-8) {
  require_eigenvalue(z0, n0);
  double radius = default_contour_radius(z0, n0, w);
  cplx second;
  if (probe == 0.0) {
    // high-order branches barely move z0 inside the contour radius, so walk outward
    // until the pencil is comfortably invertible; the filtration does not depend on u
    probe = detail::clear_probe(z0, n0, w, 0.7 * radius, 1.0);
    second = detail::clear_probe(z0, n0, w, 0.45 * radius, -2.1);
  } else {
    second = 0.45 * std::abs(probe) / 0.7 * std::polar(1.0, -2.1);
  }
  auto chain = detail::probe_kernels(z0, n0, w, probe, tol);
  auto check = detail::probe_kernels(z0, n0, w, second, tol);
  UpsilonFiltration f;
  f.z0 = z0;
  f.probe = probe;
  f.bases = chain.bases;
  f.decisions = chain.decisions;
  require(!f.bases.empty() && f.bases.front().cols() > 0, Errc::PreconditionViolated,
          "no resonance vectors: z0 is not an eigenvalue");
  for (const auto& b : f.bases) f.dims.push_back(static_cast<int>(b.cols()));
  f.m = f.dims.front();
  f.n = f.dims.back();
  f.order_d = static_cast<int>(f.dims.size());
  f.probe_disagreement = chain.bases.size() == check.bases.size() ? 0.0 : 1.0;
  for (std::size_t k = 0; k < std::min(chain.bases.size(), check.bases.size()); ++k)
    f.probe_disagreement = std::max(f.probe_disagreement, subspace_distance(chain.bases[k], check.bases[k]));
  require(f.probe_disagreement <= 1e-6, Errc::RankDecisionAmbiguous, "filtration depends on the probe coupling");
  return f;
}

// Absolute singular-value cut for powers of the resonance nilpotent; A carries
// the units of the coupling, so the k-th power scales like |W|^-k.
inline double nilpotent_threshold(const ResonanceOperators& ops, int k, double rel = 1e-8) {
  return rel * std::max(opnorm(ops.P), 1.0) * std::pow(direction_scale(ops.W), -k);
}

inline int depth(const Vector& phi, const ResonanceOperators& ops, double tol = 1e-6) {
  double nphi = phi.norm();
  if (nphi == 0.0) return kInfiniteDepth;
  require((ops.P * phi - phi).norm() <= tol * nphi, Errc::NotResonanceVector, "vector lies outside im P");
  int k = 0;
  for (int j = 1; j <= ops.order; ++j) {
    Matrix ak = ops.A_power(j);
    SvdSplit split = svd_split(ak, nilpotent_threshold(ops, j));
    require(!split.decision.ambiguous, Errc::RankDecisionAmbiguous, "image cut of A^k is ambiguous");
    if (membership_residual(split.range, phi) > tol) break;
    k = j;
  }
  return k;
}

struct SemisimplicityReport {
  Matrix E, D;
  bool semisimple = false;
  bool gram_invertible = false;
  double gram_sigma_min = 0.0;
  double nilpotent_norm = 0.0;
  double radius = 0.0;
  bool consistent = false;
};

inline double default_spectral_radius(cplx z0, const Matrix& n0) {
  double dist = std::numeric_limits<double>::infinity();
  for (cplx l : eigenvalues(n0))
    if (std::abs(l - z0) > 1e-4 * std::max(1.0, opnorm(n0))) dist = std::min(dist, std::abs(l - z0));
  return std::isfinite(dist) ? 0.5 * dist : std::max(1.0, opnorm(n0));
}

inline SemisimplicityReport semisimplicity_check(cplx z0, const Matrix& n0, double radius = 0.0, double tol = 1e-8,
                                                 int nodes = 128) {
  if (radius <= 0.0) radius = default_spectral_radius(z0, n0);
  bool inside = false;
  for (cplx l : eigenvalues(n0)) {
    double r = std::abs(l - z0);
    require(r <= 0.25 * radius || r >= 1.25 * radius, Errc::ContourHitsSpectrum,
            "spectral contour passes too close to an eigenvalue");
    inside = inside || r <= 0.25 * radius;
  }
  require(inside, Errc::PreconditionViolated, "no eigenvalue inside the spectral contour");
  SemisimplicityReport rep;
  rep.radius = radius;
  const Eigen::Index n = n0.rows();
  rep.E = Matrix::Zero(n, n);
  rep.D = Matrix::Zero(n, n);
  auto zeta = circle_nodes(z0, radius, nodes);
  for (cplx x : zeta) {
    Matrix r = detail::shifted_inverse(n0, x);
    rep.E -= (x - z0) * r;
    rep.D -= (x - z0) * (x - z0) * r;
  }
  rep.E /= static_cast<double>(nodes);
  rep.D /= static_cast<double>(nodes);
  double scale = std::max({opnorm(n0), std::abs(z0), 1e-300});
  rep.nilpotent_norm = opnorm(rep.D);
  rep.semisimple = rep.nilpotent_norm <= tol * scale;
  Matrix a = n0 - z0 * identity(n);
  SvdSplit split = svd_split(a, 1e-8 * scale);
  if (split.kernel.cols() > 0) {
    Matrix g = split.cokernel.adjoint() * split.kernel;
    Eigen::VectorXd sv = singular_values(g);
    rep.gram_sigma_min = sv(sv.size() - 1);
  }
  rep.gram_invertible = rep.gram_sigma_min > 1e-8;
  rep.consistent = rep.semisimple == rep.gram_invertible;
  return rep;
}

struct JordanData {
  std::vector<int> block_sizes;             // descending
  std::vector<std::vector<Vector>> chains;  // chain[0] is the eigenvector, A chain[j] = chain[j-1]
  int nilpotency_index = 0;
  std::vector<int> rank_sequence;  // rank of A^k restricted to the resonance space, k = 0..
};

inline JordanData jordan_structure(const ResonanceOperators& ops, const UpsilonFiltration& f) {
  const Matrix& q = f.full();
  const int n = static_cast<int>(q.cols());
  Matrix a = q.adjoint() * ops.A() * q;
  JordanData jd;
  std::vector<Matrix> kernels{Matrix(n, 0)};
  jd.rank_sequence.push_back(n);
  Matrix ak = Matrix::Identity(n, n);
  for (int k = 1; jd.rank_sequence.back() > 0; ++k) {
    ak = ak * a;
    SvdSplit split = svd_split(ak, nilpotent_threshold(ops, k));
    require(!split.decision.ambiguous, Errc::RankDecisionAmbiguous, "rank of A^k falls inside the gap band");
    jd.rank_sequence.push_back(split.decision.rank);
    kernels.push_back(split.kernel);
    require(k <= n + 1, Errc::RankDecisionAmbiguous, "resonance nilpotent is not nilpotent on its space");
  }
  const int top = static_cast<int>(jd.rank_sequence.size()) - 1;
  auto r = [&](int k) { return k <= top ? jd.rank_sequence[k] : 0; };
  kernels.push_back(Matrix::Identity(n, n));
  for (int s = top; s >= 1; --s) {
    int count = (r(s - 1) - r(s)) - (r(s) - r(s + 1));
    if (count <= 0) continue;
    Matrix covered(n, kernels[s - 1].cols() + kernels[s + 1].cols());
    covered << kernels[s - 1], a * kernels[s + 1];
    Matrix sbasis = orthonormalize(covered);
    Matrix rest = kernels[s] - sbasis * (sbasis.adjoint() * kernels[s]);
    Eigen::JacobiSVD<Matrix> svd(rest, Eigen::ComputeFullV);
    for (int c = 0; c < count; ++c) {
      Vector x = kernels[s] * svd.matrixV().col(c);
      std::vector<Vector> chain(s);
      chain[s - 1] = x;
      for (int j = s - 2; j >= 0; --j) chain[j] = a * chain[j + 1];
      for (auto& v : chain) v = q * v;
      jd.chains.push_back(std::move(chain));
      jd.block_sizes.push_back(s);
    }
  }
  jd.nilpotency_index = top;
  int total = std::accumulate(jd.block_sizes.begin(), jd.block_sizes.end(), 0);
  require(total == f.n && static_cast<int>(jd.block_sizes.size()) == f.m, Errc::RankDecisionAmbiguous,
          "Jordan blocks do not tile the resonance space");
  return jd;
}

}  // namespace resonance
