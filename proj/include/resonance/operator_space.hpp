#pragma once

#include "resonance/core.hpp"

#include <Eigen/Eigenvalues>

namespace resonance {

class MatrixOperator {
 public:
  MatrixOperator() = default;

  static MatrixOperator general(Matrix m) {
    require(m.rows() >= 1 && m.rows() == m.cols(), Errc::InvalidArgument,
            "operator must be square with n >= 1");
    MatrixOperator op;
    op.m_ = std::move(m);
    return op;
  }

  static MatrixOperator hermitian(Matrix m) {
    MatrixOperator op = general(std::move(m));
    double scale = op.m_.cwiseAbs().maxCoeff();
    double asym = (op.m_ - op.m_.adjoint()).cwiseAbs().maxCoeff();
    require(asym <= 1e-12 * scale, Errc::InvalidArgument, "operator flagged hermitian is not self-adjoint");
    op.hermitian_ = true;
    return op;
  }

  // Flags the operator hermitian when it is numerically self-adjoint.
  static MatrixOperator detect(Matrix m) {
    MatrixOperator op = general(std::move(m));
    double scale = op.m_.cwiseAbs().maxCoeff();
    op.hermitian_ = (op.m_ - op.m_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    return op;
  }

  Eigen::Index n() const { return m_.rows(); }
  bool is_hermitian() const { return hermitian_; }
  const Matrix& matrix() const { return m_; }
  operator const Matrix&() const { return m_; }

 private:
  Matrix m_;
  bool hermitian_ = false;
};

// A point base + coupling * direction of the affine line through base.
struct AffinePoint {
  MatrixOperator base;
  MatrixOperator direction;
  cplx coupling{0.0};

  Matrix realize() const { return base.matrix() + coupling * direction.matrix(); }
};

namespace detail {

// Inverse of (n - z) without the singular-value precheck; callers guarantee
// that z is well inside the resolvent set.
inline Matrix shifted_inverse(const Matrix& n, cplx z) {
  Matrix a = n - z * identity(n.rows());
  Eigen::PartialPivLU<Matrix> lu(a);
  return lu.inverse();
}

inline double smallest_singular_ratio(const Matrix& a) {
  Eigen::VectorXd sv = singular_values(a);
  if (sv(0) == 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

}  // namespace detail

inline Matrix resolvent(const Matrix& n, cplx z) {
  Matrix a = n - z * identity(n.rows());
  Eigen::VectorXd sv = singular_values(a);
  double smin = sv(sv.size() - 1);
  require(sv(0) > 0.0 && smin > static_cast<double>(n.rows()) * kEps * sv(0), Errc::SingularShift,
          "shift lies in the spectrum");
  return Eigen::PartialPivLU<Matrix>(a).inverse();
}

inline std::vector<cplx> eigenvalues(const Matrix& n) {
  Eigen::ComplexEigenSolver<Matrix> es(n, false);
  std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + n.rows());
  return out;
}

struct EigenCluster {
  cplx value;
  int algebraic = 0;
  int geometric = 0;
  Matrix right;  // orthonormal basis of ker(N - value)
  Matrix left;   // orthonormal basis of ker(N* - conj(value))
  RankDecision rank_decision;
};

struct SpectralData {
  std::vector<EigenCluster> clusters;
  double cluster_tolerance = 0.0;

  const EigenCluster* find(cplx z, double tol) const {
    const EigenCluster* best = nullptr;
    for (const auto& c : clusters)
      if (std::abs(c.value - z) <= tol && (!best || std::abs(c.value - z) < std::abs(best->value - z)))
        best = &c;
    return best;
  }
};

// Single-linkage grouping of points closer than tol.
inline std::vector<std::vector<int>> cluster_points(const std::vector<cplx>& pts, double tol) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> label(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (label[i] >= 0) continue;
    label[i] = next;
    std::vector<int> stack{i};
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      for (int b = 0; b < n; ++b)
        if (label[b] < 0 && std::abs(pts[a] - pts[b]) < tol) {
          label[b] = next;
          stack.push_back(b);
        }
    }
    ++next;
  }
  std::vector<std::vector<int>> groups(next);
  for (int i = 0; i < n; ++i) groups[label[i]].push_back(i);
  return groups;
}

inline cplx mean_of(const std::vector<cplx>& pts, const std::vector<int>& idx) {
  cplx s{0.0};
  for (int i : idx) s += pts[i];
  return s / static_cast<double>(idx.size());
}

inline SpectralData spectral_data(const Matrix& n, double cluster_tol = 1e-6, double rank_tol = 1e-8) {
  require(cluster_tol > 0.0, Errc::InvalidArgument, "cluster tolerance must be positive");
  std::vector<cplx> ev = eigenvalues(n);
  auto groups = cluster_points(ev, cluster_tol);
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (std::size_t b = a + 1; b < groups.size(); ++b)
      for (int i : groups[a])
        for (int j : groups[b])
          require(std::abs(ev[i] - ev[j]) >= 2.0 * cluster_tol, Errc::AmbiguousClustering,
                  "eigenvalue clusters closer than twice the clustering tolerance");
  SpectralData sd;
  sd.cluster_tolerance = cluster_tol;
  double scale = std::max(opnorm(n), std::numeric_limits<double>::min());
  for (const auto& g : groups) {
    EigenCluster c;
    c.value = mean_of(ev, g);
    c.algebraic = static_cast<int>(g.size());
    SvdSplit split = svd_split(n - c.value * identity(n.rows()), rank_tol * scale);
    c.rank_decision = split.decision;
    require(!split.decision.ambiguous, Errc::RankDecisionAmbiguous,
            "geometric multiplicity cut falls inside the gap band");
    c.right = split.kernel;
    c.left = split.cokernel;
    c.geometric = static_cast<int>(split.kernel.cols());
    sd.clusters.push_back(std::move(c));
  }
  std::sort(sd.clusters.begin(), sd.clusters.end(), [](const EigenCluster& a, const EigenCluster& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
  });
  return sd;
}

struct ResonancePoint {
  cplx s;
  int multiplicity = 1;
  double residual = 0.0;
};

// All finite couplings s with z in sigma(H0 + sV), one entry per eigenvalue of R_z(H0)V.
inline std::vector<cplx> raw_resonance_points(cplx z, const Matrix& h0, const Matrix& v, double drop_tol = 1e-12) {
  Matrix t = resolvent(h0, z) * v;
  double scale = opnorm(t);
  std::vector<cplx> out;
  for (cplx mu : eigenvalues(t))
    if (std::abs(mu) > drop_tol * scale && scale > 0.0) out.push_back(-1.0 / mu);
  return out;
}

inline std::vector<ResonancePoint> resonance_points_at(cplx z, const Matrix& h0, const Matrix& v, double tol = 1e-8) {
  Matrix t = resolvent(h0, z) * v;
  double scale = opnorm(t);
  std::vector<cplx> mus;
  for (cplx mu : eigenvalues(t))
    if (scale > 0.0 && std::abs(mu) > tol * scale) mus.push_back(mu);
  double ctol = 1e-6 * std::max(scale, std::numeric_limits<double>::min());
  std::vector<ResonancePoint> out;
  for (const auto& g : cluster_points(mus, ctol)) {
    ResonancePoint p;
    p.s = -1.0 / mean_of(mus, g);
    p.multiplicity = static_cast<int>(g.size());
    Matrix shifted = h0 + p.s * v - z * identity(h0.rows());
    p.residual = detail::smallest_singular_ratio(shifted);
    require(p.residual <= std::max(tol, 1e3 * kEps), Errc::PreconditionViolated,
            "resonance point failed the spectral membership check");
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const ResonancePoint& a, const ResonancePoint& b) {
    if (a.s.real() != b.s.real()) return a.s.real() < b.s.real();
    return a.s.imag() < b.s.imag();
  });
  return out;
}

// Couplings v with z0 in sigma(N0 + vW) when z0 itself is an eigenvalue of N0.
// Computed on a shifted line through a non-resonant probe u.
struct CouplingResonances {
  std::vector<cplx> at_zero;  // the group collapsing onto v = 0
  std::vector<cplx> others;
  cplx probe;
};

inline double direction_scale(const Matrix& w) {
  double nw = opnorm(w);
  return nw > 0.0 ? nw : 1.0;
}

inline CouplingResonances coupling_resonances(cplx z0, const Matrix& n0, const Matrix& w) {
  require(opnorm(w) > 0.0, Errc::DegenerateDirection, "perturbation direction is zero");
  const double base = 0.37 / direction_scale(w);
  const auto id = identity(n0.rows());
  for (int attempt = 0; attempt < 12; ++attempt) {
    cplx u = base * (1.0 + 0.31 * attempt) * std::polar(1.0, 1.0 + 0.7 * attempt);
    Matrix a = n0 + u * w - z0 * id;
    if (detail::smallest_singular_ratio(a) < 1e-7) continue;
    Matrix t = Eigen::PartialPivLU<Matrix>(a).inverse() * w;
    double scale = opnorm(t);
    CouplingResonances out;
    out.probe = u;
    for (cplx mu : eigenvalues(t)) {
      if (std::abs(mu) <= 1e-12 * scale) continue;
      cplx v = u - 1.0 / mu;
      (std::abs(v) <= 1e-3 * std::abs(u) ? out.at_zero : out.others).push_back(v);
    }
    return out;
  }
  throw Error(Errc::DegenerateDirection, "every probe coupling is resonant; the line stays in the resonance set");
}

inline double nearest_other_resonance(cplx z0, const Matrix& n0, const Matrix& w) {
  auto cr = coupling_resonances(z0, n0, w);
  double d = std::numeric_limits<double>::infinity();
  for (cplx v : cr.others) d = std::min(d, std::abs(v));
  return d;
}

}  // namespace resonance
