#pragma once

#include "resonance/eigenpath.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace resonance {

struct CurveSample {
  cplx v;
  cplx s;
  double residual = 0.0;  // sigma_min(N(v) - z0) / scale
};

struct ResonantCurve {
  cplx z0;
  Matrix N0, W, W0;
  Vector chi, chi_dual;  // <chi_dual, chi> = 1, |chi| = 1
  double radius = 0.0;   // Taylor circle
  int nodes = 0;
  std::vector<cplx> taylor_s;          // s_0 .. s_J
  std::vector<Vector> taylor_chi;      // eigenvector coefficients in the gauge <chi_dual, chi(v)> = 1
  std::vector<CurveSample> samples;    // grid points
  std::vector<CurveSample> circle;     // Taylor circle points
  double max_residual = 0.0;

  Matrix at(cplx v, cplx s) const { return N0 + v * W + s * W0; }
};

namespace detail {

inline double curve_scale(const Matrix& n0, const Matrix& w) { return std::max({1.0, opnorm(n0), opnorm(w)}); }

struct TrackedEigen {
  cplx z;
  Vector x, y;  // right and left, y* x = 1
  double nearest_other = 0.0;
};

// Eigenvalue of n whose eigenvector overlaps most with ref.
inline TrackedEigen tracked_eigen(const Matrix& n, const Vector& ref, cplx z0) {
  Eigen::ComplexEigenSolver<Matrix> es(n);
  const Matrix& x = es.eigenvectors();
  Matrix y = Eigen::PartialPivLU<Matrix>(x).inverse();
  const auto& lam = es.eigenvalues();
  int j = 0;
  double best = -1.0;
  for (int k = 0; k < lam.size(); ++k) {
    double ov = std::abs(x.col(k).dot(ref)) / (x.col(k).norm() * ref.norm());
    if (ov > best + 1e-12 || (std::abs(ov - best) <= 1e-12 && std::abs(lam(k) - z0) < std::abs(lam(j) - z0))) {
      best = ov;
      j = k;
    }
  }
  TrackedEigen t{lam(j), x.col(j), y.row(j).adjoint(), std::numeric_limits<double>::infinity()};
  for (int k = 0; k < lam.size(); ++k)
    if (k != j) t.nearest_other = std::min(t.nearest_other, std::abs(lam(k) - lam(j)));
  return t;
}

}  // namespace detail

// Newton on s for the eigenvalue tracked from ref, so that z0 is an eigenvalue of N0 + vW + sW0.
inline cplx curve_point(cplx z0, const Matrix& n0, const Matrix& w, const Matrix& w0, cplx v, cplx s_start,
                        Vector& ref, int max_iter = 60) {
  const double scale = detail::curve_scale(n0, w);
  cplx s = s_start;
  for (int it = 0; it < max_iter; ++it) {
    auto t = detail::tracked_eigen(n0 + v * w + s * w0, ref, z0);
    require(std::isfinite(std::abs(t.z)), Errc::NewtonDiverged, "eigenvalue is not finite");
    if (std::abs(t.z - z0) <= 1e-14 * scale) {
      require(t.nearest_other > 1e-6 * scale, Errc::MultiplicityCollision,
              "a second eigenvalue reaches z0 along the curve");
      ref = t.x / t.x.norm();
      return s;
    }
    cplx dz = t.y.dot(w0 * t.x);
    require(std::abs(dz) > 1e-12, Errc::NewtonDiverged, "eigenvalue does not move along W0");
    s -= (t.z - z0) / dz;
    require(std::abs(s) < 1e6 * scale, Errc::NewtonDiverged, "Newton iterate left any reasonable range");
    if (it + 1 == max_iter) {
      auto last = detail::tracked_eigen(n0 + v * w + s * w0, ref, z0);
      if (std::abs(last.z - z0) <= 1e-11 * scale) {
        require(last.nearest_other > 1e-6 * scale, Errc::MultiplicityCollision,
                "a second eigenvalue reaches z0 along the curve");
        ref = last.x / last.x.norm();
        return s;
      }
    }
  }
  throw Error(Errc::NewtonDiverged, "Newton did not converge on the resonant curve");
}

namespace detail {

// Continues (v_from, s_from) to v_to, bisecting the segment when a direct Newton solve fails.
inline cplx continue_curve(cplx z0, const Matrix& n0, const Matrix& w, const Matrix& w0, cplx v_from, cplx s_from,
                           cplx v_to, Vector& ref, int depth = 0) {
  Vector trial = ref;
  try {
    cplx s = curve_point(z0, n0, w, w0, v_to, s_from, trial);
    ref = trial;
    return s;
  } catch (const Error& e) {
    if (e.code() != Errc::NewtonDiverged || depth >= 16) throw;
  }
  cplx mid = 0.5 * (v_from + v_to);
  cplx s_mid = continue_curve(z0, n0, w, w0, v_from, s_from, mid, ref, depth + 1);
  return continue_curve(z0, n0, w, w0, mid, s_mid, v_to, ref, depth + 1);
}

inline double curve_residual(const Matrix& m, cplx z0, double scale) {
  Eigen::VectorXd sv = singular_values(m - z0 * identity(m.rows()));
  return sv(sv.size() - 1) / scale;
}

inline Vector kernel_vector(const Matrix& m, cplx z0) {
  Eigen::JacobiSVD<Matrix> svd(m - z0 * identity(m.rows()), Eigen::ComputeFullV);
  return svd.matrixV().col(m.cols() - 1);
}

}  // namespace detail

struct CurveOptions {
  double radius = 0.0;  // 0 picks 0.1 * gap / |W|
  int nodes = 64;
  int j_max = 0;        // 0 picks n + 1
};

inline ResonantCurve resonant_curve(cplx z0, const Matrix& n0, const Matrix& w, const std::vector<cplx>& v_grid = {},
                                    const CurveOptions& opt = {}) {
  const auto n = n0.rows();
  require(n0.cols() == n && w.rows() == n && w.cols() == n, Errc::InvalidArgument, "operator sizes differ");
  const double scale = detail::curve_scale(n0, w);
  auto lam = eigenvalues(n0);
  int hits = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (cplx l : lam) {
    if (std::abs(l - z0) <= 1e-8 * scale) ++hits;
    else gap = std::min(gap, std::abs(l - z0));
  }
  require(hits >= 1, Errc::PreconditionViolated, "z0 is not an eigenvalue of N0");
  require(hits == 1, Errc::NotSimple, "z0 is not a simple eigenvalue of N0");

  ResonantCurve c;
  c.z0 = z0;
  c.N0 = n0;
  c.W = w;
  auto t0 = detail::tracked_eigen(n0, detail::kernel_vector(n0, z0), z0);
  c.chi = t0.x / t0.x.norm();
  c.chi_dual = t0.y / std::conj(t0.y.dot(c.chi));
  c.W0 = c.chi * c.chi.adjoint();
  if (!std::isfinite(gap)) gap = scale;
  const double wn = opnorm(w);
  c.radius = opt.radius > 0.0 ? opt.radius : (wn > 0.0 ? std::min(1.0, 0.1 * gap / wn) : 1.0);
  c.nodes = opt.nodes;
  const int j_max = opt.j_max > 0 ? opt.j_max : static_cast<int>(n) + 1;

  // radial leg to the circle, then around it
  Vector ref = c.chi;
  cplx s = detail::continue_curve(z0, n0, w, c.W0, 0.0, 0.0, c.radius, ref);
  auto nodes = circle_nodes(0.0, c.radius, c.nodes);
  std::vector<cplx> svals;
  std::vector<Vector> xvals;
  cplx v_prev = c.radius;
  for (cplx v : nodes) {
    s = detail::continue_curve(z0, n0, w, c.W0, v_prev, s, v, ref);
    v_prev = v;
    Matrix m = c.at(v, s);
    Vector x = detail::kernel_vector(m, z0);
    x /= c.chi_dual.dot(x);
    svals.push_back(s);
    xvals.push_back(x);
    c.circle.push_back({v, s, detail::curve_residual(m, z0, scale)});
    c.max_residual = std::max(c.max_residual, c.circle.back().residual);
  }
  for (int j = 0; j <= j_max; ++j) {
    c.taylor_s.push_back(taylor_coefficient(svals, nodes, j));
    c.taylor_chi.push_back(taylor_coefficient(xvals, nodes, j));
  }

  ref = c.chi;
  v_prev = 0.0;
  s = 0.0;
  for (cplx v : v_grid) {
    s = detail::continue_curve(z0, n0, w, c.W0, v_prev, s, v, ref);
    v_prev = v;
    c.samples.push_back({v, s, detail::curve_residual(c.at(v, s), z0, scale)});
    c.max_residual = std::max(c.max_residual, c.samples.back().residual);
  }
  return c;
}

inline constexpr int kInfiniteTangency = std::numeric_limits<int>::max();

struct TangencyReport {
  int tangency_order = 0;  // kInfiniteTangency when the curve never leaves the W line to any order
  bool standard_flag = false;
  std::vector<Vector> chain_vectors;  // chi_0 .. chi_{k-1}
  std::vector<double> scaled_coefficients;
};

// Order of contact of v -> N0 + a(v) W + b(v) W0 with the W line, from raw Taylor coefficients of a and b
// on a disc of the given radius. |W0| = 1. Requires a'(0) != 0.
inline TangencyReport tangency_order_of(const std::vector<cplx>& a, const std::vector<cplx>& b, double radius,
                                        double w_norm, double tol = 1e-8) {
  TangencyReport rep;
  rep.tangency_order = kInfiniteTangency;
  require(a.size() >= 2 && std::abs(a[1]) * w_norm > tol, Errc::DegenerateDirection,
          "curve is not regular at the base point");
  const double unit = radius * std::abs(a[1]) * w_norm;
  rep.standard_flag = std::abs(a[1] - 1.0) <= tol;
  double rj = radius;
  for (std::size_t j = 2; j < a.size(); ++j) {
    rj *= radius;
    rep.standard_flag = rep.standard_flag && std::abs(a[j]) * rj <= tol * radius;
  }
  rj = 1.0;
  for (std::size_t j = 1; j < b.size(); ++j) {
    rj *= radius;
    double size = std::abs(b[j]) * rj / unit;
    rep.scaled_coefficients.push_back(size);
    if (rep.tangency_order == kInfiniteTangency && size > tol) rep.tangency_order = static_cast<int>(j);
  }
  return rep;
}

inline TangencyReport tangency_order(const ResonantCurve& c, double tol = 1e-8) {
  TangencyReport rep;
  rep.tangency_order = kInfiniteTangency;
  const double wn = opnorm(c.W);
  if (wn > 0.0) {
    std::vector<cplx> a(c.taylor_s.size(), 0.0);
    a[1] = 1.0;
    rep = tangency_order_of(a, c.taylor_s, c.radius, wn, tol);
  }
  rep.standard_flag = wn > 0.0;
  const int k = rep.tangency_order == kInfiniteTangency ? static_cast<int>(c.taylor_chi.size())
                                                        : std::min<int>(rep.tangency_order, c.taylor_chi.size());
  rep.chain_vectors.assign(c.taylor_chi.begin(), c.taylor_chi.begin() + k);
  return rep;
}

struct TangencyTheoremReport {
  int tangency_order = 0;
  int depth = 0;          // depth of chi_0 in the resonance filtration of W
  int path_order = 0;     // order of the eigenpath of N0 + vW through z0
  double chain_residual = 0.0;  // max |A chi_j - chi_{j-1}| / |chi_0|, A chi_0 = 0 included
  double curve_residual = 0.0;
  bool order_matches_depth = false;
  bool order_matches_path = false;
  bool chain_holds = false;

  bool holds() const { return order_matches_depth && order_matches_path && chain_holds; }
};

inline TangencyTheoremReport verify_tangency_theorems(cplx z0, const Matrix& n0, const Matrix& w, double tol = 1e-7) {
  auto ac = assumption_check(z0, n0, w);
  require(ac.holds, Errc::AssumptionViolated, "assumption check fails: " + ac.diagnostic);
  TangencyTheoremReport rep;
  auto curve = resonant_curve(z0, n0, w);
  rep.curve_residual = curve.max_residual;
  auto tr = tangency_order(curve, 1e-8);
  require(tr.tangency_order != kInfiniteTangency, Errc::DegenerateDirection,
          "z0 stays an eigenvalue along the whole W line; the curve branch is not determined");
  rep.tangency_order = tr.tangency_order;

  auto ops = resonance_operators(laurent_coefficients(z0, n0, w));
  rep.depth = depth(curve.chi, ops);
  auto set = trace_eigenpaths(z0, n0, w);
  require(set.paths.size() == 1, Errc::NotSimple, "more than one eigenpath through z0");
  auto conj = conjugate_paths(set);
  rep.path_order = path_order(set, set.paths[0], &conj[0]).order;

  const Matrix a = ops.A();
  const double c0 = tr.chain_vectors.front().norm();
  for (std::size_t j = 0; j < tr.chain_vectors.size(); ++j) {
    Vector prev = j == 0 ? Vector::Zero(n0.rows()) : tr.chain_vectors[j - 1];
    rep.chain_residual = std::max(rep.chain_residual, (a * tr.chain_vectors[j] - prev).norm() / c0);
  }
  rep.order_matches_depth = rep.tangency_order == 1 + rep.depth;
  rep.order_matches_path = rep.tangency_order == rep.path_order;
  rep.chain_holds = rep.chain_residual <= tol;
  return rep;
}

struct LaxReport {
  double max_pairing = 0.0;   // max |<phi*, [N0,W] phi>| / (|N0||W|) over eigenvalues
  double eigen_drift = 0.0;   // after integrating dN/dt = [N,W] to t_end
  double exact_deviation = 0.0;  // |N_rk4(t_end) - e^{-tW} N0 e^{tW}| / |N0|
  double t_end = 1.0;
  int steps = 1000;
};

inline LaxReport lax_tangency_check(const Matrix& n0, const Matrix& w, double t_end = 1.0, int steps = 1000) {
  const double scale = std::max(opnorm(n0), 1e-300);
  auto lam = eigenvalues(n0);
  for (std::size_t i = 0; i < lam.size(); ++i)
    for (std::size_t j = i + 1; j < lam.size(); ++j)
      require(std::abs(lam[i] - lam[j]) > 1e-8 * std::max(1.0, scale), Errc::NotSimple,
              "N0 has a repeated eigenvalue");
  LaxReport rep;
  rep.t_end = t_end;
  rep.steps = steps;
  Eigen::ComplexEigenSolver<Matrix> es(n0);
  Matrix x = es.eigenvectors();
  Matrix y = Eigen::PartialPivLU<Matrix>(x).inverse();
  Matrix comm = n0 * w - w * n0;
  const double unit = std::max(scale * opnorm(w), 1e-300);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    cplx p = y.row(k) * comm * x.col(k);
    rep.max_pairing = std::max(rep.max_pairing, std::abs(p) / unit);
  }

  auto field = [&](const Matrix& n) -> Matrix { return n * w - w * n; };
  Matrix n = n0;
  const double h = t_end / steps;
  for (int k = 0; k < steps; ++k) {
    Matrix k1 = field(n);
    Matrix k2 = field(n + 0.5 * h * k1);
    Matrix k3 = field(n + 0.5 * h * k2);
    Matrix k4 = field(n + h * k3);
    n += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  Matrix tw = t_end * w;
  Matrix exact = (-tw).exp() * n0 * tw.exp();
  rep.exact_deviation = opnorm(n - exact) / scale;

  auto mu = eigenvalues(n);
  Eigen::MatrixXd cost(lam.size(), mu.size());
  for (std::size_t i = 0; i < lam.size(); ++i)
    for (std::size_t j = 0; j < mu.size(); ++j) cost(i, j) = std::abs(lam[i] - mu[j]);
  auto perm = best_assignment(cost);
  for (std::size_t i = 0; i < lam.size(); ++i) rep.eigen_drift = std::max(rep.eigen_drift, cost(i, perm[i]) / scale);
  return rep;
}

}  // namespace resonance
