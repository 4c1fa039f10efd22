#pragma once

#include "resonance/operator_space.hpp"

#include <optional>

namespace resonance {

inline std::vector<double> default_y_sequence() {
  std::vector<double> ys;
  for (int k = 0; k <= 20; ++k) ys.push_back(0.1 * std::ldexp(1.0, -k));
  return ys;
}

struct IndexDetail {
  int n_plus = 0;
  int n_minus = 0;
  double cluster_radius = 0.0;
  std::vector<std::pair<int, int>> history;  // (N+, N-) per y

  int value() const { return n_plus - n_minus; }
};

namespace detail {

inline std::vector<cplx> limit_points(double lambda, const Matrix& h0, const Matrix& v) {
  return eigenvalues(resolvent(h0, lambda) * v);
}

inline void require_real_lambda_outside(double lambda, const Matrix& h, const char* what) {
  double scale = std::max(1.0, opnorm(h));
  for (cplx e : eigenvalues(h))
    require(std::abs(e - lambda) > 1e-9 * scale, Errc::PreconditionViolated, what);
}

}  // namespace detail

// N+ - N-: eigenvalues of R_{lambda+iy}(H0)V converging to -1/r from the upper / lower half-plane.
inline IndexDetail resonance_index_detail(double lambda, double r, const Matrix& h0, const Matrix& v,
                                          const std::vector<double>& ys = default_y_sequence()) {
  detail::require_real_lambda_outside(lambda, h0, "lambda lies in the spectrum of H0");
  require(ys.size() >= 3, Errc::InvalidArgument, "y sequence needs at least three values");
  IndexDetail out;
  if (r == 0.0 || !std::isfinite(r)) return out;
  const cplx target = -1.0 / r;
  double dist = std::numeric_limits<double>::infinity();
  for (cplx l : detail::limit_points(lambda, h0, v))
    if (std::abs(l - target) > 1e-6 * std::abs(target)) dist = std::min(dist, std::abs(l - target));
  out.cluster_radius = 0.3 * (std::isfinite(dist) ? dist : std::abs(target));
  for (double y : ys) {
    Matrix t = resolvent(h0, cplx(lambda, y)) * v;
    int np = 0, nm = 0;
    for (cplx mu : eigenvalues(t)) {
      if (std::abs(mu - target) > out.cluster_radius) continue;
      if (mu.imag() > 0.0) ++np;
      else if (mu.imag() < 0.0) ++nm;
    }
    out.history.emplace_back(np, nm);
  }
  const auto n = out.history.size();
  require(out.history[n - 1] == out.history[n - 2] && out.history[n - 2] == out.history[n - 3], Errc::NotConverged,
          "half-plane assignment is not stable over the tail of the y sequence");
  out.n_plus = out.history.back().first;
  out.n_minus = out.history.back().second;
  return out;
}

inline int resonance_index(double lambda, double r, const Matrix& h0, const Matrix& v,
                           const std::vector<double>& ys = default_y_sequence()) {
  return resonance_index_detail(lambda, r, h0, v, ys).value();
}

struct RealResonance {
  double r;
  int multiplicity;
  int index;
};

// Real couplings r with lambda in sigma(H0 + rV), from the real eigenvalues of R_lambda(H0)V.
inline std::vector<RealResonance> real_resonance_points(double lambda, const Matrix& h0, const Matrix& v, double a,
                                                        double b) {
  detail::require_real_lambda_outside(lambda, h0, "lambda lies in the spectrum of H0");
  std::vector<cplx> mus;
  auto lp = detail::limit_points(lambda, h0, v);
  double scale = 0.0;
  for (cplx m : lp) scale = std::max(scale, std::abs(m));
  for (cplx m : lp)
    if (std::abs(m) > 1e-12 * scale && std::abs(m.imag()) <= 1e-8 * std::abs(m)) mus.push_back(m.real());
  std::vector<RealResonance> out;
  for (const auto& g : cluster_points(mus, 1e-6 * std::max(scale, 1e-300))) {
    double r = (-1.0 / mean_of(mus, g)).real();
    double tol = 1e-9 * std::max(1.0, std::abs(r));
    require(std::abs(r - a) > tol && std::abs(r - b) > tol, Errc::EndpointResonance,
            "an interval endpoint is a resonance point");
    if (r > a && r < b) out.push_back({r, static_cast<int>(g.size()), 0});
  }
  std::sort(out.begin(), out.end(), [](const RealResonance& x, const RealResonance& y) { return x.r < y.r; });
  for (auto& p : out) p.index = resonance_index(lambda, p.r, h0, v);
  return out;
}

inline int total_resonance_index(double lambda, const Matrix& h0, const Matrix& v, double a, double b) {
  int total = 0;
  for (const auto& p : real_resonance_points(lambda, h0, v, a, b)) total += p.index;
  return total;
}

inline int count_at_most(const Matrix& h, double lambda) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
  int c = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) c += es.eigenvalues()(i) <= lambda;
  return c;
}

struct Crossing {
  double r;
  int sign;  // +1 upward through lambda
};

// Signed crossings of eigenvalues of H0 + rV through lambda for r from a to b.
inline std::vector<Crossing> flow_crossings(double lambda, const Matrix& h0, const Matrix& v, double a, double b,
                                            int steps = 256) {
  auto at = [&](double r) { return Matrix(h0 + r * v); };
  for (double e : {a, b}) {
    double scale = std::max(1.0, opnorm(at(e)));
    for (cplx x : eigenvalues(at(e)))
      require(std::abs(x - lambda) > 1e-9 * scale, Errc::CrossingAtEndpoint, "lambda is an eigenvalue at an endpoint");
  }
  std::vector<Crossing> out;
  std::function<void(double, double, int, int, int)> refine = [&](double lo, double hi, int nlo, int nhi, int depth) {
    if (nlo == nhi) return;
    if (depth >= 40 || hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      int sign = nlo > nhi ? 1 : -1;
      for (int k = 0; k < std::abs(nlo - nhi); ++k) out.push_back({0.5 * (lo + hi), sign});
      return;
    }
    double mid = 0.5 * (lo + hi);
    int nmid = count_at_most(at(mid), lambda);
    refine(lo, mid, nlo, nmid, depth + 1);
    refine(mid, hi, nmid, nhi, depth + 1);
  };
  int prev = count_at_most(at(a), lambda);
  for (int k = 1; k <= steps; ++k) {
    double r0 = a + (b - a) * (k - 1) / steps, r1 = a + (b - a) * k / steps;
    int cur = count_at_most(at(r1), lambda);
    refine(r0, r1, prev, cur, 0);
    prev = cur;
  }
  return out;
}

inline int spectral_flow_oracle(double lambda, const Matrix& h0, const Matrix& v, double a, double b, int steps = 256) {
  int total = 0;
  for (const auto& c : flow_crossings(lambda, h0, v, a, b, steps)) total += c.sign;
  return total;
}

// Number of eigenvalues of R_lambda(H0)V below -1, through the hermitian form R^{1/2} V R^{1/2}.
inline int birman_schwinger_count(double lambda, const Matrix& h0, const Matrix& v) {
  const double vscale = std::max(opnorm(v), 1e-300);
  Eigen::SelfAdjointEigenSolver<Matrix> vs(0.5 * (v + v.adjoint()), Eigen::EigenvaluesOnly);
  require(vs.eigenvalues().maxCoeff() <= 1e-12 * vscale, Errc::PreconditionViolated,
          "perturbation has a positive eigenvalue");
  Eigen::SelfAdjointEigenSolver<Matrix> hs(0.5 * (h0 + h0.adjoint()));
  require(lambda < hs.eigenvalues().minCoeff(), Errc::PreconditionViolated, "lambda is not below the spectrum of H0");
  Eigen::VectorXd inv_sqrt = (hs.eigenvalues().array() - lambda).rsqrt();
  Matrix half = hs.eigenvectors() * inv_sqrt.cast<cplx>().asDiagonal() * hs.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Matrix> bs(half * v * half, Eigen::EigenvaluesOnly);
  int n = 0;
  for (Eigen::Index i = 0; i < bs.eigenvalues().size(); ++i) {
    double e = bs.eigenvalues()(i);
    require(std::abs(e + 1.0) > 1e-10, Errc::PreconditionViolated, "lambda is an eigenvalue of H0 + V");
    n += e < -1.0;
  }
  return n;
}

struct XiCalibration {
  int sign = 0;
  double trace_side = 0.0;
  double integral_side = 0.0;
  double residual = 0.0;
};

// Fixes the sign of xi = #{H0 <= x} - #{H1 <= x} by the trace identity on a Gaussian bump.
inline XiCalibration calibrate_xi(const Matrix& h0, const Matrix& h1, double center, double width) {
  auto eig = [](const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  };
  auto f = [&](double x) { return std::exp(-0.5 * (x - center) * (x - center) / (width * width)); };
  auto e0 = eig(h0), e1 = eig(h1);
  XiCalibration c;
  for (double x : e1) c.trace_side += f(x);
  for (double x : e0) c.trace_side -= f(x);
  std::vector<double> pts = e0;
  pts.insert(pts.end(), e1.begin(), e1.end());
  std::sort(pts.begin(), pts.end());
  auto xi = [&](double x) {
    int n0 = 0, n1 = 0;
    for (double e : e0) n0 += e <= x;
    for (double e : e1) n1 += e <= x;
    return n0 - n1;
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (pts[i + 1] > pts[i]) c.integral_side += xi(0.5 * (pts[i] + pts[i + 1])) * (f(pts[i + 1]) - f(pts[i]));
  double scale = std::max(1e-300, std::abs(c.trace_side));
  if (std::abs(c.trace_side - c.integral_side) <= 1e-10 * std::max(1.0, scale)) c.sign = 1;
  else if (std::abs(c.trace_side + c.integral_side) <= 1e-10 * std::max(1.0, scale)) c.sign = -1;
  require(c.sign != 0, Errc::NotConverged, "trace identity fixes no sign for xi");
  c.residual = std::abs(c.trace_side - c.sign * c.integral_side);
  return c;
}

struct FlowReport {
  double lambda = 0.0;
  double a = 0.0, b = 1.0;
  std::vector<RealResonance> real_resonance_points;
  int total_index = 0;
  std::optional<int> bs_count;
  double ssf_value = 0.0;
  int oracle_value = 0;  // calibrated counting-function xi
  int flow_value = 0;    // signed eigenvalue crossings
  XiCalibration calibration;
};

inline FlowReport ssf_report(double lambda, const Matrix& h0, const Matrix& v, double a = 0.0, double b = 1.0) {
  Matrix ha = h0 + a * v, hb = h0 + b * v;
  detail::require_real_lambda_outside(lambda, ha, "lambda lies in the spectrum of the initial operator");
  detail::require_real_lambda_outside(lambda, hb, "lambda lies in the spectrum of the final operator");
  FlowReport rep;
  rep.lambda = lambda;
  rep.a = a;
  rep.b = b;
  // resonance data is taken relative to the initial operator of the interval
  rep.real_resonance_points = real_resonance_points(lambda, ha, v, 0.0, b - a);
  for (auto& p : rep.real_resonance_points) {
    rep.total_index += p.index;
    p.r += a;
  }
  rep.ssf_value = rep.total_index;
  double width = 0.25 * std::max(1.0, opnorm(v));
  rep.calibration = calibrate_xi(ha, hb, lambda, width);
  rep.oracle_value = rep.calibration.sign * (count_at_most(ha, lambda) - count_at_most(hb, lambda));
  rep.flow_value = spectral_flow_oracle(lambda, h0, v, a, b);
  Eigen::SelfAdjointEigenSolver<Matrix> vs(0.5 * (v + v.adjoint()), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> hs(0.5 * (ha + ha.adjoint()), Eigen::EigenvaluesOnly);
  if (vs.eigenvalues().maxCoeff() <= 1e-12 * std::max(opnorm(v), 1e-300) && lambda < hs.eigenvalues().minCoeff() &&
      b - a == 1.0)
    rep.bs_count = birman_schwinger_count(lambda, ha, v);
  return rep;
}

}  // namespace resonance
