#pragma once

#include "resonance/operator_space.hpp"

#include <map>
#include <optional>

namespace resonance {

struct LaurentOptions {
  double radius = 0.0;  // 0 selects half the distance to the nearest other resonance point
  int nodes = 64;
  int j_max = 4;
  int max_nodes = 4096;
  double decision_threshold = 1e-7;
};

struct LaurentSeries {
  cplx z0;
  Matrix base;       // N0
  Matrix direction;  // W
  std::map<int, Matrix> coefficients;
  int pole_order = 0;
  int order_cap = 0;           // rank(W)
  bool cap_exceeded = false;   // the threshold logic wanted d > rank(W)
  double contour_radius = 0.0;
  int node_count = 0;
  double truncation_residual = 0.0;
  double quadrature_change = 0.0;
  double resolvent_peak = 0.0;  // max |R(v)| on the contour

  int min_index() const { return coefficients.begin()->first; }
  int max_index() const { return coefficients.rbegin()->first; }
  bool has(int j) const { return coefficients.count(j) > 0; }
  const Matrix& K(int j) const {
    auto it = coefficients.find(j);
    require(it != coefficients.end(), Errc::InvalidArgument, "coefficient index outside computed range");
    return it->second;
  }
  // Cauchy bound on |K_j|: the size a coefficient can have given the contour data.
  double natural_scale(int j) const { return resolvent_peak * std::pow(contour_radius, 1 - j); }
};

inline int numerical_rank(const Matrix& m, double rel_tol = 1e-10) {
  double s = opnorm(m);
  if (s == 0.0) return 0;
  return rank_cut(singular_values(m), rel_tol * s).rank;
}

namespace detail {

struct QuadratureResult {
  std::map<int, Matrix> coefficients;
  double peak = 0.0;
};

inline QuadratureResult trapezoid(const std::vector<Matrix>& samples, const std::vector<cplx>& nodes, int lo,
                                  int hi) {
  QuadratureResult out;
  const double m = static_cast<double>(samples.size());
  const Eigen::Index n = samples.front().rows();
  for (int j = lo; j <= hi; ++j) out.coefficients[j] = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out.peak = std::max(out.peak, opnorm(samples[k]));
    for (int j = lo; j <= hi; ++j) out.coefficients[j] += samples[k] * (std::pow(nodes[k], 1 - j) / m);
  }
  return out;
}

inline Matrix line_resolvent(const Matrix& n0, const Matrix& w, cplx z0, cplx v) {
  return shifted_inverse(n0 + v * w, z0);
}

}  // namespace detail

// Raw trapezoidal Laurent coefficients K_lo..K_hi on |v| = radius, with node
// doubling until successive estimates agree. No spectral preconditions.
inline LaurentSeries contour_series(cplx z0, const Matrix& n0, const Matrix& w, double radius, int nodes, int lo,
                                    int hi, int max_nodes = 4096) {
  require(nodes >= 16, Errc::InvalidArgument, "at least 16 quadrature nodes required");
  require(radius > 0.0, Errc::InvalidArgument, "contour radius must be positive");
  std::vector<Matrix> samples;
  for (cplx v : circle_nodes(0.0, radius, nodes)) samples.push_back(detail::line_resolvent(n0, w, z0, v));
  int m = nodes;
  auto current = detail::trapezoid(samples, circle_nodes(0.0, radius, m), lo, hi);
  double change = std::numeric_limits<double>::infinity();
  while (true) {
    // Interleave the new midpoints so the doubled rule reuses every old sample.
    std::vector<Matrix> refined;
    refined.reserve(2 * m);
    auto mids = circle_nodes(0.0, radius, 2 * m);
    for (int k = 0; k < m; ++k) {
      refined.push_back(samples[k]);
      refined.push_back(detail::line_resolvent(n0, w, z0, mids[2 * k + 1]));
    }
    auto next = detail::trapezoid(refined, mids, lo, hi);
    change = 0.0;
    for (int j = lo; j <= hi; ++j) {
      double scale = next.peak * std::pow(radius, 1 - j);
      change = std::max(change, opnorm(next.coefficients[j] - current.coefficients[j]) / scale);
    }
    samples = std::move(refined);
    current = std::move(next);
    m *= 2;
    if (change <= 1e-12 || 2 * m > max_nodes) break;
  }
  require(change <= 1e-6, Errc::QuadratureDivergence, "halving the node spacing still moves the coefficients");
  LaurentSeries s;
  s.z0 = z0;
  s.base = n0;
  s.direction = w;
  s.coefficients = std::move(current.coefficients);
  s.contour_radius = radius;
  s.node_count = m;
  s.quadrature_change = change;
  s.resolvent_peak = current.peak;
  s.order_cap = numerical_rank(w);
  // Off-node truncation check on the inner circle, where the kept terms dominate.
  double worst = 0.0;
  for (cplx v : circle_nodes(0.0, 0.5 * radius, 5, 0.3)) {
    Matrix r = detail::line_resolvent(n0, w, z0, v);
    Matrix sum = Matrix::Zero(n0.rows(), n0.cols());
    for (const auto& [j, k] : s.coefficients) sum += std::pow(v, j - 1) * k;
    worst = std::max(worst, opnorm(r - sum) / opnorm(r));
  }
  s.truncation_residual = worst;
  return s;
}

struct PoleOrderDecision {
  int order = 0;
  int order_times_direction = 0;
  std::vector<double> ratios;  // |K_{-k}| |W|^k / |K_0|, k = 1..
};

// Scale-free size of the principal part: |K_{-k}| |W|^k / |K_0|.
inline PoleOrderDecision decide_pole_order(const LaurentSeries& s, double threshold = 1e-7) {
  PoleOrderDecision out;
  const double nw = direction_scale(s.direction);
  auto decide = [&](auto coeff, std::vector<double>* keep) {
    double k0 = opnorm(coeff(0));
    double k1 = s.has(1) ? opnorm(coeff(1)) : 0.0;
    double regular = k0 * nw / std::max(k1, std::numeric_limits<double>::min());
    if (k1 > 0.0) {
      require(!(regular > threshold / 10.0 && regular <= threshold * 10.0), Errc::ThresholdAmbiguous,
              "residue size sits inside the decision band");
      if (regular <= threshold) return 0;
    } else if (k0 == 0.0) {
      return 0;
    }
    int d = 1;
    for (int k = 1; s.has(-k); ++k) {
      double ratio = opnorm(coeff(-k)) * std::pow(nw, k) / k0;
      if (keep) keep->push_back(ratio);
      require(!(ratio > threshold / 10.0 && ratio <= threshold * 10.0), Errc::ThresholdAmbiguous,
              "a principal-part coefficient sits within a factor 10 of the cut");
      if (ratio > threshold) d = k + 1;
    }
    return d;
  };
  out.order = decide([&](int j) -> Matrix { return s.K(j); }, &out.ratios);
  out.order_times_direction = decide([&](int j) -> Matrix { return s.K(j) * s.direction; }, nullptr);
  return out;
}

inline int pole_order(const LaurentSeries& s, double threshold = 1e-7) {
  auto d = decide_pole_order(s, threshold);
  require(d.order == d.order_times_direction, Errc::OrderMismatch,
          "pole orders of R and RW differ: " + std::to_string(d.order) + " vs " +
              std::to_string(d.order_times_direction));
  return d.order;
}

inline double default_contour_radius(cplx z0, const Matrix& n0, const Matrix& w) {
  double rho = nearest_other_resonance(z0, n0, w);
  if (std::isfinite(rho)) return 0.5 * rho;
  return 1.0 / direction_scale(w);
}

inline void require_eigenvalue(cplx z0, const Matrix& n0, double tol = 1e-8) {
  Matrix a = n0 - z0 * identity(n0.rows());
  double scale = std::max(opnorm(n0), std::abs(z0));
  double smin = singular_values(a)(a.rows() - 1);
  require(smin <= tol * std::max(scale, 1e-300), Errc::PreconditionViolated, "z0 is not an eigenvalue of N0");
}

inline LaurentSeries laurent_coefficients(cplx z0, const Matrix& n0, const Matrix& w, const LaurentOptions& opt = {}) {
  require_eigenvalue(z0, n0);
  require(opnorm(w) > 0.0, Errc::DegenerateDirection, "perturbation direction is zero");
  double rho = nearest_other_resonance(z0, n0, w);
  double radius = opt.radius;
  if (radius <= 0.0) radius = std::isfinite(rho) ? 0.5 * rho : 1.0 / direction_scale(w);
  require(radius < rho, Errc::ContourTooLarge, "another resonance point of z0 lies inside the contour");
  int cap = std::max(1, numerical_rank(w));
  LaurentSeries s = contour_series(z0, n0, w, radius, opt.nodes, -cap, opt.j_max, opt.max_nodes);
  s.pole_order = pole_order(s, opt.decision_threshold);
  if (s.pole_order > cap) s.cap_exceeded = true;
  return s;
}

struct ResonanceOperators {
  Matrix P, Q, K0, W;
  std::vector<Matrix> A_powers;  // A^1 .. A^d
  std::vector<Matrix> B_powers;  // B^1 .. B^d
  int order = 0;

  const Matrix& A() const { return A_powers.front(); }
  // A^k with A^0 = P; powers beyond d are zero.
  Matrix A_power(int k) const {
    if (k == 0) return P;
    if (k <= static_cast<int>(A_powers.size())) return A_powers[k - 1];
    return Matrix::Zero(P.rows(), P.cols());
  }
};

inline ResonanceOperators resonance_operators(const LaurentSeries& s) {
  require(s.pole_order >= 1, Errc::PreconditionViolated, "series has no pole");
  ResonanceOperators ops;
  const Matrix& w = s.direction;
  ops.W = w;
  ops.order = s.pole_order;
  ops.K0 = s.K(0);
  ops.P = ops.K0 * w;
  ops.Q = w * ops.K0;
  for (int k = 1; k <= s.pole_order; ++k) {
    if (s.has(-k)) {
      ops.A_powers.push_back(s.K(-k) * w);
      ops.B_powers.push_back(w * s.K(-k));
    } else {
      ops.A_powers.push_back(ops.A_powers.back() * ops.A_powers.front());
      ops.B_powers.push_back(ops.B_powers.back() * ops.B_powers.front());
    }
  }
  return ops;
}

struct LaurentIdentityReport {
  double negative_products = 0.0;  // K_{-k} W K_{-j} = K_{-k-j}
  double mixed_products = 0.0;     // K_{-k} W K_j = 0 = K_j W K_{-k}, j > 0
  double positive_products = 0.0;  // K_k W K_j = -K_{k+j}
  double power_chain = 0.0;        // K_{-k} = A^k K_0 = K_0 B^k
  bool passed = false;
  double max() const { return std::max({negative_products, mixed_products, positive_products, power_chain}); }
};

inline LaurentIdentityReport verify_laurent_identities(const LaurentSeries& s, double tol = 1e-8) {
  LaurentIdentityReport r;
  const Matrix& w = s.direction;
  const double nw = opnorm(w);
  auto c = [&](int j) { return s.natural_scale(j); };
  auto rel = [&](const Matrix& diff, int a, int b) { return opnorm(diff) / (c(a) * nw * c(b) + c(a + b)); };
  const int lo = s.min_index(), hi = s.max_index();
  for (int a = lo; a <= 0; ++a)
    for (int b = lo; b <= 0; ++b)
      if (a + b >= lo) r.negative_products = std::max(r.negative_products, rel(s.K(a) * w * s.K(b) - s.K(a + b), a, b));
  for (int a = lo; a <= 0; ++a)
    for (int b = 1; b <= hi; ++b) {
      r.mixed_products = std::max(r.mixed_products, rel(s.K(a) * w * s.K(b), a, b));
      r.mixed_products = std::max(r.mixed_products, rel(s.K(b) * w * s.K(a), b, a));
    }
  for (int a = 1; a <= hi; ++a)
    for (int b = 1; a + b <= hi; ++b)
      r.positive_products = std::max(r.positive_products, rel(s.K(a) * w * s.K(b) + s.K(a + b), a, b));
  Matrix a1 = s.K(-1) * w, b1 = w * s.K(-1);
  Matrix ak = a1, bk = b1;
  for (int k = 1; -k >= lo; ++k) {
    double scale = c(-k) + opnorm(ak) * c(0);
    r.power_chain = std::max(r.power_chain, opnorm(s.K(-k) - ak * s.K(0)) / scale);
    r.power_chain = std::max(r.power_chain, opnorm(s.K(-k) - s.K(0) * bk) / scale);
    ak = ak * a1;
    bk = bk * b1;
  }
  r.passed = r.max() <= tol;
  return r;
}

}  // namespace resonance
