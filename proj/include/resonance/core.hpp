#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace resonance {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr cplx kI{0.0, 1.0};

enum class Errc {
  InvalidArgument,
  ParseError,
  SingularShift,
  AmbiguousClustering,
  ContourTooLarge,
  QuadratureDivergence,
  ThresholdAmbiguous,
  OrderMismatch,
  ProbeAtResonance,
  NotResonanceVector,
  ContourHitsSpectrum,
  RankDecisionAmbiguous,
  BranchingDetected,
  MatchingAmbiguity,
  AssumptionViolated,
  CriteriaDisagree,
  NotSimple,
  TrackingCollision,
  ExtrapolationUnstable,
  SingularBeta,
  EndpointResonance,
  CrossingAtEndpoint,
  PreconditionViolated,
  NewtonDiverged,
  MultiplicityCollision,
  NotConverged,
  DegenerateDirection,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::SingularShift: return "SingularShift";
    case Errc::AmbiguousClustering: return "AmbiguousClustering";
    case Errc::ContourTooLarge: return "ContourTooLarge";
    case Errc::QuadratureDivergence: return "QuadratureDivergence";
    case Errc::ThresholdAmbiguous: return "ThresholdAmbiguous";
    case Errc::OrderMismatch: return "OrderMismatch";
    case Errc::ProbeAtResonance: return "ProbeAtResonance";
    case Errc::NotResonanceVector: return "NotResonanceVector";
    case Errc::ContourHitsSpectrum: return "ContourHitsSpectrum";
    case Errc::RankDecisionAmbiguous: return "RankDecisionAmbiguous";
    case Errc::BranchingDetected: return "BranchingDetected";
    case Errc::MatchingAmbiguity: return "MatchingAmbiguity";
    case Errc::AssumptionViolated: return "AssumptionViolated";
    case Errc::CriteriaDisagree: return "CriteriaDisagree";
    case Errc::NotSimple: return "NotSimple";
    case Errc::TrackingCollision: return "TrackingCollision";
    case Errc::ExtrapolationUnstable: return "ExtrapolationUnstable";
    case Errc::SingularBeta: return "SingularBeta";
    case Errc::EndpointResonance: return "EndpointResonance";
    case Errc::CrossingAtEndpoint: return "CrossingAtEndpoint";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::NewtonDiverged: return "NewtonDiverged";
    case Errc::MultiplicityCollision: return "MultiplicityCollision";
    case Errc::NotConverged: return "NotConverged";
    case Errc::DegenerateDirection: return "DegenerateDirection";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// Spectral norm. Jacobi is accurate for the small sizes used here.
inline double opnorm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() > 24 || m.cols() > 24)
    return Eigen::BDCSVD<Matrix>(m).singularValues()(0);
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline Eigen::VectorXd singular_values(const Matrix& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

inline Matrix adjoint(const Matrix& m) { return m.adjoint(); }

// Outcome of a singular-value cut. Values in (threshold/10, threshold*10]
// make the cut ambiguous.
struct RankDecision {
  int rank = 0;
  double threshold = 0.0;
  double gap_ratio = std::numeric_limits<double>::infinity();
  bool ambiguous = false;
};

inline RankDecision rank_cut(const Eigen::VectorXd& sv, double threshold) {
  RankDecision d;
  d.threshold = threshold;
  double smallest_kept = std::numeric_limits<double>::infinity();
  double largest_dropped = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) {
      ++d.rank;
      smallest_kept = std::min(smallest_kept, sv(i));
    } else {
      largest_dropped = std::max(largest_dropped, sv(i));
    }
    if (sv(i) > threshold / 10.0 && sv(i) <= threshold * 10.0) d.ambiguous = true;
  }
  if (largest_dropped > 0.0 && std::isfinite(smallest_kept))
    d.gap_ratio = smallest_kept / largest_dropped;
  return d;
}

struct SvdSplit {
  RankDecision decision;
  Matrix range;      // orthonormal basis of the column space
  Matrix kernel;     // orthonormal basis of the null space
  Matrix cokernel;   // orthonormal basis of the null space of the adjoint
};

// Splits m by an absolute singular-value threshold.
inline SvdSplit svd_split(const Matrix& m, double threshold) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdSplit out;
  Eigen::VectorXd sv = svd.singularValues();
  out.decision = rank_cut(sv, threshold);
  int r = out.decision.rank;
  out.range = svd.matrixU().leftCols(r);
  out.kernel = svd.matrixV().rightCols(m.cols() - r);
  out.cokernel = svd.matrixU().rightCols(m.rows() - r);
  return out;
}

inline Matrix orthonormalize(const Matrix& cols, double rel_tol = 1e-10) {
  if (cols.cols() == 0) return Matrix(cols.rows(), 0);
  double scale = opnorm(cols);
  if (scale == 0.0) return Matrix(cols.rows(), 0);
  return svd_split(cols, rel_tol * scale).range;
}

// Sine of the largest principal angle; 1 when dimensions differ.
inline double subspace_distance(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) return 1.0;
  if (a.cols() == 0) return 0.0;
  Matrix proj = b - a * (a.adjoint() * b);
  return std::min(1.0, opnorm(proj));
}

// Residual of projecting x onto the span of orthonormal columns q, relative to |x|.
inline double membership_residual(const Matrix& q, const Vector& x) {
  double nx = x.norm();
  if (nx == 0.0) return 0.0;
  if (q.cols() == 0) return 1.0;
  return (x - q * (q.adjoint() * x)).norm() / nx;
}

inline std::vector<cplx> circle_nodes(cplx center, double radius, int count, double phase = 0.0) {
  std::vector<cplx> nodes(count);
  for (int k = 0; k < count; ++k)
    nodes[k] = center + radius * std::polar(1.0, phase + 2.0 * kPi * k / count);
  return nodes;
}

// Trapezoidal Taylor coefficient: (1/M) sum f_k w_k^{-j}, w_k = node - center.
template <class T>
T taylor_coefficient(const std::vector<T>& samples, const std::vector<cplx>& offsets, int j) {
  T acc = samples.front() * cplx(0.0);
  for (std::size_t k = 0; k < samples.size(); ++k) acc += samples[k] * std::pow(offsets[k], -j);
  return acc * cplx(1.0 / static_cast<double>(samples.size()));
}

// Cauchy integral formula evaluated at an interior point t.
template <class T>
T cauchy_interpolate(const std::vector<T>& samples, const std::vector<cplx>& offsets, cplx t) {
  T acc = samples.front() * cplx(0.0);
  for (std::size_t k = 0; k < samples.size(); ++k)
    acc += samples[k] * (offsets[k] / (offsets[k] - t));
  return acc * cplx(1.0 / static_cast<double>(samples.size()));
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Minimal-cost assignment of rows to columns; brute force for small sizes,
// greedy beyond.
inline std::vector<int> best_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (n <= 7) {
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i) c += cost(i, perm[i]);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> used(n, false);
  for (int i = 0; i < n; ++i) {
    int arg = -1;
    for (int j = 0; j < n; ++j)
      if (!used[j] && (arg < 0 || cost(i, j) < cost(i, arg))) arg = j;
    perm[i] = arg;
    used[arg] = true;
  }
  return perm;
}

// Cycle decomposition of a permutation, each cycle starting at its smallest index.
inline std::vector<std::vector<int>> permutation_cycles(const std::vector<int>& perm) {
  std::vector<std::vector<int>> cycles;
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (seen[i]) continue;
    std::vector<int> cyc;
    for (int j = static_cast<int>(i); !seen[j]; j = perm[j]) {
      seen[j] = true;
      cyc.push_back(j);
    }
    cycles.push_back(std::move(cyc));
  }
  return cycles;
}

inline std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace resonance
