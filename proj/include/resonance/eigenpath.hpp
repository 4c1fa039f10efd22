#pragma once

#include "resonance/resonance_structure.hpp"

namespace resonance {

struct PathOptions {
  double radius = 0.0;  // 0 picks a radius that keeps the z0-group confined
  int nodes = 64;
  int j_max = 0;  // 0 means rank(W) + 2
  int max_shrinks = 5;
};

struct Eigenpath {
  int branch_id = 0;
  int cluster = 0;       // index of the tracked eigenvalue cluster this path belongs to
  int cluster_size = 1;  // paths sharing the same eigenvalue function
  std::vector<cplx> z;
  std::vector<Vector> phi;
  std::vector<Vector> dual;  // conjugate samples; empty when no analytic conjugate exists
  std::vector<cplx> z_derivs;
  std::vector<Vector> phi_derivs;
  std::vector<Vector> dual_derivs;  // anti-holomorphic derivatives of the conjugate at 0
  std::string gauge;                // "dual" or "pinned"
  double eigen_residual = 0.0;
  double cauchy_residual = 0.0;
  // Direct evaluation at an interior point, for Cauchy-formula checks.
  cplx probe_z;
  Vector probe_phi, probe_dual;

  bool has_dual() const { return !dual.empty(); }
  const Vector& phi0() const { return phi_derivs.front(); }
};

struct TrajectoryRow {
  int step;
  cplx v, z;
  int branch_id;
};

struct EigenpathSet {
  cplx z0;
  Matrix base, direction;
  double radius = 0.0;
  std::vector<cplx> nodes;
  cplx probe_v;
  std::vector<Eigenpath> paths;
  std::vector<TrajectoryRow> trajectory;
  int shrinks = 0;
  int refinements = 0;
};

namespace detail {

struct Clusters {
  std::vector<cplx> centers;
  std::vector<int> mult;
};

inline Clusters eigen_clusters(const Matrix& n, double ctol) {
  auto ev = eigenvalues(n);
  Clusters c;
  for (const auto& g : cluster_points(ev, ctol)) {
    c.centers.push_back(mean_of(ev, g));
    c.mult.push_back(static_cast<int>(g.size()));
  }
  return c;
}

// Riesz projection of n onto the eigenvalues inside a circle about center.
inline Matrix riesz_projection(const Matrix& n, cplx center, double radius, int nodes = 64) {
  Matrix p = Matrix::Zero(n.rows(), n.cols());
  for (cplx x : circle_nodes(center, radius, nodes)) p -= (x - center) * shifted_inverse(n, x);
  return p / static_cast<double>(nodes);
}

inline double isolation_radius(const Clusters& all, cplx center, const Matrix& n) {
  double d = std::numeric_limits<double>::infinity();
  for (cplx c : all.centers)
    if (std::abs(c - center) > 0.0) d = std::min(d, std::abs(c - center));
  return std::isfinite(d) ? 0.5 * d : 1.0 + opnorm(n - center * identity(n.rows()));
}

struct GroupTracker {
  const Matrix& n0;
  const Matrix& w;
  double ctol;
  int refinements = 0;

  // Advances tracked clusters from angle a to angle b on |v| = r.
  Clusters step(const Clusters& from, double r, double a, double b, int depth) {
    Clusters all = eigen_clusters(n0 + std::polar(r, b) * w, ctol);
    Clusters to;
    std::vector<bool> used(all.centers.size(), false);
    bool ok = true;
    for (std::size_t i = 0; i < from.centers.size() && ok; ++i) {
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      int arg = -1;
      for (std::size_t j = 0; j < all.centers.size(); ++j) {
        double d = std::abs(all.centers[j] - from.centers[i]);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          arg = static_cast<int>(j);
        } else if (d < d2) {
          d2 = d;
        }
      }
      ok = arg >= 0 && !used[arg] && all.mult[arg] == from.mult[i] && d2 >= 3.0 * d1;
      if (ok) {
        used[arg] = true;
        to.centers.push_back(all.centers[arg]);
        to.mult.push_back(all.mult[arg]);
      }
    }
    if (ok) return to;
    require(depth < 12, Errc::MatchingAmbiguity, "eigenvalues approach each other within the step tolerance");
    ++refinements;
    double mid = 0.5 * (a + b);
    return step(step(from, r, a, mid, depth + 1), r, mid, b, depth + 1);
  }
};

inline int rank_of(const Matrix& m, double threshold) { return rank_cut(singular_values(m), threshold).rank; }

}  // namespace detail

inline double group_separation(cplx z0, const Matrix& n0, double gtol) {
  double d = std::numeric_limits<double>::infinity();
  for (cplx l : eigenvalues(n0))
    if (std::abs(l - z0) > gtol) d = std::min(d, std::abs(l - z0));
  return d;
}

inline double default_path_radius(cplx z0, const Matrix& n0, const Matrix& w) {
  const double nw = direction_scale(w);
  const double gtol = 1e-3 * std::max(1.0, opnorm(n0));
  double r = 1.0 / nw;
  double sep = group_separation(z0, n0, gtol);
  if (std::isfinite(sep)) r = std::min(r, 0.25 * sep / nw);
  double rho = nearest_other_resonance(z0, n0, w);
  if (std::isfinite(rho)) r = std::min(r, 0.5 * rho);
  return r;
}

namespace detail {

struct LoopAttempt {
  bool ok = false;
  std::string failure;
};

}  // namespace detail

inline EigenpathSet trace_eigenpaths(cplx z0, const Matrix& n0, const Matrix& w, const PathOptions& opt = {}) {
  require_eigenvalue(z0, n0);
  require(opnorm(w) > 0.0, Errc::DegenerateDirection, "perturbation direction is zero");
  const Eigen::Index dim = n0.rows();
  const double nscale = std::max(1.0, opnorm(n0));
  const double gtol = 1e-3 * nscale;
  const double ctol = 1e-6 * nscale;
  const double sep = group_separation(z0, n0, gtol);
  int group_size = 0;
  for (cplx l : eigenvalues(n0)) group_size += std::abs(l - z0) <= gtol;
  const int j_max = opt.j_max > 0 ? opt.j_max : numerical_rank(w) + 2;
  double radius = opt.radius > 0.0 ? opt.radius : default_path_radius(z0, n0, w);

  std::string last_failure;
  for (int attempt = 0; attempt <= opt.max_shrinks; ++attempt, radius *= 0.5) {
    EigenpathSet set;
    set.z0 = z0;
    set.base = n0;
    set.direction = w;
    set.radius = radius;
    set.shrinks = attempt;
    const int m = opt.nodes;
    set.nodes = circle_nodes(0.0, radius, m);
    set.probe_v = 0.4 * radius * std::polar(1.0, 0.9);

    // Initial group: the clusters nearest z0 at the first node.
    detail::Clusters all = detail::eigen_clusters(n0 + set.nodes[0] * w, ctol);
    std::vector<int> order(all.centers.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(all.centers[a] - z0) < std::abs(all.centers[b] - z0); });
    detail::Clusters start;
    int taken = 0;
    for (int i : order) {
      if (taken >= group_size) break;
      start.centers.push_back(all.centers[i]);
      start.mult.push_back(all.mult[i]);
      taken += all.mult[i];
    }
    auto confined = [&](const detail::Clusters& c) {
      if (!std::isfinite(sep)) return true;
      for (cplx x : c.centers)
        if (std::abs(x - z0) > 0.5 * sep) return false;
      return true;
    };
    if (taken != group_size || !confined(start)) {
      last_failure = "eigenvalue group not confined on the contour";
      continue;
    }
    {
      // Canonical ordering of the tracked clusters.
      std::vector<int> idx(start.centers.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (start.centers[a].real() != start.centers[b].real()) return start.centers[a].real() < start.centers[b].real();
        return start.centers[a].imag() < start.centers[b].imag();
      });
      detail::Clusters s2;
      for (int i : idx) {
        s2.centers.push_back(start.centers[i]);
        s2.mult.push_back(start.mult[i]);
      }
      start = s2;
    }
    detail::GroupTracker tracker{n0, w, ctol};
    std::vector<detail::Clusters> states{start};
    bool fine = true;
    for (int k = 1; k <= m && fine; ++k) {
      auto next = tracker.step(states.back(), radius, 2.0 * kPi * (k - 1) / m, 2.0 * kPi * k / m, 0);
      fine = confined(next);
      states.push_back(next);
    }
    set.refinements = tracker.refinements;
    if (!fine) {
      last_failure = "eigenvalue group left its neighbourhood on the contour";
      continue;
    }
    // Monodromy of the tracked clusters after one loop.
    const auto& fin = states.back();
    bool identity_loop = true;
    for (std::size_t i = 0; i < fin.centers.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < start.centers.size(); ++j)
        if (std::abs(start.centers[j] - fin.centers[i]) < std::abs(start.centers[best] - fin.centers[i])) best = j;
      identity_loop = identity_loop && best == i;
    }
    if (!identity_loop) {
      last_failure = "continuation around the contour permutes the eigenvalue branches";
      continue;
    }
    states.pop_back();

    const int nclusters = static_cast<int>(start.centers.size());
    // Riesz projections and eigenvalue samples per cluster.
    std::vector<std::vector<Matrix>> proj(nclusters, std::vector<Matrix>(m));
    std::vector<std::vector<cplx>> zs(nclusters, std::vector<cplx>(m));
    for (int k = 0; k < m; ++k) {
      Matrix nv = n0 + set.nodes[k] * w;
      detail::Clusters allk = detail::eigen_clusters(nv, ctol);
      for (int c = 0; c < nclusters; ++c) {
        cplx center = states[k].centers[c];
        proj[c][k] = detail::riesz_projection(nv, center, detail::isolation_radius(allk, center, nv));
        zs[c][k] = (nv * proj[c][k]).trace() / static_cast<double>(states[k].mult[c]);
      }
    }
    // Single-valued analyticity of each eigenvalue branch.
    Matrix nprobe = n0 + set.probe_v * w;
    detail::Clusters allp = detail::eigen_clusters(nprobe, ctol);
    bool analytic = true;
    std::vector<cplx> probe_center(nclusters);
    std::vector<double> cres(nclusters);
    for (int c = 0; c < nclusters && analytic; ++c) {
      cplx mean = taylor_coefficient(zs[c], set.nodes, 0);
      cplx interp = cauchy_interpolate(zs[c], set.nodes, set.probe_v);
      std::size_t best = 0;
      for (std::size_t j = 1; j < allp.centers.size(); ++j)
        if (std::abs(allp.centers[j] - interp) < std::abs(allp.centers[best] - interp)) best = j;
      probe_center[c] = allp.centers[best];
      cres[c] = std::max(std::abs(mean - z0), std::abs(allp.centers[best] - interp)) / nscale;
      analytic = cres[c] <= 1e-6;
    }
    if (!analytic) {
      last_failure = "eigenvalue samples do not interpolate a single-valued analytic function";
      continue;
    }
    const bool last = attempt == opt.max_shrinks;
    if (!last && *std::max_element(cres.begin(), cres.end()) > 1e-10) continue;  // slow convergence: shrink

    int branch = 0;
    bool retry = false;
    for (int c = 0; c < nclusters; ++c) {
      const int mult = states[0].mult[c];
      Matrix p0 = taylor_coefficient(proj[c], set.nodes, 0);
      Matrix p_probe = detail::riesz_projection(nprobe, probe_center[c], detail::isolation_radius(allp, probe_center[c], nprobe));
      Matrix p_interp = cauchy_interpolate(proj[c], set.nodes, set.probe_v);
      bool proj_analytic = opnorm(p_interp - p_probe) <= 1e-6 * std::max(1.0, opnorm(p_probe));
      if (!proj_analytic && !last) {
        retry = true;
        break;
      }
      Matrix n_first = n0 + set.nodes[0] * w;
      int defect =
          detail::rank_of((n_first - zs[c][0] * identity(dim)) * proj[c][0], 1e-8 * std::max(1.0, opnorm(n_first)));
      std::vector<std::vector<Vector>> phis, duals;
      std::vector<Vector> probe_phis, probe_duals;
      std::string gauge;
      if (proj_analytic && defect == 0) {
        gauge = "dual";
        Matrix basis = svd_split(p0, 1e-8 * opnorm(p0)).range;
        require(basis.cols() == mult, Errc::MatchingAmbiguity, "limit projection has unexpected rank");
        Matrix psi = p0.adjoint() * basis;
        phis.assign(mult, std::vector<Vector>(m));
        duals.assign(mult, std::vector<Vector>(m));
        auto fill = [&](const Matrix& p, std::vector<Vector>& ph, std::vector<Vector>& du) {
          Matrix g = psi.adjoint() * p * basis;
          Matrix x = p * basis * g.inverse();
          Matrix y = p.adjoint() * psi;
          for (int t = 0; t < mult; ++t) {
            ph[t] = x.col(t);
            du[t] = y.col(t);
          }
        };
        for (int k = 0; k < m; ++k) {
          std::vector<Vector> ph(mult), du(mult);
          fill(proj[c][k], ph, du);
          for (int t = 0; t < mult; ++t) {
            phis[t][k] = ph[t];
            duals[t][k] = du[t];
          }
        }
        probe_phis.resize(mult);
        probe_duals.resize(mult);
        fill(p_probe, probe_phis, probe_duals);
      } else {
        gauge = "pinned";
        int gm = mult - defect;
        require(gm == 1, Errc::MatchingAmbiguity, "cannot fix an analytic eigenvector basis for a repeated branch");
        auto kernel_vec = [&](const Matrix& nv, cplx zc) {
          Eigen::JacobiSVD<Matrix> svd(nv - zc * identity(dim), Eigen::ComputeFullV);
          return Vector(svd.matrixV().col(dim - 1));
        };
        phis.assign(1, std::vector<Vector>(m));
        int pin = 0;
        for (int k = 0; k < m; ++k) {
          Vector x = kernel_vec(n0 + set.nodes[k] * w, zs[c][k]);
          if (k == 0) x.cwiseAbs().maxCoeff(&pin);
          phis[0][k] = x / x(pin);
        }
        Vector xp = kernel_vec(nprobe, probe_center[c]);
        probe_phis.push_back(xp / xp(pin));
      }
      for (std::size_t t = 0; t < phis.size(); ++t) {
        Eigenpath p;
        p.branch_id = branch++;
        p.cluster = c;
        p.cluster_size = static_cast<int>(phis.size());
        p.z = zs[c];
        p.phi = phis[t];
        p.gauge = gauge;
        p.cauchy_residual = cres[c];
        p.probe_z = probe_center[c];
        p.probe_phi = probe_phis[t];
        if (!duals.empty()) {
          p.dual = duals[t];
          p.probe_dual = probe_duals[t];
        }
        std::vector<cplx> conj_nodes(m);
        for (int k = 0; k < m; ++k) conj_nodes[k] = std::conj(set.nodes[k]);
        for (int j = 0; j <= j_max; ++j) {
          double f = factorial(j);
          p.z_derivs.push_back(f * taylor_coefficient(p.z, set.nodes, j));
          p.phi_derivs.push_back(f * taylor_coefficient(p.phi, set.nodes, j));
          if (p.has_dual()) p.dual_derivs.push_back(f * taylor_coefficient(p.dual, conj_nodes, j));
        }
        double worst = 0.0;
        for (int k = 0; k < m; ++k) {
          Matrix nv = n0 + set.nodes[k] * w;
          worst = std::max(worst, (nv * p.phi[k] - p.z[k] * p.phi[k]).norm() / (opnorm(nv) * p.phi[k].norm()));
          set.trajectory.push_back({k, set.nodes[k], p.z[k], p.branch_id});
        }
        p.eigen_residual = worst;
        set.paths.push_back(std::move(p));
      }
    }
    if (retry) {
      last_failure = "eigenprojection is not analytic on the contour";
      continue;
    }
    return set;
  }
  throw Error(Errc::BranchingDetected, last_failure);
}

struct ConjugatePath {
  int branch_id = 0;
  std::vector<cplx> z_star;
  std::vector<Vector> dual;
  std::vector<Vector> dual_derivs;
  double pairing_error = 0.0;        // max |<dual_mu, phi_tau> - delta| over samples
  double anti_holomorphy_residual = 0.0;
};

inline Matrix left_eigenspace(cplx z0, const Matrix& n0) {
  double scale = std::max({opnorm(n0), std::abs(z0), 1e-300});
  return svd_split(n0 - z0 * identity(n0.rows()), 1e-8 * scale).cokernel;
}

inline Matrix right_eigenspace(cplx z0, const Matrix& n0) {
  double scale = std::max({opnorm(n0), std::abs(z0), 1e-300});
  return svd_split(n0 - z0 * identity(n0.rows()), 1e-8 * scale).kernel;
}

inline std::vector<ConjugatePath> conjugate_paths(const EigenpathSet& set, double tol = 1e-8) {
  const auto& paths = set.paths;
  Matrix left = left_eigenspace(set.z0, set.base);
  Matrix gen(set.base.rows(), static_cast<Eigen::Index>(paths.size()));
  for (std::size_t t = 0; t < paths.size(); ++t) gen.col(t) = paths[t].phi0() / paths[t].phi0().norm();
  require(left.cols() == gen.cols(), Errc::AssumptionViolated,
          "generating eigenvectors do not match the dimension of the eigenspace");
  Eigen::VectorXd sv = singular_values(left.adjoint() * gen);
  require(sv(sv.size() - 1) > 0.0 && sv(0) / sv(sv.size() - 1) < 1e8, Errc::AssumptionViolated,
          "pairing between generating eigenvectors and left eigenvectors is singular");
  for (const auto& p : paths)
    require(p.has_dual(), Errc::AssumptionViolated, "no analytic conjugate path exists for branch " +
                                                        std::to_string(p.branch_id));
  const int m = static_cast<int>(set.nodes.size());
  std::vector<ConjugatePath> out;
  for (const auto& mu : paths) {
    ConjugatePath c;
    c.branch_id = mu.branch_id;
    c.dual = mu.dual;
    c.dual_derivs = mu.dual_derivs;
    for (cplx z : mu.z) c.z_star.push_back(std::conj(z));
    for (const auto& tau : paths)
      for (int k = 0; k < m; ++k) {
        cplx pair = mu.dual[k].dot(tau.phi[k]);
        double expect = mu.branch_id == tau.branch_id ? 1.0 : 0.0;
        c.pairing_error = std::max(c.pairing_error, std::abs(pair - expect));
      }
    // Conjugated Cauchy formula at the interior probe.
    Vector acc = Vector::Zero(mu.dual.front().size());
    for (int k = 0; k < m; ++k) acc += mu.dual[k] * std::conj(set.nodes[k] / (set.nodes[k] - set.probe_v));
    acc /= static_cast<double>(m);
    c.anti_holomorphy_residual = (acc - mu.probe_dual).norm() / std::max(1.0, mu.probe_dual.norm());
    require(c.pairing_error <= std::max(tol, 1e-8) * 1e2 || c.pairing_error <= 1e-6, Errc::AssumptionViolated,
            "conjugate paths fail the biorthogonal pairing");
    out.push_back(std::move(c));
  }
  return out;
}

struct PathOrder {
  int order = 0;             // from the eigenvalue derivatives
  int criterion_order = 0;   // from orthogonality of W phi^(j)(0) to the left eigenspace
  int conjugate_order = 0;   // same criterion on the conjugate side
  std::vector<double> derivative_sizes;
  std::vector<double> orthogonality_sizes;
  bool within_rank_bound = true;
};

inline PathOrder path_order(const EigenpathSet& set, const Eigenpath& path, const ConjugatePath* conj = nullptr,
                            double tol = 1e-7) {
  const Matrix& w = set.direction;
  const double nw = direction_scale(w);
  const int jm = static_cast<int>(path.z_derivs.size()) - 1;
  PathOrder out;
  for (int j = 1; j <= jm; ++j) {
    double size = std::abs(path.z_derivs[j]) / factorial(j) / std::pow(nw, j);
    out.derivative_sizes.push_back(size);
    if (out.order == 0 && size > tol) out.order = j;
  }
  Matrix left = left_eigenspace(set.z0, set.base);
  Matrix right = right_eigenspace(set.z0, set.base);
  const double n0 = path.phi0().norm();
  for (int j = 0; j < jm; ++j) {
    double size = (left.adjoint() * (w * path.phi_derivs[j])).norm() / factorial(j) / (n0 * std::pow(nw, j + 1));
    out.orthogonality_sizes.push_back(size);
    if (out.criterion_order == 0 && size > tol) out.criterion_order = j + 1;
  }
  if (conj) {
    const double d0 = conj->dual_derivs.front().norm();
    for (int j = 0; j < jm; ++j) {
      double size = (right.adjoint() * (w * conj->dual_derivs[j])).norm() / factorial(j) / (d0 * std::pow(nw, j + 1));
      if (out.conjugate_order == 0 && size > tol) out.conjugate_order = j + 1;
    }
  }
  require(out.order > 0, Errc::DegenerateDirection, "eigenvalue branch is constant to the computed order");
  require(out.order == out.criterion_order, Errc::CriteriaDisagree,
          "derivative order " + std::to_string(out.order) + " vs orthogonality order " +
              std::to_string(out.criterion_order));
  out.within_rank_bound = out.order <= numerical_rank(w);
  return out;
}

struct CycleDecomposition {
  std::vector<std::vector<int>> cycles;
  std::vector<int> periods;
  std::vector<int> permutation;
  double loop_radius = 0.0;
  cplx s0;
  std::vector<cplx> loop_nodes;                // z on the loop
  std::vector<std::vector<cplx>> tracked;      // tracked[k][i]: coupling of point i at loop node k
  int refinements = 0;

  bool nontrivial() const {
    for (int p : periods)
      if (p > 1) return true;
    return false;
  }
};

namespace detail {

struct PointTracker {
  const Matrix& n0;
  const Matrix& v;
  cplx z0;
  int refinements = 0;

  std::vector<cplx> points_at(cplx z) const { return raw_resonance_points(z, n0, v); }

  std::vector<cplx> step(const std::vector<cplx>& from, double rho, double a, double b, int depth) {
    auto all = points_at(z0 + std::polar(rho, b));
    std::vector<cplx> to;
    std::vector<bool> used(all.size(), false);
    bool ok = true;
    for (std::size_t i = 0; i < from.size() && ok; ++i) {
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      int arg = -1;
      for (std::size_t j = 0; j < all.size(); ++j) {
        double d = std::abs(all[j] - from[i]);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          arg = static_cast<int>(j);
        } else if (d < d2) {
          d2 = d;
        }
      }
      ok = arg >= 0 && !used[arg] && d2 >= 3.0 * d1;
      if (ok) {
        used[arg] = true;
        to.push_back(all[arg]);
      }
    }
    if (ok) return to;
    require(depth < 10, Errc::TrackingCollision, "tracked resonance points collide along the loop");
    ++refinements;
    double mid = 0.5 * (a + b);
    return step(step(from, rho, a, mid, depth + 1), rho, mid, b, depth + 1);
  }
};

}  // namespace detail

namespace detail {

// Per-cycle (period, mean |t|^p / rho): constant once the loop is inside the Puiseux regime.
inline std::vector<std::pair<int, double>> puiseux_profile(const CycleDecomposition& c) {
  std::vector<std::pair<int, double>> out;
  for (const auto& cyc : c.cycles) {
    double acc = 0.0;
    for (int j : cyc)
      for (const auto& row : c.tracked) acc += std::pow(std::abs(row[j] - c.s0), static_cast<double>(cyc.size()));
    out.emplace_back(static_cast<int>(cyc.size()), acc / (cyc.size() * c.tracked.size() * c.loop_radius));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Monodromy of the coupling resonances that collapse onto s0 as z -> z0.
// The loop is accepted once the cycle structure and its Puiseux scaling agree at half the radius.
inline CycleDecomposition monodromy_cycles(cplx z0, cplx s0, const Matrix& h0, const Matrix& v, double loop_radius = 0.0,
                                           int steps = 64) {
  Matrix n0 = h0 + s0 * v;
  require_eigenvalue(z0, n0);
  auto cr = coupling_resonances(z0, n0, v);
  const int group = static_cast<int>(cr.at_zero.size());
  require(group > 0, Errc::PreconditionViolated, "no resonance points collapse onto s0");
  double other = std::numeric_limits<double>::infinity();
  for (cplx t : cr.others) other = std::min(other, std::abs(t));
  const double nscale = std::max(1.0, opnorm(n0));
  double sep = group_separation(z0, n0, 1e-3 * nscale);
  double rho = loop_radius > 0.0 ? loop_radius : 0.1 * (std::isfinite(sep) ? sep : nscale);
  std::string failure = "loop never reached the Puiseux regime";

  auto run = [&](double r) -> std::optional<CycleDecomposition> {
    detail::PointTracker tracker{n0, v, z0};
    auto nodes = circle_nodes(z0, r, steps);
    auto confined_group = [&](cplx z, std::vector<cplx>* keep) {
      auto pts = tracker.points_at(z);
      std::sort(pts.begin(), pts.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
      if (static_cast<int>(pts.size()) < group) return false;
      double lim = std::isfinite(other) ? other / 3.0 : std::numeric_limits<double>::infinity();
      if (std::abs(pts[group - 1]) >= lim) return false;
      if (static_cast<int>(pts.size()) > group && std::isfinite(other) && std::abs(pts[group]) <= 2.0 * other / 3.0)
        return false;
      if (keep) keep->assign(pts.begin(), pts.begin() + group);
      return true;
    };
    std::vector<cplx> start;
    if (!confined_group(nodes[0], &start)) {
      failure = "loop too large: resonance group not separated";
      return std::nullopt;
    }
    std::sort(start.begin(), start.end(), [](cplx a, cplx b) {
      if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
      return std::arg(a) < std::arg(b);
    });
    CycleDecomposition out;
    out.loop_radius = r;
    out.s0 = s0;
    out.loop_nodes = nodes;
    out.tracked.push_back(start);
    for (int k = 1; k <= steps; ++k) {
      out.tracked.push_back(tracker.step(out.tracked.back(), r, 2.0 * kPi * (k - 1) / steps, 2.0 * kPi * k / steps, 0));
      if (k < steps && !confined_group(nodes[k], nullptr)) {
        failure = "loop too large: resonance group not separated";
        return std::nullopt;
      }
    }
    const auto fin = out.tracked.back();
    out.tracked.pop_back();
    out.permutation.assign(group, 0);
    for (int i = 0; i < group; ++i) {
      int best = 0;
      for (int j = 1; j < group; ++j)
        if (std::abs(start[j] - fin[i]) < std::abs(start[best] - fin[i])) best = j;
      out.permutation[i] = best;
    }
    std::vector<int> id(group);
    std::iota(id.begin(), id.end(), 0);
    require(sorted(out.permutation) == id, Errc::TrackingCollision, "loop transport is not a permutation");
    out.cycles = permutation_cycles(out.permutation);
    std::stable_sort(out.cycles.begin(), out.cycles.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    for (const auto& c : out.cycles) out.periods.push_back(static_cast<int>(c.size()));
    out.refinements = tracker.refinements;
    for (auto& row : out.tracked)
      for (auto& t : row) t += s0;
    return out;
  };

  std::optional<CycleDecomposition> prev;
  for (int attempt = 0; attempt < 40; ++attempt, rho *= 0.5) {
    auto cur = run(rho);
    if (cur && prev) {
      auto a = detail::puiseux_profile(*prev), b = detail::puiseux_profile(*cur);
      bool same = a.size() == b.size();
      for (std::size_t i = 0; same && i < a.size(); ++i) {
        double ratio = a[i].second / b[i].second;
        same = a[i].first == b[i].first && ratio > 0.7 && ratio < 1.4;
      }
      if (same) return *prev;
    }
    prev = cur;
  }
  throw Error(Errc::TrackingCollision, failure);
}

struct BranchingReport {
  bool path_order_at_least_two = false;   // (i)
  bool direction_orthogonal = false;      // (ii)
  bool derivative_vanishes = false;       // (iii)
  bool derivative_equation_solvable = false;  // (iv)
  bool in_image_of_nilpotent = false;     // (v)
  bool chain_relation = false;            // (vi)
  bool nontrivial_monodromy = false;      // (vii)
  double pairing = 0.0, derivative = 0.0, equation_residual = 0.0, image_residual = 0.0, chain_residual = 0.0;
  int order = 0;
  int depth = 0;
  std::vector<int> periods;

  std::array<bool, 7> criteria() const {
    return {path_order_at_least_two, direction_orthogonal, derivative_vanishes, derivative_equation_solvable,
            in_image_of_nilpotent,   chain_relation,       nontrivial_monodromy};
  }
  bool first_six_agree() const {
    auto c = criteria();
    for (int i = 1; i < 6; ++i)
      if (c[i] != c[0]) return false;
    return true;
  }
  bool all_agree() const { return first_six_agree() && nontrivial_monodromy == path_order_at_least_two; }
};

inline BranchingReport branching_report(cplx z0, cplx s0, const Matrix& h0, const Matrix& v, double tol = 1e-7) {
  Matrix n0 = h0 + s0 * v;
  auto sd = spectral_data(n0);
  const auto* cl = sd.find(z0, 1e-5 * std::max(1.0, opnorm(n0)));
  require(cl != nullptr, Errc::PreconditionViolated, "z0 is not an eigenvalue of H(s0)");
  require(cl->algebraic == 1 && cl->geometric == 1, Errc::NotSimple, "z0 is not a simple eigenvalue");
  BranchingReport rep;
  const double nv = direction_scale(v);

  auto set = trace_eigenpaths(z0, n0, v);
  require(set.paths.size() == 1, Errc::NotSimple, "simple eigenvalue produced several paths");
  const auto& path = set.paths.front();
  auto conj = conjugate_paths(set);
  auto po = path_order(set, path, &conj.front());
  rep.order = po.order;
  rep.path_order_at_least_two = po.order >= 2;

  Vector phi = cl->right.col(0), psi = cl->left.col(0);
  rep.pairing = std::abs(psi.dot(v * phi)) / (std::abs(psi.dot(phi)) * nv);
  rep.direction_orthogonal = rep.pairing <= tol;

  rep.derivative = std::abs(path.z_derivs[1]) / nv;
  rep.derivative_vanishes = rep.derivative <= tol;

  const Vector& p0 = path.phi_derivs[0];
  const Vector& p1 = path.phi_derivs[1];
  rep.equation_residual = ((n0 - z0 * identity(n0.rows())) * p1 + v * p0).norm() / (nv * p0.norm());
  rep.derivative_equation_solvable = rep.equation_residual <= tol;

  auto series = laurent_coefficients(z0, n0, v);
  auto ops = resonance_operators(series);
  rep.depth = depth(p0, ops);
  rep.in_image_of_nilpotent = rep.depth >= 1;
  {
    SvdSplit split = svd_split(ops.A(), nilpotent_threshold(ops, 1));
    rep.image_residual = membership_residual(split.range, p0);
  }
  rep.chain_residual = (ops.A() * p1 - p0).norm() / p0.norm();
  rep.chain_relation = rep.chain_residual <= 1e-6;

  auto cyc = monodromy_cycles(z0, s0, h0, v);
  rep.periods = cyc.periods;
  rep.nontrivial_monodromy = cyc.nontrivial();
  return rep;
}

struct AssumptionReport {
  bool holds = false;
  bool no_branching = false;
  bool semisimple = false;
  bool gram_invertible = false;
  std::string diagnostic;
};

inline AssumptionReport assumption_check(cplx z0, const Matrix& n0, const Matrix& w, double radius = 0.0) {
  AssumptionReport rep;
  require_eigenvalue(z0, n0);
  std::optional<EigenpathSet> set;
  try {
    PathOptions opt;
    opt.radius = radius;
    set = trace_eigenpaths(z0, n0, w, opt);
    rep.no_branching = true;
  } catch (const Error& e) {
    if (e.code() != Errc::BranchingDetected && e.code() != Errc::MatchingAmbiguity) throw;
    rep.diagnostic = e.what();
  }
  auto ss = semisimplicity_check(z0, n0);
  rep.semisimple = ss.semisimple;
  if (!rep.semisimple && rep.diagnostic.empty()) rep.diagnostic = "eigenvalue is not semisimple";
  if (set) {
    try {
      conjugate_paths(*set);
      rep.gram_invertible = true;
    } catch (const Error& e) {
      if (e.code() != Errc::AssumptionViolated) throw;
      if (rep.diagnostic.empty()) rep.diagnostic = e.what();
    }
  }
  rep.holds = rep.no_branching && rep.semisimple && rep.gram_invertible;
  return rep;
}

}  // namespace resonance
