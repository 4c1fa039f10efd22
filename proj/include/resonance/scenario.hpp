#pragma once

#include "resonance/io.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <random>
#include <thread>

namespace resonance {

inline int worker_count() {
  if (const char* env = std::getenv("RESONANCE_LAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs job(i) for i < count on a fixed pool; results are indexed, so output order never depends on scheduling.
template <class Job>
void parallel_for(std::size_t count, Job job, int threads = worker_count()) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// std::normal_distribution is implementation-defined; Box-Muller over raw 64-bit draws is not.
class SeededGaussian {
 public:
  explicit SeededGaussian(std::uint64_t seed) : gen_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }
  Matrix hermitian(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
      m(i, i) = next();
      for (int j = i + 1; j < n; ++j) {
        m(i, j) = cplx(next(), next()) / std::sqrt(2.0);
        m(j, i) = std::conj(m(i, j));
      }
    }
    return m;
  }

 private:
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline InstanceData generate_instance(int n, std::uint64_t seed, const std::string& kind) {
  require(n >= 1, Errc::InvalidArgument, "instance size must be at least 1");
  require(kind == "hermitian-pair" || kind == "with-direction", Errc::InvalidArgument,
          "kind must be hermitian-pair or with-direction");
  SeededGaussian g(seed);
  InstanceData d;
  d.H0 = MatrixOperator::hermitian(g.hermitian(n));
  d.V = MatrixOperator::hermitian(g.hermitian(n));
  if (kind == "with-direction") d.W = MatrixOperator::hermitian(g.hermitian(n));
  return d;
}

struct Scenario {
  std::string command;
  std::string instance_path;
  std::optional<cplx> z0;
  std::optional<double> lambda;
  double a = 0.0, b = 1.0;
  double radius = 0.0;  // 0 picks the module default
  int nodes = 64;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::string out;
  int n = 4;  // gen
  std::string kind = "hermitian-pair";
};

struct ScenarioResult {
  int exit_code = 0;
  json report;
  std::vector<std::string> failed;
};

namespace detail {

// Residual bookkeeping: every key is declared up front so reports keep one schema.
class Checks {
 public:
  explicit Checks(const std::vector<std::string>& keys) {
    for (const auto& k : keys) residuals_[k] = 0.0;
  }
  void set(const std::string& key, double value) {
    require(residuals_.contains(key), Errc::InvalidArgument, "undeclared residual " + key);
    residuals_[key] = value;
  }
  void assert_le(const std::string& key, double value, double limit) {
    set(key, value);
    if (!(value <= limit)) failed_.push_back(key);
  }
  void assert_true(const std::string& clause, bool ok) {
    if (!ok) failed_.push_back(clause);
  }
  const json& residuals() const { return residuals_; }
  const std::vector<std::string>& failed() const { return failed_; }

 private:
  json residuals_ = json::object();
  std::vector<std::string> failed_;
};

inline std::string sibling_path(const std::string& out, const std::string& suffix) {
  std::string stem = out;
  if (stem.size() > 5 && stem.compare(stem.size() - 5, 5, ".json") == 0) stem.resize(stem.size() - 5);
  return stem + suffix;
}

struct Structure {
  LaurentSeries series;
  ResonanceOperators ops;
  UpsilonFiltration filtration;
  JordanData jordan;
  AssumptionReport assumption;
  std::optional<EigenpathSet> paths;
  std::vector<int> orders, depths;
  std::optional<CycleDecomposition> cycles;
  std::optional<HankelPair> hankel;
};

inline Structure analyze_structure(cplx z0, const Matrix& h0, const Matrix& w, const Scenario& sc, Checks& checks) {
  Structure st;
  LaurentOptions lo;
  lo.radius = sc.radius;
  lo.nodes = sc.nodes;
  st.series = laurent_coefficients(z0, h0, w, lo);
  st.ops = resonance_operators(st.series);
  auto ids = verify_laurent_identities(st.series, sc.tol);
  checks.assert_le("laurent_negative_products", ids.negative_products, sc.tol);
  checks.assert_le("laurent_mixed_products", ids.mixed_products, sc.tol);
  checks.assert_le("laurent_positive_products", ids.positive_products, sc.tol);
  checks.assert_le("laurent_power_chain", ids.power_chain, sc.tol);
  st.filtration = upsilon_filtration(z0, h0, w);
  checks.set("filtration_probe_disagreement", st.filtration.probe_disagreement);
  st.jordan = jordan_structure(st.ops, st.filtration);
  st.assumption = assumption_check(z0, h0, w);
  if (!st.assumption.holds) return st;

  st.paths = trace_eigenpaths(z0, h0, w);
  auto conj = conjugate_paths(*st.paths);
  for (std::size_t t = 0; t < st.paths->paths.size(); ++t) {
    st.orders.push_back(path_order(*st.paths, st.paths->paths[t], &conj[t]).order);
    st.depths.push_back(depth(st.paths->paths[t].phi0(), st.ops));
  }
  st.cycles = monodromy_cycles(z0, 0.0, h0, w);
  st.hankel = beta_alpha(*st.paths, st.orders);
  const double pn = std::max(opnorm(st.ops.P), 1e-300);
  checks.assert_le("schmidt_residual", opnorm(schmidt_reconstruction(*st.hankel, *st.paths) - st.ops.P) / pn,
                   std::max(10.0 * sc.tol, 1e-7));
  checks.assert_le("hankel_skew_zero", st.hankel->skew_zero_max, sc.tol);
  checks.assert_le("hankel_cross_block", st.hankel->cross_block_max, sc.tol);
  auto proj = cycle_projections(z0, h0, w, *st.cycles, st.ops);
  Matrix sum = Matrix::Zero(h0.rows(), h0.cols());
  for (const auto& p : proj) sum += p.P;
  checks.assert_le("cycle_projection_sum", opnorm(sum - st.ops.P) / pn, std::max(10.0 * sc.tol, 1e-7));
  return st;
}

inline json structure_json(const Structure& st) {
  json j;
  j["pole_order"] = st.series.pole_order;
  j["filtration"] = filtration_json(st.filtration, st.jordan);
  j["block_sizes"] = st.jordan.block_sizes;
  j["series"] = series_json(st.series);
  j["assumption"] = {{"holds", st.assumption.holds},
                     {"no_branching", st.assumption.no_branching},
                     {"semisimple", st.assumption.semisimple},
                     {"gram_invertible", st.assumption.gram_invertible},
                     {"diagnostic", st.assumption.diagnostic}};
  j["path_orders"] = st.orders;
  j["path_depths"] = st.depths;
  j["cycle_periods"] = st.cycles ? json(st.cycles->periods) : json::array();
  j["hankel"] = st.hankel ? hankel_json(*st.hankel) : json(nullptr);
  return j;
}

inline const std::vector<std::string> kStructureKeys = {
    "laurent_negative_products", "laurent_mixed_products", "laurent_positive_products", "laurent_power_chain",
    "filtration_probe_disagreement", "schmidt_residual", "hankel_skew_zero", "hankel_cross_block",
    "cycle_projection_sum"};

inline bool simple_eigenvalue(cplx z0, const Matrix& n0) {
  int hits = 0;
  for (cplx l : eigenvalues(n0)) hits += std::abs(l - z0) <= 1e-6 * std::max(1.0, opnorm(n0));
  return hits == 1;
}

inline json branching_json(const BranchingReport& br) {
  auto c = br.criteria();
  return {{"criteria", std::vector<bool>(c.begin(), c.end())},
          {"first_six_agree", br.first_six_agree()},
          {"all_agree", br.all_agree()},
          {"all_true", std::all_of(c.begin(), c.end(), [](bool x) { return x; })},
          {"order", br.order},
          {"depth", br.depth},
          {"periods", br.periods}};
}

inline ScenarioResult run_analyze(const Scenario& sc, const InstanceData& inst, bool assert_all) {
  require(sc.z0.has_value(), Errc::InvalidArgument, "--z0 is required");
  const Matrix& h0 = inst.H0.matrix();
  const Matrix& w = inst.direction();
  Checks checks(kStructureKeys);
  Structure st = analyze_structure(*sc.z0, h0, w, sc, checks);
  ScenarioResult res;
  res.report["structure"] = structure_json(st);
  json theorem = nullptr;
  if (simple_eigenvalue(*sc.z0, h0)) {
    auto br = branching_report(*sc.z0, 0.0, h0, w, std::max(10.0 * sc.tol, 1e-7));
    theorem = branching_json(br);
    checks.assert_true("branching_criteria_agree", br.all_agree());
  }
  res.report["theorem"] = theorem;
  if (st.paths) {
    std::vector<int> periods = st.cycles->periods;
    checks.assert_true("orders_equal_blocks", sorted(st.orders) == sorted(st.jordan.block_sizes));
    checks.assert_true("periods_equal_blocks", sorted(periods) == sorted(st.jordan.block_sizes));
    for (std::size_t t = 0; t < st.orders.size(); ++t)
      checks.assert_true("depth_equals_order_minus_one", st.depths[t] == st.orders[t] - 1);
    if (!sc.out.empty()) write_text(sibling_path(sc.out, ".trajectory.csv"), trajectory_csv(*st.paths));
  }
  res.report["residuals"] = checks.residuals();
  res.failed = assert_all ? checks.failed() : std::vector<std::string>{};
  if (!assert_all) res.report["unchecked_failures"] = checks.failed();
  return res;
}

inline ScenarioResult run_flow(const Scenario& sc, const InstanceData& inst) {
  require(sc.lambda.has_value(), Errc::InvalidArgument, "--lambda is required");
  Checks checks({"ssf_minus_oracle", "index_minus_flow", "bs_mismatch", "calibration_residual"});
  auto rep = ssf_report(*sc.lambda, inst.H0.matrix(), inst.V.matrix(), sc.a, sc.b);
  checks.assert_le("ssf_minus_oracle", std::abs(rep.ssf_value - rep.oracle_value), 0.0);
  checks.assert_le("index_minus_flow", std::abs(rep.total_index - rep.flow_value), 0.0);
  if (rep.bs_count) checks.assert_le("bs_mismatch", std::abs(rep.oracle_value + *rep.bs_count), 0.0);
  checks.assert_le("calibration_residual", rep.calibration.residual, 1e-10);
  ScenarioResult res;
  res.report["flow"] = flow_json(rep);
  res.report["residuals"] = checks.residuals();
  res.failed = checks.failed();
  return res;
}

inline ScenarioResult run_sweep(const Scenario& sc, const InstanceData& inst) {
  const Matrix& h0 = inst.H0.matrix();
  const Matrix& v = inst.V.matrix();
  std::vector<double> spectra;
  for (double s : {sc.a, sc.b})
    for (cplx e : eigenvalues(h0 + s * v)) spectra.push_back(e.real());
  std::sort(spectra.begin(), spectra.end());
  const double lo = spectra.front() - 0.5, hi = spectra.back() + 0.5;
  const int count = std::max(sc.nodes, 2);
  std::vector<double> grid(count);
  for (int k = 0; k < count; ++k) grid[k] = lo + (hi - lo) * (k + 0.5) / count;
  std::vector<std::optional<FlowReport>> rows(count);
  std::vector<std::string> skipped(count);
  parallel_for(count, [&](std::size_t k) {
    try {
      rows[k] = ssf_report(grid[k], h0, v, sc.a, sc.b);
    } catch (const Error& e) {
      skipped[k] = e.what();
    }
  });
  Checks checks({"max_ssf_minus_oracle", "max_index_minus_flow"});
  double ssf_gap = 0.0, flow_gap = 0.0;
  std::vector<FlowReport> kept;
  json skips = json::array();
  for (int k = 0; k < count; ++k) {
    if (!rows[k]) {
      skips.push_back({{"lambda", grid[k]}, {"reason", skipped[k]}});
      continue;
    }
    ssf_gap = std::max(ssf_gap, std::abs(rows[k]->ssf_value - rows[k]->oracle_value));
    flow_gap = std::max(flow_gap, static_cast<double>(std::abs(rows[k]->total_index - rows[k]->flow_value)));
    kept.push_back(*rows[k]);
  }
  checks.assert_le("max_ssf_minus_oracle", ssf_gap, 0.0);
  checks.assert_le("max_index_minus_flow", flow_gap, 0.0);
  ScenarioResult res;
  json pts = json::array();
  for (const auto& r : kept)
    pts.push_back({{"lambda", r.lambda}, {"total_index", r.total_index}, {"ssf_value", r.ssf_value},
                   {"oracle_value", r.oracle_value}});
  res.report["sweep"] = {{"interval", {sc.a, sc.b}}, {"points", std::move(pts)}, {"skipped", std::move(skips)}};
  res.report["residuals"] = checks.residuals();
  res.failed = checks.failed();
  if (!sc.out.empty()) write_text(sibling_path(sc.out, ".flow.csv"), flow_csv(kept));
  return res;
}

inline ScenarioResult run_tangency(const Scenario& sc, const InstanceData& inst) {
  require(sc.z0.has_value(), Errc::InvalidArgument, "--z0 is required");
  const Matrix& h0 = inst.H0.matrix();
  const Matrix& w = inst.direction();
  Checks checks({"curve_residual", "chain_residual", "lax_pairing", "lax_drift", "lax_exact_deviation"});
  auto probe = resonant_curve(*sc.z0, h0, w);
  const double reach = sc.radius > 0.0 ? sc.radius : probe.radius;
  std::vector<cplx> grid;
  const int count = std::max(sc.nodes, 2);
  for (int k = 1; k <= count; ++k) grid.push_back(reach * k / count);
  CurveOptions co;
  co.radius = probe.radius;
  auto curve = resonant_curve(*sc.z0, h0, w, grid, co);
  auto tr = tangency_order(curve);
  auto th = verify_tangency_theorems(*sc.z0, h0, w);
  checks.assert_le("curve_residual", curve.max_residual, 1e-9);
  checks.assert_le("chain_residual", th.chain_residual, std::max(10.0 * sc.tol, 1e-7));
  checks.assert_true("order_equals_one_plus_depth", th.order_matches_depth);
  checks.assert_true("order_equals_path_order", th.order_matches_path);
  json lax = nullptr;
  try {
    auto lr = lax_tangency_check(h0, w);
    checks.assert_le("lax_pairing", lr.max_pairing, 1e-9);
    checks.assert_le("lax_drift", lr.eigen_drift, 1e-6);
    checks.assert_le("lax_exact_deviation", lr.exact_deviation, 1e-6);
    lax = {{"t_end", lr.t_end}, {"steps", lr.steps}};
  } catch (const Error& e) {
    if (e.code() != Errc::NotSimple) throw;
    lax = {{"skipped", e.what()}};
  }
  ScenarioResult res;
  json taylor = json::array();
  for (cplx s : curve.taylor_s) taylor.push_back(complex_json(s));
  res.report["tangency"] = {{"tangency_order", tr.tangency_order == kInfiniteTangency ? json("infinite") : json(tr.tangency_order)},
                            {"standard", tr.standard_flag},
                            {"depth", th.depth},
                            {"path_order", th.path_order},
                            {"taylor_s", std::move(taylor)},
                            {"lax", std::move(lax)}};
  res.report["residuals"] = checks.residuals();
  res.failed = checks.failed();
  if (!sc.out.empty()) write_text(sibling_path(sc.out, ".curve.csv"), curve_csv(curve));
  return res;
}

inline void validate(const Scenario& sc) {
  require(sc.tol > 0.0, Errc::InvalidArgument, "tolerance must be positive");
  require(sc.radius >= 0.0, Errc::InvalidArgument, "radius must be non-negative");
  require(sc.nodes >= 2, Errc::InvalidArgument, "nodes must be at least 2");
  require(sc.a < sc.b, Errc::InvalidArgument, "interval must have a < b");
}

}  // namespace detail

// Exit codes: 0 all assertions pass, 1 an assertion fails, 2 parse or precondition failure.
inline ScenarioResult run_scenario(const Scenario& sc) {
  ScenarioResult res;
  json header;
  header["command"] = sc.command;
  try {
    detail::validate(sc);
    if (sc.command == "gen") {
      res.report = instance_json(generate_instance(sc.n, sc.seed, sc.kind));
      if (!sc.out.empty()) write_text(sc.out, res.report.dump(2) + "\n");
      return res;
    }
    require(!sc.instance_path.empty(), Errc::InvalidArgument, "--instance is required");
    InstanceData inst = load_instance(sc.instance_path);
    if (sc.command == "analyze") res = detail::run_analyze(sc, inst, false);
    else if (sc.command == "verify") res = detail::run_analyze(sc, inst, true);
    else if (sc.command == "flow") res = detail::run_flow(sc, inst);
    else if (sc.command == "sweep") res = detail::run_sweep(sc, inst);
    else if (sc.command == "tangency") res = detail::run_tangency(sc, inst);
    else throw Error(Errc::InvalidArgument, "unknown command " + sc.command);
    res.exit_code = res.failed.empty() ? 0 : 1;
    header["status"] = res.failed.empty() ? "pass" : "fail";
    header["failed"] = res.failed;
    header["error"] = nullptr;
  } catch (const Error& e) {
    res = {};
    res.exit_code = 2;
    header["status"] = "error";
    header["failed"] = json::array();
    header["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    res = {};
    res.exit_code = 2;
    header["status"] = "error";
    header["failed"] = json::array();
    header["error"] = {{"code", "InvalidArgument"}, {"message", e.what()}};
  }
  if (sc.z0) header["z0"] = complex_json(*sc.z0);
  if (sc.lambda) header["lambda"] = *sc.lambda;
  if (res.report.is_object()) header.update(res.report);
  res.report = std::move(header);
  if (!sc.out.empty()) {
    try {
      write_text(sc.out, res.report.dump(2) + "\n");
    } catch (const Error&) {
      res.exit_code = 2;
    }
  }
  return res;
}

}  // namespace resonance
