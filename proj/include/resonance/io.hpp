#pragma once

#include "resonance/projection_decomposition.hpp"
#include "resonance/spectral_flow.hpp"
#include "resonance/tangency.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace resonance {

using json = nlohmann::ordered_json;

struct InstanceData {
  MatrixOperator H0, V;
  std::optional<MatrixOperator> W;

  const Matrix& direction() const { return W ? W->matrix() : V.matrix(); }
};

inline json complex_json(cplx c) { return json::array({c.real(), c.imag()}); }

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json columns_json(const Matrix& m) {
  json cols = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    json col = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) col.push_back(complex_json(m(i, j)));
    cols.push_back(std::move(col));
  }
  return cols;
}

namespace detail {

inline cplx parse_complex(const json& e, const std::string& where) {
  if (e.is_number()) return e.get<double>();
  require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(), Errc::ParseError,
          where + ": complex entries are [re, im] pairs");
  cplx c{e[0].get<double>(), e[1].get<double>()};
  require(std::isfinite(c.real()) && std::isfinite(c.imag()), Errc::ParseError, where + ": entry is not finite");
  return c;
}

inline Matrix parse_matrix(const json& j, std::size_t n, const std::string& key) {
  require(j.is_array() && j.size() == n, Errc::ParseError, key + " must have n rows");
  Matrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    require(j[r].is_array() && j[r].size() == n, Errc::ParseError, key + " row " + std::to_string(r) + " must have n entries");
    for (std::size_t c = 0; c < n; ++c) m(r, c) = parse_complex(j[r][c], key);
  }
  return m;
}

}  // namespace detail

inline InstanceData parse_instance(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("malformed JSON: ") + e.what());
  }
  require(j.is_object(), Errc::ParseError, "instance must be a JSON object");
  require(j.contains("n") && j["n"].is_number_integer(), Errc::ParseError, "missing integer field n");
  const long long n = j["n"].get<long long>();
  require(n >= 1, Errc::ParseError, "n must be at least 1");
  require(j.contains("H0") && j.contains("V"), Errc::ParseError, "instance needs H0 and V");
  InstanceData d;
  d.H0 = MatrixOperator::detect(detail::parse_matrix(j["H0"], n, "H0"));
  d.V = MatrixOperator::detect(detail::parse_matrix(j["V"], n, "V"));
  if (j.contains("W")) d.W = MatrixOperator::detect(detail::parse_matrix(j["W"], n, "W"));
  return d;
}

inline InstanceData load_instance(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::ParseError, "cannot open instance file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

inline json instance_json(const InstanceData& d) {
  json j;
  j["n"] = d.H0.n();
  j["H0"] = matrix_json(d.H0.matrix());
  j["V"] = matrix_json(d.V.matrix());
  if (d.W) j["W"] = matrix_json(d.W->matrix());
  return j;
}

inline json series_json(const LaurentSeries& s) {
  json j;
  j["z0"] = complex_json(s.z0);
  j["pole_order"] = s.pole_order;
  json k = json::object();
  for (const auto& [idx, m] : s.coefficients) k[std::to_string(idx)] = matrix_json(m);
  j["K"] = std::move(k);
  j["radius"] = s.contour_radius;
  j["nodes"] = s.node_count;
  return j;
}

inline json filtration_json(const UpsilonFiltration& f, const JordanData& jd) {
  json j;
  j["z0"] = complex_json(f.z0);
  j["dims"] = f.dims;
  j["order"] = f.order_d;
  j["block_sizes"] = jd.block_sizes;
  json bases = json::array();
  for (const auto& b : f.bases) bases.push_back(columns_json(b));
  j["bases"] = std::move(bases);
  return j;
}

inline json hankel_json(const HankelPair& hp) {
  json blocks = json::array();
  for (std::size_t b = 0; b < hp.beta.size(); ++b) {
    json blk;
    blk["path"] = hp.block_paths[b];
    blk["size"] = hp.block_sizes[b];
    blk["beta"] = matrix_json(hp.beta[b]);
    blk["alpha"] = matrix_json(hp.alpha[b]);
    blocks.push_back(std::move(blk));
  }
  json j;
  j["blocks"] = std::move(blocks);
  j["cross_block_max"] = hp.cross_block_max;
  j["hankel_residual"] = hp.hankel_residual;
  j["skew_zero_max"] = hp.skew_zero_max;
  j["inverse_residual"] = hp.inverse_residual;
  return j;
}

inline json flow_json(const FlowReport& r) {
  json pts = json::array();
  for (const auto& p : r.real_resonance_points)
    pts.push_back({{"r", p.r}, {"multiplicity", p.multiplicity}, {"index", p.index}});
  json j;
  j["lambda"] = r.lambda;
  j["interval"] = {r.a, r.b};
  j["real_resonance_points"] = std::move(pts);
  j["total_index"] = r.total_index;
  j["bs_count"] = r.bs_count ? json(*r.bs_count) : json(nullptr);
  j["ssf_value"] = r.ssf_value;
  j["oracle_value"] = r.oracle_value;
  j["flow_value"] = r.flow_value;
  j["xi_sign"] = r.calibration.sign;
  return j;
}

namespace detail {

inline std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace detail

inline std::string trajectory_csv(const EigenpathSet& set) {
  std::ostringstream os;
  os << "step,re_v,im_v,re_z,im_z,branch_id\n";
  for (const auto& r : set.trajectory)
    os << r.step << ',' << detail::csv_number(r.v.real()) << ',' << detail::csv_number(r.v.imag()) << ','
       << detail::csv_number(r.z.real()) << ',' << detail::csv_number(r.z.imag()) << ',' << r.branch_id << '\n';
  return os.str();
}

inline std::string flow_csv(const std::vector<FlowReport>& reports) {
  std::ostringstream os;
  os << "lambda,total_index,ssf_value,oracle_value\n";
  for (const auto& r : reports)
    os << detail::csv_number(r.lambda) << ',' << r.total_index << ',' << detail::csv_number(r.ssf_value) << ','
       << r.oracle_value << '\n';
  return os.str();
}

inline std::string curve_csv(const ResonantCurve& c) {
  std::ostringstream os;
  os << "re_v,im_v,re_s,im_s,residual\n";
  for (const auto& p : c.samples)
    os << detail::csv_number(p.v.real()) << ',' << detail::csv_number(p.v.imag()) << ','
       << detail::csv_number(p.s.real()) << ',' << detail::csv_number(p.s.imag()) << ','
       << detail::csv_number(p.residual) << '\n';
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::InvalidArgument, "cannot write " + path);
  out << text;
}

}  // namespace resonance
