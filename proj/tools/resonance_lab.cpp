#include "resonance/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// "a,b" into two doubles
bool parse_pair(const std::string& text, double& x, double& y) {
  auto comma = text.find(',');
  if (comma == std::string::npos) return false;
  try {
    std::size_t used = 0;
    x = std::stod(text.substr(0, comma), &used);
    if (used != comma) return false;
    std::string rest = text.substr(comma + 1);
    y = std::stod(rest, &used);
    return used == rest.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resonance_lab: coupling-resonance analysis of finite matrix pencils"};
  resonance::Scenario sc;
  std::string z0_text, interval_text;
  double lambda = 0.0;
  app.add_option("command", sc.command, "analyze | verify | flow | sweep | tangency | gen")
      ->required()
      ->check(CLI::IsMember({"analyze", "verify", "flow", "sweep", "tangency", "gen"}));
  app.add_option("--instance", sc.instance_path, "instance JSON file");
  auto* z0_opt = app.add_option("--z0", z0_text, "eigenvalue of H0 as RE,IM");
  auto* lambda_opt = app.add_option("--lambda", lambda, "real spectral parameter");
  app.add_option("--interval", interval_text, "coupling interval A,B (default 0,1)");
  app.add_option("--radius", sc.radius, "contour or curve radius, 0 for automatic");
  app.add_option("--nodes", sc.nodes, "quadrature nodes, grid size for sweep and tangency");
  app.add_option("--tol", sc.tol, "residual tolerance");
  app.add_option("--seed", sc.seed, "generator seed");
  app.add_option("--out", sc.out, "report path; stdout when omitted");
  app.add_option("--n", sc.n, "instance size for gen");
  app.add_option("--kind", sc.kind, "hermitian-pair | with-direction for gen");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*z0_opt) {
    double re = 0.0, im = 0.0;
    if (!parse_pair(z0_text, re, im)) {
      std::cerr << "error: --z0 expects RE,IM\n";
      return 2;
    }
    sc.z0 = resonance::cplx(re, im);
  }
  if (*lambda_opt) sc.lambda = lambda;
  if (!interval_text.empty() && !parse_pair(interval_text, sc.a, sc.b)) {
    std::cerr << "error: --interval expects A,B\n";
    return 2;
  }

  auto res = resonance::run_scenario(sc);
  if (sc.out.empty()) std::cout << res.report.dump(2) << "\n";
  if (sc.command != "gen") {
    std::cerr << "status: " << res.report.value("status", "error");
    for (const auto& f : res.failed) std::cerr << " [" << f << "]";
    if (res.exit_code == 2 && res.report.contains("error") && res.report["error"].is_object())
      std::cerr << " " << res.report["error"].value("message", "");
    std::cerr << "\n";
  }
  return res.exit_code;
}
