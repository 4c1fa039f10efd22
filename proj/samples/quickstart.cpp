// Walks the 2x2 branching example: N0 = diag(1,-1), W = offdiag(1,1), z0 = 1.
#include "resonance.hpp"

#include <iostream>

using namespace resonance;

int main() {
  Matrix n0(2, 2), w(2, 2);
  n0 << 1.0, 0.0, 0.0, -1.0;
  w << 0.0, 1.0, 1.0, 0.0;
  const cplx z0 = 1.0;

  auto series = laurent_coefficients(z0, n0, w);
  auto ops = resonance_operators(series);
  std::cout << "pole order d = " << series.pole_order << "\n";
  std::cout << "A = K_{-1} W =\n" << ops.A().real() << "\n";

  auto filt = upsilon_filtration(z0, n0, w);
  auto jd = jordan_structure(ops, filt);
  std::cout << "Jordan blocks of A:";
  for (int b : jd.block_sizes) std::cout << ' ' << b;
  std::cout << "\n";

  auto br = branching_report(z0, 0.0, n0, w);
  std::cout << "branching criteria:";
  for (bool c : br.criteria()) std::cout << ' ' << (c ? 'T' : 'F');
  std::cout << "  (monodromy periods:";
  for (int p : br.periods) std::cout << ' ' << p;
  std::cout << ")\n";

  auto curve = resonant_curve(z0, n0, w);
  std::cout << "resonant curve s(v) = " << curve.taylor_s[2].real() << " v^2 + ...,  tangency order "
            << tangency_order(curve).tangency_order << "\n";

  Matrix h0(2, 2);
  h0 << 0.0, 0.0, 0.0, 2.0;
  auto flow = ssf_report(1.5, h0, -Matrix::Identity(2, 2));
  std::cout << "SSF at 1.5 for diag(0,2) - I: " << flow.ssf_value << " (counting oracle " << flow.oracle_value << ")\n";
  return 0;
}
