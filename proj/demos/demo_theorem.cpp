// Verifies the connection-form identity on a quarter great circle of S^2,
// first with the deterministic oracle, then with a small Monte Carlo run.

#include <flowconn/flowconn.hpp>

#include <cstdio>

using namespace flowconn;

int main() {
  const ManifoldModel sphere = make_sphere(3);
  const Curve curve = sample_curve(sphere, "quarter-great-circle", 200);

  TheoremOptions oracle;
  oracle.mode = VerifyMode::oracle;
  const TheoremReport det = verify_theorem(sphere, curve, oracle, "quarter-great-circle");
  std::printf("oracle mode:\n");
  for (const auto& e : det.entries)
    if (e.i < e.j)
      std::printf("  (%d,%d)  lhs=%+.6f  rhs=%+.6f  residual=%.2e  %s\n", e.i,
                  e.j, e.lhs, e.rhs, e.residual, e.pass ? "pass" : "FAIL");

  TheoremOptions mc;
  mc.mode = VerifyMode::monte_carlo;
  mc.paths = 20000;
  mc.dt = 1e-3;
  mc.flow.h = 1e-4;
  mc.seed = 42;
  const TheoremReport est = verify_theorem(sphere, curve, mc, "quarter-great-circle");
  std::printf("monte-carlo mode (%llu paths):\n",
              static_cast<unsigned long long>(est.paths));
  for (const auto& e : est.entries)
    if (e.i < e.j)
      std::printf("  (%d,%d)  lhs=%+.6f  rhs=%+.6f +- %.2e  residual=%+.2e  %s\n",
                  e.i, e.j, e.lhs, e.rhs, e.rhs_se, e.residual,
                  e.pass ? "pass" : "FAIL");
  return est.all_pass() && det.all_pass() ? 0 : 1;
}
