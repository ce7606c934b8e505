// Recovers a Christoffel symbol of S^2 from shrinking segments: the theorem
// right-hand side over a short segment, divided by its length, tends to
// sum_k Gamma^i_{jk} v_k.

#include <flowconn/flowconn.hpp>

#include <cstdio>

using namespace flowconn;

int main() {
  const ManifoldModel sphere = make_sphere(3);
  Vec x(3), v(3);
  x << 1.0, 0.0, 0.0;
  v << 0.0, 1.0, 0.0;

  TheoremOptions opts;  // oracle mode
  std::printf("Gamma^1_{22}(1,0,0) = 1; segment estimates:\n");
  for (double eps : {0.04, 0.02, 0.01}) {
    const SegmentRecovery rec = recover_christoffel_segment(sphere, x, v, eps, opts);
    std::printf("  eps=%.3f  estimate=%.8f  error=%+.2e\n", eps,
                rec.estimate(0, 1), rec.estimate(0, 1) - 1.0);
  }
  return 0;
}
