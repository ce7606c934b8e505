#include <flowconn/geometry.hpp>
#include <flowconn/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace flowconn;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Closed form on the unit sphere: S^i_{jl} = -x_j P^{il}.
double sphere_s_closed_form(const Mat& p, const Vec& x, int i, int j, int l) {
  return -x[j] * p(i, l);
}

}  // namespace

TEST(Projection, SphereAxisPoint) {
  const ManifoldModel m = make_sphere(3);
  const Mat p = projection_at(m, vec3(1, 0, 0));
  Mat expected = Mat::Zero(3, 3);
  expected(1, 1) = 1.0;
  expected(2, 2) = 1.0;
  EXPECT_LT((p - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(projector_rank(p), 2);
}

TEST(Projection, CircleTopPoint) {
  const ManifoldModel m = make_circle();
  const Mat p = projection_at(m, vec2(0, 1));
  EXPECT_NEAR(p(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(p(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-14);
}

TEST(Projection, PlaneConstantProjector) {
  const ManifoldModel m = make_plane(3, 2);
  const Mat p = projection_at(m, vec3(0.3, -1.2, 0));
  Mat expected = Mat::Zero(3, 3);
  expected(0, 0) = 1.0;
  expected(1, 1) = 1.0;
  EXPECT_EQ((p - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Projection, RejectsOffManifoldPoint) {
  const ManifoldModel m = make_sphere(3);
  EXPECT_THROW(projection_at(m, vec3(1.5, 0, 0)), PointOffManifoldError);
  EXPECT_THROW(s_tensor(m, vec3(1.5, 0, 0)), PointOffManifoldError);
  EXPECT_THROW(drift_r(m, vec3(0.5, 0, 0)), PointOffManifoldError);
}

TEST(STensor, SphereClosedForm) {
  const ManifoldModel m = make_sphere(3);
  for (int pt = 0; pt < 50; ++pt) {
    const Vec x = m.sample_point(3, pt);
    const Mat p = m.projection(x);
    const Tensor3 s = s_tensor(m, x);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          EXPECT_NEAR(s(i, j, l), sphere_s_closed_form(p, x, i, j, l), 1e-12);
  }
}

TEST(STensor, SphereAxisEntries) {
  const ManifoldModel m = make_sphere(3);
  const Vec x = vec3(1, 0, 0);
  const Tensor3 s = s_tensor(m, x);
  // S^2_{12} = -1 at (1,0,0); upper index 2, lower (1,2); zero-based (1,0,1).
  EXPECT_NEAR(s(1, 0, 1), -1.0, 1e-14);
  // all entries with first lower index j != 1 vanish (S^i_{jl} = -x_j P^{il})
  for (int i = 0; i < 3; ++i)
    for (int j = 1; j < 3; ++j)
      for (int l = 0; l < 3; ++l) EXPECT_NEAR(s(i, j, l), 0.0, 1e-14);
}

TEST(STensor, FlatPlaneVanishes) {
  const ManifoldModel m = make_plane(3, 2);
  const Tensor3 s = s_tensor(m, vec3(0.4, 0.7, 0));
  for (double v : s.data()) EXPECT_EQ(v, 0.0);
}

TEST(STensor, MatchesCentralDifferenceOracle) {
  // independent FD oracle for dP, contracted to S
  for (const ManifoldModel& m :
       {make_sphere(3), make_torus(2.0, 1.0), make_ellipsoid(1.0, 2.0, 3.0)}) {
    const ManifoldModel fd = with_fd_derivative(m, 1e-5);
    for (int pt = 0; pt < 20; ++pt) {
      const Vec x = m.sample_point(11, pt);
      const Tensor3 sa = detail::s_at(m, x);
      const Tensor3 sf = detail::s_at(fd, x);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int l = 0; l < 3; ++l)
            EXPECT_NEAR(sa(i, j, l), sf(i, j, l), 1e-6)
                << m.name << " at point " << pt;
    }
  }
}

TEST(DriftR, SphereIsMinusHalfKx) {
  const ManifoldModel m = make_sphere(3);
  EXPECT_LT((drift_r(m, vec3(0, 0, 1)) - vec3(0, 0, -1)).norm(), 1e-13);
  for (int pt = 0; pt < 20; ++pt) {
    const Vec x = m.sample_point(5, pt);
    EXPECT_LT((drift_r(m, x) + x).norm(), 1e-12);
  }
}

TEST(DriftR, CircleAndPlane) {
  EXPECT_LT((drift_r(make_circle(), vec2(1, 0)) - vec2(-0.5, 0)).norm(), 1e-13);
  EXPECT_EQ(drift_r(make_plane(3, 2), vec3(0.2, 0.4, 0)).norm(), 0.0);
}

TEST(DriftR, HigherDimensionalSphere) {
  const ManifoldModel m = make_sphere(5);
  const Vec x = m.sample_point(9, 3);
  // r = -((n-1)/2) x on S^{n-1}
  EXPECT_LT((drift_r(m, x) + 2.0 * x).norm(), 1e-12);
}

TEST(Christoffel, SphereAxisPoint) {
  const ManifoldModel m = make_sphere(3);
  const ChristoffelTensor g = christoffel(m, vec3(1, 0, 0));
  EXPECT_NEAR(g(0, 1, 1), 1.0, 1e-14);   // Gamma^1_{22}
  EXPECT_NEAR(g(0, 2, 2), 1.0, 1e-14);   // Gamma^1_{33}
  EXPECT_NEAR(g(1, 0, 1), -1.0, 1e-14);  // Gamma^2_{12}
  EXPECT_NEAR(g(2, 0, 2), -1.0, 1e-14);  // Gamma^3_{13}
  double off = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        const bool named = (i == 0 && j == 1 && k == 1) ||
                           (i == 0 && j == 2 && k == 2) ||
                           (i == 1 && j == 0 && k == 1) ||
                           (i == 2 && j == 0 && k == 2);
        if (!named) off = std::max(off, std::abs(g(i, j, k)));
      }
  EXPECT_LT(off, 1e-14);
}

TEST(Christoffel, SphereClosedFormAtRandomPoints) {
  // Gamma^i_{jl} = x_i P^{jl} - x_j P^{il} on the unit sphere
  const ManifoldModel m = make_sphere(3);
  for (int pt = 0; pt < 30; ++pt) {
    const Vec x = m.sample_point(13, pt);
    const Mat p = m.projection(x);
    const ChristoffelTensor g = christoffel(m, x);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          EXPECT_NEAR(g(i, j, l), x[i] * p(j, l) - x[j] * p(i, l), 1e-12);
  }
}

TEST(Christoffel, UpperPairAntisymmetryExact) {
  for (const ManifoldModel& m :
       {make_sphere(4), make_torus(2.0, 1.0), make_ellipsoid(1.0, 2.0, 3.0)}) {
    for (int pt = 0; pt < 10; ++pt) {
      const Vec x = m.sample_point(17, pt);
      const ChristoffelTensor g = christoffel(m, x);
      const int n = g.dim();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            EXPECT_EQ(g(i, j, k), -g(j, i, k));
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) EXPECT_EQ(g(i, i, k), 0.0);
    }
  }
}

TEST(QViaRemark, EqualsDriftOnBuiltins) {
  for (const ManifoldModel& m :
       {make_sphere(3), make_torus(2.0, 1.0), make_ellipsoid(1.0, 2.0, 3.0)}) {
    for (int pt = 0; pt < 25; ++pt) {
      const Vec x = m.sample_point(23, pt);
      EXPECT_LT((q_via_remark(m, x) - drift_r(m, x)).cwiseAbs().maxCoeff(), 1e-9)
          << m.name;
    }
  }
  EXPECT_EQ(q_via_remark(make_plane(3, 2), vec3(0.1, 0.2, 0)).norm(), 0.0);
  // the named example: sphere at (0,0,1)
  const ManifoldModel s = make_sphere(3);
  EXPECT_LT((q_via_remark(s, vec3(0, 0, 1)) - vec3(0, 0, -1)).norm(), 1e-12);
}

TEST(Retract, SphereRadialAndIdempotent) {
  const ManifoldModel m = make_sphere(3);
  EXPECT_LT((retract(m, vec3(2, 0, 0)) - vec3(1, 0, 0)).norm(), 1e-15);
  const Vec y = retract(m, vec3(0.3, -0.4, 1.1));
  EXPECT_LT((retract(m, y) - y).norm(), 1e-15);
  EXPECT_NEAR(y.norm(), 1.0, 1e-15);
}

TEST(Retract, CaptureRadiusFailures) {
  const ManifoldModel m = make_sphere(3);
  EXPECT_THROW(retract(m, vec3(0, 0, 0)), CaptureRadiusError);
  ManifoldModel tight = make_sphere(3);
  tight.capture_radius = 0.1;
  EXPECT_THROW(retract(tight, vec3(2, 0, 0)), CaptureRadiusError);
  EXPECT_NO_THROW(retract(tight, vec3(1.05, 0, 0)));
  const ManifoldModel t = make_torus(2.0, 1.0);
  EXPECT_THROW(retract(t, vec3(0, 0, 0.5)), CaptureRadiusError);
}

TEST(Retract, TorusTubeNormalDisplacement) {
  const ManifoldModel m = make_torus(2.0, 1.0);
  // on-torus point and its tube normal
  const double phi = 0.7, theta = 1.1, R = 2.0, r = 1.0;
  const Vec q = vec3((R + r * std::cos(theta)) * std::cos(phi),
                     (R + r * std::cos(theta)) * std::sin(phi),
                     r * std::sin(theta));
  const Vec nu = vec3(std::cos(theta) * std::cos(phi),
                      std::cos(theta) * std::sin(phi), std::sin(theta));
  const Vec displaced = q + 1e-3 * nu;
  const Vec back = retract(m, displaced);
  EXPECT_LT((back - q).norm(), 1e-12);

  // local minimization oracle over the torus parameters
  double best_phi = phi + 0.08, best_theta = theta - 0.06;
  auto dist2 = [&](double ph, double th) {
    const Vec p = vec3((R + r * std::cos(th)) * std::cos(ph),
                       (R + r * std::cos(th)) * std::sin(ph), r * std::sin(th));
    return (p - displaced).squaredNorm();
  };
  double step = 0.1;
  for (int it = 0; it < 200; ++it) {
    bool improved = false;
    for (const auto& [dp, dt] : {std::pair{step, 0.0}, {-step, 0.0},
                                 {0.0, step}, {0.0, -step}}) {
      if (dist2(best_phi + dp, best_theta + dt) < dist2(best_phi, best_theta)) {
        best_phi += dp;
        best_theta += dt;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
    if (step < 1e-12) break;
  }
  const Vec oracle = vec3((R + r * std::cos(best_theta)) * std::cos(best_phi),
                          (R + r * std::cos(best_theta)) * std::sin(best_phi),
                          r * std::sin(best_theta));
  EXPECT_LT((back - oracle).norm(), 1e-7);
}

TEST(Retract, EllipsoidNearestPoint) {
  const ManifoldModel m = make_ellipsoid(1.0, 2.0, 3.0);
  for (int pt = 0; pt < 20; ++pt) {
    const Vec x = m.sample_point(29, pt);
    // on-surface points are fixed
    EXPECT_LT((retract(m, x) - x).norm(), 1e-10);
    // displaced points land back on the surface
    const Vec y = retract(m, Vec(x * 1.05));
    const double g =
        y[0] * y[0] / 1.0 + y[1] * y[1] / 4.0 + y[2] * y[2] / 9.0 - 1.0;
    EXPECT_LT(std::abs(g), 1e-12);
    // nearest-point optimality: no tangent perturbation of the foot is closer
    const Vec p = Vec(x * 1.05);
    const auto basis = tangent_basis(m, y);
    const double d0 = (p - y).norm();
    for (double eps : {1e-3, -1e-3})
      for (const Vec& b : basis) {
        const Vec y2 = retract(m, Vec(y + eps * b));
        EXPECT_GT((p - y2).norm() + 1e-9, d0);
      }
  }
}

TEST(IdentitySuite, AnalyticBuiltinsPass) {
  for (const ManifoldModel& m :
       {make_sphere(3), make_torus(2.0, 1.0), make_ellipsoid(1.0, 2.0, 3.0)}) {
    const IdentityReport rep = run_identity_suite(m, 300, 2024);
    EXPECT_TRUE(rep.all_pass) << m.name;
    EXPECT_LT(rep.max_violation, 1e-9) << m.name;
  }
}

TEST(IdentitySuite, FiniteDifferencePass) {
  for (const ManifoldModel& m :
       {with_fd_derivative(make_sphere(3)), with_fd_derivative(make_torus(2.0, 1.0)),
        with_fd_derivative(make_ellipsoid(1.0, 2.0, 3.0))}) {
    const IdentityReport rep = run_identity_suite(m, 150, 99);
    EXPECT_TRUE(rep.all_pass) << m.name;
    EXPECT_LT(rep.max_violation, 1e-5) << m.name;
  }
}

TEST(IdentitySuite, CorruptedProjectorFails) {
  const IdentityReport rep = run_identity_suite(make_corrupt_sphere(3), 50, 1);
  EXPECT_FALSE(rep.all_pass);
  EXPECT_FALSE(rep["projector idempotence"].pass);
}

TEST(IdentitySuite, ProjectorInvariantTolerances) {
  // P symmetric within 1e-12, idempotent within 1e-10, trace within 1e-10
  const IdentityReport rep = run_identity_suite(make_sphere(4), 200, 3);
  EXPECT_LT(rep["projector symmetry"].max_violation, 1e-12);
  EXPECT_LT(rep["projector idempotence"].max_violation, 1e-10);
  EXPECT_LT(rep["projector trace"].max_violation, 1e-10);
  EXPECT_EQ(rep["projector rank"].max_violation, 0.0);
}

TEST(Derivatives, AnalyticMatchesCentralDifferences) {
  for (const ManifoldModel& m :
       {make_sphere(3), make_circle(), make_torus(2.0, 1.0),
        make_ellipsoid(1.0, 2.0, 3.0)}) {
    const ManifoldModel fd = with_fd_derivative(m, 1e-5);
    const int n = m.ambient_dim;
    for (int pt = 0; pt < 15; ++pt) {
      const Vec x = m.sample_point(31, pt);
      const Tensor3 da = m.projection_derivative(x);
      const Tensor3 df = fd.projection_derivative(x);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int l = 0; l < n; ++l)
            EXPECT_NEAR(da(a, b, l), df(a, b, l), 1e-6) << m.name;
    }
  }
}

TEST(Extensions, TangentialContractionAgreesAcrossExtensions) {
  // Two different smooth extensions of the sphere's projector must give the
  // same Gamma when contracted with tangent vectors.
  const ManifoldModel global = make_sphere(3);
  const ManifoldModel pulled = with_retraction_extension(make_sphere(3));
  for (int pt = 0; pt < 20; ++pt) {
    const Vec x = global.sample_point(37, pt);
    Vec g(3);
    rng::fill_gaussians(41, pt, 0x90000000u, g.data(), 3);
    const Vec v = global.projection(x) * g;
    const ChristoffelTensor ga = detail::christoffel_at(global, x);
    const ChristoffelTensor gb = detail::christoffel_at(pulled, x);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double ca = 0.0, cb = 0.0;
        for (int k = 0; k < 3; ++k) {
          ca += ga(i, j, k) * v[k];
          cb += gb(i, j, k) * v[k];
        }
        EXPECT_NEAR(ca, cb, 1e-5);
      }
  }
}

TEST(ManifoldSpec, GrammarRoundTrip) {
  EXPECT_EQ(parse_manifold("sphere:n=4").ambient_dim, 4);
  EXPECT_EQ(parse_manifold("circle").ambient_dim, 2);
  EXPECT_EQ(parse_manifold("torus:R=2,r=1").params.at("R"), 2.0);
  EXPECT_EQ(parse_manifold("ellipsoid:a=1,b=2,c=3").params.at("c"), 3.0);
  EXPECT_EQ(parse_manifold("plane:n=3,k=2").intrinsic_dim, 2);
  EXPECT_EQ(parse_manifold("sphere:n=3,deriv=fd").derivative_kind,
            DerivativeKind::finite_difference);
  EXPECT_THROW(parse_manifold("moebius"), ConfigError);
  EXPECT_THROW(parse_manifold("sphere:m=3"), ConfigError);
  EXPECT_THROW(parse_manifold("sphere:n=1"), ConfigError);
  EXPECT_THROW(parse_manifold("torus:R=1,r=2"), ConfigError);
}
