#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flowconn/core.hpp"
#include "flowconn/rng.hpp"

namespace flowconn {

enum class DerivativeKind { analytic, finite_difference };

/// An embedded manifold M in R^n described through a smooth projector field:
/// P(x) is the orthogonal projection onto the tangent space for x on M,
/// extended smoothly to a neighborhood.  All built-in models extend P as a
/// genuine projector field (P^2 = P, P = P^T off the manifold as well), so
/// the algebraic identities between S, Gamma and dP hold wherever the field
/// is evaluated.
struct ManifoldModel {
  int ambient_dim = 0;
  int intrinsic_dim = 0;

  /// x -> n x n projector onto the tangent space (smooth extension).
  std::function<Mat(const Vec&)> projection;
  /// x -> tensor d(a,b,l) = dP^{ab}/dx_l.
  std::function<Tensor3(const Vec&)> projection_derivative;
  /// near-manifold x -> canonical on-manifold point.
  std::function<Vec(const Vec&)> retraction;
  /// deterministic on-manifold point stream, used by property suites.
  std::function<Vec(uint64_t seed, uint64_t index)> sample_point;

  double membership_tol = 1e-8;
  double capture_radius = std::numeric_limits<double>::infinity();
  double fd_step = 1e-5;
  DerivativeKind derivative_kind = DerivativeKind::analytic;

  std::string name;
  std::map<std::string, double> params;
};

namespace detail {

// Unchecked field evaluations.  Quadrature rules evaluate the geometry at
// chord midpoints, which sit O(h^2) off the manifold; the smooth extension
// is what gets integrated there, so no membership gate here.

inline Tensor3 s_at(const ManifoldModel& m, const Vec& x) {
  const int n = m.ambient_dim;
  const Mat p = m.projection(x);
  const Tensor3 dp = m.projection_derivative(x);
  Tensor3 s(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        double acc = 0.0;
        for (int mm = 0; mm < n; ++mm) acc += p(i, mm) * dp(j, mm, l);
        s(i, j, l) = acc;
      }
  return s;
}

inline Vec r_at(const ManifoldModel& m, const Vec& x) {
  const int n = m.ambient_dim;
  const Tensor3 s = s_at(m, x);
  Vec r(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int l = 0; l < n; ++l) acc += s(l, i, l);
    r[i] = 0.5 * acc;
  }
  return r;
}

inline ChristoffelTensor christoffel_from_s(const Tensor3& s) {
  const int n = s.dim();
  ChristoffelTensor g(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) g(i, j, k) = s(i, j, k) - s(j, i, k);
  return g;
}

inline ChristoffelTensor christoffel_at(const ManifoldModel& m, const Vec& x) {
  return christoffel_from_s(s_at(m, x));
}

inline Vec q_remark_at(const ManifoldModel& m, const Vec& x) {
  const int n = m.ambient_dim;
  const Tensor3 s = s_at(m, x);
  const Tensor3 dp = m.projection_derivative(x);
  Vec q(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int l = 0; l < n; ++l) acc += (s(l, i, l) - s(i, l, l)) + dp(i, l, l);
    q[i] = 0.25 * acc;
  }
  return q;
}

}  // namespace detail

/// Distance proxy |x - retraction(x)|.
inline double manifold_distance(const ManifoldModel& m, const Vec& x) {
  return (x - m.retraction(x)).norm();
}

inline void require_on_manifold(const ManifoldModel& m, const Vec& x) {
  if (x.size() != m.ambient_dim)
    throw ConfigError("point dimension " + std::to_string(x.size()) +
                      " does not match ambient dimension " +
                      std::to_string(m.ambient_dim));
  const double d = manifold_distance(m, x);
  if (!(d <= m.membership_tol))
    throw PointOffManifoldError("point is " + std::to_string(d) +
                                " away from '" + m.name +
                                "' (membership tolerance " +
                                std::to_string(m.membership_tol) + ")");
}

/// P(x) for x on the manifold; symmetric, idempotent, rank = intrinsic dim.
inline Mat projection_at(const ManifoldModel& m, const Vec& x) {
  require_on_manifold(m, x);
  return m.projection(x);
}

/// S^i_{jl}(x) = sum_m P^{im} dP^{jm}/dx_l.
inline Tensor3 s_tensor(const ManifoldModel& m, const Vec& x) {
  require_on_manifold(m, x);
  return detail::s_at(m, x);
}

/// r^i(x) = 1/2 sum_l S^l_{il}; the Ito drift of Brownian motion on M.
inline Vec drift_r(const ManifoldModel& m, const Vec& x) {
  require_on_manifold(m, x);
  return detail::r_at(m, x);
}

/// Gamma^i_{jk} = S^i_{jk} - S^j_{ik}; antisymmetric in (i,j) exactly.
inline ChristoffelTensor christoffel(const ManifoldModel& m, const Vec& x) {
  require_on_manifold(m, x);
  return detail::christoffel_at(m, x);
}

/// q^i = 1/4 [ sum_l Gamma^l_{il} + sum_l dP^{il}/dx_l ]; equals drift_r.
inline Vec q_via_remark(const ManifoldModel& m, const Vec& x) {
  require_on_manifold(m, x);
  return detail::q_remark_at(m, x);
}

/// Retraction with capture-radius enforcement.
inline Vec retract(const ManifoldModel& m, const Vec& x) {
  const Vec r = m.retraction(x);
  const double d = (x - r).norm();
  if (!(d <= m.capture_radius))
    throw CaptureRadiusError("point is " + std::to_string(d) +
                             " away from '" + m.name + "', capture radius " +
                             std::to_string(m.capture_radius));
  return r;
}

/// Rank of a projector by eigenvalue thresholding at 1/2.
inline int projector_rank(const Mat& p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(p);
  int rank = 0;
  for (int i = 0; i < p.rows(); ++i)
    if (es.eigenvalues()[i] > 0.5) ++rank;
  return rank;
}

/// Deterministic orthonormal tangent basis at x (Gram-Schmidt over the
/// columns of P in index order).
inline std::vector<Vec> tangent_basis(const ManifoldModel& m, const Vec& x) {
  const Mat p = m.projection(x);
  std::vector<Vec> basis;
  for (int c = 0; c < m.ambient_dim && static_cast<int>(basis.size()) < m.intrinsic_dim; ++c) {
    Vec v = p.col(c);
    for (const Vec& b : basis) v -= b.dot(v) * b;
    const double nv = v.norm();
    if (nv > 1e-6) basis.push_back(v / nv);
  }
  if (static_cast<int>(basis.size()) != m.intrinsic_dim)
    throw Error("tangent basis extraction failed at the given point");
  return basis;
}

// ---------------------------------------------------------------------------
// Built-in manifolds
// ---------------------------------------------------------------------------

namespace detail {

// Stream salts for the deterministic point samplers; keeps them disjoint
// from the (path, step) coordinates used by the Brownian driver.
inline constexpr uint32_t kSampleStream = 0x80000000u;

inline Vec sphere_sample(int n, uint64_t seed, uint64_t index) {
  Vec g(n);
  for (uint32_t salt = 0;; ++salt) {
    double buf[kMaxAmbientDim];
    rng::fill_gaussians(seed, index, kSampleStream + salt, buf, n);
    for (int i = 0; i < n; ++i) g[i] = buf[i];
    const double nn = g.norm();
    if (nn > 1e-8) return Vec(g / nn);
  }
}

}  // namespace detail

/// Unit sphere S^{n-1} in R^n with the global extension P = I - x x^T / |x|^2.
inline ManifoldModel make_sphere(int n) {
  if (n < 2 || n > kMaxAmbientDim)
    throw ConfigError("sphere ambient dimension must be in [2, " +
                      std::to_string(kMaxAmbientDim) + "]");
  ManifoldModel m;
  m.ambient_dim = n;
  m.intrinsic_dim = n - 1;
  m.name = (n == 2) ? "circle" : "sphere:n=" + std::to_string(n);
  m.params["n"] = n;
  m.projection = [n](const Vec& x) {
    const double s = x.squaredNorm();
    Mat p = Mat::Identity(n, n);
    p.noalias() -= (x * x.transpose()) / s;
    return p;
  };
  m.projection_derivative = [n](const Vec& x) {
    const double s = x.squaredNorm();
    const double s2 = s * s;
    Tensor3 d(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int l = 0; l < n; ++l) {
          double t = 2.0 * x[a] * x[b] * x[l] / s2;
          if (a == l) t -= x[b] / s;
          if (b == l) t -= x[a] / s;
          d(a, b, l) = t;
        }
    return d;
  };
  m.retraction = [n](const Vec& x) {
    const double nx = x.norm();
    if (nx < 1e-12)
      throw CaptureRadiusError("sphere retraction undefined near the origin");
    return Vec(x / nx);
  };
  m.sample_point = [n](uint64_t seed, uint64_t index) {
    return detail::sphere_sample(n, seed, index);
  };
  return m;
}

/// S^1 in R^2.
inline ManifoldModel make_circle() {
  ManifoldModel m = make_sphere(2);
  m.name = "circle";
  return m;
}

/// Flat k-plane {x_{k+1} = ... = x_n = 0} in R^n; constant projector.
inline ManifoldModel make_plane(int n, int k) {
  if (n < 2 || n > kMaxAmbientDim || k < 1 || k >= n)
    throw ConfigError("plane requires 1 <= k < n <= " +
                      std::to_string(kMaxAmbientDim));
  ManifoldModel m;
  m.ambient_dim = n;
  m.intrinsic_dim = k;
  m.name = "plane:n=" + std::to_string(n) + ",k=" + std::to_string(k);
  m.params["n"] = n;
  m.params["k"] = k;
  m.projection = [n, k](const Vec&) {
    Mat p = Mat::Zero(n, n);
    for (int i = 0; i < k; ++i) p(i, i) = 1.0;
    return p;
  };
  m.projection_derivative = [n](const Vec&) { return Tensor3(n); };
  m.retraction = [n, k](const Vec& x) {
    Vec r = x;
    for (int i = k; i < n; ++i) r[i] = 0.0;
    return r;
  };
  m.sample_point = [n, k](uint64_t seed, uint64_t index) {
    Vec x = Vec::Zero(n);
    for (int i = 0; i < k; ++i)
      x[i] = 2.0 * rng::uniform(seed, index, detail::kSampleStream + 7, i) - 1.0;
    return x;
  };
  return m;
}

/// Torus of revolution in R^3: center-circle radius R in the xy-plane, tube
/// radius r.  P = I - nu nu^T with nu the tube normal of the nearest-point
/// foot; the extension is constant along tube normals.
inline ManifoldModel make_torus(double R, double r) {
  if (!(R > r && r > 0.0))
    throw ConfigError("torus requires R > r > 0");
  ManifoldModel m;
  m.ambient_dim = 3;
  m.intrinsic_dim = 2;
  {
    std::ostringstream os;
    os << "torus:R=" << R << ",r=" << r;
    m.name = os.str();
  }
  m.params["R"] = R;
  m.params["r"] = r;

  auto normal = [R](const Vec& x) {
    const double rho = std::hypot(x[0], x[1]);
    if (rho < 1e-9)
      throw CaptureRadiusError("torus normal undefined on the symmetry axis");
    Vec c(3);
    c << R * x[0] / rho, R * x[1] / rho, 0.0;
    Vec d = x - c;
    const double nd = d.norm();
    if (nd < 1e-9)
      throw CaptureRadiusError("torus normal undefined on the center circle");
    return Vec(d / nd);
  };

  m.projection = [normal](const Vec& x) {
    const Vec nu = normal(x);
    Mat p = Mat::Identity(3, 3);
    p.noalias() -= nu * nu.transpose();
    return p;
  };
  m.projection_derivative = [R, normal](const Vec& x) {
    const double rho = std::hypot(x[0], x[1]);
    const Vec nu = normal(x);
    Vec c(3);
    c << R * x[0] / rho, R * x[1] / rho, 0.0;
    const double nd = (x - c).norm();
    // J_e for the planar unit vector e = (x/rho, y/rho, 0)
    Mat je = Mat::Zero(3, 3);
    const double ex = x[0] / rho, ey = x[1] / rho;
    je(0, 0) = (1.0 - ex * ex) / rho;
    je(0, 1) = -ex * ey / rho;
    je(1, 0) = je(0, 1);
    je(1, 1) = (1.0 - ey * ey) / rho;
    Mat jd = Mat::Identity(3, 3) - R * je;
    Mat jnu = (Mat::Identity(3, 3) - nu * nu.transpose()) * jd / nd;
    Tensor3 d(3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int l = 0; l < 3; ++l)
          d(a, b, l) = -(jnu(a, l) * nu[b] + nu[a] * jnu(b, l));
    return d;
  };
  m.retraction = [R, r, normal](const Vec& x) {
    const double rho = std::hypot(x[0], x[1]);
    if (rho < 1e-9)
      throw CaptureRadiusError("torus retraction undefined on the symmetry axis");
    Vec c(3);
    c << R * x[0] / rho, R * x[1] / rho, 0.0;
    return Vec(c + r * normal(x));
  };
  m.sample_point = [R, r](uint64_t seed, uint64_t index) {
    const double phi =
        2.0 * std::numbers::pi * rng::uniform(seed, index, detail::kSampleStream + 1, 0);
    const double theta =
        2.0 * std::numbers::pi * rng::uniform(seed, index, detail::kSampleStream + 1, 1);
    Vec x(3);
    x << (R + r * std::cos(theta)) * std::cos(phi),
        (R + r * std::cos(theta)) * std::sin(phi), r * std::sin(theta);
    return x;
  };
  return m;
}

namespace detail {

// Nearest point on the ellipsoid sum x_i^2/alpha_i^2 = 1: q_i = alpha_i^2 p_i
// / (alpha_i^2 + t) with t the root of g(t) = sum alpha_i^2 p_i^2 /
// (alpha_i^2 + t)^2 - 1.  g is monotone decreasing on (-min alpha^2, inf),
// so Newton with a bisection safeguard converges for any p != 0.
inline Vec ellipsoid_nearest(const Vec& alpha2, const Vec& p) {
  const int n = static_cast<int>(p.size());
  if (p.norm() < 1e-12)
    throw CaptureRadiusError("ellipsoid retraction undefined near the center");
  auto g = [&](double t) {
    double acc = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d = alpha2[i] + t;
      acc += alpha2[i] * p[i] * p[i] / (d * d);
    }
    return acc;
  };
  auto gp = [&](double t) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = alpha2[i] + t;
      acc -= 2.0 * alpha2[i] * p[i] * p[i] / (d * d * d);
    }
    return acc;
  };
  const double amin = alpha2.minCoeff();
  double hi = 0.0;
  while (g(hi) > 0.0) hi = 2.0 * hi + amin;
  double lo = 0.0;
  if (g(0.0) < 0.0) {
    double step = 0.5;
    while (g(-amin * (1.0 - step)) < 0.0 && step > 1e-15) step *= 0.5;
    if (step <= 1e-15)
      throw CaptureRadiusError("ellipsoid nearest-point iteration failed");
    lo = -amin * (1.0 - step);
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gt = g(t);
    if (std::abs(gt) < 1e-14) break;
    if (gt > 0.0) lo = t; else hi = t;
    const double dg = gp(t);
    double tn = t - gt / dg;
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (std::abs(tn - t) < 1e-16 * (1.0 + std::abs(t))) { t = tn; break; }
    t = tn;
  }
  Vec q(n);
  for (int i = 0; i < n; ++i) q[i] = alpha2[i] * p[i] / (alpha2[i] + t);
  return q;
}

}  // namespace detail

/// Ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 in R^3.  P = I - nu nu^T with
/// nu the normalized gradient direction (a_i^{-2} x_i); retraction is the
/// Newton nearest-point projection (tolerance 1e-12).
inline ManifoldModel make_ellipsoid(double a, double b, double c) {
  if (!(a > 0 && b > 0 && c > 0))
    throw ConfigError("ellipsoid requires positive semi-axes");
  ManifoldModel m;
  m.ambient_dim = 3;
  m.intrinsic_dim = 2;
  {
    std::ostringstream os;
    os << "ellipsoid:a=" << a << ",b=" << b << ",c=" << c;
    m.name = os.str();
  }
  m.params["a"] = a;
  m.params["b"] = b;
  m.params["c"] = c;
  Vec alpha2(3);
  alpha2 << a * a, b * b, c * c;
  Vec dinv(3);
  dinv << 1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c);

  m.projection = [dinv](const Vec& x) {
    Vec w = dinv.cwiseProduct(x);
    const double nw = w.norm();
    if (nw < 1e-12)
      throw CaptureRadiusError("ellipsoid projector undefined near the center");
    w /= nw;
    Mat p = Mat::Identity(3, 3);
    p.noalias() -= w * w.transpose();
    return p;
  };
  m.projection_derivative = [dinv](const Vec& x) {
    Vec w = dinv.cwiseProduct(x);
    const double nw = w.norm();
    const Vec nu = w / nw;
    Mat jnu = (Mat::Identity(3, 3) - nu * nu.transpose()) * dinv.asDiagonal();
    jnu /= nw;
    Tensor3 d(3);
    for (int aa = 0; aa < 3; ++aa)
      for (int bb = 0; bb < 3; ++bb)
        for (int l = 0; l < 3; ++l)
          d(aa, bb, l) = -(jnu(aa, l) * nu[bb] + nu[aa] * jnu(bb, l));
    return d;
  };
  m.retraction = [alpha2](const Vec& x) {
    return detail::ellipsoid_nearest(alpha2, x);
  };
  m.sample_point = [a, b, c](uint64_t seed, uint64_t index) {
    Vec s = detail::sphere_sample(3, seed, index);
    Vec x(3);
    x << a * s[0], b * s[1], c * s[2];
    return x;
  };
  return m;
}

/// Negative-control fixture: a sphere whose projector is perturbed so the
/// identity suite must fail.
inline ManifoldModel make_corrupt_sphere(int n) {
  ManifoldModel m = make_sphere(n);
  m.name = "corrupt-sphere:n=" + std::to_string(n);
  auto base = m.projection;
  m.projection = [base](const Vec& x) {
    Mat p = base(x);
    p(0, 0) += 1e-3;
    return p;
  };
  return m;
}

/// Replaces the derivative by central finite differences of the projection.
inline ManifoldModel with_fd_derivative(ManifoldModel m, std::optional<double> step = {}) {
  const double h = step.value_or(m.fd_step);
  const int n = m.ambient_dim;
  auto proj = m.projection;
  m.fd_step = h;
  m.derivative_kind = DerivativeKind::finite_difference;
  m.projection_derivative = [proj, h, n](const Vec& x) {
    Tensor3 d(n);
    Vec xp = x, xm = x;
    for (int l = 0; l < n; ++l) {
      xp[l] = x[l] + h;
      xm[l] = x[l] - h;
      const Mat pp = proj(xp);
      const Mat pm = proj(xm);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) d(a, b, l) = (pp(a, b) - pm(a, b)) / (2.0 * h);
      xp[l] = x[l];
      xm[l] = x[l];
    }
    return d;
  };
  return m;
}

/// Alternative smooth extension: P pulled back through the retraction
/// (constant along retraction fibers), derivatives by finite differences.
/// Used to check that tangentially contracted quantities do not depend on
/// the choice of extension.
inline ManifoldModel with_retraction_extension(ManifoldModel m) {
  auto proj = m.projection;
  auto retr = m.retraction;
  m.projection = [proj, retr](const Vec& x) { return proj(retr(x)); };
  m.name += "+retraction-extension";
  return with_fd_derivative(std::move(m));
}

// ---------------------------------------------------------------------------
// Manifold-spec grammar:  sphere:n=3 | circle | torus:R=2,r=1
//                         | ellipsoid:a=1,b=2,c=3 | plane:n=3,k=2
// Optional trailing keys on any manifold: deriv=fd, fd_step=<h>.
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_real(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("malformed value '" + s + "' for key '" + key + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("malformed value '" + s + "' for key '" + key + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::map<std::string, std::string> parse_kv(const std::string& s) {
  std::map<std::string, std::string> kv;
  if (s.empty()) return kv;
  for (const std::string& item : split(s, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

inline ManifoldModel parse_manifold(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  auto kv = detail::parse_kv(colon == std::string::npos ? "" : spec.substr(colon + 1));

  auto take = [&kv](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  bool fd = false;
  std::optional<double> fd_step;
  if (auto d = take("deriv")) {
    if (*d == "fd") fd = true;
    else if (*d != "analytic")
      throw ConfigError("unknown derivative kind '" + *d + "' (use analytic|fd)");
  }
  if (auto s = take("fd_step")) fd_step = detail::parse_real("fd_step", *s);

  ManifoldModel m;
  if (head == "sphere") {
    int n = 3;
    if (auto s = take("n")) n = detail::parse_int("n", *s);
    m = make_sphere(n);
  } else if (head == "circle") {
    m = make_circle();
  } else if (head == "torus") {
    double R = 2.0, r = 1.0;
    if (auto s = take("R")) R = detail::parse_real("R", *s);
    if (auto s = take("r")) r = detail::parse_real("r", *s);
    m = make_torus(R, r);
  } else if (head == "ellipsoid") {
    double a = 1.0, b = 2.0, c = 3.0;
    if (auto s = take("a")) a = detail::parse_real("a", *s);
    if (auto s = take("b")) b = detail::parse_real("b", *s);
    if (auto s = take("c")) c = detail::parse_real("c", *s);
    m = make_ellipsoid(a, b, c);
  } else if (head == "plane") {
    int n = 3, k = 2;
    if (auto s = take("n")) n = detail::parse_int("n", *s);
    if (auto s = take("k")) k = detail::parse_int("k", *s);
    m = make_plane(n, k);
  } else if (head == "corrupt-sphere") {
    int n = 3;
    if (auto s = take("n")) n = detail::parse_int("n", *s);
    m = make_corrupt_sphere(n);
  } else {
    throw ConfigError("unknown manifold '" + head + "'");
  }
  if (!kv.empty())
    throw ConfigError("unknown manifold parameter '" + kv.begin()->first +
                      "' for '" + head + "'");
  if (fd || fd_step) m = with_fd_derivative(std::move(m), fd_step);
  return m;
}

// ---------------------------------------------------------------------------
// Identity suite
// ---------------------------------------------------------------------------

struct IdentityCheck {
  std::string name;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool all_pass = true;
  double max_violation = 0.0;

  const IdentityCheck& operator[](const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw Error("no identity check named " + name);
  }
};

/// Evaluates the projector/connection identities at deterministic random
/// points: P = P^T, P^2 = P, tr P = k, rank P = k, S + S* = dP,
/// Gamma antisymmetric, q_via_remark = drift_r.
inline IdentityReport run_identity_suite(const ManifoldModel& m, int points,
                                         uint64_t seed) {
  const bool fd = m.derivative_kind == DerivativeKind::finite_difference;
  const int n = m.ambient_dim;

  IdentityCheck sym{"projector symmetry", 0.0, 1e-12, true};
  IdentityCheck idem{"projector idempotence", 0.0, fd ? 1e-6 : 1e-10, true};
  IdentityCheck trace{"projector trace", 0.0, fd ? 1e-6 : 1e-10, true};
  IdentityCheck rank{"projector rank", 0.0, 0.0, true};
  IdentityCheck sdp{"S + S* = dP", 0.0, fd ? 1e-5 : 1e-9, true};
  IdentityCheck anti{"Gamma antisymmetry", 0.0, 0.0, true};
  IdentityCheck qr{"q_via_remark = drift_r", 0.0, fd ? 1e-5 : 1e-9, true};

  for (int pt = 0; pt < points; ++pt) {
    const Vec x = m.sample_point(seed, static_cast<uint64_t>(pt));
    const Mat p = m.projection(x);
    const Tensor3 dp = m.projection_derivative(x);
    const Tensor3 s = detail::s_at(m, x);
    const ChristoffelTensor g = detail::christoffel_from_s(s);

    sym.max_violation = std::max(sym.max_violation,
                                 (p - Mat(p.transpose())).cwiseAbs().maxCoeff());
    idem.max_violation =
        std::max(idem.max_violation, (Mat(p * p) - p).cwiseAbs().maxCoeff());
    trace.max_violation =
        std::max(trace.max_violation, std::abs(p.trace() - m.intrinsic_dim));
    rank.max_violation = std::max(
        rank.max_violation,
        static_cast<double>(std::abs(projector_rank(p) - m.intrinsic_dim)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          sdp.max_violation = std::max(
              sdp.max_violation, std::abs(s(i, j, l) + s(j, i, l) - dp(i, j, l)));
          anti.max_violation =
              std::max(anti.max_violation, std::abs(g(i, j, l) + g(j, i, l)));
        }
    const Vec r = detail::r_at(m, x);
    const Vec q = detail::q_remark_at(m, x);
    qr.max_violation = std::max(qr.max_violation, (q - r).cwiseAbs().maxCoeff());
  }

  IdentityReport report;
  for (IdentityCheck* c : {&sym, &idem, &trace, &rank, &sdp, &anti, &qr}) {
    c->pass = c->max_violation <= c->tolerance;
    report.all_pass = report.all_pass && c->pass;
    report.max_violation = std::max(report.max_violation, c->max_violation);
    report.checks.push_back(*c);
  }
  return report;
}

}  // namespace flowconn
