#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "flowconn/core.hpp"
#include "flowconn/geometry.hpp"

namespace flowconn {

/// Discretized C^1 curve: N+1 nodes on the manifold at strictly increasing
/// parameters in [0,1].  Immutable after construction.
struct Curve {
  std::vector<Vec> nodes;
  std::vector<double> params;
  bool closed = false;

  /// Maximum off-manifold distance seen before retraction, when the last
  /// transport ran with deviation recording on.
  std::optional<double> flow_deviation;

  int segments() const { return static_cast<int>(nodes.size()) - 1; }
  const Vec& front() const { return nodes.front(); }
  const Vec& back() const { return nodes.back(); }
};

inline void validate_curve(const ManifoldModel& m, const Curve& c) {
  if (c.nodes.size() < 2) throw ConfigError("curve needs at least two nodes");
  if (c.nodes.size() != c.params.size())
    throw ConfigError("curve nodes/params length mismatch");
  if (c.params.front() != 0.0 || c.params.back() != 1.0)
    throw ConfigError("curve parameters must start at 0 and end at 1");
  for (size_t p = 1; p < c.params.size(); ++p)
    if (!(c.params[p] > c.params[p - 1]))
      throw ConfigError("curve parameters must be strictly increasing");
  for (const Vec& x : c.nodes) require_on_manifold(m, x);
  if (c.closed && (c.front() - c.back()).norm() > 1e-12)
    throw ConfigError("closed curve endpoints do not coincide");
}

inline Curve make_curve(const ManifoldModel& m, std::vector<Vec> nodes, bool closed) {
  Curve c;
  c.nodes = std::move(nodes);
  c.closed = closed;
  const int n = c.segments();
  c.params.resize(c.nodes.size());
  for (int p = 0; p <= n; ++p) c.params[p] = static_cast<double>(p) / n;
  validate_curve(m, c);
  return c;
}

inline Curve reversed(const Curve& c) {
  Curve r = c;
  std::reverse(r.nodes.begin(), r.nodes.end());
  for (size_t p = 0; p < c.params.size(); ++p)
    r.params[p] = 1.0 - c.params[c.params.size() - 1 - p];
  r.params.front() = 0.0;
  r.params.back() = 1.0;
  return r;
}

/// Coefficients omega_k(x) of a 1-form, evaluated through the model's smooth
/// extension at quadrature points.
struct OneForm {
  std::function<Vec(const Vec&)> coefficients;
};

namespace detail {

// Quadrature accumulates along a canonical traversal direction (decided by
// lexicographic comparison of the node sequence with its reversal) and flips
// the sign afterwards.  Reversing a curve then negates the integral
// bit-exactly, which the reversal property promises.
inline int canonical_sign(const std::vector<Vec>& nodes) {
  const size_t n = nodes.size() - 1;
  for (size_t p = 0; p <= n; ++p) {
    const Vec& a = nodes[p];
    const Vec& b = nodes[n - p];
    for (int c = 0; c < a.size(); ++c) {
      if (a[c] < b[c]) return +1;
      if (a[c] > b[c]) return -1;
    }
  }
  return +1;
}

// View of a curve in canonical orientation.
struct ChordWalk {
  const std::vector<Vec>* nodes;
  int sign;
  explicit ChordWalk(const Curve& c)
      : nodes(&c.nodes), sign(canonical_sign(c.nodes)) {}
  explicit ChordWalk(const std::vector<Vec>& ns)
      : nodes(&ns), sign(canonical_sign(ns)) {}
  int chords() const { return static_cast<int>(nodes->size()) - 1; }
  const Vec& a(int q) const {
    return (*nodes)[sign > 0 ? q : chords() - q];
  }
  const Vec& b(int q) const {
    return (*nodes)[sign > 0 ? q + 1 : chords() - q - 1];
  }
};

}  // namespace detail

/// Trapezoid quadrature of  int_c x^i dx^j  (0-based indices).
inline double line_integral_xdx(const Curve& c, int i, int j) {
  const int n = static_cast<int>(c.nodes.front().size());
  if (i < 0 || i >= n || j < 0 || j >= n)
    throw ConfigError("line integral index out of range");
  detail::ChordWalk w(c);
  double acc = 0.0;
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    acc += 0.5 * (a[i] + b[i]) * (b[j] - a[j]);
  }
  return w.sign * acc;
}

/// Midpoint quadrature of  int_c sum_k omega_k dx_k.
inline double one_form_integral(const Curve& c, const OneForm& form) {
  detail::ChordWalk w(c);
  double acc = 0.0;
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    const Vec mid = 0.5 * (a + b);
    const Vec omega = form.coefficients(mid);
    double term = 0.0;
    for (int k = 0; k < omega.size(); ++k) term += omega[k] * (b[k] - a[k]);
    acc += term;
  }
  return w.sign * acc;
}

/// All pairs  int_c x^i dx^j  as a matrix (same arithmetic as
/// line_integral_xdx entry by entry).
inline Mat xdx_matrix(const Curve& c) {
  const int n = static_cast<int>(c.nodes.front().size());
  detail::ChordWalk w(c);
  Mat acc = Mat::Zero(n, n);
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        acc(i, j) += 0.5 * (a[i] + b[i]) * (b[j] - a[j]);
  }
  return Mat(w.sign * acc);
}

/// Row (i,j,.) of the Christoffel tensor as a 1-form: omega_k = Gamma^i_{jk}.
inline OneForm christoffel_form(const ManifoldModel& m, int i, int j) {
  return OneForm{[&m, i, j](const Vec& x) {
    const ChristoffelTensor g = detail::christoffel_at(m, x);
    Vec w(m.ambient_dim);
    for (int k = 0; k < m.ambient_dim; ++k) w[k] = g(i, j, k);
    return w;
  }};
}

// ---------------------------------------------------------------------------
// Curve sampling.
//
// Curve-spec grammar (shared with the CLI):
//   quarter-great-circle
//   great-circle
//   arc:from=<angle>,to=<angle>
//   loop:center=x;y;z,radius=<rho>
//   segment:from=x;y;z,to=x;y;z[,via=geodesic]
//   torus-loop:kind=toroidal|poloidal,at=<angle>
//
// "via=geodesic" segments are realized as the retraction of the ambient
// chord; on spheres that traces the exact great-circle arc.
// ---------------------------------------------------------------------------

namespace detail {

inline Vec parse_point(const std::string& key, const std::string& s, int dim) {
  const auto parts = split(s, ';');
  if (static_cast<int>(parts.size()) != dim)
    throw ConfigError("key '" + key + "' expects " + std::to_string(dim) +
                      " coordinates separated by ';'");
  Vec x(dim);
  for (int i = 0; i < dim; ++i) x[i] = parse_real(key, parts[i]);
  return x;
}

// Unit-circle arc in the (e1, e2) coordinate plane, retracted onto m.
inline Curve planar_arc(const ManifoldModel& m, double from, double to, int N,
                        bool closed) {
  std::vector<Vec> nodes;
  nodes.reserve(N + 1);
  for (int p = 0; p <= N; ++p) {
    const double theta = from + (to - from) * p / N;
    Vec x = Vec::Zero(m.ambient_dim);
    x[0] = std::cos(theta);
    x[1] = std::sin(theta);
    nodes.push_back(retract(m, x));
  }
  if (closed) nodes.back() = nodes.front();
  return make_curve(m, std::move(nodes), closed);
}

}  // namespace detail

/// Geodesic circle of radius rho about the retraction of `center`.
inline Curve sample_loop(const ManifoldModel& m, const Vec& center, double rho,
                         int N) {
  if (m.intrinsic_dim < 2)
    throw ConfigError("loop sampling needs intrinsic dimension >= 2");
  const Vec c0 = retract(m, center);
  const auto basis = tangent_basis(m, c0);
  std::vector<Vec> nodes;
  nodes.reserve(N + 1);
  for (int p = 0; p <= N; ++p) {
    const double theta = 2.0 * std::numbers::pi * p / N;
    const Vec x = c0 + rho * (std::cos(theta) * basis[0] + std::sin(theta) * basis[1]);
    nodes.push_back(retract(m, x));
  }
  nodes.back() = nodes.front();
  return make_curve(m, std::move(nodes), true);
}

/// Retracted-chord segment between the retractions of `from` and `to`.
inline Curve sample_segment(const ManifoldModel& m, const Vec& from,
                            const Vec& to, int N) {
  const Vec a = retract(m, from);
  const Vec b = retract(m, to);
  std::vector<Vec> nodes;
  nodes.reserve(N + 1);
  for (int p = 0; p <= N; ++p) {
    const double s = static_cast<double>(p) / N;
    nodes.push_back(retract(m, Vec((1.0 - s) * a + s * b)));
  }
  return make_curve(m, std::move(nodes), false);
}

inline Curve sample_curve(const ManifoldModel& m, const std::string& spec, int N) {
  if (N < 2) throw ConfigError("curve sampling needs N >= 2");
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
  auto finish = [&kv, &head]() {
    if (!kv.empty())
      throw ConfigError("unknown curve parameter '" + kv.begin()->first +
                        "' for '" + head + "'");
  };

  if (head == "quarter-great-circle") {
    finish();
    return detail::planar_arc(m, 0.0, std::numbers::pi / 2.0, N, false);
  }
  if (head == "great-circle") {
    finish();
    return detail::planar_arc(m, 0.0, 2.0 * std::numbers::pi, N, true);
  }
  if (head == "arc") {
    double from = 0.0, to = std::numbers::pi / 2.0;
    if (auto s = take("from")) from = detail::parse_real("from", *s);
    if (auto s = take("to")) to = detail::parse_real("to", *s);
    finish();
    return detail::planar_arc(m, from, to, N, false);
  }
  if (head == "loop") {
    Vec center = Vec::Zero(m.ambient_dim);
    center[m.ambient_dim - 1] = 1.0;
    double rho = 0.1;
    if (auto s = take("center"))
      center = detail::parse_point("center", *s, m.ambient_dim);
    if (auto s = take("radius")) rho = detail::parse_real("radius", *s);
    finish();
    return sample_loop(m, center, rho, N);
  }
  if (head == "segment") {
    auto sf = take("from");
    auto st = take("to");
    if (!sf || !st) throw ConfigError("segment needs from= and to=");
    if (auto via = take("via"))
      if (*via != "geodesic")
        throw ConfigError("unknown segment interpolation '" + *via + "'");
    finish();
    return sample_segment(m, detail::parse_point("from", *sf, m.ambient_dim),
                          detail::parse_point("to", *st, m.ambient_dim), N);
  }
  if (head == "torus-loop") {
    if (m.params.find("R") == m.params.end())
      throw ConfigError("torus-loop requires a torus manifold");
    const double R = m.params.at("R");
    const double r = m.params.at("r");
    std::string kind = "toroidal";
    double at = 0.0;
    if (auto s = take("kind")) kind = *s;
    if (auto s = take("at")) at = detail::parse_real("at", *s);
    finish();
    if (kind != "toroidal" && kind != "poloidal")
      throw ConfigError("torus-loop kind must be toroidal or poloidal");
    std::vector<Vec> nodes;
    nodes.reserve(N + 1);
    for (int p = 0; p <= N; ++p) {
      const double ang = 2.0 * std::numbers::pi * p / N;
      const double phi = (kind == "toroidal") ? ang : at;
      const double theta = (kind == "toroidal") ? at : ang;
      Vec x(3);
      x << (R + r * std::cos(theta)) * std::cos(phi),
          (R + r * std::cos(theta)) * std::sin(phi), r * std::sin(theta);
      nodes.push_back(retract(m, x));
    }
    nodes.back() = nodes.front();
    return make_curve(m, std::move(nodes), true);
  }
  throw ConfigError("unknown curve spec '" + head + "'");
}

}  // namespace flowconn
