#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowconn/core.hpp"
#include "flowconn/curves.hpp"
#include "flowconn/geometry.hpp"
#include "flowconn/rng.hpp"

namespace flowconn {

enum class Scheme { stratonovich_heun, ito_euler };

inline Scheme parse_scheme(const std::string& s) {
  if (s == "stratonovich-heun") return Scheme::stratonovich_heun;
  if (s == "ito-euler") return Scheme::ito_euler;
  throw ConfigError("unknown scheme '" + s + "'");
}

inline std::string scheme_name(Scheme s) {
  return s == Scheme::stratonovich_heun ? "stratonovich-heun" : "ito-euler";
}

struct FlowConfig {
  Scheme scheme = Scheme::stratonovich_heun;
  bool retract_every_step = true;
  double h = 1e-4;
  bool record_deviation = false;
};

/// Reproducible source of Brownian increments.  The increment for (path,
/// step) is a pure function of (master_seed, path, step): evaluation order
/// and worker count cannot change it.
struct BrownianDriver {
  uint64_t master_seed = 0;
  double time_step = 1e-4;
  double horizon = 1.0;
  int ambient_dim = 3;

  /// N(0, h I_n) increment for the given path and step.
  Vec increment(uint64_t path, uint64_t step) const {
    double buf[kMaxAmbientDim];
    rng::fill_gaussians(master_seed, path, static_cast<uint32_t>(step), buf,
                        ambient_dim);
    const double s = std::sqrt(time_step);
    Vec w(ambient_dim);
    for (int i = 0; i < ambient_dim; ++i) w[i] = s * buf[i];
    return w;
  }
};

/// Antithetic view over a driver: logical path 2m uses +increments of base
/// path m, logical path 2m+1 the negation.  Kept out of BrownianDriver so
/// the driver's increments stay independent across paths.
struct AntitheticNoise {
  const BrownianDriver& base;
  Vec increment(uint64_t path, uint64_t step) const {
    Vec w = base.increment(path >> 1, step);
    if (path & 1) w = -w;
    return w;
  }
};

namespace detail {

inline int64_t step_count(double t, double h) {
  if (!(h > 0.0)) throw ConfigError("time step must be positive");
  const int64_t steps = static_cast<int64_t>(std::llround(t / h));
  if (std::abs(steps * h - t) > 1e-12 * std::max(1.0, std::abs(t)))
    throw ConfigError("horizon t must be an integer multiple of the step h");
  return steps;
}

// One scheme step for a single node with a given increment.
template <class Model>
inline Vec flow_step(const Model& m, const Vec& x, const Vec& dw,
                     const FlowConfig& cfg, double* max_dev) {
  Vec xn;
  if (cfg.scheme == Scheme::stratonovich_heun) {
    const Mat p0 = m.projection(x);
    const Vec xs = x + p0 * dw;
    const Mat p1 = m.projection(xs);
    xn = x + 0.5 * ((p0 + p1) * dw);
  } else {
    const Mat p0 = m.projection(x);
    xn = x + detail::r_at(m, x) * cfg.h + p0 * dw;
  }
  if (max_dev != nullptr) {
    const double d = (xn - m.retraction(xn)).norm();
    if (d > *max_dev) *max_dev = d;
  }
  if (cfg.retract_every_step) xn = m.retraction(xn);
  return xn;
}

// Advances all nodes through `steps` shared increments of one path.
template <class Noise>
inline void advance_nodes(const ManifoldModel& m, std::vector<Vec>& nodes,
                          int64_t steps, const FlowConfig& cfg,
                          const Noise& noise, uint64_t path, double* max_dev) {
  for (int64_t s = 0; s < steps; ++s) {
    const Vec dw = noise.increment(path, static_cast<uint64_t>(s));
    for (Vec& x : nodes) x = flow_step(m, x, dw, cfg, max_dev);
  }
}

}  // namespace detail

/// Y_t(x) along one path.  stratonovich-heun: predictor x* = x + P(x) dW,
/// corrector x + 1/2 (P(x) + P(x*)) dW; ito-euler adds the drift r(x) h.
template <class Noise>
inline Vec evolve_point(const ManifoldModel& m, const Vec& x, double t,
                        const FlowConfig& cfg, const Noise& noise,
                        uint64_t path) {
  require_on_manifold(m, x);
  const int64_t steps = detail::step_count(t, cfg.h);
  std::vector<Vec> nodes{x};
  detail::advance_nodes(m, nodes, steps, cfg, noise, path, nullptr);
  return nodes.front();
}

inline Vec evolve_point(const ManifoldModel& m, const Vec& x, double t,
                        const FlowConfig& cfg, const BrownianDriver& driver,
                        uint64_t path) {
  if (t > driver.horizon + 1e-12)
    throw ConfigError("t exceeds the driver horizon");
  return evolve_point<BrownianDriver>(m, x, t, cfg, driver, path);
}

/// Image of a whole curve under one path of the flow: every node is moved by
/// the SAME increments, which is what makes Y_t a flow of maps.
template <class Noise>
inline Curve transport_curve(const ManifoldModel& m, const Curve& c, double t,
                             const FlowConfig& cfg, const Noise& noise,
                             uint64_t path) {
  for (const Vec& x : c.nodes) require_on_manifold(m, x);
  const int64_t steps = detail::step_count(t, cfg.h);
  Curve out = c;
  out.flow_deviation.reset();
  double max_dev = 0.0;
  detail::advance_nodes(m, out.nodes, steps, cfg, noise, path,
                        cfg.record_deviation ? &max_dev : nullptr);
  if (cfg.record_deviation) out.flow_deviation = max_dev;
  return out;
}

inline Curve transport_curve(const ManifoldModel& m, const Curve& c, double t,
                             const FlowConfig& cfg, const BrownianDriver& driver,
                             uint64_t path) {
  if (t > driver.horizon + 1e-12)
    throw ConfigError("t exceeds the driver horizon");
  return transport_curve<BrownianDriver>(m, c, t, cfg, driver, path);
}

/// Recorded pre-retraction deviation of the last transport, if any;
/// otherwise the current off-manifold distance of the nodes.
inline double max_deviation(const ManifoldModel& m, const Curve& c) {
  if (c.flow_deviation) return *c.flow_deviation;
  double d = 0.0;
  for (const Vec& x : c.nodes) d = std::max(d, manifold_distance(m, x));
  return d;
}

}  // namespace flowconn
