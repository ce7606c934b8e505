#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowconn/core.hpp"
#include "flowconn/curves.hpp"
#include "flowconn/flow.hpp"
#include "flowconn/geometry.hpp"
#include "flowconn/parallel.hpp"

namespace flowconn {

// ---------------------------------------------------------------------------
// Moment accumulators (fixed chunking + pairwise fold => results do not
// depend on the worker count).
// ---------------------------------------------------------------------------

namespace detail {

struct MatMoments {
  Mat sum, sumsq, asum, asumsq;
  uint64_t count = 0;

  static MatMoments zero(int n) {
    MatMoments m;
    m.sum = Mat::Zero(n, n);
    m.sumsq = Mat::Zero(n, n);
    m.asum = Mat::Zero(n, n);
    m.asumsq = Mat::Zero(n, n);
    return m;
  }
  void add(const Mat& v) {
    sum += v;
    sumsq += v.cwiseProduct(v);
    const Mat d = v - Mat(v.transpose());
    asum += d;
    asumsq += d.cwiseProduct(d);
    ++count;
  }
  static MatMoments combined(const MatMoments& a, const MatMoments& b) {
    MatMoments m = a;
    m.sum += b.sum;
    m.sumsq += b.sumsq;
    m.asum += b.asum;
    m.asumsq += b.asumsq;
    m.count += b.count;
    return m;
  }
  Mat mean() const { return Mat(sum / static_cast<double>(count)); }
  // standard error of the mean, entrywise
  Mat se() const { return se_of(sum, sumsq); }
  Mat antisym_se() const { return se_of(asum, asumsq); }

 private:
  Mat se_of(const Mat& s, const Mat& sq) const {
    const double c = static_cast<double>(count);
    const Mat m = s / c;
    Mat var = (sq / c - m.cwiseProduct(m)) * (c / (c - 1.0));
    var = var.cwiseMax(0.0);
    return Mat((var / c).cwiseSqrt());
  }
};

struct VecMoments {
  Vec sum, sumsq;
  uint64_t count = 0;

  static VecMoments zero(int n) {
    VecMoments m;
    m.sum = Vec::Zero(n);
    m.sumsq = Vec::Zero(n);
    return m;
  }
  void add(const Vec& v) {
    sum += v;
    sumsq += v.cwiseProduct(v);
    ++count;
  }
  static VecMoments combined(const VecMoments& a, const VecMoments& b) {
    VecMoments m = a;
    m.sum += b.sum;
    m.sumsq += b.sumsq;
    m.count += b.count;
    return m;
  }
  Vec mean() const { return Vec(sum / static_cast<double>(count)); }
  Vec se() const {
    const double c = static_cast<double>(count);
    const Vec m = sum / c;
    Vec var = (sumsq / c - m.cwiseProduct(m)) * (c / (c - 1.0));
    var = var.cwiseMax(0.0);
    return Vec((var / c).cwiseSqrt());
  }
  Vec variance_of_mean() const {
    const Vec s = se();
    return Vec(s.cwiseProduct(s));
  }
};

inline Mat xdx_matrix_nodes(const std::vector<Vec>& nodes) {
  const int n = static_cast<int>(nodes.front().size());
  ChordWalk w(nodes);
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

}  // namespace detail

// ---------------------------------------------------------------------------
// Psi estimation
// ---------------------------------------------------------------------------

struct McOptions {
  /// Antithetic increment pairs (+dW / -dW).  The i.i.d. statistical unit is
  /// then the pair average, which is what the standard errors describe.
  bool antithetic = true;
};

/// Monte Carlo estimate of Psi^{ij}(t, gamma) = E int_{Y_t(gamma)} x^i dx^j.
struct PsiEstimate {
  Mat mean;
  Mat std_error;
  /// standard error of the antisymmetrized entries mean(i,j) - mean(j,i);
  /// the two are driven by the same paths, so this is not derivable from
  /// std_error alone.
  Mat antisym_se;
  uint64_t paths = 0;
  double t = 0.0;
};

namespace detail {

inline uint64_t mc_units(uint64_t paths, bool antithetic) {
  if (antithetic) {
    if (paths < 4 || paths % 2 != 0)
      throw ConfigError("antithetic estimation needs an even path count >= 4");
    return paths / 2;
  }
  if (paths < 2) throw ConfigError("need at least 2 paths for a standard error");
  return paths;
}

// Transported copy of the curve nodes for one logical path.
template <class Noise>
inline std::vector<Vec> flowed_nodes(const ManifoldModel& m,
                                     const std::vector<Vec>& start,
                                     int64_t steps, const FlowConfig& cfg,
                                     const Noise& noise, uint64_t path) {
  std::vector<Vec> nodes = start;
  advance_nodes(m, nodes, steps, cfg, noise, path, nullptr);
  return nodes;
}

}  // namespace detail

inline PsiEstimate estimate_psi(const ManifoldModel& m, const Curve& c, double t,
                                uint64_t paths, const FlowConfig& cfg,
                                const BrownianDriver& driver,
                                const McOptions& opts = {}) {
  const int n = m.ambient_dim;
  PsiEstimate out;
  out.t = t;
  out.paths = paths;
  if (t == 0.0) {
    out.mean = xdx_matrix(c);
    out.std_error = Mat::Zero(n, n);
    out.antisym_se = Mat::Zero(n, n);
    return out;
  }
  for (const Vec& x : c.nodes) require_on_manifold(m, x);
  if (t > driver.horizon + 1e-12)
    throw ConfigError("t exceeds the driver horizon");
  const int64_t steps = detail::step_count(t, cfg.h);
  const uint64_t units = detail::mc_units(paths, opts.antithetic);
  const AntitheticNoise anti{driver};

  auto moments = par::chunked_reduce(
      units, par::kDefaultChunk, detail::MatMoments::zero(n),
      [&](detail::MatMoments& acc, uint64_t u) {
        if (opts.antithetic) {
          const Mat ip = detail::xdx_matrix_nodes(
              detail::flowed_nodes(m, c.nodes, steps, cfg, anti, 2 * u));
          const Mat im = detail::xdx_matrix_nodes(
              detail::flowed_nodes(m, c.nodes, steps, cfg, anti, 2 * u + 1));
          acc.add(Mat(0.5 * (ip + im)));
        } else {
          acc.add(detail::xdx_matrix_nodes(
              detail::flowed_nodes(m, c.nodes, steps, cfg, driver, u)));
        }
      },
      detail::MatMoments::combined);

  out.mean = moments.mean();
  out.std_error = moments.se();
  out.antisym_se = moments.antisym_se();
  return out;
}

/// Forward-difference estimate of dPsi/dt(0, gamma), anchored at the
/// deterministic t=0 value.  Optional two-level Richardson extrapolation
/// with common random numbers (the Brownian paths at dt/2 are prefixes of
/// the paths at dt).
struct PsiDerivative {
  Mat value;
  Mat std_error;
  Mat antisym_se;
  uint64_t paths = 0;
  double dt = 0.0;
  bool richardson = false;
};

struct DerivativeOptions {
  bool antithetic = true;
  bool richardson = false;
};

inline PsiDerivative estimate_psi_derivative(const ManifoldModel& m,
                                             const Curve& c, double dt,
                                             uint64_t paths,
                                             const FlowConfig& cfg,
                                             const BrownianDriver& driver,
                                             const DerivativeOptions& opts = {}) {
  const int n = m.ambient_dim;
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (dt < 10.0 * cfg.h - 1e-15)
    throw ConfigError("dt must be at least 10 steps of h");
  for (const Vec& x : c.nodes) require_on_manifold(m, x);
  if (dt > driver.horizon + 1e-12)
    throw ConfigError("dt exceeds the driver horizon");
  const int64_t steps = detail::step_count(dt, cfg.h);
  if (opts.richardson && steps % 2 != 0)
    throw ConfigError("Richardson extrapolation needs an even step count");
  const Mat base = xdx_matrix(c);
  const uint64_t units = detail::mc_units(paths, opts.antithetic);
  const AntitheticNoise anti{driver};

  auto one_path = [&](uint64_t path) -> Mat {
    std::vector<Vec> nodes = c.nodes;
    if (!opts.richardson) {
      if (opts.antithetic)
        detail::advance_nodes(m, nodes, steps, cfg, anti, path, nullptr);
      else
        detail::advance_nodes(m, nodes, steps, cfg, driver, path, nullptr);
      return Mat((detail::xdx_matrix_nodes(nodes) - base) / dt);
    }
    // one simulation, checkpoint at dt/2
    auto advance = [&](int64_t from, int64_t to) {
      for (int64_t s = from; s < to; ++s) {
        const Vec dw = opts.antithetic
                           ? anti.increment(path, static_cast<uint64_t>(s))
                           : driver.increment(path, static_cast<uint64_t>(s));
        for (Vec& x : nodes) x = detail::flow_step(m, x, dw, cfg, nullptr);
      }
    };
    advance(0, steps / 2);
    const Mat half = detail::xdx_matrix_nodes(nodes);
    advance(steps / 2, steps);
    const Mat full = detail::xdx_matrix_nodes(nodes);
    return Mat((4.0 * half - full - 3.0 * base) / dt);
  };

  auto moments = par::chunked_reduce(
      units, par::kDefaultChunk, detail::MatMoments::zero(n),
      [&](detail::MatMoments& acc, uint64_t u) {
        if (opts.antithetic)
          acc.add(Mat(0.5 * (one_path(2 * u) + one_path(2 * u + 1))));
        else
          acc.add(one_path(u));
      },
      detail::MatMoments::combined);

  PsiDerivative out;
  out.value = moments.mean();
  out.std_error = moments.se();
  out.antisym_se = moments.antisym_se();
  out.paths = paths;
  out.dt = dt;
  out.richardson = opts.richardson;
  return out;
}

/// Deterministic quadrature of dPsi^{ij}/dt(0, gamma):
///   int (r^i dx_j - r^j dx_i) + [x^i r^j]_a^b + int S^i_{jk} dx_k,
/// with r and S evaluated at chord midpoints (same nodes as the other
/// quadratures, which is what makes the theorem residual cancel exactly).
inline Mat oracle_psi_derivative(const ManifoldModel& m, const Curve& c) {
  const int n = m.ambient_dim;
  detail::ChordWalk w(c);
  Mat circ = Mat::Zero(n, n);
  Mat sint = Mat::Zero(n, n);
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    const Vec mid = 0.5 * (a + b);
    const Vec r = detail::r_at(m, mid);
    const Tensor3 s = detail::s_at(m, mid);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        circ(i, j) += r[i] * (b[j] - a[j]) - r[j] * (b[i] - a[i]);
        double term = 0.0;
        for (int k = 0; k < n; ++k) term += s(i, j, k) * (b[k] - a[k]);
        sint(i, j) += term;
      }
  }
  const Vec& ga = c.front();
  const Vec& gb = c.back();
  const Vec ra = detail::r_at(m, ga);
  const Vec rb = detail::r_at(m, gb);
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = w.sign * circ(i, j) + (gb[i] * rb[j] - ga[i] * ra[j]) +
                  w.sign * sint(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// q estimation
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of q(x) = d/dt E Y_t(x) at t=0.
struct QEstimate {
  Vec value;
  Vec std_error;
  uint64_t paths = 0;
  double dt = 0.0;
};

inline QEstimate estimate_q(const ManifoldModel& m, const Vec& x, double dt,
                            uint64_t paths, const FlowConfig& cfg,
                            const BrownianDriver& driver,
                            const McOptions& opts = {},
                            uint64_t path_block = 0) {
  require_on_manifold(m, x);
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const int64_t steps = detail::step_count(dt, cfg.h);
  const uint64_t units = detail::mc_units(paths, opts.antithetic);
  const AntitheticNoise anti{driver};
  const uint64_t offset = path_block * paths;

  auto one_path = [&](uint64_t path) -> Vec {
    std::vector<Vec> nodes{x};
    if (opts.antithetic)
      detail::advance_nodes(m, nodes, steps, cfg, anti, path, nullptr);
    else
      detail::advance_nodes(m, nodes, steps, cfg, driver, path, nullptr);
    return Vec((nodes.front() - x) / dt);
  };

  auto moments = par::chunked_reduce(
      units, par::kDefaultChunk, detail::VecMoments::zero(m.ambient_dim),
      [&](detail::VecMoments& acc, uint64_t u) {
        if (opts.antithetic)
          acc.add(Vec(0.5 * (one_path(offset + 2 * u) + one_path(offset + 2 * u + 1))));
        else
          acc.add(one_path(offset + u));
      },
      detail::VecMoments::combined);

  QEstimate out;
  out.value = moments.mean();
  out.std_error = moments.se();
  out.paths = paths;
  out.dt = dt;
  return out;
}

// ---------------------------------------------------------------------------
// Theorem assembly and verification
// ---------------------------------------------------------------------------

enum class VerifyMode { oracle, monte_carlo };
enum class QSource { analytic, monte_carlo };

inline std::string verify_mode_name(VerifyMode m) {
  return m == VerifyMode::oracle ? "oracle" : "monte-carlo";
}

struct TheoremOptions {
  VerifyMode mode = VerifyMode::oracle;
  uint64_t paths = 200000;
  double dt = 1e-3;
  FlowConfig flow{};
  uint64_t seed = 42;
  bool antithetic = true;
  bool richardson = false;
  QSource q_source = QSource::analytic;
  uint64_t q_paths = 0;  // 0 -> same as paths
  double bias_constant = 10.0;
  double oracle_tol = 1e-10;
};

struct TheoremEntry {
  int i = 0, j = 0;  // 1-based in reports
  double lhs = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double dpsi_ij = 0.0, dpsi_ji = 0.0;
  double q_circulation = 0.0;
  double boundary_ij = 0.0, boundary_ji = 0.0;
  double residual = 0.0;
  bool pass = false;
};

struct TheoremReport {
  std::string manifold;
  std::string curve_spec;
  std::string mode;
  uint64_t paths = 0;
  double dt = 0.0;
  double h = 0.0;
  int segments = 0;
  uint64_t seed = 0;
  double bias_allowance = 0.0;
  std::vector<TheoremEntry> entries;

  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
  /// 0-based index lookup.
  const TheoremEntry& entry(int i, int j) const {
    for (const auto& e : entries)
      if (e.i == i + 1 && e.j == j + 1) return e;
    throw Error("no theorem entry for the given index pair");
  }
};

/// Pointwise q with an uncertainty, evaluated at quadrature points.  The
/// point index keys independent Monte Carlo path blocks.
struct QFieldSample {
  Vec value;
  Vec variance;
};
using QField = std::function<QFieldSample(const Vec&, uint64_t point_index)>;

inline QField analytic_q_field(const ManifoldModel& m) {
  return [&m](const Vec& x, uint64_t) {
    return QFieldSample{detail::r_at(m, x), Vec::Zero(m.ambient_dim)};
  };
}

inline QField monte_carlo_q_field(const ManifoldModel& m, double dt,
                                  uint64_t paths, const FlowConfig& cfg,
                                  const BrownianDriver& driver,
                                  bool antithetic) {
  return [&m, dt, paths, cfg, &driver, antithetic](const Vec& x,
                                                   uint64_t point_index) {
    // Quadrature points use q evaluated slightly off the manifold (chord
    // midpoints); anchor the simulation at the retracted point.
    const Vec x0 = m.retraction(x);
    const QEstimate est = estimate_q(m, x0, dt, paths, cfg, driver,
                                     McOptions{antithetic}, point_index + 1);
    Vec var = est.std_error.cwiseProduct(est.std_error);
    return QFieldSample{est.value, var};
  };
}

/// Assembles the right-hand side
///   rhs^{ij} = dpsi^{ij} - dpsi^{ji} - 2 int_gamma (q^i dx^j - q^j dx^i)
///              - [x^i q^j]_a^b + [x^j q^i]_a^b
/// for every ordered index pair.  lhs/residual/pass are left for the caller.
inline std::vector<TheoremEntry> theorem_rhs(const ManifoldModel& m,
                                             const Curve& c, const Mat& dpsi,
                                             const Mat& dpsi_antisym_se,
                                             const QField& q) {
  const int n = m.ambient_dim;
  detail::ChordWalk w(c);

  Mat qint = Mat::Zero(n, n);      // int q^i dx^j
  Mat qint_var = Mat::Zero(n, n);  // variance of the above
  for (int p = 0; p < w.chords(); ++p) {
    const Vec& a = w.a(p);
    const Vec& b = w.b(p);
    const Vec mid = 0.5 * (a + b);
    const QFieldSample s = q(mid, static_cast<uint64_t>(p));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = b[j] - a[j];
        qint(i, j) += s.value[i] * d;
        qint_var(i, j) += s.variance[i] * d * d;
      }
  }
  qint *= w.sign;

  const Vec& ga = c.front();
  const Vec& gb = c.back();
  const QFieldSample qa = q(ga, static_cast<uint64_t>(w.chords()));
  const QFieldSample qb = q(gb, static_cast<uint64_t>(w.chords()) + 1);

  std::vector<TheoremEntry> entries;
  entries.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      TheoremEntry e;
      e.i = i + 1;
      e.j = j + 1;
      e.dpsi_ij = dpsi(i, j);
      e.dpsi_ji = dpsi(j, i);
      e.q_circulation = qint(i, j) - qint(j, i);
      e.boundary_ij = gb[i] * qb.value[j] - ga[i] * qa.value[j];
      e.boundary_ji = gb[j] * qb.value[i] - ga[j] * qa.value[i];
      double rhs = e.dpsi_ij - e.dpsi_ji;
      rhs -= 2.0 * e.q_circulation;
      rhs -= e.boundary_ij;
      rhs += e.boundary_ji;
      e.rhs = rhs;

      double var = dpsi_antisym_se(i, j) * dpsi_antisym_se(i, j);
      var += 4.0 * (qint_var(i, j) + qint_var(j, i));
      var += gb[i] * gb[i] * qb.variance[j] + ga[i] * ga[i] * qa.variance[j];
      var += gb[j] * gb[j] * qb.variance[i] + ga[j] * ga[j] * qa.variance[i];
      e.rhs_se = std::sqrt(var);
      entries.push_back(e);
    }
  return entries;
}

/// Left-hand side int_gamma Gamma^i_{jk} dx_k for every index pair, with the
/// Christoffel tensor evaluated once per chord midpoint.
inline Mat theorem_lhs_matrix(const ManifoldModel& m, const Curve& c) {
  const int n = m.ambient_dim;
  detail::ChordWalk w(c);
  Mat lhs = Mat::Zero(n, n);
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    const Vec mid = 0.5 * (a + b);
    const ChristoffelTensor g = detail::christoffel_at(m, mid);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double term = 0.0;
        for (int k = 0; k < n; ++k) term += g(i, j, k) * (b[k] - a[k]);
        lhs(i, j) += term;
      }
  }
  return Mat(w.sign * lhs);
}

/// Full verification of the connection-form identity on a curve.  In oracle
/// mode both sides use identical quadrature nodes and the residual must
/// vanish to quadrature tolerance; in monte-carlo mode the acceptance band
/// is 3 SE plus a first-order bias allowance C (dt + h + N^-2).
inline TheoremReport verify_theorem(const ManifoldModel& m, const Curve& c,
                                    const TheoremOptions& opts,
                                    const std::string& curve_label = "") {
  TheoremReport report;
  report.manifold = m.name;
  report.curve_spec = curve_label;
  report.mode = verify_mode_name(opts.mode);
  report.segments = c.segments();
  report.seed = opts.seed;

  const Mat lhs = theorem_lhs_matrix(m, c);

  Mat dpsi;
  Mat dpsi_se = Mat::Zero(m.ambient_dim, m.ambient_dim);
  QField q;
  double band_floor = 0.0;

  if (opts.mode == VerifyMode::oracle) {
    dpsi = oracle_psi_derivative(m, c);
    q = analytic_q_field(m);
    band_floor = opts.oracle_tol;
    report.bias_allowance = opts.oracle_tol;
  } else {
    BrownianDriver driver{opts.seed, opts.flow.h, opts.dt, m.ambient_dim};
    const PsiDerivative d = estimate_psi_derivative(
        m, c, opts.dt, opts.paths, opts.flow, driver,
        DerivativeOptions{opts.antithetic, opts.richardson});
    dpsi = d.value;
    dpsi_se = d.antisym_se;
    if (opts.q_source == QSource::analytic) {
      q = analytic_q_field(m);
    } else {
      const uint64_t qp = opts.q_paths == 0 ? opts.paths : opts.q_paths;
      q = monte_carlo_q_field(m, opts.dt, qp, opts.flow, driver,
                              opts.antithetic);
    }
    report.paths = opts.paths;
    report.dt = opts.dt;
    report.h = opts.flow.h;
    const double inv_n2 =
        1.0 / (static_cast<double>(c.segments()) * c.segments());
    report.bias_allowance =
        opts.bias_constant * (opts.dt + opts.flow.h + inv_n2);
    band_floor = report.bias_allowance;

    // The q field above captures `driver` by reference; evaluate rhs before
    // the driver goes out of scope.
    report.entries = theorem_rhs(m, c, dpsi, dpsi_se, q);
    for (auto& e : report.entries) {
      e.lhs = lhs(e.i - 1, e.j - 1);
      e.residual = e.lhs - e.rhs;
      e.pass = std::abs(e.residual) <= 3.0 * e.rhs_se + band_floor;
    }
    return report;
  }

  report.entries = theorem_rhs(m, c, dpsi, dpsi_se, q);
  for (auto& e : report.entries) {
    e.lhs = lhs(e.i - 1, e.j - 1);
    e.residual = e.lhs - e.rhs;
    e.pass = std::abs(e.residual) <= 3.0 * e.rhs_se + band_floor;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Connection recovery (shrinking segments and loops)
// ---------------------------------------------------------------------------

/// Estimate of sum_k Gamma^i_{jk}(x) v_k from a short segment leaving x in
/// the tangent direction v: the theorem right-hand side over the segment,
/// divided by the segment scale epsilon.
struct SegmentRecovery {
  double epsilon = 0.0;
  Mat estimate;
  TheoremReport report;
};

inline SegmentRecovery recover_christoffel_segment(
    const ManifoldModel& m, const Vec& x, const Vec& v, double eps,
    const TheoremOptions& opts, int nodes = 64) {
  require_on_manifold(m, x);
  const double nv = v.norm();
  if (nv < 1e-12) throw ConfigError("direction vector is zero");
  const Mat p = m.projection(x);
  const double nontangent = (v - Vec(p * v)).norm();
  if (nontangent > 1e-10 * std::max(1.0, nv))
    throw ConfigError("direction is not tangent at the base point (|(I-P)v| = " +
                      std::to_string(nontangent) + ")");
  if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");

  const Vec vhat = v / nv;
  const Curve segment = sample_segment(m, x, Vec(x + eps * vhat), nodes);
  SegmentRecovery out;
  out.epsilon = eps;
  out.report = verify_theorem(m, segment, opts, "segment(eps=" + std::to_string(eps) + ")");
  const int n = m.ambient_dim;
  out.estimate = Mat::Zero(n, n);
  for (const auto& e : out.report.entries)
    out.estimate(e.i - 1, e.j - 1) = e.rhs / eps;
  return out;
}

/// Circulation of the theorem right-hand side around a small geodesic loop,
/// divided by the loop's enclosed area in the tangent plane at the center.
/// Converges (up to an exact form) to the exterior derivative of the
/// connection form as rho -> 0; boundary terms vanish exactly on loops.
struct LoopRecovery {
  double rho = 0.0;
  double area = 0.0;
  Mat per_area;
  TheoremReport report;
};

inline LoopRecovery recover_curvature_loop(const ManifoldModel& m, const Vec& x,
                                           double rho,
                                           const TheoremOptions& opts,
                                           int nodes = 128) {
  require_on_manifold(m, x);
  if (!(rho > 0.0)) throw ConfigError("loop radius must be positive");
  const Curve loop = sample_loop(m, x, rho, nodes);

  // planar Stokes area of the loop projected to the tangent plane at x
  const Vec c0 = retract(m, x);
  const auto basis = tangent_basis(m, c0);
  double area = 0.0;
  for (int p = 0; p < loop.segments(); ++p) {
    const Vec da = loop.nodes[p] - c0;
    const Vec db = loop.nodes[p + 1] - c0;
    const double xi0 = basis[0].dot(da), eta0 = basis[1].dot(da);
    const double xi1 = basis[0].dot(db), eta1 = basis[1].dot(db);
    area += 0.5 * (xi0 * eta1 - xi1 * eta0);
  }

  LoopRecovery out;
  out.rho = rho;
  out.area = area;
  out.report = verify_theorem(m, loop, opts, "loop(rho=" + std::to_string(rho) + ")");
  const int n = m.ambient_dim;
  out.per_area = Mat::Zero(n, n);
  for (const auto& e : out.report.entries)
    out.per_area(e.i - 1, e.j - 1) = e.rhs / area;
  return out;
}

}  // namespace flowconn
