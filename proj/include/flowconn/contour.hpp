#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "flowconn/core.hpp"
#include "flowconn/curves.hpp"
#include "flowconn/geometry.hpp"

namespace flowconn {

/// Time-dependent vector field F(t, x) with optional analytic derivatives.
/// Missing derivatives can be filled by finite differences via
/// with_fd_derivatives.
struct TimeVectorField {
  int dim = 0;
  std::function<Vec(double, const Vec&)> value;
  std::function<Vec(double, const Vec&)> time_derivative;
  /// (k, l) = dF^k/dx_l
  std::function<Mat(double, const Vec&)> jacobian;
  /// (k, l, m) = d2F^k/dx_l dx_m
  std::function<Tensor3(double, const Vec&)> hessian;
};

struct DriftField {
  int dim = 0;
  std::function<Vec(const Vec&)> value;
};

struct DiffusionField {
  int dim = 0;
  std::function<Mat(const Vec&)> value;
  /// (j, m, k) = d sigma^{jm} / dx_k
  std::function<Tensor3(const Vec&)> derivative;
};

inline TimeVectorField with_fd_derivatives(TimeVectorField f,
                                           double space_step = 1e-5,
                                           double time_step = 1e-6) {
  const int n = f.dim;
  auto value = f.value;
  if (!f.time_derivative) {
    f.time_derivative = [value, time_step](double t, const Vec& x) {
      return Vec((value(t + time_step, x) - value(t - time_step, x)) /
                 (2.0 * time_step));
    };
  }
  if (!f.jacobian) {
    f.jacobian = [value, space_step, n](double t, const Vec& x) {
      Mat j(n, n);
      Vec xp = x, xm = x;
      for (int l = 0; l < n; ++l) {
        xp[l] = x[l] + space_step;
        xm[l] = x[l] - space_step;
        const Vec d = (value(t, xp) - value(t, xm)) / (2.0 * space_step);
        for (int k = 0; k < n; ++k) j(k, l) = d[k];
        xp[l] = x[l];
        xm[l] = x[l];
      }
      return j;
    };
  }
  if (!f.hessian) {
    const double hh = std::max(space_step, 1e-4);
    f.hessian = [value, hh, n](double t, const Vec& x) {
      Tensor3 h(n);
      const Vec f0 = value(t, x);
      for (int l = 0; l < n; ++l)
        for (int m = l; m < n; ++m) {
          Vec d(n);
          if (l == m) {
            Vec xp = x, xm = x;
            xp[l] += hh;
            xm[l] -= hh;
            d = (value(t, xp) - 2.0 * f0 + value(t, xm)) / (hh * hh);
          } else {
            Vec xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[l] += hh; xpp[m] += hh;
            xpm[l] += hh; xpm[m] -= hh;
            xmp[l] -= hh; xmp[m] += hh;
            xmm[l] -= hh; xmm[m] -= hh;
            d = (value(t, xpp) - value(t, xpm) - value(t, xmp) + value(t, xmm)) /
                (4.0 * hh * hh);
          }
          for (int k = 0; k < n; ++k) {
            h(k, l, m) = d[k];
            h(k, m, l) = d[k];
          }
        }
      return h;
    };
  }
  return f;
}

inline DiffusionField with_fd_derivative(DiffusionField s, double step = 1e-5) {
  if (s.derivative) return s;
  const int n = s.dim;
  auto value = s.value;
  s.derivative = [value, step, n](const Vec& x) {
    Tensor3 d(n);
    Vec xp = x, xm = x;
    for (int k = 0; k < n; ++k) {
      xp[k] = x[k] + step;
      xm[k] = x[k] - step;
      const Mat dm = (value(xp) - value(xm)) / (2.0 * step);
      for (int j = 0; j < n; ++j)
        for (int mm = 0; mm < n; ++mm) d(j, mm, k) = dm(j, mm);
      xp[k] = x[k];
      xm[k] = x[k];
    }
    return d;
  };
  return s;
}

/// t-derivative at 0 of E int_{X_t(gamma)} sum_k F^k(t, x) dx_k for the flow
/// dX = u dt + sigma dW:
///
///   int_gamma sum_k [ dF^k/dt
///                     + sum_j u^j (dF^k/dx_j - dF^j/dx_k)
///                     + 1/2 sum_{l,m} d2F^k/dx_l dx_m (sigma sigma^T)^{lm}
///                     + sum_{j,l,m} dF^j/dx_l sigma^{lm} dsigma^{jm}/dx_k
///                   ] dx_k
///   + sum_k [ F^k u^k ]_a^b,
///
/// all fields evaluated at t = 0 on the initial curve.  With F^k = x^i d_{jk},
/// u = r, sigma = P this reduces term by term to oracle_psi_derivative.
inline double contour_ito_drift(const TimeVectorField& f, const DriftField& u,
                                const DiffusionField& sigma, const Curve& c) {
  if (!f.value || !f.time_derivative || !f.jacobian || !f.hessian)
    throw ConfigError("vector field is missing derivatives; use with_fd_derivatives");
  if (!sigma.value || !sigma.derivative)
    throw ConfigError("diffusion field is missing its derivative; use with_fd_derivative");
  const int n = f.dim;
  detail::ChordWalk w(c);

  double acc = 0.0;
  for (int q = 0; q < w.chords(); ++q) {
    const Vec& a = w.a(q);
    const Vec& b = w.b(q);
    const Vec mid = 0.5 * (a + b);

    const Vec ft = f.time_derivative(0.0, mid);
    const Mat jac = f.jacobian(0.0, mid);
    const Tensor3 hess = f.hessian(0.0, mid);
    const Vec uv = u.value(mid);
    const Mat sg = sigma.value(mid);
    const Tensor3 ds = sigma.derivative(mid);
    const Mat a2 = sg * sg.transpose();

    // JS(j, m) = sum_l dF^j/dx_l sigma^{lm}
    const Mat js = jac * sg;

    double term = 0.0;
    for (int k = 0; k < n; ++k) {
      double g = ft[k];
      for (int j = 0; j < n; ++j) g += uv[j] * (jac(k, j) - jac(j, k));
      double hh = 0.0;
      for (int l = 0; l < n; ++l)
        for (int mm = 0; mm < n; ++mm) hh += hess(k, l, mm) * a2(l, mm);
      g += 0.5 * hh;
      double gg = 0.0;
      for (int j = 0; j < n; ++j)
        for (int mm = 0; mm < n; ++mm) gg += js(j, mm) * ds(j, mm, k);
      g += gg;
      term += g * (b[k] - a[k]);
    }
    acc += term;
  }
  acc *= w.sign;

  const Vec& ga = c.front();
  const Vec& gb = c.back();
  const Vec fa = f.value(0.0, ga);
  const Vec fb = f.value(0.0, gb);
  const Vec ua = u.value(ga);
  const Vec ub = u.value(gb);
  double boundary = 0.0;
  for (int k = 0; k < n; ++k) boundary += fb[k] * ub[k] - fa[k] * ua[k];
  return acc + boundary;
}

// ---------------------------------------------------------------------------
// Field catalog (used by the CLI and the specialization cross-checks)
// ---------------------------------------------------------------------------

/// F^k(t, x) = x^i delta_{jk} (0-based i, j) with exact derivatives.
inline TimeVectorField area_functional_field(int n, int i, int j) {
  TimeVectorField f;
  f.dim = n;
  f.value = [n, i, j](double, const Vec& x) {
    Vec v = Vec::Zero(n);
    v[j] = x[i];
    return v;
  };
  f.time_derivative = [n](double, const Vec&) { return Vec(Vec::Zero(n)); };
  f.jacobian = [n, i, j](double, const Vec&) {
    Mat m = Mat::Zero(n, n);
    m(j, i) = 1.0;
    return m;
  };
  f.hessian = [n](double, const Vec&) { return Tensor3(n); };
  return f;
}

inline TimeVectorField constant_field(const Vec& value) {
  const int n = static_cast<int>(value.size());
  TimeVectorField f;
  f.dim = n;
  f.value = [value](double, const Vec&) { return value; };
  f.time_derivative = [n](double, const Vec&) { return Vec(Vec::Zero(n)); };
  f.jacobian = [n](double, const Vec&) { return Mat(Mat::Zero(n, n)); };
  f.hessian = [n](double, const Vec&) { return Tensor3(n); };
  return f;
}

/// F(t, x) = x, the gradient of |x|^2 / 2; closed-loop integrals vanish.
inline TimeVectorField position_field(int n) {
  TimeVectorField f;
  f.dim = n;
  f.value = [](double, const Vec& x) { return x; };
  f.time_derivative = [n](double, const Vec&) { return Vec(Vec::Zero(n)); };
  f.jacobian = [n](double, const Vec&) { return Mat(Mat::Identity(n, n)); };
  f.hessian = [n](double, const Vec&) { return Tensor3(n); };
  return f;
}

inline DriftField zero_drift(int n) {
  return DriftField{n, [n](const Vec&) { return Vec(Vec::Zero(n)); }};
}

/// u = r, the Ito drift of Brownian motion on the manifold.
inline DriftField manifold_drift_field(const ManifoldModel& m) {
  return DriftField{m.ambient_dim,
                    [&m](const Vec& x) { return detail::r_at(m, x); }};
}

inline DiffusionField identity_diffusion(int n) {
  DiffusionField s;
  s.dim = n;
  s.value = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  s.derivative = [n](const Vec&) { return Tensor3(n); };
  return s;
}

/// sigma = P with the model's projector derivative.
inline DiffusionField manifold_projection_field(const ManifoldModel& m) {
  DiffusionField s;
  s.dim = m.ambient_dim;
  s.value = [&m](const Vec& x) { return m.projection(x); };
  s.derivative = [&m](const Vec& x) { return m.projection_derivative(x); };
  return s;
}

}  // namespace flowconn
