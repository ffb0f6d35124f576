#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "emrec/control.hpp"
#include "emrec/errors.hpp"
#include "emrec/geometry.hpp"

namespace emrec {

// Averaging kernel theta on Gamma x [0,T]: per boundary point the ODE
//     theta'' - theta = F,  F = dg/dt - i w g,   theta(0) = 0, theta'(T) = 0,
// solved in closed form by variation of parameters. dg/dt is taken as the
// exact derivative of a cubic spline of the demodulated signal e^{-iwt} g, so
// a pure phase g = e^{iwt} gives F == 0 identically, and all quadratures are
// exact for the spline class (panel-wise product integration).
struct ThetaFunction {
  double dt = 0.0;
  int nt = 0;
  int npoints = 0;
  double omega = 0.0;
  std::vector<Complex> theta;    // (nt+1) x npoints
  std::vector<Complex> dtheta;
  std::vector<Complex> ddtheta;  // theta + F, never a finite difference

  Complex at(int n, int k) const { return theta[static_cast<size_t>(n) * npoints + k]; }
  Complex dt_at(int n, int k) const { return dtheta[static_cast<size_t>(n) * npoints + k]; }
  Complex ddt_at(int n, int k) const { return ddtheta[static_cast<size_t>(n) * npoints + k]; }
};

namespace detail {

// Moments \int_0^h e^{a u} u^k du for k = 0,1,2; series branch for small |ah|.
struct ExpMoments {
  Complex m0, m1, m2;
};

inline ExpMoments exp_moments(Complex a, double h) {
  ExpMoments m;
  if (std::abs(a) * h < 0.5) {
    Complex t0 = h, t1 = h * h / 2.0, t2 = h * h * h / 3.0;  // a^0 terms
    m.m0 = t0;
    m.m1 = t1;
    m.m2 = t2;
    Complex ap = 1.0;
    double fact = 1.0;
    for (int q = 1; q < 24; ++q) {
      ap *= a;
      fact *= q;
      const double hp = std::pow(h, q);
      m.m0 += ap * (hp * h / (fact * (q + 1)));
      m.m1 += ap * (hp * h * h / (fact * (q + 2)));
      m.m2 += ap * (hp * h * h * h / (fact * (q + 3)));
    }
    return m;
  }
  const Complex eah = std::exp(a * h);
  m.m0 = (eah - 1.0) / a;
  m.m1 = (h * eah - m.m0) / a;
  m.m2 = (h * h * eah - 2.0 * m.m1) / a;
  return m;
}

// One-sided end-slope estimate (4th order when enough points exist).
inline Complex end_slope(const std::vector<Complex>& y, double h, bool left) {
  const int n = static_cast<int>(y.size());
  auto v = [&](int q) { return left ? y[q] : y[n - 1 - q]; };
  const double sgn = left ? 1.0 : -1.0;
  if (n >= 5)
    return sgn * (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) / (12.0 * h);
  if (n >= 3) return sgn * (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
  return sgn * (v(1) - v(0)) / h;
}

// Clamped cubic spline second derivatives on a uniform grid (complex data).
inline std::vector<Complex> spline_second_derivatives(const std::vector<Complex>& y, double h) {
  const int n = static_cast<int>(y.size());
  std::vector<Complex> m(n, Complex{0.0, 0.0});
  if (n < 3) return m;
  const Complex d0 = end_slope(y, h, true);
  const Complex dn = end_slope(y, h, false);
  std::vector<double> diag(n), lower(n), upper(n);
  std::vector<Complex> rhs(n);
  diag[0] = h / 3.0;
  upper[0] = h / 6.0;
  rhs[0] = (y[1] - y[0]) / h - d0;
  for (int i = 1; i < n - 1; ++i) {
    lower[i] = h / 6.0;
    diag[i] = 2.0 * h / 3.0;
    upper[i] = h / 6.0;
    rhs[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
  }
  lower[n - 1] = h / 6.0;
  diag[n - 1] = h / 3.0;
  rhs[n - 1] = dn - (y[n - 1] - y[n - 2]) / h;
  for (int i = 1; i < n; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int i = n - 2; i >= 0; --i) m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
  return m;
}

// Per-point closed-form solve.
struct ThetaPoint {
  std::vector<Complex> theta, dtheta, f;
};

inline ThetaPoint solve_theta_point(const std::vector<Complex>& g, double h, double omega) {
  const int n = static_cast<int>(g.size()) - 1;  // panels
  const double T = n * h;
  ThetaPoint out;
  out.theta.assign(n + 1, Complex{0.0, 0.0});
  out.dtheta.assign(n + 1, Complex{0.0, 0.0});
  out.f.assign(n + 1, Complex{0.0, 0.0});

  // Demodulate and spline.
  std::vector<Complex> G(n + 1);
  for (int q = 0; q <= n; ++q) G[q] = std::exp(-kI * omega * (q * h)) * g[q];
  const std::vector<Complex> m = spline_second_derivatives(G, h);
  // Panel coefficients of G' (quadratic): G'(u) = b + 2c u + 3d u^2.
  std::vector<Complex> pb(n), pc(n), pd(n);
  for (int q = 0; q < n; ++q) {
    pc[q] = m[q] / 2.0;
    pd[q] = (m[q + 1] - m[q]) / (6.0 * h);
    pb[q] = (G[q + 1] - G[q]) / h - h * (2.0 * m[q] + m[q + 1]) / 6.0;
  }
  // F(t) = e^{i w t} G'(t); nodes need F for theta''.
  for (int q = 0; q < n; ++q) out.f[q] = std::exp(kI * omega * (q * h)) * pb[q];
  out.f[n] = std::exp(kI * omega * T) * (pb[n - 1] + 2.0 * pc[n - 1] * h + 3.0 * pd[n - 1] * h * h);

  // Cumulative I_a(t) = int_0^t e^{a s} G'(s) ds for a = 1 + i w and -1 + i w,
  // panel-exact for the spline class.
  const Complex ap = Complex{1.0, omega};
  const Complex am = Complex{-1.0, omega};
  const ExpMoments mp = exp_moments(ap, h), mm = exp_moments(am, h);
  std::vector<Complex> Ip(n + 1, Complex{0.0, 0.0}), Im(n + 1, Complex{0.0, 0.0});
  for (int q = 0; q < n; ++q) {
    const Complex c0 = pb[q], c1 = 2.0 * pc[q], c2 = 3.0 * pd[q];
    Ip[q + 1] = Ip[q] + std::exp(ap * (q * h)) * (c0 * mp.m0 + c1 * mp.m1 + c2 * mp.m2);
    Im[q + 1] = Im[q] + std::exp(am * (q * h)) * (c0 * mm.m0 + c1 * mm.m1 + c2 * mm.m2);
  }

  // theta_p = sinh(t) C - cosh(t) S with C = (Ip+Im)/2, S = (Ip-Im)/2.
  std::vector<Complex> tp(n + 1), tpd(n + 1);
  for (int q = 0; q <= n; ++q) {
    const double t = q * h;
    const Complex C = 0.5 * (Ip[q] + Im[q]);
    const Complex S = 0.5 * (Ip[q] - Im[q]);
    tp[q] = std::sinh(t) * C - std::cosh(t) * S;
    tpd[q] = std::cosh(t) * C - std::sinh(t) * S;
  }
  const Complex A = -tpd[n] / (2.0 * std::cosh(T));
  for (int q = 0; q <= n; ++q) {
    const double t = q * h;
    out.theta[q] = A * 2.0 * std::sinh(t) + tp[q];
    out.dtheta[q] = A * 2.0 * std::cosh(t) + tpd[q];
  }
  return out;
}

}  // namespace detail

inline ThetaFunction solve_theta(const ControlFunction& g, double omega) {
  if (!(g.dt > 0.0) || g.nt < 2) raise(ErrorCode::NonUniformTimeGrid, "need a uniform grid with nt >= 2");
  ThetaFunction th;
  th.dt = g.dt;
  th.nt = g.nt;
  th.npoints = g.gamma.size();
  th.omega = omega;
  const size_t total = static_cast<size_t>(g.nt + 1) * th.npoints;
  th.theta.assign(total, Complex{0.0, 0.0});
  th.dtheta.assign(total, Complex{0.0, 0.0});
  th.ddtheta.assign(total, Complex{0.0, 0.0});
  std::vector<Complex> series(g.nt + 1);
  for (int k = 0; k < th.npoints; ++k) {
    for (int q = 0; q <= g.nt; ++q) series[q] = g.at(q, k);
    const auto pt = detail::solve_theta_point(series, g.dt, omega);
    for (int q = 0; q <= g.nt; ++q) {
      th.theta[static_cast<size_t>(q) * th.npoints + k] = pt.theta[q];
      th.dtheta[static_cast<size_t>(q) * th.npoints + k] = pt.dtheta[q];
      th.ddtheta[static_cast<size_t>(q) * th.npoints + k] = pt.theta[q] + pt.f[q];
    }
  }
  return th;
}

// Sup-norm residual of the second-kind Volterra form
//   dtheta(t) + int_t^T e^{-i w (s-t)} (theta(s) - i w dtheta(s)) ds - g(t).
// The integrand is rebuilt inside each panel by two-point quintic Hermite
// interpolation from (theta, dtheta, ddtheta) and integrated with 5-point
// Gauss panels, accumulated backward from T.
inline double volterra_residual(const ThetaFunction& th, const ControlFunction& g, double omega) {
  if (th.nt != g.nt || th.npoints != g.gamma.size() || std::abs(th.dt - g.dt) > 1e-15)
    raise(ErrorCode::GridMismatch, "theta and control grids differ");
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  const double h = th.dt;
  const int n = th.nt;
  double worst = 0.0;
  std::vector<Complex> J(n + 1);
  for (int k = 0; k < th.npoints; ++k) {
    // Quintic pieces from endpoint jets.
    auto jet = [&](int q) {
      return std::array<Complex, 3>{th.at(q, k), th.dt_at(q, k), th.ddt_at(q, k)};
    };
    J[n] = Complex{0.0, 0.0};
    for (int q = n - 1; q >= 0; --q) {
      const auto j0 = jet(q);
      const auto j1 = jet(q + 1);
      const Complex r0 = j1[0] - (j0[0] + j0[1] * h + j0[2] * h * h / 2.0);
      const Complex r1 = j1[1] - (j0[1] + j0[2] * h);
      const Complex r2 = j1[2] - j0[2];
      const Complex q1 = r1 / (h * h) - 3.0 * r0 / (h * h * h);
      const Complex q2 = r2 / h - 6.0 * r0 / (h * h * h);
      const Complex ct = (q2 - 6.0 * q1) / 2.0;  // c h^2
      const Complex bt = q1 - 2.0 * ct;          // b h
      const Complex at = r0 / (h * h * h) - bt - ct;
      const Complex a5 = ct / (h * h), a4 = bt / h, a3 = at;
      auto theta_of = [&](double u) {
        return j0[0] + u * (j0[1] + u * (j0[2] / 2.0 + u * (a3 + u * (a4 + u * a5))));
      };
      auto dtheta_of = [&](double u) {
        return j0[1] + u * (j0[2] + u * (3.0 * a3 + u * (4.0 * a4 + u * 5.0 * a5)));
      };
      Complex panel{0.0, 0.0};
      for (int p = 0; p < 5; ++p) {
        const double u = 0.5 * h * (1.0 + gx[p]);
        const double s = q * h + u;
        panel += 0.5 * h * gw[p] * std::exp(-kI * omega * s) *
                 (theta_of(u) - kI * omega * dtheta_of(u));
      }
      J[q] = J[q + 1] + panel;
    }
    for (int q = 0; q <= n; ++q) {
      const Complex resid =
          th.dt_at(q, k) + std::exp(kI * omega * (q * h)) * J[q] - g.at(q, k);
      worst = std::max(worst, std::abs(resid));
    }
  }
  return worst;
}

}  // namespace emrec
