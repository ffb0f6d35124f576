#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "emrec/errors.hpp"
#include "emrec/shape.hpp"

namespace emrec {

// Free-space transmission corrector via a single-layer ansatz.
//
// With G(x,y) = -(1/2pi) log|x-y| and exterior/interior traces of the
// single-layer normal derivative
//     dS[phi]/dnu|ext = -phi/2 + K*[phi],   dS[phi]/dnu|int = +phi/2 + K*[phi],
// the flux condition  k dPhi/dnu|ext - dPhi/dnu|int = -nu.e_l  becomes the
// second-kind equation
//     (lambda I - K*) psi_l = nu.e_l,   lambda = (k+1)/(2(k-1)),
// for the rescaled density psi_l = (k-1) phi_l. Only (k-1) dPhi/dnu|ext
// enters the tensor, and that is exactly -psi/2 + K*[psi].
struct LayerDensity {
  int n = 0;
  double contrast = 1.0;
  // values[l][m]: density for direction e_l at node m (rescaled by (k-1)).
  std::array<std::vector<double>, 2> values;
};

struct PolarizationTensor {
  double m11 = 0.0, m12 = 0.0, m22 = 0.0;
  double area = 0.0;
  double contrast = 1.0;
  double asymmetry = 0.0;  // |M12 - M21| before symmetrization

  std::array<std::array<double, 2>, 2> matrix() const {
    return {{{m11, m12}, {m12, m22}}};
  }
  double trace() const { return m11 + m22; }
  // Deviatoric (trace-free) part.
  std::array<double, 2> deviatoric() const { return {0.5 * (m11 - m22), m12}; }
};

namespace detail {

// Adjoint double-layer kernel K*(x_m, y_n) with the smooth diagonal limit.
inline double kstar_kernel(const ShapeBoundary& sb, int m, int n) {
  const double pi = 4.0 * std::atan(1.0);
  if (m == n) return -sb.curvature[m] / (4.0 * pi);
  const Vec2 d = sb.nodes[m] - sb.nodes[n];
  return -dot(d, sb.normals[m]) / (2.0 * pi * norm2(d));
}

}  // namespace detail

inline LayerDensity solve_transmission(const ShapeBoundary& sb, double contrast) {
  if (!(contrast > 0.0)) raise(ErrorCode::NonPositiveContrast, "contrast must be positive");
  LayerDensity out;
  out.n = sb.n;
  out.contrast = contrast;
  out.values[0].assign(sb.n, 0.0);
  out.values[1].assign(sb.n, 0.0);
  if (contrast == 1.0) return out;  // zero flux mismatch

  const double lambda = (contrast + 1.0) / (2.0 * (contrast - 1.0));
  const int n = sb.n;
  Eigen::MatrixXd A(n, n);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      A(m, k) = (m == k ? lambda : 0.0) - detail::kstar_kernel(sb, m, k) * sb.weights[k];

  Eigen::MatrixXd rhs(n, 2);
  for (int m = 0; m < n; ++m) {
    rhs(m, 0) = sb.normals[m].x;
    rhs(m, 1) = sb.normals[m].y;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::MatrixXd sol = lu.solve(rhs);
  const double resid = (A * sol - rhs).norm() / rhs.norm();
  if (!std::isfinite(resid) || resid > 1e-8)
    raise(ErrorCode::SingularSystem, "transmission system is numerically singular");
  for (int m = 0; m < n; ++m) {
    out.values[0][m] = sol(m, 0);
    out.values[1][m] = sol(m, 1);
  }
  return out;
}

// (contrast-1) * dPhi/dnu|ext at one node, for both coordinate directions.
inline Vec2 scaled_normal_derivative_plus(const ShapeBoundary& sb, const LayerDensity& d, int node) {
  Vec2 q;
  for (int l = 0; l < 2; ++l) {
    double v = -0.5 * d.values[l][node];
    for (int k = 0; k < sb.n; ++k)
      v += detail::kstar_kernel(sb, node, k) * sb.weights[k] * d.values[l][k];
    (l == 0 ? q.x : q.y) = v;
  }
  return q;
}

// Exterior normal derivative dPhi/dnu|+ at one node (d-vector over directions).
inline Vec2 phi_normal_derivative_plus(const ShapeBoundary& sb, const LayerDensity& d, int node) {
  if (d.contrast == 1.0) return {0.0, 0.0};
  return scaled_normal_derivative_plus(sb, d, node) / (d.contrast - 1.0);
}

inline PolarizationTensor polarization_tensor(const ShapeBoundary& sb, double contrast) {
  const LayerDensity dens = solve_transmission(sb, contrast);
  double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (int node = 0; node < sb.n; ++node) {
    const Vec2 q = scaled_normal_derivative_plus(sb, dens, node);
    const Vec2 field = sb.normals[node] + q;
    const double w = sb.weights[node];
    m[0][0] += w * field.x * sb.nodes[node].x;
    m[0][1] += w * field.x * sb.nodes[node].y;
    m[1][0] += w * field.y * sb.nodes[node].x;
    m[1][1] += w * field.y * sb.nodes[node].y;
  }
  PolarizationTensor t;
  t.contrast = contrast;
  t.asymmetry = std::abs(m[0][1] - m[1][0]);
  t.m11 = m[0][0];
  t.m22 = m[1][1];
  t.m12 = 0.5 * (m[0][1] + m[1][0]);
  // |B| from the divergence theorem on the same quadrature.
  double area = 0.0;
  for (int node = 0; node < sb.n; ++node)
    area += 0.5 * sb.weights[node] * dot(sb.nodes[node], sb.normals[node]);
  t.area = area;
  return t;
}

inline PolarizationTensor disk_tensor_analytic(double radius, double contrast) {
  if (!(radius > 0.0)) raise(ErrorCode::NonPositiveMaterial, "radius must be positive");
  if (!(contrast > 0.0)) raise(ErrorCode::NonPositiveContrast, "contrast must be positive");
  const double pi = 4.0 * std::atan(1.0);
  PolarizationTensor t;
  t.contrast = contrast;
  t.area = pi * radius * radius;
  t.m11 = t.m22 = 2.0 * pi * radius * radius / (1.0 + contrast);
  t.m12 = 0.0;
  return t;
}

// Closed form for the rotated ellipse, derived in elliptic coordinates for
// the flux condition with the contrast on the exterior trace:
// M = |B| (a+b) diag(1/(k a + b), 1/(k b + a)) in the principal frame.
inline PolarizationTensor ellipse_tensor_analytic(double a, double b, double angle, double contrast) {
  if (!(a > 0.0 && b > 0.0)) raise(ErrorCode::NonPositiveMaterial, "semi-axes must be positive");
  if (!(contrast > 0.0)) raise(ErrorCode::NonPositiveContrast, "contrast must be positive");
  const double pi = 4.0 * std::atan(1.0);
  const double area = pi * a * b;
  const double d1 = area * (a + b) / (contrast * a + b);
  const double d2 = area * (a + b) / (contrast * b + a);
  const double c = std::cos(angle), s = std::sin(angle);
  PolarizationTensor t;
  t.contrast = contrast;
  t.area = area;
  t.m11 = c * c * d1 + s * s * d2;
  t.m22 = s * s * d1 + c * c * d2;
  t.m12 = c * s * (d1 - d2);
  return t;
}

}  // namespace emrec
