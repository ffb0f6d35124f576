#pragma once

#include <cmath>
#include <vector>

#include "emrec/errors.hpp"
#include "emrec/geometry.hpp"
#include "emrec/scene.hpp"

namespace emrec {

// Closed smooth boundary of a unit-frame shape B, discretized at equispaced
// parameter values. Trapezoidal weights in the parameter are spectrally
// accurate on smooth closed curves.
struct ShapeBoundary {
  int n = 0;
  std::vector<Vec2> nodes;
  std::vector<Vec2> normals;   // outward unit normals
  std::vector<double> weights; // arc-length quadrature weights
  std::vector<double> curvature;

  double perimeter() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

inline ShapeBoundary make_ellipse_boundary(double a, double b, double angle, int n) {
  if (!(a > 0.0 && b > 0.0)) raise(ErrorCode::NonPositiveMaterial, "ellipse semi-axes must be positive");
  ShapeBoundary sb;
  sb.n = n;
  sb.nodes.resize(n);
  sb.normals.resize(n);
  sb.weights.resize(n);
  sb.curvature.resize(n);
  const double pi = 4.0 * std::atan(1.0);
  const double h = 2.0 * pi / n;
  for (int k = 0; k < n; ++k) {
    const double th = k * h;
    const double c = std::cos(th), s = std::sin(th);
    const Vec2 p{a * c, b * s};
    const Vec2 dp{-a * s, b * c};
    const double speed = norm(dp);
    sb.nodes[k] = rotate(p, angle);
    const Vec2 tau = dp / speed;
    sb.normals[k] = rotate(Vec2{tau.y, -tau.x}, angle);
    sb.weights[k] = speed * h;
    sb.curvature[k] = a * b / (speed * speed * speed);
  }
  return sb;
}

inline ShapeBoundary make_disk_boundary(double radius, int n) {
  return make_ellipse_boundary(radius, radius, 0.0, n);
}

inline ShapeBoundary make_shape_boundary(const Inclusion& inc, int n) {
  if (inc.kind == ShapeKind::Disk) return make_disk_boundary(inc.radius, n);
  return make_ellipse_boundary(inc.a, inc.b, inc.angle, n);
}

}  // namespace emrec
