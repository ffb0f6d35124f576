#pragma once

#include <cmath>
#include <complex>

namespace emrec {

using Complex = std::complex<double>;
inline constexpr Complex kI{0.0, 1.0};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 operator-() const { return {-x, -y}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

// Fixed 2D cross-product convention: a x b := a1*b2 - a2*b1.
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

// Counterclockwise rotation by pi/2.
inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }

inline Vec2 rotate(Vec2 a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

struct CVec2 {
  Complex x{0.0, 0.0};
  Complex y{0.0, 0.0};
};

inline CVec2 operator*(Complex s, Vec2 v) { return {s * v.x, s * v.y}; }

// C2 quintic ramp on [0,1]; s(0)=0, s(1)=1, s'(0)=s'(1)=s''(0)=s''(1)=0.
inline double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

}  // namespace emrec
