#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emrec/errors.hpp"
#include "emrec/geometry.hpp"
#include "emrec/util.hpp"

namespace emrec {

// Axis-aligned rectangle [0,Lx] x [0,Ly].
struct Domain {
  double lx = 1.0;
  double ly = 1.0;

  double diameter() const { return std::hypot(lx, ly); }
  bool contains(Vec2 p) const { return p.x >= 0.0 && p.x <= lx && p.y >= 0.0 && p.y <= ly; }
  double boundary_distance(Vec2 p) const {
    return std::min(std::min(p.x, lx - p.x), std::min(p.y, ly - p.y));
  }
};

enum class ShapeKind { Disk, Ellipse };

struct Inclusion {
  Vec2 center;
  ShapeKind kind = ShapeKind::Disk;
  double radius = 1.0;     // disk
  double a = 1.0, b = 1.0; // ellipse semi-axes in the unit frame
  double angle = 0.0;      // ellipse rotation, radians
  double eps = 1.0;        // permittivity inside

  // Circumradius of the unit-frame shape.
  double support_radius() const { return kind == ShapeKind::Disk ? radius : std::max(a, b); }

  // Membership of a physical point for scale alpha.
  bool contains(Vec2 p, double alpha) const {
    const Vec2 q = (p - center) / alpha;
    if (kind == ShapeKind::Disk) return norm2(q) <= radius * radius;
    const Vec2 r = rotate(q, -angle);
    const double u = r.x / a, v = r.y / b;
    return u * u + v * v <= 1.0;
  }

  double area_unit_frame() const {
    const double pi = 4.0 * std::atan(1.0);
    return kind == ShapeKind::Disk ? pi * radius * radius : pi * a * b;
  }
};

// Smooth cutoff: 0 within `margin` of the boundary, 1 past margin+transition_width.
struct CutoffSpec {
  double margin = 0.08;
  double transition_width = 0.12;

  double value(const Domain& dom, Vec2 p) const {
    const double d = dom.boundary_distance(p);
    return smoothstep5((d - margin) / transition_width);
  }
};

struct Scene {
  Domain domain;
  double eps0 = 1.0;
  double mu0 = 1.0;
  double alpha = 0.05;
  double c0 = 0.2;
  std::vector<Inclusion> inclusions;
  CutoffSpec cutoff;

  double wave_speed() const { return 1.0 / std::sqrt(mu0 * eps0); }
  double eps_min() const {
    double m = eps0;
    for (const auto& inc : inclusions) m = std::min(m, inc.eps);
    return m;
  }

  // Permittivity at a point (no cell averaging).
  double eps_at(Vec2 p) const {
    for (const auto& inc : inclusions)
      if (inc.contains(p, alpha)) return inc.eps;
    return eps0;
  }

  std::string content_key() const {
    std::ostringstream os;
    os << double_bits(domain.lx) << double_bits(domain.ly) << double_bits(eps0) << double_bits(mu0)
       << double_bits(alpha) << double_bits(c0);
    for (const auto& inc : inclusions) {
      os << (inc.kind == ShapeKind::Disk ? "D" : "E") << double_bits(inc.center.x)
         << double_bits(inc.center.y) << double_bits(inc.radius) << double_bits(inc.a)
         << double_bits(inc.b) << double_bits(inc.angle) << double_bits(inc.eps);
    }
    os << double_bits(cutoff.margin) << double_bits(cutoff.transition_width);
    return os.str();
  }
  uint64_t hash() const { return fnv1a64(content_key()); }
};

struct Violation {
  ErrorCode code;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Scene wrapper handed out only after the constraints have been checked.
class ValidatedScene {
 public:
  explicit ValidatedScene(Scene s) : scene_(std::move(s)) {}
  const Scene& get() const { return scene_; }
  const Scene* operator->() const { return &scene_; }

 private:
  Scene scene_;
};

inline ValidationResult validate_scene(const Scene& s) {
  ValidationResult r;
  auto add = [&r](ErrorCode c, const std::string& m) { r.violations.push_back({c, m}); };

  if (!(s.eps0 > 0.0)) add(ErrorCode::NonPositiveMaterial, "eps0 must be positive");
  if (!(s.mu0 > 0.0)) add(ErrorCode::NonPositiveMaterial, "mu0 must be positive");
  if (!(s.alpha > 0.0)) add(ErrorCode::NonPositiveMaterial, "alpha must be positive");
  if (!(s.c0 > 0.0)) add(ErrorCode::NonPositiveMaterial, "c0 must be positive");
  if (!(s.domain.lx > 0.0 && s.domain.ly > 0.0))
    add(ErrorCode::NonPositiveMaterial, "domain lengths must be positive");

  const int m = static_cast<int>(s.inclusions.size());
  for (int j = 0; j < m; ++j) {
    const auto& inc = s.inclusions[j];
    std::ostringstream tag;
    tag << "inclusion " << (j + 1);
    if (!(inc.eps > 0.0)) add(ErrorCode::NonPositiveMaterial, tag.str() + ": eps must be positive");
    if (inc.kind == ShapeKind::Disk) {
      if (!(inc.radius > 0.0)) add(ErrorCode::NonPositiveMaterial, tag.str() + ": radius must be positive");
    } else {
      if (!(inc.a > 0.0 && inc.b > 0.0))
        add(ErrorCode::NonPositiveMaterial, tag.str() + ": semi-axes must be positive");
    }
    const double d = s.domain.boundary_distance(inc.center);
    if (d < s.c0) {
      std::ostringstream os;
      os << tag.str() << ": dist(center, boundary) = " << d << " < c0 = " << s.c0;
      add(ErrorCode::BoundaryViolation, os.str());
    }
    // Scaled inclusion must stay inside with margin c0/2.
    if (s.alpha > 0.0 && d - s.alpha * inc.support_radius() < 0.5 * s.c0) {
      std::ostringstream os;
      os << tag.str() << ": scaled shape closer than c0/2 to the boundary";
      add(ErrorCode::BoundaryViolation, os.str());
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double d = norm(s.inclusions[i].center - s.inclusions[j].center);
      if (d < s.c0) {
        std::ostringstream os;
        os << "inclusions " << (i + 1) << "," << (j + 1) << ": |z_i - z_j| = " << d << " < c0 = " << s.c0;
        add(ErrorCode::SeparationViolation, os.str());
      }
      if (s.alpha > 0.0) {
        const double reach =
            s.alpha * (s.inclusions[i].support_radius() + s.inclusions[j].support_radius());
        if (d <= reach) {
          std::ostringstream os;
          os << "inclusions " << (i + 1) << "," << (j + 1) << ": scaled shapes overlap";
          add(ErrorCode::SeparationViolation, os.str());
        }
      }
    }
  }
  return r;
}

inline ValidatedScene require_valid(const Scene& s) {
  const auto r = validate_scene(s);
  if (!r.ok()) raise(r.violations.front().code, r.violations.front().message);
  return ValidatedScene(s);
}

// Incident plane wave H(x,t) = eta_perp exp(i eta.x - i omega t).
// omega is always |eta|/sqrt(mu0 eps0) so the wave solves the background system.
struct PlaneWaveProbe {
  Vec2 eta;
  Vec2 eta_perp;
  double omega = 0.0;

  static PlaneWaveProbe make(Vec2 eta, double eps0, double mu0) {
    const double n = norm(eta);
    if (!(n > 0.0)) raise(ErrorCode::NonPositiveMaterial, "probe requires eta != 0");
    PlaneWaveProbe p;
    p.eta = eta;
    p.eta_perp = rot90(eta) / n;
    p.omega = n / std::sqrt(mu0 * eps0);
    return p;
  }

  std::string content_key() const {
    return double_bits(eta.x) + double_bits(eta.y) + double_bits(omega);
  }
};

struct IncidentField {
  CVec2 H;
  CVec2 dtH;
  Complex curlH;  // 2D scalar curl
};

inline IncidentField incident_field(const PlaneWaveProbe& p, Vec2 x, double t) {
  const Complex phase = std::exp(kI * (dot(p.eta, x) - p.omega * t));
  IncidentField f;
  f.H = phase * p.eta_perp;
  f.dtH = (-kI * p.omega * phase) * p.eta_perp;
  f.curlH = kI * cross(p.eta, p.eta_perp) * phase;
  return f;
}

inline double cutoff_beta(const CutoffSpec& spec, const Domain& dom, Vec2 x) {
  return spec.value(dom, x);
}

}  // namespace emrec
