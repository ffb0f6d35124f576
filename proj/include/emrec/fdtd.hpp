#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "emrec/errors.hpp"
#include "emrec/grid.hpp"
#include "emrec/potential.hpp"
#include "emrec/scene.hpp"

namespace emrec {

// --------------------------------------------------------------------------
// Material sampling
// --------------------------------------------------------------------------

enum class EpsSampling {
  AreaWeighted,  // cut cells carry the exact area average (16x16 subsamples)
  Centroid,      // cell value from the cell center only
};

inline std::vector<double> build_eps_grid(const Scene& scene, const GridSpec& g,
                                          EpsSampling sampling = EpsSampling::AreaWeighted) {
  std::vector<double> eps(g.cells(), scene.eps0);
  const double cell_diag = 0.5 * std::hypot(g.dx, g.dy);
  for (const auto& inc : scene.inclusions) {
    const double r = scene.alpha * inc.support_radius();
    const int i0 = std::max(0, static_cast<int>((inc.center.x - r) / g.dx) - 1);
    const int i1 = std::min(g.nx - 1, static_cast<int>((inc.center.x + r) / g.dx) + 1);
    const int j0 = std::max(0, static_cast<int>((inc.center.y - r) / g.dy) - 1);
    const int j1 = std::min(g.ny - 1, static_cast<int>((inc.center.y + r) / g.dy) + 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Vec2 c = g.cell_center(i, j);
        double& cell = eps[j * g.nx + i];
        if (sampling == EpsSampling::Centroid) {
          if (inc.contains(c, scene.alpha)) cell = inc.eps;
          continue;
        }
        const double d = norm(c - inc.center);
        if (d > r + cell_diag) continue;
        if (d + cell_diag < r && inc.kind == ShapeKind::Disk) {
          cell = inc.eps;  // fully covered, no subsampling needed
          continue;
        }
        constexpr int kSub = 16;
        int inside = 0;
        for (int sj = 0; sj < kSub; ++sj)
          for (int si = 0; si < kSub; ++si) {
            const Vec2 p{(i + (si + 0.5) / kSub) * g.dx, (j + (sj + 0.5) / kSub) * g.dy};
            if (inc.contains(p, scene.alpha)) ++inside;
          }
        if (inside == kSub * kSub) {
          cell = inc.eps;
        } else if (inside > 0) {
          const double frac = static_cast<double>(inside) / (kSub * kSub);
          cell = frac * inc.eps + (1.0 - frac) * scene.eps0;
        }
      }
    }
  }
  return eps;
}

// --------------------------------------------------------------------------
// Fields and the leapfrog stepper
// --------------------------------------------------------------------------

// Real-valued field set; complex runs are two of these.
struct RealFields {
  int nx = 0, ny = 0;
  std::vector<double> ez;  // nx*ny
  std::vector<double> hx;  // nx*(ny+1), rows j=0 and j=ny are boundary faces
  std::vector<double> hy;  // (nx+1)*ny, columns i=0 and i=nx are boundary faces

  static RealFields zeros(const GridSpec& g) {
    RealFields f;
    f.nx = g.nx;
    f.ny = g.ny;
    f.ez.assign(g.nx * g.ny, 0.0);
    f.hx.assign(g.nx * (g.ny + 1), 0.0);
    f.hy.assign((g.nx + 1) * g.ny, 0.0);
    return f;
  }
  double& Ez(int i, int j) { return ez[j * nx + i]; }
  double& Hx(int i, int j) { return hx[j * nx + i]; }
  double& Hy(int i, int j) { return hy[j * (nx + 1) + i]; }
  double Ez(int i, int j) const { return ez[j * nx + i]; }
  double Hx(int i, int j) const { return hx[j * nx + i]; }
  double Hy(int i, int j) const { return hy[j * (nx + 1) + i]; }
};

class TmStepper {
 public:
  TmStepper(const GridSpec& g, double mu0, std::vector<double> eps_cells)
      : g_(g), mu0_(mu0), eps_(std::move(eps_cells)) {
    ce_.resize(eps_.size());
    for (size_t c = 0; c < eps_.size(); ++c) ce_[c] = g_.dt / eps_[c];
    ch_ = g_.dt / mu0_;
  }

  const GridSpec& grid() const { return g_; }
  const std::vector<double>& eps() const { return eps_; }
  double mu0() const { return mu0_; }

  // Ez^{n+1/2} = Ez^{n-1/2} + dt/eps (DxHy - DyHx); boundary faces must hold
  // the tangential data of time level n.
  void step_e(RealFields& f) const {
    const int nx = g_.nx, ny = g_.ny;
    const double idx = 1.0 / g_.dx, idy = 1.0 / g_.dy;
    for (int j = 0; j < ny; ++j) {
      const double* hxr0 = &f.hx[j * nx];
      const double* hxr1 = &f.hx[(j + 1) * nx];
      const double* hyr = &f.hy[j * (nx + 1)];
      double* ez = &f.ez[j * nx];
      const double* ce = &ce_[j * nx];
      for (int i = 0; i < nx; ++i)
        ez[i] += ce[i] * ((hyr[i + 1] - hyr[i]) * idx - (hxr1[i] - hxr0[i]) * idy);
    }
  }

  // Interior faces only; boundary faces are prescribed data.
  void step_h(RealFields& f) const {
    const int nx = g_.nx, ny = g_.ny;
    const double cy = ch_ / g_.dy, cx = ch_ / g_.dx;
    for (int j = 1; j < ny; ++j) {
      double* hx = &f.hx[j * nx];
      const double* e0 = &f.ez[(j - 1) * nx];
      const double* e1 = &f.ez[j * nx];
      for (int i = 0; i < nx; ++i) hx[i] -= cy * (e1[i] - e0[i]);
    }
    for (int j = 0; j < ny; ++j) {
      double* hy = &f.hy[j * (nx + 1)];
      const double* e = &f.ez[j * nx];
      for (int i = 1; i < nx; ++i) hy[i] += cx * (e[i] - e[i - 1]);
    }
  }

  // Discrete scalar curl of H at a cell center; equals eps dEz/dt of the
  // scheme by the update identity.
  double curl_cell(const RealFields& f, int i, int j) const {
    return (f.Hy(i + 1, j) - f.Hy(i, j)) / g_.dx - (f.Hx(i, j + 1) - f.Hx(i, j)) / g_.dy;
  }

  // 1/2 (eps Ez^2 + mu0 |H|^2) summed with cell areas.
  double plain_energy(const RealFields& f) const {
    const double da = g_.dx * g_.dy;
    double ee = 0.0, hh = 0.0;
    for (int c = 0; c < g_.cells(); ++c) ee += eps_[c] * f.ez[c] * f.ez[c];
    for (double v : f.hx) hh += v * v;
    for (double v : f.hy) hh += v * v;
    return 0.5 * da * (ee + mu0_ * hh);
  }

 private:
  GridSpec g_;
  double mu0_;
  double ch_;
  std::vector<double> eps_;
  std::vector<double> ce_;
};

// --------------------------------------------------------------------------
// Boundary data injection and traces
// --------------------------------------------------------------------------

// Writes one scalar tangential value (tau = rot90(nu) convention) into the
// matching boundary face of the H grid.
inline void set_boundary_face(RealFields& f, const Gamma::Face& face, int nx, int ny, double v) {
  switch (face.side) {
    case Gamma::Bottom: f.Hx(face.index, 0) = v; break;
    case Gamma::Right: f.Hy(nx, face.index) = v; break;
    case Gamma::Top: f.Hx(face.index, ny) = -v; break;
    case Gamma::Left: f.Hy(0, face.index) = -v; break;
  }
}

inline double get_boundary_face(const RealFields& f, const Gamma::Face& face, int nx, int ny) {
  switch (face.side) {
    case Gamma::Bottom: return f.Hx(face.index, 0);
    case Gamma::Right: return f.Hy(nx, face.index);
    case Gamma::Top: return -f.Hx(face.index, ny);
    case Gamma::Left: return -f.Hy(0, face.index);
  }
  return 0.0;
}

// The two boundary-adjacent cells used to extrapolate the scalar curl trace
// onto a boundary point.
inline void trace_cells(const Gamma::Face& face, int nx, int ny, int& i0, int& j0, int& i1, int& j1) {
  switch (face.side) {
    case Gamma::Bottom: i0 = face.index; j0 = 0; i1 = face.index; j1 = 1; break;
    case Gamma::Right: i0 = nx - 1; j0 = face.index; i1 = nx - 2; j1 = face.index; break;
    case Gamma::Top: i0 = face.index; j0 = ny - 1; i1 = face.index; j1 = ny - 2; break;
    case Gamma::Left: i0 = 0; j0 = face.index; i1 = 1; j1 = face.index; break;
  }
}

// Scalar trace of curl H x nu on Gamma at the current H level (tangential
// scalar convention; in 2D this is the scalar curl extrapolated to the wall).
inline void extract_trace(const TmStepper& st, const RealFields& f, const Gamma& gm, double* out) {
  const int nx = st.grid().nx, ny = st.grid().ny;
  for (int k = 0; k < gm.size(); ++k) {
    int i0, j0, i1, j1;
    trace_cells(gm.faces[k], nx, ny, i0, j0, i1, j1);
    out[k] = 1.5 * st.curl_cell(f, i0, j0) - 0.5 * st.curl_cell(f, i1, j1);
  }
}

struct BoundaryTrace {
  Gamma gamma;
  double dt = 0.0;
  int nt = 0;
  uint64_t grid_hash = 0;
  std::vector<Complex> values;  // (nt+1) x npoints, row-major in time

  Complex& at(int n, int k) { return values[static_cast<size_t>(n) * gamma.size() + k]; }
  Complex at(int n, int k) const { return values[static_cast<size_t>(n) * gamma.size() + k]; }
  int steps() const { return nt; }

  double l2_norm(double weight_scale = 1.0) const {
    // L2(0,T; L2(Gamma)) via trapezoid in t and segment weights on Gamma.
    double acc = 0.0;
    const int np = gamma.size();
    for (int n = 0; n <= nt; ++n) {
      double row = 0.0;
      for (int k = 0; k < np; ++k) row += std::norm(values[static_cast<size_t>(n) * np + k]) * gamma.weights[k];
      acc += row * dt * ((n == 0 || n == nt) ? 0.5 : 1.0);
    }
    return std::sqrt(acc * weight_scale);
  }
};

// --------------------------------------------------------------------------
// Incident-wave runs
// --------------------------------------------------------------------------

namespace detail {

struct IncidentPart {
  const Scene* scene;
  const PlaneWaveProbe* probe;
  bool imag_part;

  double h_tangential(Vec2 x, Vec2 tau, double t) const {
    const Complex ph = std::exp(kI * (dot(probe->eta, x) - probe->omega * t));
    const Complex v = ph * dot(probe->eta_perp, tau);
    return imag_part ? v.imag() : v.real();
  }
  double hx(Vec2 x, double t) const { return h_tangential(x, {1.0, 0.0}, t); }
  double hy(Vec2 x, double t) const { return h_tangential(x, {0.0, 1.0}, t); }
  double ez(Vec2 x, double t) const {
    const Complex v =
        -std::sqrt(scene->mu0 / scene->eps0) * std::exp(kI * (dot(probe->eta, x) - probe->omega * t));
    return imag_part ? v.imag() : v.real();
  }
};

inline void fill_incident_state(const GridSpec& g, const IncidentPart& inc, RealFields& f) {
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f.Ez(i, j) = inc.ez(g.cell_center(i, j), -0.5 * g.dt);
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f.Hx(i, j) = inc.hx({(i + 0.5) * g.dx, j * g.dy}, 0.0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) f.Hy(i, j) = inc.hy({i * g.dx, (j + 0.5) * g.dy}, 0.0);
}

inline void set_incident_boundary(const GridSpec& g, const Gamma& gm, const IncidentPart& inc,
                                  double t, RealFields& f) {
  for (int k = 0; k < gm.size(); ++k) {
    const double v = inc.h_tangential(gm.points[k], gm.tangents[k], t);
    set_boundary_face(f, gm.faces[k], g.nx, g.ny, v);
  }
}

inline void check_finite(const RealFields& f, int step) {
  double s = 0.0;
  for (double v : f.ez) s += v;
  if (!std::isfinite(s)) {
    std::ostringstream os;
    os << "field blew up at step " << step;
    raise(ErrorCode::NonFiniteField, os.str());
  }
}

}  // namespace detail

struct ForwardOptions {
  EpsSampling sampling = EpsSampling::AreaWeighted;
  // Optional near-field sampling of the scalar curl at fixed points.
  std::vector<Vec2> nearfield_points;
  std::vector<Complex>* nearfield_out = nullptr;  // resized to (nt+1)*points
};

namespace detail {

// Bilinear interpolation of the scalar curl field at a point.
inline double interp_curl(const TmStepper& st, const RealFields& f, Vec2 p) {
  const GridSpec& g = st.grid();
  const double u = p.x / g.dx - 0.5, v = p.y / g.dy - 0.5;
  const int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(v));
  if (i0 < 0 || j0 < 0 || i0 + 1 >= g.nx || j0 + 1 >= g.ny)
    raise(ErrorCode::ProbeOutsideDomain, "probe point outside the cell-center hull");
  const double fu = u - i0, fv = v - j0;
  const double c00 = st.curl_cell(f, i0, j0), c10 = st.curl_cell(f, i0 + 1, j0);
  const double c01 = st.curl_cell(f, i0, j0 + 1), c11 = st.curl_cell(f, i0 + 1, j0 + 1);
  return (1 - fu) * (1 - fv) * c00 + fu * (1 - fv) * c10 + (1 - fu) * fv * c01 + fu * fv * c11;
}

inline void run_incident_part(const TmStepper& st, const Gamma& gm, const IncidentPart& inc,
                              const ForwardOptions& opt, std::vector<double>& trace_out,
                              std::vector<double>* nf_out) {
  const GridSpec& g = st.grid();
  RealFields f = RealFields::zeros(g);
  fill_incident_state(g, inc, f);
  const int np = gm.size();
  trace_out.assign(static_cast<size_t>(g.nt + 1) * np, 0.0);
  const int nnf = static_cast<int>(opt.nearfield_points.size());
  if (nf_out) nf_out->assign(static_cast<size_t>(g.nt + 1) * std::max(nnf, 1), 0.0);
  for (int n = 0;; ++n) {
    detail::set_incident_boundary(g, gm, inc, n * g.dt, f);
    extract_trace(st, f, gm, &trace_out[static_cast<size_t>(n) * np]);
    if (nf_out)
      for (int q = 0; q < nnf; ++q)
        (*nf_out)[static_cast<size_t>(n) * nnf + q] = interp_curl(st, f, opt.nearfield_points[q]);
    if (n == g.nt) break;
    st.step_e(f);
    st.step_h(f);
    if ((n & 63) == 0) detail::check_finite(f, n);
  }
}

}  // namespace detail

inline BoundaryTrace run_forward(const ValidatedScene& vs, const PlaneWaveProbe& probe,
                                 const GridSpec& grid, const ForwardOptions& opt = {}) {
  const Scene& scene = vs.get();
  grid.require_cfl(scene.mu0, scene.eps_min());
  TmStepper st(grid, scene.mu0, build_eps_grid(scene, grid, opt.sampling));
  const Gamma gm = Gamma::full_boundary(grid);

  BoundaryTrace tr;
  tr.gamma = gm;
  tr.dt = grid.dt;
  tr.nt = grid.nt;
  tr.grid_hash = grid.hash();
  tr.values.assign(static_cast<size_t>(grid.nt + 1) * gm.size(), Complex{0.0, 0.0});

  std::vector<double> part, nf_part;
  const int nnf = static_cast<int>(opt.nearfield_points.size());
  if (opt.nearfield_out)
    opt.nearfield_out->assign(static_cast<size_t>(grid.nt + 1) * nnf, Complex{0.0, 0.0});
  for (int im = 0; im < 2; ++im) {
    detail::IncidentPart inc{&scene, &probe, im == 1};
    detail::run_incident_part(st, gm, inc, opt, part, opt.nearfield_out ? &nf_part : nullptr);
    const Complex unit = (im == 0) ? Complex{1.0, 0.0} : Complex{0.0, 1.0};
    for (size_t q = 0; q < tr.values.size(); ++q) tr.values[q] += unit * part[q];
    if (opt.nearfield_out)
      for (size_t q = 0; q < opt.nearfield_out->size(); ++q) (*opt.nearfield_out)[q] += unit * nf_part[q];
  }
  return tr;
}

inline BoundaryTrace run_background(const Scene& scene_params, const PlaneWaveProbe& probe,
                                    const GridSpec& grid, const ForwardOptions& opt = {}) {
  Scene bg = scene_params;
  bg.inclusions.clear();
  return run_forward(ValidatedScene(bg), probe, grid, opt);
}

inline BoundaryTrace trace_difference(const BoundaryTrace& fwd, const BoundaryTrace& bg) {
  if (fwd.values.size() != bg.values.size() || fwd.nt != bg.nt)
    raise(ErrorCode::GridMismatch, "trace difference requires matching grids");
  BoundaryTrace d = fwd;
  for (size_t q = 0; q < d.values.size(); ++q) d.values[q] -= bg.values[q];
  return d;
}

// --------------------------------------------------------------------------
// Near-field probe and the asymptotic evaluator
// --------------------------------------------------------------------------

struct NearFieldSeries {
  std::vector<double> angles;
  std::vector<Vec2> points;   // physical probe locations
  std::vector<Vec2> normals;  // unit-frame outward normals at the angles
  double dt = 0.0;
  int nt = 0;
  std::vector<Complex> values;  // (nt+1) x angles
  Complex at(int n, int q) const { return values[static_cast<size_t>(n) * angles.size() + q]; }
};

namespace detail {

inline void shape_point_normal(const Inclusion& inc, double theta, Vec2& y, Vec2& nu) {
  const double a = inc.kind == ShapeKind::Disk ? inc.radius : inc.a;
  const double b = inc.kind == ShapeKind::Disk ? inc.radius : inc.b;
  const double ang = inc.kind == ShapeKind::Disk ? 0.0 : inc.angle;
  const double c = std::cos(theta), s = std::sin(theta);
  y = rotate(Vec2{a * c, b * s}, ang);
  const Vec2 dp = rotate(Vec2{-a * s, b * c}, ang);
  const Vec2 tau = dp / norm(dp);
  nu = {tau.y, -tau.x};
}

}  // namespace detail

// Scalar curl of the alpha-field sampled one grid cell outside the scaled
// inclusion boundary (2D scalar identification of the normal-trace reading).
inline NearFieldSeries near_field_probe(const ValidatedScene& vs, const PlaneWaveProbe& probe,
                                        const GridSpec& grid, int j,
                                        const std::vector<double>& angles, double offset_cells = 1.0) {
  const Scene& scene = vs.get();
  if (j < 0 || j >= static_cast<int>(scene.inclusions.size()))
    raise(ErrorCode::ProbeOutsideDomain, "no such inclusion");
  const Inclusion& inc = scene.inclusions[j];
  const double h = std::max(grid.dx, grid.dy);

  NearFieldSeries out;
  out.angles = angles;
  out.dt = grid.dt;
  out.nt = grid.nt;
  ForwardOptions opt;
  for (const double th : angles) {
    Vec2 y, nu;
    detail::shape_point_normal(inc, th, y, nu);
    const Vec2 p = inc.center + scene.alpha * y + (offset_cells * h) * nu;
    if (!grid.domain.contains(p)) raise(ErrorCode::ProbeOutsideDomain, "probe point left the domain");
    out.points.push_back(p);
    out.normals.push_back(nu);
    opt.nearfield_points.push_back(p);
  }
  opt.nearfield_out = &out.values;
  run_forward(vs, probe, grid, opt);
  return out;
}

enum class NearFieldContraction {
  TmScalar,         // 2D reading: the corrector term contracts to zero
  NormalComponent,  // literal normal-component reading of the corrector
};

// Evaluates the leading-order near-field value at a boundary node of the
// unit-frame shape. The background curl is analytic.
class NearFieldAsymptotic {
 public:
  NearFieldAsymptotic(const Scene& scene, const PlaneWaveProbe& probe, int j, int boundary_nodes = 128)
      : probe_(probe) {
    const Inclusion& inc = scene.inclusions.at(j);
    z_ = inc.center;
    contrast_ = inc.eps / scene.eps0;
    sb_ = make_shape_boundary(inc, boundary_nodes);
    density_ = solve_transmission(sb_, contrast_);
  }

  const ShapeBoundary& boundary() const { return sb_; }

  Complex background_curl(double t) const {
    return kI * cross(probe_.eta, probe_.eta_perp) *
           std::exp(kI * (dot(probe_.eta, z_) - probe_.omega * t));
  }

  Complex value(int node, double t, NearFieldContraction mode = NearFieldContraction::TmScalar) const {
    const Complex c = background_curl(t);
    if (mode == NearFieldContraction::TmScalar) return c;
    const Vec2 dnu = phi_normal_derivative_plus(sb_, density_, node);
    return c * (1.0 + (1.0 - contrast_) * dot(dnu, sb_.normals[node]));
  }

 private:
  PlaneWaveProbe probe_;
  Vec2 z_;
  double contrast_ = 1.0;
  ShapeBoundary sb_;
  LayerDensity density_;
};

}  // namespace emrec
