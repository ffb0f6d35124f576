#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "emrec/errors.hpp"
#include "emrec/scene.hpp"
#include "emrec/util.hpp"

namespace emrec {

// Staggered grid layout on [0,Lx]x[0,Ly]:
//   Ez(i,j) at ((i+1/2)dx, (j+1/2)dy), i<nx, j<ny
//   Hx(i,j) at ((i+1/2)dx, j dy), j<=ny    (j=0 and j=ny lie on the boundary)
//   Hy(i,j) at (i dx, (j+1/2)dy), i<=nx    (i=0 and i=nx lie on the boundary)
struct GridSpec {
  Domain domain;
  int nx = 0, ny = 0;
  double dx = 0.0, dy = 0.0;
  double dt = 0.0;
  int nt = 0;
  double cfl = 0.9;
  double T = 0.0;

  static GridSpec make(const Domain& dom, int nx, int ny, double cfl, double T, double mu0,
                       double eps_min) {
    if (!(cfl > 0.0 && cfl <= 0.95)) raise(ErrorCode::CflViolation, "cfl must be in (0, 0.95]");
    if (nx < 4 || ny < 4) raise(ErrorCode::CflViolation, "grid too small");
    if (!(T > 0.0)) raise(ErrorCode::CflViolation, "final time must be positive");
    GridSpec g;
    g.domain = dom;
    g.nx = nx;
    g.ny = ny;
    g.dx = dom.lx / nx;
    g.dy = dom.ly / ny;
    g.cfl = cfl;
    g.T = T;
    const double dt_max = cfl * std::min(g.dx, g.dy) * std::sqrt(mu0 * eps_min) / std::sqrt(2.0);
    g.nt = static_cast<int>(std::ceil(T / dt_max - 1e-12));
    g.dt = T / g.nt;
    return g;
  }

  void require_cfl(double mu0, double eps_min) const {
    const double dt_max = 0.95 * std::min(dx, dy) * std::sqrt(mu0 * eps_min) / std::sqrt(2.0);
    if (dt > dt_max * (1.0 + 1e-12)) raise(ErrorCode::CflViolation, "time step exceeds CFL bound");
  }

  int cells() const { return nx * ny; }
  Vec2 cell_center(int i, int j) const { return {(i + 0.5) * dx, (j + 0.5) * dy}; }

  std::string content_key() const {
    std::ostringstream os;
    os << nx << "," << ny << "," << double_bits(domain.lx) << double_bits(domain.ly)
       << double_bits(dt) << nt;
    return os.str();
  }
  uint64_t hash() const { return fnv1a64(content_key()); }
};

// Ordered boundary sampling, counterclockwise from the origin. Points sit at
// the midpoints of the boundary faces, which is where the tangential H values
// of the scheme live. The stored scalar convention for tangential data is the
// component along tau = rot90(nu).
struct Gamma {
  enum Side { Bottom = 0, Right = 1, Top = 2, Left = 3 };
  struct Face {
    Side side;
    int index;  // face index along its side
  };

  std::vector<Vec2> points;
  std::vector<Vec2> normals;
  std::vector<Vec2> tangents;
  std::vector<double> weights;  // segment lengths
  std::vector<double> arclen;   // midpoint arc-length parameter
  std::vector<Face> faces;

  int size() const { return static_cast<int>(points.size()); }
  double total_length() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  static Gamma full_boundary(const GridSpec& g) {
    Gamma gm;
    const int n = 2 * (g.nx + g.ny);
    gm.points.reserve(n);
    double s = 0.0;
    auto push = [&](Vec2 p, Vec2 nu, double w, Side side, int idx) {
      gm.points.push_back(p);
      gm.normals.push_back(nu);
      gm.tangents.push_back(rot90(nu));
      gm.weights.push_back(w);
      gm.arclen.push_back(s + 0.5 * w);
      gm.faces.push_back({side, idx});
      s += w;
    };
    for (int i = 0; i < g.nx; ++i) push({(i + 0.5) * g.dx, 0.0}, {0.0, -1.0}, g.dx, Bottom, i);
    for (int j = 0; j < g.ny; ++j) push({g.domain.lx, (j + 0.5) * g.dy}, {1.0, 0.0}, g.dy, Right, j);
    for (int i = g.nx - 1; i >= 0; --i) push({(i + 0.5) * g.dx, g.domain.ly}, {0.0, 1.0}, g.dx, Top, i);
    for (int j = g.ny - 1; j >= 0; --j) push({0.0, (j + 0.5) * g.dy}, {-1.0, 0.0}, g.dy, Left, j);
    return gm;
  }

  std::string content_key() const {
    std::ostringstream os;
    os << size();
    if (!points.empty())
      os << double_bits(points.front().x) << double_bits(points.front().y) << double_bits(total_length());
    return os.str();
  }
};

}  // namespace emrec
