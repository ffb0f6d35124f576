#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emrec/potential.hpp"

using namespace emrec;
using Catch::Matchers::WithinAbs;

namespace {

const double kPi = 4.0 * std::atan(1.0);

// Separation-of-variables oracle on the unit disk: Phi^(l) = b y_l inside,
// b y_l / |y|^2 outside, with b = 1/(1+k). Exterior normal derivative is
// -b nu_l and the true single-layer density is 2 b nu_l.
struct DiskOracle {
  double contrast;
  double b() const { return 1.0 / (1.0 + contrast); }
  double density_rescaled(Vec2 nu, int l) const {
    return 2.0 * b() * (contrast - 1.0) * (l == 0 ? nu.x : nu.y);
  }
  double dnu_phi_plus(Vec2 nu, int l) const { return -b() * (l == 0 ? nu.x : nu.y); }
  double tensor_diag() const { return 2.0 * kPi / (1.0 + contrast); }
};

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1e-300, std::abs(want)); }

}  // namespace

TEST_CASE("shape boundary weights sum to the perimeter") {
  const auto coarse = make_ellipse_boundary(2.0, 1.0, 0.3, 128);
  const auto fine = make_ellipse_boundary(2.0, 1.0, 0.3, 256);
  REQUIRE(rel_err(coarse.perimeter(), fine.perimeter()) < 1e-10);
  for (int m = 0; m < coarse.n; ++m) REQUIRE_THAT(norm(coarse.normals[m]), WithinAbs(1.0, 1e-12));
}

TEST_CASE("zero contrast jump gives identically zero density") {
  const auto sb = make_ellipse_boundary(1.7, 0.6, 0.9, 64);
  const auto d = solve_transmission(sb, 1.0);
  for (int l = 0; l < 2; ++l)
    for (double v : d.values[l]) REQUIRE(v == 0.0);
  const Vec2 q = phi_normal_derivative_plus(sb, d, 17);
  REQUIRE(q.x == 0.0);
  REQUIRE(q.y == 0.0);
}

TEST_CASE("unit disk density matches the separation-of-variables oracle") {
  const double k = 3.0;
  const DiskOracle oracle{k};
  const auto sb = make_disk_boundary(1.0, 128);
  const auto d = solve_transmission(sb, k);
  double worst = 0.0;
  for (int m = 0; m < sb.n; ++m)
    for (int l = 0; l < 2; ++l)
      worst = std::max(worst, std::abs(d.values[l][m] - oracle.density_rescaled(sb.normals[m], l)));
  REQUIRE(worst < 1e-10);
}

TEST_CASE("unit disk exterior normal derivative at angle zero is -1/4 for k=3") {
  const auto sb = make_disk_boundary(1.0, 128);
  const auto d = solve_transmission(sb, 3.0);
  const Vec2 q = phi_normal_derivative_plus(sb, d, 0);  // node 0 sits at angle 0
  REQUIRE_THAT(q.x, WithinAbs(-0.25, 1e-10));
  REQUIRE_THAT(q.y, WithinAbs(0.0, 1e-10));
}

TEST_CASE("flux jump condition residual is small at every node") {
  const auto sb = make_ellipse_boundary(2.0, 1.0, 0.4, 192);
  const double k = 2.5;
  const auto d = solve_transmission(sb, k);
  // Interior trace: dPhi/dnu|int = (psi/2 + K* psi) / (k-1).
  double worst = 0.0;
  for (int m = 0; m < sb.n; ++m) {
    const Vec2 ext = phi_normal_derivative_plus(sb, d, m);
    Vec2 interior;
    for (int l = 0; l < 2; ++l) {
      double v = 0.5 * d.values[l][m];
      for (int j = 0; j < sb.n; ++j)
        v += detail::kstar_kernel(sb, m, j) * sb.weights[j] * d.values[l][j];
      (l == 0 ? interior.x : interior.y) = v / (k - 1.0);
    }
    const Vec2 resid = k * ext - interior + sb.normals[m];
    worst = std::max(worst, std::max(std::abs(resid.x), std::abs(resid.y)));
  }
  REQUIRE(worst < 1e-8);
}

TEST_CASE("ellipse density is spectrally converged by N=128") {
  const auto c = make_ellipse_boundary(2.0, 1.0, 0.0, 128);
  const auto f = make_ellipse_boundary(2.0, 1.0, 0.0, 256);
  const auto dc = solve_transmission(c, 2.0);
  const auto df = solve_transmission(f, 2.0);
  // Nodes of the coarse grid are every second node of the fine grid.
  double worst = 0.0;
  for (int m = 0; m < c.n; ++m)
    for (int l = 0; l < 2; ++l)
      worst = std::max(worst, std::abs(dc.values[l][m] - df.values[l][2 * m]));
  REQUIRE(worst < 1e-8);
}

TEST_CASE("disk polarization tensor matches the analytic value at N=256") {
  for (const double k : {0.5, 2.0, 3.0, 10.0}) {
    const auto sb = make_disk_boundary(1.0, 256);
    const auto t = polarization_tensor(sb, k);
    const auto ref = disk_tensor_analytic(1.0, k);
    REQUIRE(rel_err(t.m11, ref.m11) < 1e-6);
    REQUIRE(rel_err(t.m22, ref.m22) < 1e-6);
    REQUIRE(std::abs(t.m12) / ref.m11 < 1e-8);
  }
}

TEST_CASE("disk tensor analytic special values") {
  const auto t1 = disk_tensor_analytic(1.0, 1.0);
  REQUIRE_THAT(t1.m11, WithinAbs(kPi, 1e-14));
  const auto t3 = disk_tensor_analytic(1.0, 3.0);
  REQUIRE_THAT(t3.m11, WithinAbs(kPi / 2.0, 1e-14));
  const auto th = disk_tensor_analytic(0.5, 2.0);
  REQUIRE_THAT(th.m11, WithinAbs(kPi / 6.0, 1e-14));
}

TEST_CASE("contrast one gives |B| I by the divergence theorem") {
  const auto sb = make_ellipse_boundary(1.4, 0.7, 1.1, 256);
  const auto t = polarization_tensor(sb, 1.0);
  const double area = kPi * 1.4 * 0.7;
  REQUIRE(rel_err(t.m11, area) < 1e-8);
  REQUIRE(rel_err(t.m22, area) < 1e-8);
  REQUIRE(std::abs(t.m12) / area < 1e-8);
}

TEST_CASE("ellipse tensor matches the closed form and is diagonal in its frame") {
  const double a = 2.0, b = 1.0, k = 2.0;
  const auto sb = make_ellipse_boundary(a, b, 0.0, 256);
  const auto t = polarization_tensor(sb, k);
  const auto ref = ellipse_tensor_analytic(a, b, 0.0, k);
  REQUIRE(rel_err(t.m11, ref.m11) < 1e-8);
  REQUIRE(rel_err(t.m22, ref.m22) < 1e-8);
  REQUIRE(std::abs(t.m12) / ref.m11 < 1e-8);
  REQUIRE(t.m11 != t.m22);
}

TEST_CASE("tensor is symmetric positive definite across contrasts") {
  for (const double k : {0.1, 0.5, 2.0, 10.0}) {
    const auto sb = make_ellipse_boundary(1.8, 0.9, 0.7, 192);
    const auto t = polarization_tensor(sb, k);
    REQUIRE(t.asymmetry <= 1e-8 * std::abs(t.m11));
    const double tr = t.m11 + t.m22;
    const double det = t.m11 * t.m22 - t.m12 * t.m12;
    REQUIRE(tr > 0.0);
    REQUIRE(det > 0.0);  // both eigenvalues positive
  }
}

TEST_CASE("tensor transforms equivariantly under rotation") {
  const double a = 2.0, b = 1.0, k = 3.0, phi = 0.65;
  const auto t0 = polarization_tensor(make_ellipse_boundary(a, b, 0.0, 256), k);
  const auto tr = polarization_tensor(make_ellipse_boundary(a, b, phi, 256), k);
  const double c = std::cos(phi), s = std::sin(phi);
  const double r11 = c * c * t0.m11 + s * s * t0.m22;
  const double r22 = s * s * t0.m11 + c * c * t0.m22;
  const double r12 = c * s * (t0.m11 - t0.m22);
  const double scale = std::abs(t0.m11);
  REQUIRE(std::abs(tr.m11 - r11) / scale < 1e-8);
  REQUIRE(std::abs(tr.m22 - r22) / scale < 1e-8);
  REQUIRE(std::abs(tr.m12 - r12) / scale < 1e-8);
}

TEST_CASE("tensor scales like s^2 in 2D") {
  const double s = 1.7, k = 4.0;
  const auto t1 = polarization_tensor(make_ellipse_boundary(1.2, 0.8, 0.3, 192), k);
  const auto ts = polarization_tensor(make_ellipse_boundary(s * 1.2, s * 0.8, 0.3, 192), k);
  REQUIRE(std::abs(ts.m11 - s * s * t1.m11) / (s * s * t1.m11) < 1e-8);
  REQUIRE(std::abs(ts.m22 - s * s * t1.m22) / (s * s * t1.m22) < 1e-8);
}

TEST_CASE("non-positive contrast is rejected") {
  const auto sb = make_disk_boundary(1.0, 32);
  REQUIRE_THROWS_AS(solve_transmission(sb, -2.0), Error);
  REQUIRE_THROWS_AS(disk_tensor_analytic(1.0, 0.0), Error);
}
