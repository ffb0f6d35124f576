#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "emrec/imaging.hpp"

using namespace emrec;
using Catch::Matchers::WithinAbs;

namespace {

const double kPi = 4.0 * std::atan(1.0);

FunctionalGrid synthetic_grid(const EtaGrid& eg, const std::function<Complex(Vec2)>& f) {
  FunctionalGrid fg = FunctionalGrid::empty(eg);
  for (int j = 0; j < eg.n_eta; ++j)
    for (int i = 0; i < eg.n_eta; ++i) {
      if (eg.is_origin(i, j)) continue;
      fg.values[static_cast<size_t>(j) * eg.n_eta + i] = f(eg.node(i, j));
      fg.done[static_cast<size_t>(j) * eg.n_eta + i] = 1;
    }
  return fg;
}

ThetaFunction synthetic_theta(int nt, double dt, const std::function<Complex(double)>& th,
                              const std::function<Complex(double)>& dth,
                              const std::function<Complex(double)>& ddth) {
  ThetaFunction out;
  out.nt = nt;
  out.dt = dt;
  out.npoints = 1;
  out.omega = 1.0;
  out.theta.resize(nt + 1);
  out.dtheta.resize(nt + 1);
  out.ddtheta.resize(nt + 1);
  for (int q = 0; q <= nt; ++q) {
    out.theta[q] = th(q * dt);
    out.dtheta[q] = dth(q * dt);
    out.ddtheta[q] = ddth(q * dt);
  }
  return out;
}

BoundaryTrace one_point_trace(int nt, double dt, const std::function<Complex(double)>& s) {
  BoundaryTrace tr;
  tr.nt = nt;
  tr.dt = dt;
  tr.gamma.points = {{0.0, 0.0}};
  tr.gamma.normals = {{0.0, -1.0}};
  tr.gamma.tangents = {{1.0, 0.0}};
  tr.gamma.weights = {1.0};
  tr.gamma.arclen = {0.5};
  tr.gamma.faces = {{Gamma::Bottom, 0}};
  tr.values.resize(nt + 1);
  for (int q = 0; q <= nt; ++q) tr.values[q] = s(q * dt);
  return tr;
}

}  // namespace

TEST_CASE("functional value reproduces a closed-form time integral") {
  // s = sin(pi t / T), theta = t (so theta'' = 0): integral = T^2 / pi.
  const double T = 2.0;
  const int nt = 400;
  const double dt = T / nt;
  const auto th = synthetic_theta(
      nt, dt, [](double t) { return Complex{t, 0.0}; }, [](double) { return Complex{1.0, 0.0}; },
      [](double) { return Complex{0.0, 0.0}; });
  const auto tr = one_point_trace(nt, dt, [&](double t) { return Complex{std::sin(kPi * t / T), 0.0}; });
  const Complex v = functional_value(th, tr);
  REQUIRE_THAT(v.real(), WithinAbs(T * T / kPi, 1e-9));
  REQUIRE_THAT(v.imag(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("functional value vanishes for zero inputs") {
  const int nt = 100;
  const double dt = 0.01;
  const auto th0 = synthetic_theta(
      nt, dt, [](double) { return Complex{0.0, 0.0}; }, [](double) { return Complex{0.0, 0.0}; },
      [](double) { return Complex{0.0, 0.0}; });
  const auto tr = one_point_trace(nt, dt, [](double t) { return Complex{t, -t}; });
  REQUIRE(functional_value(th0, tr) == Complex{0.0, 0.0});
  const auto th = synthetic_theta(
      nt, dt, [](double t) { return Complex{t, 0.0}; }, [](double) { return Complex{1.0, 0.0}; },
      [](double) { return Complex{0.0, 0.0}; });
  const auto tr0 = one_point_trace(nt, dt, [](double) { return Complex{0.0, 0.0}; });
  REQUIRE(functional_value(th, tr0) == Complex{0.0, 0.0});
}

TEST_CASE("localize recovers a pure exponential to a milliunit") {
  const EtaGrid eg{10.0, 21};
  const Vec2 z{0.3, 0.2};
  const auto fg = synthetic_grid(eg, [&](Vec2 e) { return std::exp(2.0 * kI * dot(e, z)); });
  const auto peaks = localize(fg, 0.3);
  REQUIRE(peaks.size() == 1);
  REQUIRE(norm(peaks[0].z - z) < 1e-3);
}

TEST_CASE("localize raises on an empty field") {
  const EtaGrid eg{10.0, 21};
  const auto fg = synthetic_grid(eg, [](Vec2) { return Complex{0.0, 0.0}; });
  REQUIRE_THROWS_AS(localize(fg, 0.3), Error);
}

TEST_CASE("localize separates two quadratic-form sources") {
  const EtaGrid eg{10.0, 21};
  const Vec2 z1{0.3, 0.5}, z2{0.7, 0.5};
  auto q1 = [](Vec2 e) { return e.x * e.x + 0.4 * e.x * e.y + 0.8 * e.y * e.y; };
  auto q2 = [](Vec2 e) { return 0.6 * e.x * e.x - 0.2 * e.x * e.y + 1.1 * e.y * e.y; };
  const auto fg = synthetic_grid(eg, [&](Vec2 e) {
    return q1(e) * std::exp(2.0 * kI * dot(e, z1)) + q2(e) * std::exp(2.0 * kI * dot(e, z2));
  });
  auto peaks = localize(fg, 0.3);
  REQUIRE(peaks.size() == 2);
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.z.x < b.z.x; });
  REQUIRE(norm(peaks[0].z - z1) < 5e-3);
  REQUIRE(norm(peaks[1].z - z2) < 5e-3);
}

TEST_CASE("localization ignores a global complex scale") {
  const EtaGrid eg{8.0, 17};
  const Vec2 z{0.45, 0.35};
  const auto fg = synthetic_grid(
      eg, [&](Vec2 e) { return (1.0 + norm2(e)) * std::exp(2.0 * kI * dot(e, z)); });
  FunctionalGrid scaled = fg;
  const Complex c{-1.7, 2.4};
  for (auto& v : scaled.values) v *= c;
  const auto p1 = localize(fg, 0.3);
  const auto p2 = localize(scaled, 0.3);
  REQUIRE(p1.size() == p2.size());
  REQUIRE(norm(p1[0].z - p2[0].z) < 1e-12);
}

TEST_CASE("localization is translation covariant on model data") {
  const EtaGrid eg{8.0, 17};
  const Vec2 z{0.4, 0.3}, v{0.07, -0.11};
  auto amp = [](Vec2 e) { return 1.0 + 0.2 * e.x * e.x + 0.1 * e.y * e.y; };
  const auto f1 = synthetic_grid(eg, [&](Vec2 e) { return amp(e) * std::exp(2.0 * kI * dot(e, z)); });
  const auto f2 =
      synthetic_grid(eg, [&](Vec2 e) { return amp(e) * std::exp(2.0 * kI * dot(e, z + v)); });
  const auto p1 = localize(f1, 0.3);
  const auto p2 = localize(f2, 0.3);
  REQUIRE(norm((p2[0].z - p1[0].z) - v) < 1e-6);
}

TEST_CASE("peaks near the periodic cell boundary are flagged") {
  const EtaGrid eg{10.0, 21};  // period 2 pi, cell [-pi, pi)
  const Vec2 z{0.5 * kPi - 0.005, 0.1};
  const auto fg = synthetic_grid(eg, [&](Vec2 e) { return std::exp(2.0 * kI * dot(e, z)); });
  REQUIRE_THROWS_AS(localize(fg, 0.3), Error);
}

TEST_CASE("nyquist violation is rejected") {
  const EtaGrid eg{10.0, 5};  // spacing 5 on a unit square target band
  REQUIRE_THROWS_AS(eg.validate(Domain{1.0, 1.0}), Error);
}

TEST_CASE("fit model is exactly blind to isotropic tensor parts") {
  // Dyadic entries so the shifted sums are exact and bit equality is fair.
  const Vec2 eta{1.3, -0.7}, z{0.4, 0.6};
  const std::array<Complex, 3> q{{Complex{0.75, 0.125}, Complex{-0.25, 0.0}, Complex{-0.75, -0.125}}};
  const Complex s{0.5, -0.25};
  const Complex c{2.5, 1.25};
  const std::array<Complex, 3> q_shift{{q[0] + c, q[1], q[2] + c}};
  REQUIRE(fit_model_value(eta, z, q, s) == fit_model_value(eta, z, q_shift, s));
}

TEST_CASE("fit recovers trace-free signatures from noiseless model data") {
  const EtaGrid eg{8.0, 17};
  const std::vector<Vec2> zs{{0.3, 0.5}, {0.7, 0.45}};
  const std::vector<std::array<Complex, 3>> qs{
      {{Complex{0.4, 0.0}, Complex{0.15, 0.0}, Complex{-0.4, 0.0}}},
      {{Complex{-0.2, 0.05}, Complex{0.3, -0.1}, Complex{0.2, -0.05}}}};
  const std::vector<Complex> ss{{1.1, 0.2}, {-0.6, 0.4}};
  const auto fg = synthetic_grid(eg, [&](Vec2 e) {
    return fit_model_value(e, zs[0], qs[0], ss[0]) + fit_model_value(e, zs[1], qs[1], ss[1]);
  });
  const auto fit = fit_tensors(fg, zs);
  REQUIRE(fit.residual < 1e-10);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(std::abs(fit.deviatoric[k][0] - qs[k][0]) < 1e-6 * std::abs(qs[k][0]));
    REQUIRE(std::abs(fit.deviatoric[k][1] - qs[k][1]) < 1e-6 * std::abs(qs[k][1]));
    REQUIRE(std::abs(fit.monopole[k] - ss[k]) < 1e-6 * std::abs(ss[k]));
  }
}

TEST_CASE("isotropic-only data leaves the deviatoric fit empty") {
  const EtaGrid eg{8.0, 17};
  const Vec2 z{0.5, 0.5};
  const auto fg =
      synthetic_grid(eg, [&](Vec2 e) { return norm2(e) * std::exp(2.0 * kI * dot(e, z)); });
  // Without the monopole channel the model cannot represent the data at all.
  FitOptions opts;
  opts.include_monopole = false;
  const auto fit = fit_tensors(fg, {z}, opts);
  REQUIRE(fit.residual > 0.99);
  REQUIRE(std::abs(fit.deviatoric[0][0]) < 1e-10);
  REQUIRE(std::abs(fit.deviatoric[0][1]) < 1e-10);
  // With it the data is explained exactly.
  const auto fit2 = fit_tensors(fg, {z});
  REQUIRE(fit2.residual < 1e-12);
}

TEST_CASE("permuting locations permutes the fitted tensors") {
  const EtaGrid eg{8.0, 17};
  const std::vector<Vec2> zs{{0.3, 0.5}, {0.7, 0.45}};
  const std::vector<std::array<Complex, 3>> qs{
      {{Complex{0.4, 0.0}, Complex{0.15, 0.0}, Complex{-0.4, 0.0}}},
      {{Complex{-0.1, 0.0}, Complex{0.3, 0.0}, Complex{0.1, 0.0}}}};
  const auto fg = synthetic_grid(eg, [&](Vec2 e) {
    return fit_model_value(e, zs[0], qs[0], {1.0, 0.0}) + fit_model_value(e, zs[1], qs[1], {1.0, 0.0});
  });
  const auto fit_ab = fit_tensors(fg, zs);
  const auto fit_ba = fit_tensors(fg, {zs[1], zs[0]});
  REQUIRE(std::abs(fit_ab.deviatoric[0][0] - fit_ba.deviatoric[1][0]) < 1e-9);
  REQUIRE(std::abs(fit_ab.deviatoric[1][1] - fit_ba.deviatoric[0][1]) < 1e-9);
}

TEST_CASE("coincident locations make the fit ill conditioned") {
  const EtaGrid eg{4.0, 9};
  const Vec2 z{0.5, 0.5};
  const auto fg = synthetic_grid(eg, [&](Vec2 e) { return norm2(e) * std::exp(2.0 * kI * dot(e, z)); });
  REQUIRE_THROWS_AS(fit_tensors(fg, {z, z}), Error);
}

TEST_CASE("functional grid round trips through the artifact format") {
  const EtaGrid eg{4.0, 9};
  auto fg = synthetic_grid(eg, [](Vec2 e) { return Complex{e.x, e.y}; });
  fg.scene_hash = 0x1234;
  fg.grid_hash = 0x5678;
  const auto path = std::filesystem::temp_directory_path() / "emrec_fgrid_test.bin";
  save_fgrid(path, fg);
  const auto loaded = load_fgrid(path);
  REQUIRE(loaded.values == fg.values);
  REQUIRE(loaded.done == fg.done);
  REQUIRE(loaded.grid.n_eta == fg.grid.n_eta);
  std::filesystem::remove(path);
}

TEST_CASE("pipeline functional matches the quadratic monopole model end to end") {
  // Simulated functional for a small disk against the leading-order model
  // alpha^2 (eps_j - eps0) |B| |eta|^2 e^{2 i eta.z} (tau convention sign).
  Pipeline pipe;
  pipe.scene.domain = {1.0, 1.0};
  pipe.scene.eps0 = 1.0;
  pipe.scene.mu0 = 1.0;
  pipe.scene.c0 = 0.2;
  pipe.scene.cutoff = {0.08, 0.12};
  pipe.scene.alpha = 0.06;
  Inclusion d;
  d.center = {0.45, 0.55};
  d.radius = 1.0;
  d.eps = 2.0;
  pipe.scene.inclusions = {d};
  pipe.control_spec = GeometricControlSpec::full_boundary(pipe.scene.domain, 1.0, 1.0);
  pipe.grid = GridSpec::make(pipe.scene.domain, 48, 48, 0.9, pipe.control_spec.T, 1.0, 1.0);
  pipe.cache_dir = std::filesystem::temp_directory_path() / "emrec_pipe_test_cache";
  pipe.threads = 2;
  std::filesystem::remove_all(pipe.cache_dir);

  const EtaGrid eg{2.0, 5};
  const auto fg = sample_functional(pipe, eg);
  REQUIRE(fg.complete());
  double worst = 0.0;
  for (int j = 0; j < eg.n_eta; ++j)
    for (int i = 0; i < eg.n_eta; ++i) {
      if (eg.is_origin(i, j)) continue;
      const Vec2 e = eg.node(i, j);
      const Complex model = pipe.scene.alpha * pipe.scene.alpha * (d.eps - pipe.scene.eps0) *
                            kPi * norm2(e) * std::exp(2.0 * kI * dot(e, d.center));
      worst = std::max(worst, std::abs(fg.at(i, j) - model) / std::abs(model));
    }
  INFO("worst relative model error " << worst);
  // Leading-order model; the slowest lattice modes carry the largest
  // corrections at this resolution.
  REQUIRE(worst < 0.6);
  std::filesystem::remove_all(pipe.cache_dir);
}
