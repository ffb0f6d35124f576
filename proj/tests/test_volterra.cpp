#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "emrec/volterra.hpp"

using namespace emrec;
using Catch::Matchers::WithinAbs;

namespace {

// Minimal one-point control series for synthetic tests.
ControlFunction synthetic_control(const std::function<Complex(double)>& g_of, double T, int nt) {
  ControlFunction g;
  g.dt = T / nt;
  g.nt = nt;
  // One boundary point of unit weight.
  g.gamma.points = {{0.0, 0.0}};
  g.gamma.normals = {{0.0, -1.0}};
  g.gamma.tangents = {{1.0, 0.0}};
  g.gamma.weights = {1.0};
  g.gamma.arclen = {0.5};
  g.gamma.faces = {{Gamma::Bottom, 0}};
  g.values.resize(nt + 1);
  for (int q = 0; q <= nt; ++q) g.values[q] = g_of(q * g.dt);
  return g;
}

// Independent route: second-order finite differences for
// theta'' - theta = F, theta(0) = 0, theta'(T) = 0, with analytic F.
Complex fd_bvp_theta_at_T(const std::function<Complex(double)>& F, double T, int n) {
  const double h = T / n;
  std::vector<Complex> diag(n + 1), rhs(n + 1);
  std::vector<double> lower(n + 1, 1.0 / (h * h)), upper(n + 1, 1.0 / (h * h));
  diag[0] = 1.0;
  upper[0] = 0.0;
  rhs[0] = 0.0;
  for (int i = 1; i < n; ++i) {
    diag[i] = -2.0 / (h * h) - 1.0;
    rhs[i] = F(i * h);
  }
  // Ghost elimination of theta'(T)=0: theta_{n+1} = theta_{n-1}.
  lower[n] = 2.0 / (h * h);
  diag[n] = -2.0 / (h * h) - 1.0;
  rhs[n] = F(T);
  for (int i = 1; i <= n; ++i) {
    const Complex w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  return rhs[n] / diag[n];
}

}  // namespace

TEST_CASE("zero control gives the zero kernel") {
  const auto g = synthetic_control([](double) { return Complex{0.0, 0.0}; }, 1.0, 64);
  const auto th = solve_theta(g, 2.0);
  for (const auto& v : th.theta) REQUIRE(v == Complex{0.0, 0.0});
  for (const auto& v : th.dtheta) REQUIRE(v == Complex{0.0, 0.0});
  REQUIRE(volterra_residual(th, g, 2.0) == 0.0);
}

TEST_CASE("pure phase control is in the kernel of the source term") {
  // g = e^{i w t}: the demodulated signal is constant, so F == 0 and theta == 0.
  const double w = 3.0;
  const auto g = synthetic_control([&](double t) { return std::exp(kI * w * t); }, 2.0, 200);
  const auto th = solve_theta(g, w);
  double worst = 0.0;
  for (const auto& v : th.theta) worst = std::max(worst, std::abs(v));
  for (const auto& v : th.dtheta) worst = std::max(worst, std::abs(v));
  REQUIRE(worst <= 1e-12);
}

TEST_CASE("linear-in-time control matches the analytic and finite-difference routes") {
  const double w = 2.0, T = 1.0;
  const auto g = synthetic_control([](double t) { return Complex{t, 0.0}; }, T, 400);
  const auto th = solve_theta(g, w);
  // Analytic: F = 1 - i w t; theta_p = (cosh t - 1) - i w (sinh t - t).
  const Complex tp = (std::cosh(T) - 1.0) - kI * w * (std::sinh(T) - T);
  const Complex tpd = std::sinh(T) - kI * w * (std::cosh(T) - 1.0);
  const Complex analytic = tp - std::tanh(T) * tpd;
  REQUIRE(std::abs(th.at(th.nt, 0) - analytic) < 1e-9);

  const Complex fd = fd_bvp_theta_at_T([&](double t) { return Complex{1.0, -w * t}; }, T, 40000);
  REQUIRE(std::abs(th.at(th.nt, 0) - fd) < 1e-7);
  REQUIRE(std::abs(analytic - fd) < 1e-7);
}

TEST_CASE("windowed smooth control satisfies the Volterra equation to quadrature accuracy") {
  const double T = 3.0;
  for (const double w : {1.0, 4.0, 11.0}) {
    const auto g = synthetic_control(
        [&](double t) {
          const double win = std::sin(4.0 * std::atan(1.0) * t / T);
          return (1.0 + 0.3 * kI) * win * win * std::exp(-kI * w * t);
        },
        T, 320);
    const auto th = solve_theta(g, w);
    const double resid = volterra_residual(th, g, w);
    INFO("w=" << w << " residual=" << resid);
    REQUIRE(resid < 1e-9);
  }
}

TEST_CASE("boundary conditions hold to machine precision") {
  const double T = 2.0, w = 5.0;
  const auto g = synthetic_control(
      [&](double t) {
        const double win = std::sin(4.0 * std::atan(1.0) * t / T);
        return win * win * std::exp(-kI * w * t) * (0.7 - 0.2 * kI);
      },
      T, 250);
  const auto th = solve_theta(g, w);
  double scale = 0.0;
  for (const auto& v : th.theta) scale = std::max(scale, std::abs(v));
  REQUIRE(std::abs(th.at(0, 0)) <= 1e-12 * scale);
  REQUIRE(std::abs(th.dt_at(th.nt, 0)) <= 1e-12 * std::max(scale, 1.0));
}

TEST_CASE("solver is linear in the control") {
  const double T = 2.0, w = 3.0;
  auto g1 = synthetic_control([&](double t) { return std::sin(t) * std::exp(-kI * w * t); }, T, 180);
  auto g2 = synthetic_control([&](double t) { return Complex{t * (T - t), 0.3 * t}; }, T, 180);
  ControlFunction gsum = g1;
  const Complex lam{0.6, -1.1};
  for (size_t q = 0; q < gsum.values.size(); ++q) gsum.values[q] = g1.values[q] + lam * g2.values[q];
  const auto t1 = solve_theta(g1, w);
  const auto t2 = solve_theta(g2, w);
  const auto ts = solve_theta(gsum, w);
  double worst = 0.0, scale = 0.0;
  for (size_t q = 0; q < ts.theta.size(); ++q) {
    worst = std::max(worst, std::abs(ts.theta[q] - (t1.theta[q] + lam * t2.theta[q])));
    scale = std::max(scale, std::abs(ts.theta[q]));
  }
  REQUIRE(worst <= 1e-10 * std::max(scale, 1.0));
}

TEST_CASE("second time derivative is consistent with a centered difference") {
  const double T = 2.0, w = 2.0;
  const auto g = synthetic_control(
      [&](double t) {
        const double win = std::sin(4.0 * std::atan(1.0) * t / T);
        return win * win * std::exp(-kI * w * t);
      },
      T, 400);
  const auto th = solve_theta(g, w);
  double worst = 0.0;
  const double h = th.dt;
  for (int q = 1; q < th.nt; ++q) {
    const Complex dd = (th.at(q + 1, 0) - 2.0 * th.at(q, 0) + th.at(q - 1, 0)) / (h * h);
    worst = std::max(worst, std::abs(dd - th.ddt_at(q, 0)));
  }
  REQUIRE(worst < 1e-2);  // O(h^2) with omega^4-scale fourth derivatives
}

TEST_CASE("perturbing theta is detected by the residual") {
  const double T = 2.0, w = 3.0;
  const auto g = synthetic_control(
      [&](double t) {
        const double win = std::sin(4.0 * std::atan(1.0) * t / T);
        return win * win * std::exp(-kI * w * t);
      },
      T, 200);
  auto th = solve_theta(g, w);
  REQUIRE(volterra_residual(th, g, w) < 1e-9);
  th.theta[100] += Complex{1e-3, 0.0};
  REQUIRE(volterra_residual(th, g, w) >= 1e-4);
}

TEST_CASE("degenerate time grids are rejected") {
  auto g = synthetic_control([](double t) { return Complex{t, 0.0}; }, 1.0, 8);
  g.dt = 0.0;
  REQUIRE_THROWS_AS(solve_theta(g, 1.0), Error);
}
