#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <vector>

#include "emrec/control.hpp"
#include "emrec/fdtd.hpp"
#include "emrec/io.hpp"
#include "emrec/util.hpp"
#include "emrec/volterra.hpp"

namespace emrec {

// --------------------------------------------------------------------------
// Frequency lattice
// --------------------------------------------------------------------------

struct EtaGrid {
  double eta_max = 4.0;
  int n_eta = 9;  // odd, centered at zero

  double spacing() const { return 2.0 * eta_max / (n_eta - 1); }
  Vec2 node(int i, int j) const { return {-eta_max + i * spacing(), -eta_max + j * spacing()}; }
  bool is_origin(int i, int j) const { return 2 * i == n_eta - 1 && 2 * j == n_eta - 1; }
  int count() const { return n_eta * n_eta; }

  void validate(const Domain& dom) const {
    if (n_eta < 3 || n_eta % 2 == 0)
      raise(ErrorCode::SchemaError, "eta lattice needs an odd point count >= 3");
    const double pi = 4.0 * std::atan(1.0);
    const double nyquist = 2.0 * pi / (2.0 * std::max(dom.lx, dom.ly)) / 1.1;
    if (spacing() > nyquist * (1.0 + 1e-12))
      raise(ErrorCode::AliasSuspected, "eta spacing violates the Nyquist bound for -2z targets");
  }

  std::string content_key() const { return double_bits(eta_max) + std::to_string(n_eta); }
};

struct FunctionalGrid {
  EtaGrid grid;
  std::vector<Complex> values;  // row-major, index j*n_eta + i
  std::vector<uint8_t> done;
  uint64_t scene_hash = 0;
  uint64_t grid_hash = 0;

  Complex at(int i, int j) const { return values[static_cast<size_t>(j) * grid.n_eta + i]; }
  bool complete() const {
    for (int j = 0; j < grid.n_eta; ++j)
      for (int i = 0; i < grid.n_eta; ++i)
        if (!done[static_cast<size_t>(j) * grid.n_eta + i] && !grid.is_origin(i, j)) return false;
    return true;
  }
  static FunctionalGrid empty(const EtaGrid& g) {
    FunctionalGrid f;
    f.grid = g;
    f.values.assign(g.count(), Complex{0.0, 0.0});
    f.done.assign(g.count(), 0);
    return f;
  }
};

// --------------------------------------------------------------------------
// The measurement functional
// --------------------------------------------------------------------------

namespace detail {

// Composite Simpson weights on nt+1 uniform samples; a 3/8 tail handles odd
// panel counts.
inline std::vector<double> simpson_weights(int nt, double dt) {
  std::vector<double> w(nt + 1, 0.0);
  if (nt == 1) {
    w[0] = w[1] = 0.5 * dt;
    return w;
  }
  int even_end = nt;
  bool tail38 = false;
  if (nt % 2 == 1) {
    if (nt < 3) raise(ErrorCode::GridMismatch, "too few time samples");
    even_end = nt - 3;
    tail38 = true;
  }
  for (int n = 0; n < even_end; n += 2) {
    w[n] += dt / 3.0;
    w[n + 1] += 4.0 * dt / 3.0;
    w[n + 2] += dt / 3.0;
  }
  if (tail38) {
    w[even_end] += 3.0 * dt / 8.0;
    w[even_end + 1] += 9.0 * dt / 8.0;
    w[even_end + 2] += 9.0 * dt / 8.0;
    w[even_end + 3] += 3.0 * dt / 8.0;
  }
  return w;
}

}  // namespace detail

// int_0^T int_Gamma [theta s - theta'' s] dsigma dt with s the measured trace
// difference; the time-differentiated pairing is integrated by parts once so
// the measurement is never differentiated.
inline Complex functional_value(const ThetaFunction& th, const BoundaryTrace& diff) {
  if (th.nt != diff.nt || th.npoints != diff.gamma.size() || std::abs(th.dt - diff.dt) > 1e-15)
    raise(ErrorCode::GridMismatch, "theta and trace grids differ");
  const auto wt = detail::simpson_weights(th.nt, th.dt);
  Complex acc{0.0, 0.0};
  for (int n = 0; n <= th.nt; ++n) {
    Complex row{0.0, 0.0};
    for (int k = 0; k < th.npoints; ++k)
      row += (th.at(n, k) - th.ddt_at(n, k)) * diff.at(n, k) * diff.gamma.weights[k];
    acc += wt[n] * row;
  }
  return acc;
}

// --------------------------------------------------------------------------
// Pipeline: controls + simulations -> functional samples
// --------------------------------------------------------------------------

enum class VolterraKernel {
  SqrtEps0Eta,    // omega = sqrt(eps0) |eta|
  PhysicalOmega,  // omega = |eta| / sqrt(mu0 eps0)
};

struct Pipeline {
  Scene scene;
  GridSpec grid;
  GeometricControlSpec control_spec;
  double control_tol = 1e-6;
  int control_max_iter = 500;
  double window_frac = 0.05;
  VolterraKernel kernel = VolterraKernel::SqrtEps0Eta;
  std::filesystem::path cache_dir = "emrec_cache";
  int threads = 1;

  double kernel_omega(const PlaneWaveProbe& probe) const {
    return kernel == VolterraKernel::SqrtEps0Eta ? std::sqrt(scene.eps0) * norm(probe.eta)
                                                 : probe.omega;
  }

  ControlFunction control_for(const PlaneWaveProbe& probe, ControlCertificate* cert_out = nullptr) const {
    ControlCache cache(cache_dir);
    const std::string key = ControlCache::key(scene, grid, control_spec, probe, control_tol, window_frac);
    if (auto hit = cache.lookup(key, grid, probe)) {
      if (cert_out) *cert_out = hit->second;
      return std::move(hit->first);
    }
    auto [g, cert] = hum_control(scene, probe, grid, control_spec, control_tol, control_max_iter,
                                 window_frac);
    cache.store(key, grid, g, cert);
    if (cert_out) *cert_out = cert;
    return g;
  }

  BoundaryTrace background_for(const PlaneWaveProbe& probe) const {
    const std::string key = "bg_" + hex64(fnv1a64(grid.content_key() + probe.content_key() +
                                                  double_bits(scene.eps0) + double_bits(scene.mu0)));
    const auto path = cache_dir / (key + ".trace.bin");
    if (std::filesystem::exists(path)) return load_trace(path, grid);
    BoundaryTrace tr = run_background(scene, probe, grid);
    save_trace(path, tr, grid);
    return tr;
  }

  BoundaryTrace difference_for(const PlaneWaveProbe& probe) const {
    const BoundaryTrace bg = background_for(probe);
    const BoundaryTrace fwd = run_forward(require_valid(scene), probe, grid);
    return trace_difference(fwd, bg);
  }

  Complex functional_for(const PlaneWaveProbe& probe) const {
    const ControlFunction g = control_for(probe);
    const ThetaFunction th = solve_theta(g, kernel_omega(probe));
    return functional_value(th, difference_for(probe));
  }
};

inline FunctionalGrid sample_functional(const Pipeline& pipe, const EtaGrid& eta,
                                        FunctionalGrid* resume = nullptr) {
  eta.validate(pipe.scene.domain);
  FunctionalGrid out = resume ? *resume : FunctionalGrid::empty(eta);
  out.scene_hash = pipe.scene.hash();
  out.grid_hash = pipe.grid.hash();
  std::vector<int> todo;
  for (int j = 0; j < eta.n_eta; ++j)
    for (int i = 0; i < eta.n_eta; ++i) {
      const size_t q = static_cast<size_t>(j) * eta.n_eta + i;
      if (eta.is_origin(i, j)) {
        out.done[q] = 1;  // excluded from use
        continue;
      }
      if (!out.done[q]) todo.push_back(static_cast<int>(q));
    }
  parallel_for(static_cast<int>(todo.size()), pipe.threads, [&](int t) {
    const int q = todo[t];
    const int i = q % eta.n_eta, j = q / eta.n_eta;
    const auto probe = PlaneWaveProbe::make(eta.node(i, j), pipe.scene.eps0, pipe.scene.mu0);
    out.values[q] = pipe.functional_for(probe);
    out.done[q] = 1;
  });
  return out;
}

inline void save_fgrid(const std::filesystem::path& path, const FunctionalGrid& fg,
                       const std::string& manifest_hash = "") {
  ArtifactHeader h;
  h.kind = "fgrid";
  h.shape = {fg.grid.n_eta, fg.grid.n_eta, 2};
  h.grid_hash = fg.grid_hash;
  h.manifest_hash = manifest_hash;
  h.meta["eta_max"] = fg.grid.eta_max;
  h.meta["n_eta"] = fg.grid.n_eta;
  h.meta["scene_hash"] = hex64(fg.scene_hash);
  h.meta["done"] = fg.done;
  write_artifact(path, h, detail::complex_to_payload(fg.values));
}

inline FunctionalGrid load_fgrid(const std::filesystem::path& path) {
  auto [h, payload] = read_artifact(path);
  if (h.kind != "fgrid") raise(ErrorCode::CacheCorrupt, "not a functional-grid artifact");
  FunctionalGrid fg;
  fg.grid.eta_max = h.meta.at("eta_max").get<double>();
  fg.grid.n_eta = h.meta.at("n_eta").get<int>();
  fg.values = detail::payload_to_complex(payload);
  fg.done = h.meta.at("done").get<std::vector<uint8_t>>();
  fg.grid_hash = h.grid_hash;
  fg.scene_hash = std::stoull(h.meta.value("scene_hash", "0"), nullptr, 16);
  if (fg.values.size() != static_cast<size_t>(fg.grid.count()) || fg.done.size() != fg.values.size())
    raise(ErrorCode::CacheCorrupt, "functional grid shape mismatch");
  return fg;
}

// --------------------------------------------------------------------------
// Localization by windowed inverse DFT
// --------------------------------------------------------------------------

struct Peak {
  Vec2 z;             // recovered center (already divided by -2)
  Complex amplitude;  // complex field height at the peak
};

struct LocalizeOptions {
  double threshold_frac = 0.3;
  int zero_pad = 8;
  double noise_floor = 1e-12;
  int refine_rounds = 5;
};

namespace detail {

// Windowed inverse DFT of the lattice samples onto the fundamental x-cell
// [-P/2, P/2)^2, P = 2 pi / d_eta, evaluated on zero_pad * n_eta points per
// axis. Convention: F[f](eta) = int f(x) e^{-i eta.x} dx, so e^{2 i eta.z}
// concentrates at x = -2z.
struct DftField {
  int nout = 0;
  double x0 = 0.0, dx = 0.0;
  std::vector<Complex> field;  // row-major, index jy*nout + ix
  Complex at(int ix, int jy) const { return field[static_cast<size_t>(jy) * nout + ix]; }
  double coord(int m) const { return x0 + m * dx; }
};

inline double hann(double u, double umax) {
  return 0.5 * (1.0 + std::cos(4.0 * std::atan(1.0) * u / umax));
}

inline DftField inverse_dft(const FunctionalGrid& fg, int zero_pad) {
  const EtaGrid& eg = fg.grid;
  const int n = eg.n_eta;
  const double de = eg.spacing();
  const double pi = 4.0 * std::atan(1.0);
  DftField out;
  out.nout = zero_pad * n;
  const double period = 2.0 * pi / de;
  out.x0 = -0.5 * period;
  out.dx = period / out.nout;
  // Separable evaluation: phase matrices per axis.
  std::vector<Complex> ex(static_cast<size_t>(out.nout) * n), ey(static_cast<size_t>(out.nout) * n);
  for (int m = 0; m < out.nout; ++m)
    for (int i = 0; i < n; ++i) {
      const double e1 = -eg.eta_max + i * de;
      ex[static_cast<size_t>(m) * n + i] = std::exp(kI * e1 * out.coord(m));
      ey[static_cast<size_t>(m) * n + i] = ex[static_cast<size_t>(m) * n + i];
    }
  // Windowed samples.
  std::vector<Complex> wv(static_cast<size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const Vec2 e = eg.node(i, j);
      const double w = eg.is_origin(i, j) ? 0.0 : hann(e.x, eg.eta_max) * hann(e.y, eg.eta_max);
      wv[static_cast<size_t>(j) * n + i] = w * fg.at(i, j);
    }
  // field(x, y) = sum_j ey(y, j) sum_i wv(j, i) ex(x, i), scaled by de^2.
  std::vector<Complex> partial(static_cast<size_t>(n) * out.nout);  // (j, x)
  for (int j = 0; j < n; ++j)
    for (int m = 0; m < out.nout; ++m) {
      Complex acc{0.0, 0.0};
      for (int i = 0; i < n; ++i) acc += wv[static_cast<size_t>(j) * n + i] * ex[static_cast<size_t>(m) * n + i];
      partial[static_cast<size_t>(j) * out.nout + m] = acc;
    }
  out.field.assign(static_cast<size_t>(out.nout) * out.nout, Complex{0.0, 0.0});
  for (int my = 0; my < out.nout; ++my)
    for (int j = 0; j < n; ++j) {
      const Complex f = ey[static_cast<size_t>(my) * n + j];
      const Complex* src = &partial[static_cast<size_t>(j) * out.nout];
      Complex* dst = &out.field[static_cast<size_t>(my) * out.nout];
      for (int mx = 0; mx < out.nout; ++mx) dst[mx] += f * src[mx];
    }
  const double scale = de * de;
  for (auto& v : out.field) v *= scale;
  return out;
}

inline double parabola_offset(double fm, double f0, double fp) {
  const double denom = fm - 2.0 * f0 + fp;
  if (std::abs(denom) < 1e-300) return 0.0;
  return std::clamp(0.5 * (fm - fp) / denom, -0.5, 0.5);
}

}  // namespace detail

// Refines peak positions by weighted phase regression with deflation. The
// field peaks at x_k, so the lattice samples follow sum_k A_k e^{-i eta.x_k};
// demodulating source k by e^{+i eta.x_k} leaves the phase -eta.(x_true -
// x_k), whose fitted slope corrects x_k. Exact for one pure exponential.
namespace detail {

inline void refine_by_phase(const FunctionalGrid& fg, std::vector<Vec2>& xs,
                            std::vector<Complex>& amps, int rounds) {
  const EtaGrid& eg = fg.grid;
  const int n = eg.n_eta;
  const int m = static_cast<int>(xs.size());
  std::vector<Vec2> etas;
  std::vector<Complex> vals;
  std::vector<double> ww;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      if (eg.is_origin(i, j)) continue;
      const Vec2 e = eg.node(i, j);
      etas.push_back(e);
      vals.push_back(fg.at(i, j));
      ww.push_back(hann(e.x, eg.eta_max) * hann(e.y, eg.eta_max));
    }
  const int rows = static_cast<int>(etas.size());
  // Per-source amplitude model: quadratic in eta (matches both the leading
  // monopole term and quadratic-form signatures), normalized for conditioning.
  const double es = 1.0 / std::max(eg.eta_max, 1e-300);
  constexpr int kBasis = 4;
  auto basis = [&](Vec2 e, int b) {
    switch (b) {
      case 0: return 1.0;
      case 1: return es * es * e.x * e.x;
      case 2: return es * es * e.x * e.y;
      default: return es * es * e.y * e.y;
    }
  };
  Eigen::VectorXcd coef = Eigen::VectorXcd::Zero(kBasis * m);
  auto fit_amplitudes = [&]() {
    Eigen::MatrixXcd M(rows, kBasis * m);
    Eigen::VectorXcd y(rows);
    for (int r = 0; r < rows; ++r) {
      const double sw = std::sqrt(ww[r]);
      for (int k = 0; k < m; ++k) {
        const Complex ph = std::exp(-kI * dot(etas[r], xs[k]));
        for (int b = 0; b < kBasis; ++b) M(r, kBasis * k + b) = sw * basis(etas[r], b) * ph;
      }
      y(r) = sw * vals[r];
    }
    coef = M.colPivHouseholderQr().solve(y);
  };
  auto amp_at = [&](int k, Vec2 e) {
    Complex a{0.0, 0.0};
    for (int b = 0; b < kBasis; ++b) a += coef(kBasis * k + b) * basis(e, b);
    return a;
  };
  for (int round = 0; round < rounds; ++round) {
    fit_amplitudes();
    for (int k = 0; k < m; ++k) {
      double amp_scale = 0.0;
      for (int r = 0; r < rows; ++r) amp_scale = std::max(amp_scale, std::abs(amp_at(k, etas[r])));
      if (amp_scale <= 0.0) continue;
      double s_ww = 0.0, s_wx = 0.0, s_wy = 0.0, s_wxx = 0.0, s_wxy = 0.0, s_wyy = 0.0;
      double b_x = 0.0, b_y = 0.0, b_0 = 0.0;
      for (int r = 0; r < rows; ++r) {
        const Complex ak = amp_at(k, etas[r]);
        if (std::abs(ak) < 0.05 * amp_scale) continue;  // phase undefined near nulls
        Complex resid = vals[r];
        for (int l = 0; l < m; ++l)
          if (l != k) resid -= amp_at(l, etas[r]) * std::exp(-kI * dot(etas[r], xs[l]));
        const Complex demod = resid * std::exp(kI * dot(etas[r], xs[k]));
        const double wgt = ww[r] * std::abs(demod);
        if (wgt <= 0.0) continue;
        const double ph = std::arg(demod / ak);  // ~ -eta.d once close
        s_ww += wgt;
        s_wx += wgt * etas[r].x;
        s_wy += wgt * etas[r].y;
        s_wxx += wgt * etas[r].x * etas[r].x;
        s_wxy += wgt * etas[r].x * etas[r].y;
        s_wyy += wgt * etas[r].y * etas[r].y;
        b_x += wgt * etas[r].x * ph;
        b_y += wgt * etas[r].y * ph;
        b_0 += wgt * ph;
      }
      Eigen::Matrix3d G;
      G << s_wxx, s_wxy, s_wx, s_wxy, s_wyy, s_wy, s_wx, s_wy, s_ww;
      Eigen::Vector3d rhs(b_x, b_y, b_0);
      if (std::abs(G.determinant()) < 1e-30) continue;
      const Eigen::Vector3d sol = G.ldlt().solve(rhs);
      xs[k].x -= sol(0);
      xs[k].y -= sol(1);
    }
  }
  // Report the windowed field height at each refined position.
  const double de = eg.spacing();
  for (int k = 0; k < m; ++k) {
    Complex acc{0.0, 0.0};
    for (int r = 0; r < rows; ++r)
      acc += ww[r] * vals[r] * std::exp(kI * dot(etas[r], xs[k]));
    amps[k] = acc * de * de;
  }
}

}  // namespace detail

inline std::vector<Peak> localize(const FunctionalGrid& fg, double threshold_frac = 0.3,
                                  const LocalizeOptions& opts_in = {}) {
  LocalizeOptions opts = opts_in;
  opts.threshold_frac = threshold_frac;
  const auto field = detail::inverse_dft(fg, opts.zero_pad);
  const int n = field.nout;
  double peak_mag = 0.0;
  for (const auto& v : field.field) peak_mag = std::max(peak_mag, std::abs(v));
  if (peak_mag <= opts.noise_floor) raise(ErrorCode::NoPeaksFound, "field magnitude at noise floor");

  // Candidate peaks: local maxima of |field| above the threshold, strongest
  // first. Window sidelobes and interference fringes of a stronger source are
  // absorbed within one main-lobe radius (the first Hann null).
  const double cut = opts.threshold_frac * peak_mag;
  std::vector<int> cand;
  for (int j = 1; j + 1 < n; ++j)
    for (int i = 1; i + 1 < n; ++i) {
      const double f = std::abs(field.at(i, j));
      if (f < cut) continue;
      bool top = true;
      for (int dj = -1; dj <= 1 && top; ++dj)
        for (int di = -1; di <= 1 && top; ++di)
          if (di != 0 || dj != 0) top = f >= std::abs(field.at(i + di, j + dj));
      if (top) cand.push_back(j * n + i);
    }
  std::sort(cand.begin(), cand.end(), [&](int a, int b) {
    return std::abs(field.field[static_cast<size_t>(a)]) > std::abs(field.field[static_cast<size_t>(b)]);
  });
  const double pi = 4.0 * std::atan(1.0);
  const double merge_radius = 2.0 * pi / fg.grid.eta_max;
  std::vector<Vec2> xs;
  std::vector<Complex> amps;
  for (const int bq : cand) {
    const int bi = bq % n, bj = bq / n;
    const Vec2 c{field.coord(bi), field.coord(bj)};
    bool absorbed = false;
    for (const Vec2& kept : xs)
      if (norm(c - kept) < merge_radius) {
        absorbed = true;
        break;
      }
    if (absorbed) continue;
    if (bi <= 1 || bj <= 1 || bi >= n - 2 || bj >= n - 2)
      raise(ErrorCode::AliasSuspected, "peak touches the periodic boundary of the inversion cell");
    const double f0 = std::abs(field.at(bi, bj));
    const double ox = detail::parabola_offset(std::abs(field.at(bi - 1, bj)), f0,
                                              std::abs(field.at(bi + 1, bj)));
    const double oy = detail::parabola_offset(std::abs(field.at(bi, bj - 1)), f0,
                                              std::abs(field.at(bi, bj + 1)));
    xs.push_back({c.x + ox * field.dx, c.y + oy * field.dx});
    amps.push_back(field.at(bi, bj));
  }
  if (xs.empty()) raise(ErrorCode::NoPeaksFound, "no local maxima above the threshold");
  detail::refine_by_phase(fg, xs, amps, opts.refine_rounds);

  std::vector<Peak> peaks(xs.size());
  for (size_t k = 0; k < xs.size(); ++k) peaks[k] = {Vec2{-0.5 * xs[k].x, -0.5 * xs[k].y}, amps[k]};
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return std::abs(a.amplitude) > std::abs(b.amplitude); });
  return peaks;
}

// --------------------------------------------------------------------------
// Tensor-signature fitting
// --------------------------------------------------------------------------

struct TensorFit {
  // Per inclusion: symmetric trace-free signature [[a, b], [b, -a]] plus an
  // isotropic monopole coefficient s multiplying |eta|^2.
  std::vector<std::array<Complex, 2>> deviatoric;  // (a, b)
  std::vector<Complex> monopole;
  double residual = 0.0;       // relative, over the lattice
  double condition = 0.0;
};

struct FitOptions {
  bool include_monopole = true;
  double condition_cap = 1e10;
};

// Model value for one source: e^{2 i eta.z} (s |eta|^2 + rot90(eta).(Q eta)).
// Written so that only q12 and q22 - q11 enter: the isotropic part of Q is
// structurally invisible.
inline Complex fit_model_value(Vec2 eta, Vec2 z, const std::array<Complex, 3>& qsym, Complex s) {
  const Complex quad =
      qsym[1] * (eta.x * eta.x - eta.y * eta.y) + (qsym[2] - qsym[0]) * (eta.x * eta.y);
  return std::exp(2.0 * kI * dot(eta, z)) * (s * norm2(eta) + quad);
}

inline TensorFit fit_tensors(const FunctionalGrid& fg, const std::vector<Vec2>& locations,
                             const FitOptions& opts = {}) {
  const EtaGrid& eg = fg.grid;
  const int m = static_cast<int>(locations.size());
  if (m == 0) raise(ErrorCode::NoPeaksFound, "no locations to fit");
  const int per = opts.include_monopole ? 3 : 2;
  std::vector<Vec2> etas;
  std::vector<Complex> vals;
  for (int j = 0; j < eg.n_eta; ++j)
    for (int i = 0; i < eg.n_eta; ++i) {
      if (eg.is_origin(i, j)) continue;
      etas.push_back(eg.node(i, j));
      vals.push_back(fg.at(i, j));
    }
  const int rows = static_cast<int>(etas.size());
  Eigen::MatrixXcd M(rows, per * m);
  Eigen::VectorXcd y(rows);
  for (int r = 0; r < rows; ++r) {
    const Vec2 e = etas[r];
    for (int k = 0; k < m; ++k) {
      const Complex phase = std::exp(2.0 * kI * dot(e, locations[k]));
      // Trace-free basis E1 = diag(1,-1), E2 = offdiag(1,1).
      M(r, per * k + 0) = phase * (-e.y * e.x - e.x * e.y);              // rot90(e).(E1 e)
      M(r, per * k + 1) = phase * (-e.y * e.y + e.x * e.x);              // rot90(e).(E2 e)
      if (opts.include_monopole) M(r, per * k + 2) = phase * norm2(e);
    }
    y(r) = vals[r];
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TensorFit out;
  out.condition = svd.singularValues()(0) / svd.singularValues()(per * m - 1);
  if (!(out.condition < opts.condition_cap))
    raise(ErrorCode::IllConditionedFit, "tensor fit matrix condition number above cap");
  const Eigen::VectorXcd c = svd.solve(y);
  out.residual = (M * c - y).norm() / std::max(y.norm(), 1e-300);
  out.deviatoric.resize(m);
  out.monopole.assign(m, Complex{0.0, 0.0});
  for (int k = 0; k < m; ++k) {
    out.deviatoric[k] = {c(per * k + 0), c(per * k + 1)};
    if (opts.include_monopole) out.monopole[k] = c(per * k + 2);
  }
  return out;
}

// --------------------------------------------------------------------------
// End-to-end reconstruction
// --------------------------------------------------------------------------

struct ReconstructionResult {
  std::vector<Vec2> locations;
  std::vector<Complex> amplitudes;
  std::vector<std::array<Complex, 2>> tensors;  // trace-free (a, b) per inclusion
  std::vector<Complex> monopoles;
  double fit_residual = 0.0;
  double peak_snr = 0.0;
  bool tensor_degenerate = false;  // disks: deviatoric part is in the null space
};

inline ReconstructionResult reconstruct_from_grid(const FunctionalGrid& fg,
                                                  double threshold_frac = 0.3,
                                                  const FitOptions& fopts = {}) {
  ReconstructionResult out;
  const auto field = detail::inverse_dft(fg, 8);
  double peak = 0.0, mean = 0.0;
  for (const auto& v : field.field) {
    peak = std::max(peak, std::abs(v));
    mean += std::abs(v);
  }
  mean /= static_cast<double>(field.field.size());
  out.peak_snr = mean > 0.0 ? peak / mean : 0.0;

  const auto peaks = localize(fg, threshold_frac);
  for (const auto& p : peaks) {
    out.locations.push_back(p.z);
    out.amplitudes.push_back(p.amplitude);
  }
  const auto fit = fit_tensors(fg, out.locations, fopts);
  out.tensors = fit.deviatoric;
  out.monopoles = fit.monopole;
  out.fit_residual = fit.residual;
  double dev = 0.0, mono = 0.0;
  for (size_t k = 0; k < out.tensors.size(); ++k) {
    dev = std::max(dev, std::max(std::abs(out.tensors[k][0]), std::abs(out.tensors[k][1])));
    mono = std::max(mono, std::abs(out.monopoles[k]));
  }
  out.tensor_degenerate = dev < 0.05 * std::max(mono, 1e-300);
  return out;
}

}  // namespace emrec
