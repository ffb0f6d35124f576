// Command-line driver. Subcommands compose through files: simulate, control,
// functional, reconstruct, tensor, validate.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "emrec/config.hpp"
#include "emrec/validate.hpp"
#include "emrec/version.hpp"

using namespace emrec;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out = "emrec_out";
  std::string cache_dir = "emrec_cache";
  int threads = 2;
  uint64_t seed = 1;
  std::vector<std::string> tolerance_overrides;
};

ProblemConfig load_config(const CommonArgs& args) {
  ProblemConfig cfg = parse_config(args.config_path);
  for (const auto& ov : args.tolerance_overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::SchemaError, "--tolerance expects name=value, got " + ov);
    cfg.tolerances[ov.substr(0, eq)] = std::stod(ov.substr(eq + 1));
  }
  return cfg;
}

RunManifest make_manifest(const std::string& subcommand, const CommonArgs& args) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config_path = args.config_path;
  if (!args.config_path.empty()) m.config_hash = config_file_hash(args.config_path);
  m.inputs.push_back(args.config_path);
  return m;
}

void write_manifest(RunManifest& m, const fs::path& out_dir, double seconds) {
  m.seconds = seconds;
  fs::create_directories(out_dir);
  std::ofstream f(out_dir / (m.subcommand + ".manifest.json"));
  f << m.to_json().dump(2) << "\n";
}

PlaneWaveProbe probe_from(const ProblemConfig& cfg, const std::vector<double>& eta_flag) {
  Vec2 eta;
  if (eta_flag.size() == 2) {
    eta = {eta_flag[0], eta_flag[1]};
  } else if (cfg.probe_eta) {
    eta = *cfg.probe_eta;
  } else {
    raise(ErrorCode::SchemaError, "no probe: give [probe].eta in the config or --eta");
  }
  return PlaneWaveProbe::make(eta, cfg.scene.eps0, cfg.scene.mu0);
}

int run_simulate(const CommonArgs& args, const std::vector<double>& eta_flag) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemConfig cfg = load_config(args);
  const auto vs = require_valid(cfg.scene);
  const auto probe = probe_from(cfg, eta_flag);
  const GridSpec grid = cfg.grid_spec();
  RunManifest m = make_manifest("simulate", args);

  const BoundaryTrace fwd = run_forward(vs, probe, grid);
  const BoundaryTrace bg = run_background(cfg.scene, probe, grid);
  const BoundaryTrace diff = trace_difference(fwd, bg);
  const fs::path out(args.out);
  save_trace(out / "forward.trace.bin", fwd, grid, m.creator_hash());
  save_trace(out / "background.trace.bin", bg, grid, m.creator_hash());
  save_trace(out / "difference.trace.bin", diff, grid, m.creator_hash());
  m.outputs = {"forward.trace.bin", "background.trace.bin", "difference.trace.bin"};
  write_manifest(m, out, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::printf("simulate: %d steps, %d boundary points, |diff| L2 = %.6e\n", grid.nt,
              diff.gamma.size(), diff.l2_norm());
  std::printf("wrote %s/{forward,background,difference}.trace.bin\n", args.out.c_str());
  return 0;
}

int run_control(const CommonArgs& args, const std::vector<double>& eta_flag, bool whole_grid) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemConfig cfg = load_config(args);
  Pipeline pipe = cfg.pipeline(args.cache_dir, args.threads);
  RunManifest m = make_manifest("control", args);

  std::vector<PlaneWaveProbe> probes;
  if (whole_grid) {
    cfg.eta.validate(cfg.scene.domain);
    for (int j = 0; j < cfg.eta.n_eta; ++j)
      for (int i = 0; i < cfg.eta.n_eta; ++i)
        if (!cfg.eta.is_origin(i, j))
          probes.push_back(PlaneWaveProbe::make(cfg.eta.node(i, j), cfg.scene.eps0, cfg.scene.mu0));
  } else {
    probes.push_back(probe_from(cfg, eta_flag));
  }
  std::atomic<int> done{0};
  parallel_for(static_cast<int>(probes.size()), pipe.threads, [&](int q) {
    ControlCertificate cert;
    const ControlFunction g = pipe.control_for(probes[q], &cert);
    const ThetaFunction th = solve_theta(g, pipe.kernel_omega(probes[q]));
    const std::string key =
        ControlCache::key(pipe.scene, pipe.grid, pipe.control_spec, probes[q], pipe.control_tol,
                          pipe.window_frac);
    save_series(fs::path(args.cache_dir) / (key + ".theta.bin"), "theta", th.theta, th.nt,
                th.npoints, th.dt, pipe.grid, m.creator_hash());
    const int n = ++done;
    std::printf("control %d/%zu: eta=(%.3f, %.3f) cg=%d ratio=%.2e resid=%.2e\n", n, probes.size(),
                probes[q].eta.x, probes[q].eta.y, cert.cg_iterations, cert.terminal_energy_ratio,
                cert.gramian_residual);
  });
  write_manifest(m, args.cache_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int run_functional(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemConfig cfg = load_config(args);
  require_valid(cfg.scene);
  Pipeline pipe = cfg.pipeline(args.cache_dir, args.threads);
  RunManifest m = make_manifest("functional", args);
  const fs::path out(args.out);
  const fs::path fpath = out / "functional.fgrid.bin";

  FunctionalGrid resume;
  FunctionalGrid* resume_ptr = nullptr;
  if (fs::exists(fpath)) {
    resume = load_fgrid(fpath);
    if (resume.grid.n_eta == cfg.eta.n_eta && resume.grid.eta_max == cfg.eta.eta_max &&
        resume.scene_hash == cfg.scene.hash()) {
      resume_ptr = &resume;
      int pending = 0;
      for (size_t q = 0; q < resume.done.size(); ++q) pending += resume.done[q] ? 0 : 1;
      std::printf("resuming: %d node(s) left\n", pending);
    }
  }
  const FunctionalGrid fg = sample_functional(pipe, cfg.eta, resume_ptr);
  save_fgrid(fpath, fg, m.creator_hash());
  m.outputs = {"functional.fgrid.bin"};
  write_manifest(m, out, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::printf("functional grid %dx%d written to %s\n", cfg.eta.n_eta, cfg.eta.n_eta,
              fpath.string().c_str());
  return 0;
}

int run_reconstruct(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemConfig cfg = load_config(args);
  RunManifest m = make_manifest("reconstruct", args);
  const fs::path out(args.out);
  const fs::path fpath = out / "functional.fgrid.bin";
  if (!fs::exists(fpath))
    raise(ErrorCode::IoError, "run `functional` first: missing " + fpath.string());
  const FunctionalGrid fg = load_fgrid(fpath);
  if (!fg.complete()) raise(ErrorCode::IoError, "functional grid incomplete; rerun `functional`");

  FitOptions fopts;
  fopts.include_monopole = cfg.include_monopole;
  const auto res = reconstruct_from_grid(fg, cfg.threshold_frac, fopts);

  // Plot-ready magnitude field.
  const auto field = detail::inverse_dft(fg, 8);
  {
    std::ofstream csv(out / "field.csv");
    csv << "x,y,magnitude\n";
    for (int jy = 0; jy < field.nout; ++jy)
      for (int ix = 0; ix < field.nout; ++ix)
        csv << field.coord(ix) << "," << field.coord(jy) << "," << std::abs(field.at(ix, jy))
            << "\n";
  }
  {
    std::ofstream rep(out / "reconstruction.txt");
    rep << "peaks " << res.locations.size() << "\n";
    rep << "peak_snr " << res.peak_snr << "\n";
    rep << "fit_residual " << res.fit_residual << "\n";
    if (res.tensor_degenerate)
      rep << "warning deviatoric signature near machine zero; isotropic shapes are invisible to "
             "the quadratic-form model\n";
    for (size_t k = 0; k < res.locations.size(); ++k) {
      rep << "inclusion " << (k + 1) << " z " << res.locations[k].x << " " << res.locations[k].y
          << " amplitude " << res.amplitudes[k].real() << " " << res.amplitudes[k].imag()
          << " monopole " << res.monopoles[k].real() << " " << res.monopoles[k].imag()
          << " deviatoric " << res.tensors[k][0].real() << " " << res.tensors[k][0].imag() << " "
          << res.tensors[k][1].real() << " " << res.tensors[k][1].imag() << "\n";
    }
  }
  m.inputs.push_back(fpath.string());
  m.outputs = {"reconstruction.txt", "field.csv"};
  write_manifest(m, out, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  std::printf("reconstruct: %zu peak(s), snr %.1f, fit residual %.3e\n", res.locations.size(),
              res.peak_snr, res.fit_residual);
  for (size_t k = 0; k < res.locations.size(); ++k)
    std::printf("  z%zu = (%.4f, %.4f)\n", k + 1, res.locations[k].x, res.locations[k].y);
  std::printf("wrote %s/reconstruction.txt and field.csv\n", args.out.c_str());
  return 0;
}

int run_tensor(const std::string& shape, double radius, std::vector<double> semi_axes, double angle,
               double contrast, int nodes, const std::string& out) {
  ShapeBoundary sb;
  if (shape == "disk") {
    sb = make_disk_boundary(radius, nodes);
  } else if (shape == "ellipse") {
    if (semi_axes.size() != 2) raise(ErrorCode::SchemaError, "--semi-axes needs two values");
    sb = make_ellipse_boundary(semi_axes[0], semi_axes[1], angle, nodes);
  } else {
    raise(ErrorCode::SchemaError, "--shape must be disk or ellipse");
  }
  const auto t = polarization_tensor(sb, contrast);
  std::printf("polarization tensor (contrast %.6g, %d nodes)\n", contrast, nodes);
  std::printf("  [ %+.12e  %+.12e ]\n", t.m11, t.m12);
  std::printf("  [ %+.12e  %+.12e ]\n", t.m12, t.m22);
  std::printf("  area %.12e  asymmetry %.3e\n", t.area, t.asymmetry);
  if (!out.empty()) {
    std::ofstream f(out);
    f << "m11 " << t.m11 << "\nm12 " << t.m12 << "\nm22 " << t.m22 << "\narea " << t.area
      << "\ncontrast " << t.contrast << "\nasymmetry " << t.asymmetry << "\n";
  }
  return 0;
}

int run_validate_cmd(const CommonArgs& args, const std::string& level) {
  ValidateOptions opt;
  opt.cache_dir = args.cache_dir;
  opt.threads = args.threads;
  opt.seed = args.seed;
  const auto results = run_validate(level, opt);
  int failures = 0;
  for (const auto& r : results) {
    std::printf("%s %-28s %s  (%.1f s)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str(), r.seconds);
    if (!r.pass) ++failures;
  }
  std::printf("%zu checks, %d failure(s)\n", results.size(), failures);
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-domain electromagnetic small-inclusion reconstruction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<double> eta_flag;
  bool whole_grid = false;
  std::string level = "fast";
  std::string shape = "disk";
  double radius = 1.0, angle = 0.0, contrast = 2.0;
  std::vector<double> semi_axes;
  int nodes = 256;
  std::string tensor_out;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", args.config_path, "problem configuration file");
    if (needs_config) c->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--cache-dir", args.cache_dir, "control/trace cache directory");
    sub->add_option("--threads", args.threads, "worker threads");
    sub->add_option("--seed", args.seed, "seed for randomized checks");
    sub->add_option("--tolerance", args.tolerance_overrides, "override, name=value (repeatable)");
  };

  auto* sim = app.add_subcommand("simulate", "forward + background runs, boundary traces");
  add_common(sim, true);
  sim->add_option("--eta", eta_flag, "probe frequency vector (two numbers)")->expected(2);

  auto* ctl = app.add_subcommand("control", "compute and cache boundary controls and kernels");
  add_common(ctl, true);
  ctl->add_option("--eta", eta_flag, "single probe (two numbers)")->expected(2);
  ctl->add_flag("--grid", whole_grid, "cover the whole [eta] lattice");

  auto* fnc = app.add_subcommand("functional", "sample the measurement functional on the lattice");
  add_common(fnc, true);

  auto* rec = app.add_subcommand("reconstruct", "localize inclusions and fit signatures");
  add_common(rec, true);

  auto* ten = app.add_subcommand("tensor", "polarization tensor of a unit-frame shape");
  ten->add_option("--shape", shape, "disk or ellipse");
  ten->add_option("--radius", radius, "disk radius");
  ten->add_option("--semi-axes", semi_axes, "ellipse semi-axes (two numbers)")->expected(2);
  ten->add_option("--angle", angle, "ellipse rotation (radians)");
  ten->add_option("--contrast", contrast, "eps_inclusion / eps0")->required();
  ten->add_option("--nodes", nodes, "boundary nodes");
  ten->add_option("--out", tensor_out, "write structured text here");

  auto* val = app.add_subcommand("validate", "run the validation suite");
  add_common(val, false);
  val->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(args, eta_flag);
    if (ctl->parsed()) return run_control(args, eta_flag, whole_grid);
    if (fnc->parsed()) return run_functional(args);
    if (rec->parsed()) return run_reconstruct(args);
    if (ten->parsed()) return run_tensor(shape, radius, semi_axes, angle, contrast, nodes, tensor_out);
    if (val->parsed()) return run_validate_cmd(args, level);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
