#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emrec/control.hpp"
#include "emrec/errors.hpp"
#include "emrec/imaging.hpp"
#include "emrec/scene.hpp"

namespace emrec {

// Sectioned key-value configuration:
//   [domain] lx, ly
//   [materials] eps0, mu0, alpha, c0
//   [inclusions.N] center, shape, radius | semi_axes + angle, eps
//   [cutoff] margin, transition_width
//   [grid] nx, ny, cfl, time_factor | T
//   [probe] eta
//   [eta] eta_max, n_eta
//   [control] tol, max_iter, window_frac, safety, volterra_kernel
//   [reconstruct] threshold_frac, include_monopole
//   [tolerances] free-form named bounds
struct ProblemConfig {
  Scene scene;
  int nx = 64, ny = 64;
  double cfl = 0.9;
  double time_factor = 1.2;
  std::optional<double> T_explicit;
  std::optional<Vec2> probe_eta;
  EtaGrid eta{4.0, 9};
  double control_tol = 1e-6;
  int control_max_iter = 500;
  double window_frac = 0.05;
  double safety = 1.1;
  VolterraKernel kernel = VolterraKernel::SqrtEps0Eta;
  double threshold_frac = 0.3;
  bool include_monopole = true;
  std::map<std::string, double> tolerances;

  GeometricControlSpec control_spec() const {
    GeometricControlSpec s;
    s.safety = safety;
    s.T = T_explicit ? *T_explicit
                     : time_factor * 2.0 * scene.domain.diameter() * std::sqrt(scene.mu0 * scene.eps0);
    return s;
  }

  GridSpec grid_spec() const {
    return GridSpec::make(scene.domain, nx, ny, cfl, control_spec().T, scene.mu0, scene.eps_min());
  }

  Pipeline pipeline(const std::filesystem::path& cache_dir, int threads) const {
    Pipeline p;
    p.scene = scene;
    p.control_spec = control_spec();
    p.grid = grid_spec();
    p.control_tol = control_tol;
    p.control_max_iter = control_max_iter;
    p.window_frac = window_frac;
    p.kernel = kernel;
    p.cache_dir = cache_dir;
    p.threads = threads;
    return p;
  }
};

namespace detail {

struct IniEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct IniFile {
  // section -> key -> entry
  std::map<std::string, std::map<std::string, IniEntry>> sections;
  std::map<std::string, int> section_lines;
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

inline IniFile parse_ini(std::istream& in) {
  IniFile f;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": empty section name");
      f.section_lines.emplace(section, lineno);
      f.sections[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      raise(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    f.sections[section][key] = {trim(line.substr(eq + 1)), lineno, false};
  }
  return f;
}

class SectionReader {
 public:
  SectionReader(IniFile& f, const std::string& name) : file_(f), name_(name) {
    auto it = f.sections.find(name);
    sec_ = it == f.sections.end() ? nullptr : &it->second;
  }

  bool exists() const { return sec_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) const {
    if (!sec_) return std::nullopt;
    auto it = sec_->find(key);
    if (it == sec_->end()) return std::nullopt;
    it->second.used = true;
    return it->second.value;
  }

  std::string where(const std::string& key) const {
    if (sec_) {
      auto it = sec_->find(key);
      if (it != sec_->end()) return "line " + std::to_string(it->second.line);
    }
    return "[" + name_ + "]." + key;
  }

  double number(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    try {
      size_t pos = 0;
      const double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("trailing characters");
      return d;
    } catch (const std::exception&) {
      raise(ErrorCode::SchemaError, "[" + name_ + "]." + key + " (" + where(key) + "): not a number");
    }
  }

  int integer(const std::string& key, int fallback) const {
    const double d = number(key, fallback);
    const int i = static_cast<int>(d);
    if (d != i)
      raise(ErrorCode::SchemaError, "[" + name_ + "]." + key + " (" + where(key) + "): not an integer");
    return i;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    raise(ErrorCode::SchemaError, "[" + name_ + "]." + key + " (" + where(key) + "): not a boolean");
  }

  std::optional<Vec2> pair(const std::string& key) const {
    const auto v = raw(key);
    if (!v) return std::nullopt;
    std::istringstream is(*v);
    Vec2 p;
    if (!(is >> p.x >> p.y))
      raise(ErrorCode::SchemaError, "[" + name_ + "]." + key + " (" + where(key) + "): expected two numbers");
    std::string rest;
    if (is >> rest)
      raise(ErrorCode::SchemaError, "[" + name_ + "]." + key + " (" + where(key) + "): expected two numbers");
    return p;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto v = raw(key);
    return v ? *v : fallback;
  }

 private:
  IniFile& file_;
  std::string name_;
  std::map<std::string, IniEntry>* sec_;
};

}  // namespace detail

inline ProblemConfig parse_config_stream(std::istream& in, bool strict = true) {
  detail::IniFile ini = detail::parse_ini(in);
  ProblemConfig cfg;

  if (ini.sections.find("domain") == ini.sections.end())
    raise(ErrorCode::SchemaError, "missing required section [domain]");
  {
    detail::SectionReader s(ini, "domain");
    cfg.scene.domain.lx = s.number("lx", 1.0);
    cfg.scene.domain.ly = s.number("ly", 1.0);
  }
  {
    detail::SectionReader s(ini, "materials");
    cfg.scene.eps0 = s.number("eps0", 1.0);
    cfg.scene.mu0 = s.number("mu0", 1.0);
    cfg.scene.alpha = s.number("alpha", 0.05);
    cfg.scene.c0 = s.number("c0", 0.2);
  }
  {
    detail::SectionReader s(ini, "cutoff");
    cfg.scene.cutoff.margin = s.number("margin", 0.08);
    cfg.scene.cutoff.transition_width = s.number("transition_width", 0.12);
  }
  // Inclusions: numbered sections, any gap-free or sparse numbering accepted.
  std::vector<std::pair<int, std::string>> inc_sections;
  for (const auto& [name, keys] : ini.sections) {
    if (name.rfind("inclusions.", 0) != 0) continue;
    const std::string idx = name.substr(11);
    try {
      inc_sections.emplace_back(std::stoi(idx), name);
    } catch (const std::exception&) {
      raise(ErrorCode::SchemaError, "bad inclusion section name [" + name + "]");
    }
  }
  std::sort(inc_sections.begin(), inc_sections.end());
  for (const auto& [idx, name] : inc_sections) {
    detail::SectionReader s(ini, name);
    Inclusion inc;
    const auto center = s.pair("center");
    if (!center) raise(ErrorCode::SchemaError, "[" + name + "]: missing center");
    inc.center = *center;
    const std::string shape = s.text("shape", "disk");
    if (shape == "disk") {
      inc.kind = ShapeKind::Disk;
      inc.radius = s.number("radius", 1.0);
    } else if (shape == "ellipse") {
      inc.kind = ShapeKind::Ellipse;
      const auto axes = s.pair("semi_axes");
      if (!axes) raise(ErrorCode::SchemaError, "[" + name + "]: ellipse requires semi_axes");
      inc.a = axes->x;
      inc.b = axes->y;
      inc.angle = s.number("angle", 0.0);
    } else {
      raise(ErrorCode::SchemaError, "[" + name + "].shape: expected disk or ellipse");
    }
    inc.eps = s.number("eps", 1.0);
    if (!(inc.eps > 0.0))
      raise(ErrorCode::NonPositiveMaterial, "[" + name + "].eps (" + s.where("eps") + ") must be positive");
    cfg.scene.inclusions.push_back(inc);
  }
  {
    detail::SectionReader s(ini, "grid");
    cfg.nx = s.integer("nx", 64);
    cfg.ny = s.integer("ny", 64);
    cfg.cfl = s.number("cfl", 0.9);
    cfg.time_factor = s.number("time_factor", 1.2);
    if (s.raw("T")) cfg.T_explicit = s.number("T", 0.0);
  }
  {
    detail::SectionReader s(ini, "probe");
    cfg.probe_eta = s.pair("eta");
  }
  {
    detail::SectionReader s(ini, "eta");
    cfg.eta.eta_max = s.number("eta_max", 4.0);
    cfg.eta.n_eta = s.integer("n_eta", 9);
  }
  {
    detail::SectionReader s(ini, "control");
    cfg.control_tol = s.number("tol", 1e-6);
    cfg.control_max_iter = s.integer("max_iter", 500);
    cfg.window_frac = s.number("window_frac", 0.05);
    cfg.safety = s.number("safety", 1.1);
    const std::string k = s.text("volterra_kernel", "sqrt_eps0_eta");
    if (k == "sqrt_eps0_eta")
      cfg.kernel = VolterraKernel::SqrtEps0Eta;
    else if (k == "physical_omega")
      cfg.kernel = VolterraKernel::PhysicalOmega;
    else
      raise(ErrorCode::SchemaError, "[control].volterra_kernel: expected sqrt_eps0_eta or physical_omega");
  }
  {
    detail::SectionReader s(ini, "reconstruct");
    cfg.threshold_frac = s.number("threshold_frac", 0.3);
    cfg.include_monopole = s.boolean("include_monopole", true);
  }
  if (ini.sections.count("tolerances")) {
    for (auto& [key, entry] : ini.sections["tolerances"]) {
      entry.used = true;
      try {
        cfg.tolerances[key] = std::stod(entry.value);
      } catch (const std::exception&) {
        raise(ErrorCode::SchemaError, "[tolerances]." + key + ": not a number");
      }
    }
  }

  if (strict) {
    static const std::vector<std::string> known = {"domain", "materials", "cutoff", "grid",
                                                   "probe", "eta", "control", "reconstruct",
                                                   "tolerances"};
    for (const auto& [name, keys] : ini.sections) {
      const bool inc = name.rfind("inclusions.", 0) == 0;
      if (!inc && std::find(known.begin(), known.end(), name) == known.end())
        raise(ErrorCode::UnknownKey, "unknown section [" + name + "] (line " +
                                         std::to_string(ini.section_lines[name]) + ")");
      for (const auto& [key, entry] : keys)
        if (!entry.used)
          raise(ErrorCode::UnknownKey, "unknown key [" + name + "]." + key + " (line " +
                                           std::to_string(entry.line) + ")");
    }
  }
  return cfg;
}

inline ProblemConfig parse_config(const std::filesystem::path& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config " + path.string());
  return parse_config_stream(in, strict);
}

inline uint64_t config_file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::ostringstream os;
  os << in.rdbuf();
  return fnv1a64(os.str());
}

}  // namespace emrec
