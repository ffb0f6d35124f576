#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "emrec/config.hpp"
#include "emrec/io.hpp"

using namespace emrec;

namespace {

const char* kMinimalConfig = R"(
[domain]
lx = 1.0
ly = 1.0
)";

const char* kFullConfig = R"(
# reference two-ellipse scene
[domain]
lx = 1.0
ly = 1.0

[materials]
eps0 = 1.0
mu0 = 1.0
alpha = 0.05
c0 = 0.2

[inclusions.1]
center = 0.3 0.5
shape = ellipse
semi_axes = 1.0 0.5
angle = 0.4
eps = 2.0

[inclusions.2]
center = 0.7 0.45
shape = disk
radius = 1.0
eps = 2.0

[cutoff]
margin = 0.08
transition_width = 0.12

[grid]
nx = 64
ny = 64
cfl = 0.9
time_factor = 1.2

[probe]
eta = 2.0 1.0

[eta]
eta_max = 8.0
n_eta = 17

[control]
tol = 1e-6
max_iter = 500
window_frac = 0.05

[reconstruct]
threshold_frac = 0.3
include_monopole = true

[tolerances]
hum_terminal_ratio = 1e-6
)";

ProblemConfig parse_str(const std::string& text, bool strict = true) {
  std::istringstream is(text);
  return parse_config_stream(is, strict);
}

}  // namespace

TEST_CASE("minimal config parses with documented defaults") {
  const auto cfg = parse_str(kMinimalConfig);
  REQUIRE(cfg.scene.domain.lx == 1.0);
  REQUIRE(cfg.scene.eps0 == 1.0);
  REQUIRE(cfg.nx == 64);
  REQUIRE(cfg.eta.n_eta == 9);
  REQUIRE(cfg.control_tol == 1e-6);
  REQUIRE(cfg.scene.inclusions.empty());
}

TEST_CASE("full config parses every section") {
  const auto cfg = parse_str(kFullConfig);
  REQUIRE(cfg.scene.inclusions.size() == 2);
  REQUIRE(cfg.scene.inclusions[0].kind == ShapeKind::Ellipse);
  REQUIRE(cfg.scene.inclusions[0].a == 1.0);
  REQUIRE(cfg.scene.inclusions[1].kind == ShapeKind::Disk);
  REQUIRE(cfg.probe_eta.has_value());
  REQUIRE(cfg.eta.eta_max == 8.0);
  REQUIRE(cfg.tolerances.at("hum_terminal_ratio") == 1e-6);
  REQUIRE(validate_scene(cfg.scene).ok());
}

TEST_CASE("missing domain section is a schema error naming the section") {
  try {
    parse_str("[materials]\neps0 = 1.0\n");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::SchemaError);
    REQUIRE(std::string(e.what()).find("[domain]") != std::string::npos);
  }
}

TEST_CASE("negative permittivity is surfaced with its key path") {
  const std::string text = std::string(kMinimalConfig) +
                           "[inclusions.1]\ncenter = 0.5 0.5\nshape = disk\nradius = 1\neps = -2\n";
  try {
    parse_str(text);
    FAIL("expected NonPositiveMaterial");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::NonPositiveMaterial);
    REQUIRE(std::string(e.what()).find("[inclusions.1].eps") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected in strict mode with line numbers") {
  const std::string text = std::string(kMinimalConfig) + "typo_key = 3\n";
  try {
    parse_str(text);
    FAIL("expected UnknownKey");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::UnknownKey);
    REQUIRE(std::string(e.what()).find("typo_key") != std::string::npos);
    REQUIRE(std::string(e.what()).find("line") != std::string::npos);
  }
  REQUIRE_NOTHROW(parse_str(text, false));
}

TEST_CASE("malformed values report the offending key") {
  const std::string text = std::string(kMinimalConfig) + "[grid]\nnx = sixty\n";
  REQUIRE_THROWS_AS(parse_str(text), Error);
  const std::string text2 = std::string(kMinimalConfig) + "[probe]\neta = 1.0\n";
  REQUIRE_THROWS_AS(parse_str(text2), Error);
}

TEST_CASE("parsing is deterministic") {
  const auto a = parse_str(kFullConfig);
  const auto b = parse_str(kFullConfig);
  REQUIRE(a.scene.hash() == b.scene.hash());
  REQUIRE(a.grid_spec().hash() == b.grid_spec().hash());
}

TEST_CASE("artifact files round trip bitwise") {
  const GridSpec g = GridSpec::make({1.0, 1.0}, 16, 16, 0.9, 0.5, 1.0, 1.0);
  BoundaryTrace tr;
  tr.gamma = Gamma::full_boundary(g);
  tr.dt = g.dt;
  tr.nt = g.nt;
  tr.grid_hash = g.hash();
  tr.values.resize(static_cast<size_t>(g.nt + 1) * tr.gamma.size());
  for (size_t q = 0; q < tr.values.size(); ++q)
    tr.values[q] = Complex{std::sin(0.1 * q), std::cos(0.2 * q)};
  const auto path = std::filesystem::temp_directory_path() / "emrec_trace_roundtrip.bin";
  save_trace(path, tr, g);
  const auto loaded = load_trace(path, g);
  REQUIRE(loaded.values == tr.values);
  std::filesystem::remove(path);
}

TEST_CASE("truncated payloads are reported as cache corruption") {
  const GridSpec g = GridSpec::make({1.0, 1.0}, 8, 8, 0.9, 0.3, 1.0, 1.0);
  BoundaryTrace tr;
  tr.gamma = Gamma::full_boundary(g);
  tr.dt = g.dt;
  tr.nt = g.nt;
  tr.values.assign(static_cast<size_t>(g.nt + 1) * tr.gamma.size(), Complex{1.0, -1.0});
  const auto path = std::filesystem::temp_directory_path() / "emrec_trace_trunc.bin";
  save_trace(path, tr, g);
  // Chop the tail off.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 64);
  try {
    load_trace(path, g);
    FAIL("expected CacheCorrupt");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::CacheCorrupt);
  }
  std::filesystem::remove(path);
}

TEST_CASE("artifacts from a future format version are refused with advice") {
  const auto path = std::filesystem::temp_directory_path() / "emrec_future.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"magic":"EMREC","version":999,"kind":"trace","dtype":"f64le","shape":[1],)"
        << R"("payload_hash":"0000000000000000","grid_hash":"0000000000000000","meta":{}})"
        << "\n";
    const double v = 0.0;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  try {
    read_artifact(path);
    FAIL("expected VersionMismatch");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::VersionMismatch);
    REQUIRE(std::string(e.what()).find("newer") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupted payload bytes fail the hash check") {
  const GridSpec g = GridSpec::make({1.0, 1.0}, 8, 8, 0.9, 0.3, 1.0, 1.0);
  BoundaryTrace tr;
  tr.gamma = Gamma::full_boundary(g);
  tr.dt = g.dt;
  tr.nt = g.nt;
  tr.values.assign(static_cast<size_t>(g.nt + 1) * tr.gamma.size(), Complex{0.5, 0.25});
  const auto path = std::filesystem::temp_directory_path() / "emrec_trace_flip.bin";
  save_trace(path, tr, g);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-9, std::ios::end);
    const char junk = 0x5a;
    f.write(&junk, 1);
  }
  REQUIRE_THROWS_AS(load_trace(path, g), Error);
  std::filesystem::remove(path);
}

TEST_CASE("manifest creator hash is stable and input sensitive") {
  RunManifest m;
  m.subcommand = "simulate";
  m.config_hash = 0x1234;
  m.inputs = {"a.cfg"};
  const std::string h1 = m.creator_hash();
  REQUIRE(h1 == RunManifest{m}.creator_hash());
  m.inputs.push_back("b.bin");
  REQUIRE(m.creator_hash() != h1);
}
