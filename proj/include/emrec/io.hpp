#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emrec/errors.hpp"
#include "emrec/fdtd.hpp"
#include "emrec/grid.hpp"
#include "emrec/util.hpp"
#include "emrec/version.hpp"

namespace emrec {

using Json = nlohmann::json;

// One JSON text line, then a raw little-endian float64 payload.
struct ArtifactHeader {
  std::string magic = "EMREC";
  int version = kArtifactFormatVersion;
  std::string kind;          // "trace", "control", "theta", "fgrid", ...
  std::string dtype = "f64le";
  std::vector<long long> shape;
  uint64_t payload_hash = 0;
  uint64_t grid_hash = 0;
  std::string manifest_hash;
  Json meta;  // kind-specific fields

  size_t payload_count() const {
    size_t n = 1;
    for (long long s : shape) n *= static_cast<size_t>(s);
    return n;
  }
};

namespace detail {

inline Json header_to_json(const ArtifactHeader& h) {
  Json j;
  j["magic"] = h.magic;
  j["version"] = h.version;
  j["kind"] = h.kind;
  j["dtype"] = h.dtype;
  j["shape"] = h.shape;
  j["payload_hash"] = hex64(h.payload_hash);
  j["grid_hash"] = hex64(h.grid_hash);
  j["manifest_hash"] = h.manifest_hash;
  j["meta"] = h.meta;
  return j;
}

inline ArtifactHeader header_from_json(const Json& j) {
  ArtifactHeader h;
  h.magic = j.at("magic").get<std::string>();
  h.version = j.at("version").get<int>();
  h.kind = j.at("kind").get<std::string>();
  h.dtype = j.at("dtype").get<std::string>();
  h.shape = j.at("shape").get<std::vector<long long>>();
  h.payload_hash = std::stoull(j.at("payload_hash").get<std::string>(), nullptr, 16);
  h.grid_hash = std::stoull(j.at("grid_hash").get<std::string>(), nullptr, 16);
  h.manifest_hash = j.value("manifest_hash", "");
  h.meta = j.value("meta", Json::object());
  return h;
}

}  // namespace detail

inline void write_artifact(const std::filesystem::path& path, ArtifactHeader header,
                           const std::vector<double>& payload) {
  namespace fs = std::filesystem;
  if (payload.size() != header.payload_count())
    raise(ErrorCode::IoError, "payload size does not match header shape");
  header.payload_hash = fnv1a64(payload.data(), payload.size() * sizeof(double));
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot open " + tmp.string());
    const std::string line = detail::header_to_json(header).dump();
    out << line << "\n";
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) raise(ErrorCode::IoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::pair<ArtifactHeader, std::vector<double>> read_artifact(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::CacheCorrupt, "missing header line");
  ArtifactHeader h;
  try {
    h = detail::header_from_json(Json::parse(line));
  } catch (const Json::exception& e) {
    raise(ErrorCode::CacheCorrupt, std::string("bad header json: ") + e.what());
  }
  if (h.magic != "EMREC") raise(ErrorCode::CacheCorrupt, "bad magic");
  if (h.version > kArtifactFormatVersion)
    raise(ErrorCode::VersionMismatch,
          "artifact written by a newer tool (format v" + std::to_string(h.version) +
              "); upgrade to read it");
  std::vector<double> payload(h.payload_count());
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != payload.size() * sizeof(double))
    raise(ErrorCode::CacheCorrupt, "truncated payload in " + path.string());
  if (fnv1a64(payload.data(), payload.size() * sizeof(double)) != h.payload_hash)
    raise(ErrorCode::CacheCorrupt, "payload hash mismatch in " + path.string());
  return {h, std::move(payload)};
}

// --------------------------------------------------------------------------
// Run manifests
// --------------------------------------------------------------------------

struct RunManifest {
  std::string subcommand;
  std::string config_path;
  uint64_t config_hash = 0;
  std::string tool_version = kVersion;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double seconds = 0.0;

  // Identity of the producing run: stable before outputs are known.
  std::string creator_hash() const {
    std::ostringstream os;
    os << subcommand << "|" << hex64(config_hash) << "|" << tool_version;
    for (const auto& i : inputs) os << "|" << i;
    return hex64(fnv1a64(os.str()));
  }

  Json to_json() const {
    Json j;
    j["subcommand"] = subcommand;
    j["config_path"] = config_path;
    j["config_hash"] = hex64(config_hash);
    j["tool_version"] = tool_version;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seconds"] = seconds;
    j["creator_hash"] = creator_hash();
    return j;
  }
};

// --------------------------------------------------------------------------
// Typed artifact wrappers
// --------------------------------------------------------------------------

namespace detail {

inline std::vector<double> complex_to_payload(const std::vector<Complex>& v) {
  std::vector<double> p(2 * v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    p[2 * i] = v[i].real();
    p[2 * i + 1] = v[i].imag();
  }
  return p;
}

inline std::vector<Complex> payload_to_complex(const std::vector<double>& p) {
  std::vector<Complex> v(p.size() / 2);
  for (size_t i = 0; i < v.size(); ++i) v[i] = {p[2 * i], p[2 * i + 1]};
  return v;
}

inline Json gamma_meta(const Gamma& gm, const GridSpec& g) {
  Json j;
  j["arc"] = "full";
  j["points"] = gm.size();
  j["nx"] = g.nx;
  j["ny"] = g.ny;
  j["lx"] = g.domain.lx;
  j["ly"] = g.domain.ly;
  return j;
}

}  // namespace detail

inline void save_trace(const std::filesystem::path& path, const BoundaryTrace& tr,
                       const GridSpec& g, const std::string& manifest_hash = "") {
  ArtifactHeader h;
  h.kind = "trace";
  h.shape = {tr.nt + 1, tr.gamma.size(), 2};
  h.grid_hash = g.hash();
  h.manifest_hash = manifest_hash;
  h.meta = detail::gamma_meta(tr.gamma, g);
  h.meta["dt"] = tr.dt;
  h.meta["nt"] = tr.nt;
  write_artifact(path, h, detail::complex_to_payload(tr.values));
}

inline BoundaryTrace load_trace(const std::filesystem::path& path, const GridSpec& g) {
  auto [h, payload] = read_artifact(path);
  if (h.kind != "trace") raise(ErrorCode::CacheCorrupt, "not a trace artifact");
  if (h.grid_hash != g.hash()) raise(ErrorCode::GridMismatch, "trace grid hash mismatch");
  BoundaryTrace tr;
  tr.gamma = Gamma::full_boundary(g);
  tr.dt = h.meta.at("dt").get<double>();
  tr.nt = h.meta.at("nt").get<int>();
  tr.grid_hash = h.grid_hash;
  tr.values = detail::payload_to_complex(payload);
  if (tr.values.size() != static_cast<size_t>(tr.nt + 1) * tr.gamma.size())
    raise(ErrorCode::CacheCorrupt, "trace payload shape mismatch");
  return tr;
}

// Generic complex time-by-point series ("theta" and friends).
inline void save_series(const std::filesystem::path& path, const std::string& kind,
                        const std::vector<Complex>& values, int nt, int npoints, double dt,
                        const GridSpec& g, const std::string& manifest_hash = "") {
  ArtifactHeader h;
  h.kind = kind;
  h.shape = {nt + 1, npoints, 2};
  h.grid_hash = g.hash();
  h.manifest_hash = manifest_hash;
  h.meta["dt"] = dt;
  h.meta["nt"] = nt;
  write_artifact(path, h, detail::complex_to_payload(values));
}

}  // namespace emrec
