#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "eplx/ensemble.hpp"
#include "eplx/model.hpp"
#include "eplx/params.hpp"
#include "eplx/spectrum.hpp"
#include "eplx/state.hpp"

namespace eplx {

inline constexpr const char* version_string = "eplx 1.0.0";

namespace detail {

inline void append_real(std::string& out, double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

template <class... Ts>
void append_row(std::string& out, Ts... values) {
  bool first = true;
  auto one = [&](auto v) {
    if (!first) out.push_back(',');
    first = false;
    if constexpr (std::is_integral_v<decltype(v)>) out += std::to_string(v);
    else append_real(out, static_cast<double>(v));
  };
  (one(values), ...);
  out.push_back('\n');
}

}  // namespace detail

// CSV bodies in atomic units except t (fs) and E (eV); full precision.
inline std::string msd_csv(const EnsembleObservables& obs) {
  std::string out = "t_fs,msd,norm2,photon_pop\n";
  for (std::size_t r = 0; r < obs.times.size(); ++r)
    detail::append_row(out, from_atomic_units(obs.times[r], Unit::fs), obs.msd[r], obs.norm2[r], obs.photon_pop[r]);
  return out;
}

inline std::string density_csv(const EnsembleObservables& obs) {
  std::string out = "t_fs,n,P_n\n";
  for (std::size_t r = 0; r < obs.times.size(); ++r) {
    const double t = from_atomic_units(obs.times[r], Unit::fs);
    for (std::size_t n = 0; n < obs.n_sites; ++n) detail::append_row(out, t, n, obs.P_n[r][n]);
  }
  return out;
}

inline std::string density_layers_csv(const EnsembleObservables& obs) {
  std::string out = "t_fs,n,m,P_nm\n";
  for (std::size_t r = 0; r < obs.layer_times.size(); ++r) {
    const double t = from_atomic_units(obs.layer_times[r], Unit::fs);
    for (std::size_t n = 0; n < obs.n_sites; ++n)
      for (std::size_t m = 0; m < obs.n_layers; ++m) detail::append_row(out, t, n, m, obs.P_nm[r][m * obs.n_sites + n]);
  }
  return out;
}

inline std::string purity_csv(const EnsembleObservables& obs) {
  std::string out = "t_fs,ep,ground,total\n";
  for (std::size_t r = 0; r < obs.purity_times.size(); ++r)
    detail::append_row(out, from_atomic_units(obs.purity_times[r], Unit::fs), obs.purity[r].ep, obs.purity[r].ground,
                       obs.purity[r].total);
  return out;
}

inline std::string spectrum_csv(const Spectrum& s) {
  std::string out = "k,E_eV,A\n";
  for (std::size_t i = 0; i < s.k.size(); ++i)
    for (std::size_t e = 0; e < s.energies.size(); ++e)
      detail::append_row(out, s.k[i], from_atomic_units(s.energies[e], Unit::eV), s.A[i][e]);
  return out;
}

inline std::string dos_csv(const Histogram& h) {
  std::string out = "E_lo_eV,E_hi_eV,count\n";
  for (std::size_t i = 0; i < h.n_bins(); ++i)
    detail::append_row(out, from_atomic_units(h.edges[i], Unit::eV), from_atomic_units(h.edges[i + 1], Unit::eV),
                       h.counts[i]);
  return out;
}

inline std::string group_velocity_csv(const KTable& table) {
  std::string out = "k,omega_minus_eV,v_g\n";
  const auto v = theoretical_group_velocity(table);
  for (std::size_t i = 0; i < table.size(); ++i)
    detail::append_row(out, table[i].k, from_atomic_units(table[i].mode.omega_minus, Unit::eV), v[i]);
  return out;
}

struct LayerSweepRow {
  int n_layers = 0;
  double v_g = 0.0;        // a.u.
  double std_error = 0.0;  // a.u.
};

inline std::string vg_vs_layers_csv(const std::vector<LayerSweepRow>& rows) {
  std::string out = "n_layers,v_g,std_error\n";
  for (const auto& r : rows) detail::append_row(out, r.n_layers, r.v_g, r.std_error);
  return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// ---- snapshots -------------------------------------------------------------

inline constexpr std::uint32_t snapshot_version = 1;

struct SnapshotFile {
  double time = 0.0;  // a.u.
  QuantumState state;
  PhononField phonons;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  std::uint64_t uint(int width) {
    if (pos + width > bytes.size()) throw std::runtime_error("snapshot: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += width;
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
};

}  // namespace detail

inline std::string encode_snapshot(const SnapshotFile& s) {
  const auto& st = s.state;
  const std::size_t N = st.n_sites, M = st.n_layers;
  if (st.c.size() != N || st.b.size() != N * M || s.phonons.q.size() != N * M || s.phonons.p.size() != N * M)
    throw std::invalid_argument("snapshot: inconsistent array sizes");
  std::string out = "EPLX";
  out.reserve(4 + 4 + 16 + 8 + 16 * N * (M + 1) + 16 * N * M);
  detail::put_u32(out, snapshot_version);
  detail::put_u64(out, N);
  detail::put_u64(out, M);
  detail::put_f64(out, s.time);
  for (const auto& x : st.c) {
    detail::put_f64(out, x.real());
    detail::put_f64(out, x.imag());
  }
  for (const auto& x : st.b) {
    detail::put_f64(out, x.real());
    detail::put_f64(out, x.imag());
  }
  for (double v : s.phonons.q) detail::put_f64(out, v);
  for (double v : s.phonons.p) detail::put_f64(out, v);
  return out;
}

inline std::size_t snapshot_size(std::uint64_t N, std::uint64_t M) { return 32 + 16 * N + 16 * N * M + 16 * N * M; }

inline SnapshotFile decode_snapshot(std::string_view bytes) {
  if (bytes.size() < 32 || bytes.substr(0, 4) != "EPLX") throw std::runtime_error("snapshot: bad magic");
  detail::Reader r{bytes, 4};
  const auto version = r.uint(4);
  if (version != snapshot_version) throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
  const auto N = r.uint(8);
  const auto M = r.uint(8);
  if (N == 0 || M == 0 || N > (1ull << 32) || M > (1ull << 20) || bytes.size() != snapshot_size(N, M))
    throw std::runtime_error("snapshot: length does not match header");
  SnapshotFile s;
  s.time = r.f64();
  s.state = QuantumState(N, M);
  s.phonons = PhononField(N, M);
  for (auto& x : s.state.c) {
    const double re = r.f64();
    x = cplx(re, r.f64());
  }
  for (auto& x : s.state.b) {
    const double re = r.f64();
    x = cplx(re, r.f64());
  }
  for (double& v : s.phonons.q) v = r.f64();
  for (double& v : s.phonons.p) v = r.f64();
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const SnapshotFile& s) {
  write_file(path, encode_snapshot(s));
}

inline SnapshotFile read_snapshot(const std::filesystem::path& path) { return decode_snapshot(read_file(path)); }

// ---- manifest --------------------------------------------------------------

struct RunManifest {
  std::uint64_t params_hash = 0;
  std::uint64_t seed = 0;
  int n_traj = 0;
  std::string started;
  std::string finished;
  std::map<std::string, std::uint64_t> checksums;  // file name -> FNV-1a 64
  std::string version = version_string;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["params_hash"] = hex64(m.params_hash);
  j["seed"] = m.seed;
  j["n_traj"] = m.n_traj;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["version"] = m.version;
  auto& files = j["checksums"];
  files = nlohmann::json::object();
  for (const auto& [name, sum] : m.checksums) files[name] = hex64(sum);
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.params_hash = std::stoull(j.at("params_hash").get<std::string>(), nullptr, 16);
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_traj = j.at("n_traj").get<int>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.version = j.at("version").get<std::string>();
  for (const auto& [name, sum] : j.at("checksums").items())
    m.checksums[name] = std::stoull(sum.get<std::string>(), nullptr, 16);
  return m;
}

// Writes named outputs into `dir` and records their checksums.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  const std::filesystem::path& path() const { return dir_; }

  void put(const std::string& name, std::string_view bytes) {
    write_file(dir_ / name, bytes);
    manifest.checksums[name] = fnv1a64(bytes);
  }

  void finish() {
    if (manifest.finished.empty()) manifest.finished = utc_timestamp();
    write_file(dir_ / "manifest.json", to_json(manifest).dump(2) + "\n");
  }

  RunManifest manifest;

 private:
  std::filesystem::path dir_;
};

// Standard outputs of one ensemble run; the resolved config goes alongside.
inline void write_ensemble_outputs(OutputDir& out, const SimParams& p, const EnsembleObservables& obs) {
  out.manifest.params_hash = obs.params_hash;
  out.manifest.seed = p.seed;
  out.manifest.n_traj = p.n_traj;
  out.put("config.txt", to_config_text(p));
  out.put("msd.csv", msd_csv(obs));
  out.put("density.csv", density_csv(obs));
  if (p.record_layers) out.put("density_layers.csv", density_layers_csv(obs));
  if (p.purity) out.put("purity.csv", purity_csv(obs));
}

}  // namespace eplx
