#pragma once

// Binary checkpoint container:
//
//   "SCRMCKPT"                         8 bytes magic
//   u32 version                        little-endian
//   u64 manifest length, manifest      UTF-8 JSON
//   u64 tensor count
//   per tensor: u32 name length, name, u64 rows, u64 cols,
//               rows*cols f64 little-endian, row-major
//
// The manifest carries the model dimensions, variant flags, seed and hashes of
// the graphs the model was trained on.

#include "scrm/error.hpp"
#include "scrm/model.hpp"
#include "scrm/training.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace scrm {

inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'R', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointManifest {
  ModelDims dims;
  AblationFlags ablation;
  std::size_t top_k = 4;
  double tau = 0.01;
  std::uint64_t seed = 0;
  std::string sub_graph_hash;
  std::string comp_graph_hash;
};

struct Checkpoint {
  CheckpointManifest manifest;
  ModelParams params;
};

inline nlohmann::json manifest_json(const CheckpointManifest& m) {
  nlohmann::json j;
  j["format"] = "scrm-checkpoint";
  j["version"] = kCheckpointVersion;
  j["num_items"] = m.dims.num_items;
  j["d0"] = m.dims.d0;
  j["d1"] = m.dims.d1;
  j["heads"] = m.dims.heads;
  j["wgat_layers"] = m.dims.layers;
  j["top_k"] = m.top_k;
  j["tau"] = m.tau;
  j["seed"] = m.seed;
  const auto& a = m.ablation;
  j["ablation"] = {{"no_ex", a.no_ex},         {"no_se", a.no_se},
                   {"no_denoise", a.no_denoise}, {"sub_only", a.sub_only},
                   {"comp_only", a.comp_only},   {"mix_graphs", a.mix_graphs},
                   {"no_integration", a.no_integration}};
  j["graph_hashes"] = {{"substitutable", m.sub_graph_hash}, {"complementary", m.comp_graph_hash}};
  return j;
}

inline CheckpointManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "scrm-checkpoint") throw Error(ErrorKind::ConfigMismatch, "not a checkpoint manifest");
    CheckpointManifest m;
    m.dims.num_items = j.at("num_items").get<std::size_t>();
    m.dims.d0 = j.at("d0").get<std::size_t>();
    m.dims.d1 = j.at("d1").get<std::size_t>();
    m.dims.heads = j.at("heads").get<std::size_t>();
    m.dims.layers = j.at("wgat_layers").get<std::size_t>();
    m.top_k = j.at("top_k").get<std::size_t>();
    m.tau = j.at("tau").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& a = j.at("ablation");
    m.ablation.no_ex = a.at("no_ex");
    m.ablation.no_se = a.at("no_se");
    m.ablation.no_denoise = a.at("no_denoise");
    m.ablation.sub_only = a.at("sub_only");
    m.ablation.comp_only = a.at("comp_only");
    m.ablation.mix_graphs = a.at("mix_graphs");
    m.ablation.no_integration = a.at("no_integration");
    m.ablation.wgat_layers = m.dims.layers;
    m.sub_graph_hash = j.at("graph_hashes").at("substitutable");
    m.comp_graph_hash = j.at("graph_hashes").at("complementary");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigMismatch, std::string("bad manifest: ") + e.what());
  }
}

inline CheckpointManifest make_manifest(const TrainConfig& cfg, std::size_t num_items,
                                        const RelationGraphs& graphs) {
  CheckpointManifest m;
  m.dims = model_dims(cfg, num_items);
  m.ablation = cfg.ablation;
  m.top_k = cfg.top_k;
  m.tau = cfg.tau;
  m.seed = cfg.seed;
  m.sub_graph_hash = hex64(graph_hash(graphs.substitutable));
  m.comp_graph_hash = hex64(graph_hash(graphs.complementary));
  return m;
}

namespace detail {
template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(std::istream& in) {
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == EOF) throw Error(ErrorKind::ConfigMismatch, "truncated checkpoint");
    v |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return v;
}
}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string manifest = manifest_json(ck.manifest).dump();
  detail::put_le<std::uint64_t>(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  std::uint64_t count = 0;
  ck.params.visit([&](const std::string&, const Matrix&) { ++count; });
  detail::put_le<std::uint64_t>(out, count);
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i)
      detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  });
}

/// Reads and validates a checkpoint: every tensor must be present with the
/// shape implied by the manifest dimensions.
inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::ConfigMismatch, "not an SCRM checkpoint");
  }
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::ConfigMismatch, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto mlen = detail::get_le<std::uint64_t>(in);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw Error(ErrorKind::ConfigMismatch, "truncated manifest");
  nlohmann::json mj;
  try {
    mj = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigMismatch, std::string("manifest is not JSON: ") + e.what());
  }
  Checkpoint ck;
  ck.manifest = manifest_from_json(mj);
  ck.params = allocate_params(ck.manifest.dims);

  const auto count = detail::get_le<std::uint64_t>(in);
  std::uint64_t expected = 0;
  ck.params.visit([&](const std::string&, const Matrix&) { ++expected; });
  if (count != expected) {
    throw Error(ErrorKind::ConfigMismatch, "checkpoint holds " + std::to_string(count) +
                                               " tensors, manifest implies " + std::to_string(expected));
  }
  ck.params.visit([&](const std::string& name, Matrix& m) {
    const auto nlen = detail::get_le<std::uint32_t>(in);
    std::string got(nlen, '\0');
    in.read(got.data(), nlen);
    const auto rows = detail::get_le<std::uint64_t>(in);
    const auto cols = detail::get_le<std::uint64_t>(in);
    if (got != name || rows != static_cast<std::uint64_t>(m.rows()) ||
        cols != static_cast<std::uint64_t>(m.cols())) {
      throw Error(ErrorKind::ConfigMismatch, "tensor '" + got + "' " + std::to_string(rows) + "x" +
                                                 std::to_string(cols) + " does not match expected '" +
                                                 name + "' " + std::to_string(m.rows()) + "x" +
                                                 std::to_string(m.cols()));
    }
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
  });
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  return read_checkpoint(in);
}

inline std::string checkpoint_bytes(const Checkpoint& ck) {
  std::ostringstream s(std::ios::binary);
  write_checkpoint(s, ck);
  return s.str();
}

}  // namespace scrm
