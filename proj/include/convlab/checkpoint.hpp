#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "convlab/binio.hpp"
#include "convlab/multilingual.hpp"
#include "convlab/optim.hpp"

namespace convlab {

inline constexpr std::string_view kCheckpointMagic = "CVCK1";

struct Blob {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const Blob &, const Blob &) = default;
};

/// Manifest plus named float32 blobs.
///
/// Layout: magic "CVCK1", u32 length + UTF-8 JSON manifest, u32 blob count,
/// then per blob: u16 length + name, u8 rank, u32 extents, float32 values.
/// Little-endian throughout.
struct Checkpoint {
  nlohmann::ordered_json manifest;
  std::vector<Blob> blobs;

  const Blob *find(std::string_view name) const {
    for (const auto &b : blobs)
      if (b.name == name) return &b;
    return nullptr;
  }
};

inline std::string encode_checkpoint(const Checkpoint &ck) {
  binio::Writer w;
  w.bytes(kCheckpointMagic);
  w.str32(ck.manifest.dump());
  w.u32(static_cast<std::uint32_t>(ck.blobs.size()));
  for (const auto &b : ck.blobs) {
    if (shape_numel(b.shape) != b.data.size())
      throw ContractError("blob " + b.name + " shape does not match its data");
    w.str16(b.name);
    w.u8(static_cast<std::uint8_t>(b.shape.size()));
    for (auto d : b.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(b.data);
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError(0, "bad magic: expected \"CVCK1\"");
  binio::Reader r(bytes);
  r.bytes(kCheckpointMagic.size(), "magic");
  Checkpoint ck;
  const auto at = r.offset();
  const std::string text = r.str32("manifest");
  try {
    ck.manifest = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(at, std::string("bad manifest: ") + e.what());
  }
  const std::uint32_t count = r.u32("blob count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    b.name = r.str16("blob name");
    const std::uint8_t rank = r.u8("blob rank");
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      b.shape.push_back(r.u32("blob shape"));
      n *= b.shape.back();
    }
    if (n * 4 > r.remaining()) r.fail("truncated data for blob " + b.name);
    b.data.resize(n);
    r.f32s(b.data, "blob data");
    ck.blobs.push_back(std::move(b));
  }
  if (!r.done()) r.fail("unexpected trailing bytes");
  return ck;
}

inline void write_checkpoint(const Checkpoint &ck, const std::string &path) {
  binio::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::string &path) {
  return decode_checkpoint(binio::read_file(path));
}

namespace detail {

inline nlohmann::ordered_json languages_json(const LanguageTable &t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto &[id, width] : t) arr.push_back({{"id", id}, {"classes", width}});
  return arr;
}

inline nlohmann::ordered_json optimizer_json(const OptimizerConfig &c, std::uint64_t steps) {
  return {{"mode", mode_name(c.mode)},         {"steps", steps},
          {"lr", c.lr},                        {"mu", c.mu},
          {"rho", c.rho},                      {"eps", c.effective_eps()},
          {"alpha", c.alpha},                  {"beta1", c.beta1},
          {"beta2", c.beta2},                  {"finetune_after_epoch", c.finetune_after_epoch}};
}

inline OptimizerConfig optimizer_from_json(const nlohmann::ordered_json &j) {
  OptimizerConfig c;
  c.mode = parse_mode(j.at("mode").template get<std::string>());
  c.lr = j.at("lr").template get<double>();
  c.mu = j.at("mu").template get<double>();
  c.rho = j.at("rho").template get<double>();
  c.eps = j.at("eps").template get<double>();
  c.alpha = j.at("alpha").template get<double>();
  c.beta1 = j.at("beta1").template get<double>();
  c.beta2 = j.at("beta2").template get<double>();
  c.finetune_after_epoch = j.at("finetune_after_epoch").template get<int>();
  return c;
}

template <typename T> std::vector<float> to_f32(std::span<const T> v) {
  return std::vector<float>(v.begin(), v.end());
}

} // namespace detail

/// Snapshot of a network and its optimizer. `extra` fields are appended to
/// the manifest (trainer position, RNG streams, ...).
template <typename T>
Checkpoint capture_checkpoint(const MultilingualNetwork<T> &net, const Optimizer<T> &opt,
                              const nlohmann::ordered_json &extra = {}) {
  Checkpoint ck;
  ck.manifest["format"] = 1;
  ck.manifest["architecture"] = to_dsl(net.config());
  ck.manifest["geometry"] = geometry_string(net.geometry());
  ck.manifest["languages"] = detail::languages_json(net.languages());
  ck.manifest["optimizer"] = detail::optimizer_json(opt.config(), opt.steps());
  if (extra.is_object())
    for (const auto &[k, v] : extra.items()) ck.manifest[k] = v;
  for (const auto &[name, p] : net.named_params())
    ck.blobs.push_back({name, p.value().shape(), detail::to_f32<T>(p.value().data())});
  for (const auto &[name, v] : opt.export_state())
    ck.blobs.push_back({"opt/" + name, Shape{v.size()}, detail::to_f32<T>(std::span<const T>(v))});
  return ck;
}

/// Copies parameters and optimizer state into an existing network whose
/// architecture, geometry and language table must match the manifest.
template <typename T>
void restore_checkpoint(const Checkpoint &ck, MultilingualNetwork<T> &net, Optimizer<T> &opt) {
  const auto &m = ck.manifest;
  auto field = [&](const char *key) -> const nlohmann::ordered_json & {
    if (!m.contains(key)) throw IncompatibilityError(key, "missing from checkpoint manifest");
    return m.at(key);
  };
  if (field("architecture").template get<std::string>() != to_dsl(net.config()))
    throw IncompatibilityError("architecture", "checkpoint was saved from a different network");
  if (field("geometry").template get<std::string>() != geometry_string(net.geometry()))
    throw IncompatibilityError("geometry", "checkpoint input geometry differs");
  if (field("languages") != detail::languages_json(net.languages()))
    throw IncompatibilityError("languages", "checkpoint language table differs");
  for (auto &[name, p] : net.named_params()) {
    const Blob *b = ck.find(name);
    if (!b) throw IncompatibilityError(name, "parameter missing from checkpoint");
    if (b->shape != p.value().shape())
      throw IncompatibilityError(name, "shape " + shape_string(b->shape) + " != " +
                                           shape_string(p.value().shape()));
    auto dst = p.value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = T(b->data[i]);
  }
  const auto &oj = field("optimizer");
  std::map<std::string, std::vector<T>> state;
  for (const auto &b : ck.blobs)
    if (b.name.rfind("opt/", 0) == 0)
      state.emplace(b.name.substr(4), std::vector<T>(b.data.begin(), b.data.end()));
  const auto cfg = detail::optimizer_from_json(oj);
  if (cfg.mode != opt.mode() && !(cfg.mode == OptimizerMode::sgd))
    throw IncompatibilityError("optimizer", std::string("checkpoint uses ") +
                                                mode_name(cfg.mode) + ", run uses " +
                                                mode_name(opt.mode()));
  opt.import_state(cfg.mode, oj.at("steps").template get<std::uint64_t>(), state);
}

template <typename T> struct LoadedModel {
  std::unique_ptr<MultilingualNetwork<T>> network;
  std::unique_ptr<Optimizer<T>> optimizer;
  nlohmann::ordered_json manifest;
};

inline void save_checkpoint(const Checkpoint &ck, const std::string &path) {
  write_checkpoint(ck, path);
}

/// Rebuilds network and optimizer purely from a checkpoint file.
template <typename T = float> LoadedModel<T> load_checkpoint(const std::string &path) {
  const auto ck = read_checkpoint(path);
  LoadedModel<T> out;
  out.manifest = ck.manifest;
  try {
    const auto arch = parse_dsl(ck.manifest.at("architecture").template get<std::string>());
    const auto geom = parse_geometry(ck.manifest.at("geometry").template get<std::string>());
    LanguageTable langs;
    for (const auto &l : ck.manifest.at("languages"))
      langs[l.at("id").template get<std::uint16_t>()] = l.at("classes").template get<std::size_t>();
    out.network = std::make_unique<MultilingualNetwork<T>>(arch, geom, langs, 0);
    out.optimizer = std::make_unique<Optimizer<T>>(
        detail::optimizer_from_json(ck.manifest.at("optimizer")), out.network->named_params());
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(0, std::string("bad checkpoint manifest: ") + e.what());
  }
  restore_checkpoint(ck, *out.network, *out.optimizer);
  return out;
}

} // namespace convlab
