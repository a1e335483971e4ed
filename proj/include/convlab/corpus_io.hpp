#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "convlab/binio.hpp"
#include "convlab/errors.hpp"
#include "convlab/features.hpp"

namespace convlab {

inline constexpr std::string_view kCorpusMagic = "CVLB1";

/// Layout: magic "CVLB1", u32 length + UTF-8 JSON metadata, then one record
/// per utterance: u16 language, u32 frames, u16 bins, float32 frames
/// (time-major), u32 targets. Little-endian throughout.
inline std::string encode_corpus(const Corpus &corpus) {
  validate_corpus(corpus);
  nlohmann::json meta;
  meta["mel_bins"] = corpus.mel_bins;
  meta["seed"] = corpus.seed;
  meta["utterances"] = corpus.utterances.size();
  meta["languages"] = nlohmann::json::array();
  for (const auto &l : corpus.languages)
    meta["languages"].push_back({{"id", l.id}, {"name", l.name}, {"classes", l.classes}});

  binio::Writer w;
  w.bytes(kCorpusMagic);
  w.str32(meta.dump());
  for (const auto &u : corpus.utterances) {
    if (u.channels != 1)
      throw ContractError("corpus files hold single-channel frames; add deltas after loading");
    if (u.frames > UINT32_MAX || u.bins > UINT16_MAX)
      throw ContractError("utterance too large for the corpus format");
    w.u16(u.language);
    w.u32(static_cast<std::uint32_t>(u.frames));
    w.u16(static_cast<std::uint16_t>(u.bins));
    w.f32s(u.data);
    for (auto t : u.targets) w.u32(t);
  }
  return w.take();
}

inline Corpus decode_corpus(std::string_view bytes) {
  binio::Reader r(bytes);
  if (bytes.size() < kCorpusMagic.size() || bytes.substr(0, kCorpusMagic.size()) != kCorpusMagic)
    throw FormatError(0, "bad magic: expected \"CVLB1\"");
  r.bytes(kCorpusMagic.size(), "magic");
  const auto meta_at = r.offset();
  const std::string text = r.str32("metadata");
  Corpus c;
  std::size_t count = 0;
  try {
    const auto meta = nlohmann::json::parse(text);
    c.mel_bins = meta.at("mel_bins").get<std::size_t>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    count = meta.at("utterances").get<std::size_t>();
    for (const auto &l : meta.at("languages"))
      c.languages.push_back({l.at("id").get<std::uint16_t>(), l.at("name").get<std::string>(),
                             l.at("classes").get<std::size_t>()});
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(meta_at, std::string("bad metadata: ") + e.what());
  }
  c.utterances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto at = r.offset();
    Utterance u;
    u.language = r.u16("utterance header");
    u.frames = r.u32("utterance header");
    u.bins = r.u16("utterance header");
    if (u.bins != c.mel_bins)
      throw FormatError(at, "utterance " + std::to_string(i) + " has " + std::to_string(u.bins) +
                                " bins, metadata says " + std::to_string(c.mel_bins));
    if (!c.has_language(u.language))
      throw FormatError(at, "utterance " + std::to_string(i) + " has unknown language " +
                                std::to_string(u.language));
    const std::size_t classes = c.language(u.language).classes;
    // Size check up front so a corrupt count cannot trigger a huge allocation.
    if (std::uint64_t(u.frames) * (std::uint64_t(u.bins) + 1) * 4 > r.remaining())
      throw FormatError(r.offset(), "truncated utterance payload");
    u.data.resize(u.frames * u.bins);
    r.f32s(u.data, "frame data");
    u.targets.resize(u.frames);
    for (auto &t : u.targets) {
      const auto pos = r.offset();
      t = r.u32("targets");
      if (t >= classes)
        throw FormatError(pos, "target " + std::to_string(t) + " >= class count " +
                                   std::to_string(classes));
    }
    c.utterances.push_back(std::move(u));
  }
  if (!r.done()) r.fail("unexpected trailing bytes after " + std::to_string(count) + " utterances");
  return c;
}

inline void write_corpus(const Corpus &corpus, const std::string &path) {
  binio::write_file(path, encode_corpus(corpus));
}

inline Corpus read_corpus(const std::string &path) { return decode_corpus(binio::read_file(path)); }

} // namespace convlab
