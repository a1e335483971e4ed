#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convlab/errors.hpp"
#include "convlab/rng.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

enum class LayerKind { conv, pool, flatten, fc, softmax };

inline const char *kind_name(LayerKind k) {
  switch (k) {
  case LayerKind::conv: return "conv";
  case LayerKind::pool: return "pool";
  case LayerKind::flatten: return "flatten";
  case LayerKind::fc: return "fc";
  case LayerKind::softmax: return "softmax";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  // conv
  std::size_t k_t = 0, k_f = 0;
  std::size_t in_maps = 0, out_maps = 0;
  std::size_t pad_t = 0, pad_f = 0;
  // pool
  std::size_t pool_t = 0, pool_f = 0;
  // fc; width is ignored for the output layer, whose size comes per language
  std::size_t width = 0;
  bool output = false;
  /// ReLU follows this layer (every conv and hidden fc).
  bool relu = false;

  bool has_weights() const { return kind == LayerKind::conv || kind == LayerKind::fc; }

  static LayerSpec conv(std::size_t kt, std::size_t kf, std::size_t in, std::size_t out,
                        std::size_t pad_t = 0, std::size_t pad_f = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.k_t = kt;
    s.k_f = kf;
    s.in_maps = in;
    s.out_maps = out;
    s.pad_t = pad_t;
    s.pad_f = pad_f;
    s.relu = true;
    return s;
  }
  static LayerSpec pool(std::size_t pt, std::size_t pf) {
    LayerSpec s;
    s.kind = LayerKind::pool;
    s.pool_t = pt;
    s.pool_f = pf;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
  static LayerSpec fc(std::size_t width) {
    LayerSpec s;
    s.kind = LayerKind::fc;
    s.width = width;
    s.relu = true;
    return s;
  }
  static LayerSpec fc_out() {
    LayerSpec s;
    s.kind = LayerKind::fc;
    s.output = true;
    return s;
  }
  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
  }

  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

struct ArchConfig {
  std::string name;
  std::vector<LayerSpec> layers;
  /// Index of the first language-specific layer.
  std::size_t untie_boundary = 0;

  std::vector<std::size_t> fc_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].kind == LayerKind::fc) out.push_back(i);
    return out;
  }
  std::size_t count(LayerKind k) const {
    return static_cast<std::size_t>(std::count_if(
        layers.begin(), layers.end(), [k](const LayerSpec &l) { return l.kind == k; }));
  }
  /// Number of fc layers at or after the untie boundary.
  std::size_t untied_fc() const {
    std::size_t n = 0;
    for (std::size_t i = untie_boundary; i < layers.size(); ++i)
      n += layers[i].kind == LayerKind::fc;
    return n;
  }

  friend bool operator==(const ArchConfig &, const ArchConfig &) = default;
};

struct InputGeometry {
  std::size_t channels = 1;
  std::size_t time = 1;
  std::size_t freq = 1;

  friend bool operator==(const InputGeometry &, const InputGeometry &) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<std::size_t> parse_count(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + std::size_t(c - '0');
    if (v > (std::size_t(1) << 40)) return std::nullopt;
  }
  return v;
}

/// "AxB" -> {A, B}
inline std::optional<std::pair<std::size_t, std::size_t>> parse_pair(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) return std::nullopt;
  auto a = parse_count(s.substr(0, x)), b = parse_count(s.substr(x + 1));
  if (!a || !b) return std::nullopt;
  return std::make_pair(*a, *b);
}

inline std::vector<std::string> split_ws(const std::string &s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

} // namespace detail

/// "CxTxF", e.g. "3x17x40".
inline InputGeometry parse_geometry(std::string_view text) {
  const auto t = detail::trim(text);
  const auto a = t.find('x');
  const auto b = a == std::string::npos ? a : t.find('x', a + 1);
  if (b == std::string::npos)
    throw ContractError("geometry must look like CxTxF, got '" + t + "'");
  auto c = detail::parse_count(std::string_view(t).substr(0, a));
  auto tt = detail::parse_count(std::string_view(t).substr(a + 1, b - a - 1));
  auto f = detail::parse_count(std::string_view(t).substr(b + 1));
  if (!c || !tt || !f || *c == 0 || *tt == 0 || *f == 0)
    throw ContractError("geometry must have three positive extents, got '" + t + "'");
  return {*c, *tt, *f};
}

inline std::string geometry_string(const InputGeometry &g) {
  return std::to_string(g.channels) + "x" + std::to_string(g.time) + "x" + std::to_string(g.freq);
}

/// Checks the structural rules shared by presets and parsed text: feature
/// layers first, a single output fc directly followed by the only softmax,
/// and the untie boundary leaving every conv and the first fc shared.
inline void validate_arch(const ArchConfig &cfg) {
  bool seen_fc = false;
  std::size_t outputs = 0, softmaxes = 0;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto &l = cfg.layers[i];
    switch (l.kind) {
    case LayerKind::conv:
    case LayerKind::pool:
      if (seen_fc)
        throw ContractError(std::string("layer ") + std::to_string(i) + ": " +
                            kind_name(l.kind) + " after a fully connected layer");
      break;
    case LayerKind::flatten: break;
    case LayerKind::fc:
      seen_fc = true;
      outputs += l.output;
      if (!l.output && l.width == 0)
        throw ContractError("layer " + std::to_string(i) + ": fc width must be positive");
      break;
    case LayerKind::softmax:
      ++softmaxes;
      if (i == 0 || cfg.layers[i - 1].kind != LayerKind::fc || !cfg.layers[i - 1].output)
        throw ContractError("layer " + std::to_string(i) + ": softmax must follow 'fc out'");
      break;
    }
  }
  if (outputs != 1) throw ContractError("architecture needs exactly one 'fc out' layer");
  if (softmaxes != 1) throw ContractError("architecture needs exactly one softmax");
  if (cfg.layers.back().kind != LayerKind::softmax)
    throw ContractError("softmax must be the last layer");
  const auto fcs = cfg.fc_indices();
  if (cfg.untie_boundary <= fcs.front() || cfg.untie_boundary > fcs.back())
    throw ContractError("untie boundary must lie after the first fc and at or before the "
                        "output fc");
}

/// Moves the untie boundary so the last `untied` fc layers are per-language.
inline void set_untied_fc(ArchConfig &cfg, std::size_t untied) {
  const auto fcs = cfg.fc_indices();
  if (untied < 1 || untied > fcs.size())
    throw ContractError("cannot untie " + std::to_string(untied) + " of " +
                        std::to_string(fcs.size()) + " fc layers");
  cfg.untie_boundary = fcs[fcs.size() - untied];
}

namespace detail {

inline void append_fc_stack(ArchConfig &cfg, bool extra_fc, std::size_t hidden) {
  cfg.layers.push_back(LayerSpec::flatten());
  cfg.layers.push_back(LayerSpec::fc(hidden));
  cfg.layers.push_back(LayerSpec::fc(hidden));
  if (extra_fc) cfg.layers.push_back(LayerSpec::fc(hidden));
  cfg.layers.push_back(LayerSpec::fc_out());
  cfg.layers.push_back(LayerSpec::softmax());
  set_untied_fc(cfg, 1);
}

} // namespace detail

inline constexpr std::size_t kHiddenWidth = 2048;

inline const std::vector<std::string> &preset_names() {
  static const std::vector<std::string> names = {"classic", "VB", "VBX", "VC", "VCX",
                                                 "VD",      "VDX", "WD", "WDX"};
  return names;
}

/// Table presets. Accepts names case-insensitively; "classic256" selects the
/// 256-map classic variant ("classic" and "classic512" the 512-map one).
inline ArchConfig preset(std::string_view name, std::size_t input_channels = 3) {
  const std::string key = detail::lower(detail::trim(name));
  using L = LayerSpec;
  ArchConfig cfg;
  if (key == "classic" || key == "classic512" || key == "classic256") {
    const std::size_t maps = key == "classic256" ? 256 : 512;
    cfg.name = key == "classic" ? "classic" : key;
    cfg.layers = {L::conv(9, 9, input_channels, maps), L::pool(1, 3), L::conv(3, 4, maps, maps)};
    detail::append_fc_stack(cfg, false, kHiddenWidth);
    return cfg;
  }
  const bool x = key.size() == 3 && key[2] == 'x';
  const std::string base = x ? key.substr(0, 2) : key;
  if (key.size() < 2 || key.size() > 3 || (key.size() == 3 && !x))
    throw NotFoundError("unknown architecture preset '" + std::string(name) + "'");
  if (base == "vb") {
    cfg.layers = {L::conv(3, 3, input_channels, 64), L::conv(3, 3, 64, 64), L::pool(1, 3),
                  L::conv(3, 3, 64, 128),            L::conv(3, 3, 128, 128), L::pool(2, 2)};
    cfg.name = x ? "VBX" : "VB";
  } else if (base == "vc") {
    cfg.layers = {L::conv(3, 3, input_channels, 64), L::conv(3, 3, 64, 64),
                  L::pool(1, 2),
                  L::conv(3, 3, 64, 128),            L::conv(3, 3, 128, 128),
                  L::pool(2, 2),
                  L::conv(3, 3, 128, 256, 1, 1),     L::conv(3, 3, 256, 256, 1, 1),
                  L::pool(1, 2)};
    cfg.name = x ? "VCX" : "VC";
  } else if (base == "vd" || base == "wd") {
    const bool wide = base == "wd";
    cfg.layers = {L::conv(3, 3, input_channels, 64, 1, 1), L::conv(3, 3, 64, 64, 1, 1),
                  L::pool(1, 2),
                  L::conv(3, 3, 64, 128, 1, 1),            L::conv(3, 3, 128, 128, 1, 1),
                  L::pool(1, 2),
                  L::conv(3, 3, 128, 256, 1, 1),           L::conv(3, 3, 256, 256, 1, 1)};
    if (wide) cfg.layers.push_back(L::conv(3, 3, 256, 256, 1, 1));
    cfg.layers.push_back(L::pool(2, 2));
    cfg.layers.push_back(L::conv(3, 3, 256, 512, 1, 1));
    cfg.layers.push_back(L::conv(3, 3, 512, 512, 1, 1));
    if (wide) cfg.layers.push_back(L::conv(3, 3, 512, 512, 1, 1));
    cfg.layers.push_back(L::pool(2, 2));
    cfg.name = std::string(wide ? "WD" : "VD") + (x ? "X" : "");
  } else {
    throw NotFoundError("unknown architecture preset '" + std::string(name) + "'");
  }
  detail::append_fc_stack(cfg, x, kHiddenWidth);
  return cfg;
}

/// Parses the line-oriented architecture language:
///
///   arch NAME                 optional name
///   conv KHxKW IN OUT [pad]   3x3 kernels etc; `pad` = 1 per side, `pad=TxF` explicit
///   pool TxF                  stride equals the pool size
///   flatten                   optional; inserted before the first fc if absent
///   fc WIDTH | fc out
///   softmax
///   untie N                   last N fc layers are per-language (default 1)
///
/// '#' starts a comment.
inline ArchConfig parse_dsl(std::string_view text) {
  ArchConfig cfg;
  cfg.name = "custom";
  std::optional<std::pair<std::size_t, std::size_t>> untie; // (count, line)
  std::istringstream is{std::string(text)};
  std::size_t lineno = 0;
  bool flatten_seen = false;
  for (std::string raw; std::getline(is, raw);) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const auto w = detail::split_ws(raw);
    if (w.empty()) continue;
    const std::string op = detail::lower(w[0]);
    auto fail = [&](const std::string &why) -> ParseError { return ParseError(lineno, why); };
    if (op == "arch" || op == "name") {
      if (w.size() != 2) throw fail("expected 'arch NAME'");
      cfg.name = w[1];
    } else if (op == "conv") {
      if (w.size() != 4 && w.size() != 5) throw fail("expected 'conv KHxKW IN OUT [pad]'");
      auto k = detail::parse_pair(w[1]);
      auto in = detail::parse_count(w[2]), out = detail::parse_count(w[3]);
      if (!k || k->first == 0 || k->second == 0) throw fail("bad kernel size '" + w[1] + "'");
      if (!in || !out || *in == 0 || *out == 0) throw fail("map counts must be positive integers");
      std::size_t pt = 0, pf = 0;
      if (w.size() == 5) {
        if (w[4] == "pad") {
          pt = pf = 1;
        } else if (w[4].rfind("pad=", 0) == 0) {
          auto p = detail::parse_pair(std::string_view(w[4]).substr(4));
          if (!p) throw fail("bad padding '" + w[4] + "'");
          pt = p->first;
          pf = p->second;
        } else {
          throw fail("unexpected token '" + w[4] + "'");
        }
      }
      cfg.layers.push_back(LayerSpec::conv(k->first, k->second, *in, *out, pt, pf));
    } else if (op == "pool") {
      auto p = w.size() == 2 ? detail::parse_pair(w[1]) : std::nullopt;
      if (!p || p->first == 0 || p->second == 0) throw fail("expected 'pool TxF'");
      cfg.layers.push_back(LayerSpec::pool(p->first, p->second));
    } else if (op == "flatten") {
      if (w.size() != 1) throw fail("flatten takes no arguments");
      cfg.layers.push_back(LayerSpec::flatten());
      flatten_seen = true;
    } else if (op == "fc") {
      if (w.size() != 2) throw fail("expected 'fc WIDTH' or 'fc out'");
      if (!flatten_seen) {
        cfg.layers.push_back(LayerSpec::flatten());
        flatten_seen = true;
      }
      if (detail::lower(w[1]) == "out") {
        cfg.layers.push_back(LayerSpec::fc_out());
      } else {
        auto width = detail::parse_count(w[1]);
        if (!width || *width == 0) throw fail("fc width must be a positive integer");
        cfg.layers.push_back(LayerSpec::fc(*width));
      }
    } else if (op == "softmax") {
      if (w.size() != 1) throw fail("softmax takes no arguments");
      cfg.layers.push_back(LayerSpec::softmax());
    } else if (op == "untie") {
      auto n = w.size() == 2 ? detail::parse_count(w[1]) : std::nullopt;
      if (!n) throw fail("expected 'untie N'");
      untie = std::make_pair(*n, lineno);
    } else {
      throw fail("unknown directive '" + w[0] + "'");
    }
  }
  if (cfg.layers.empty()) throw ParseError(lineno, "architecture has no layers");
  try {
    if (cfg.fc_indices().empty()) throw ContractError("architecture needs an 'fc out' layer");
    set_untied_fc(cfg, untie ? untie->first : 1);
    validate_arch(cfg);
  } catch (const ContractError &e) {
    throw ParseError(untie ? untie->second : lineno, e.what());
  }
  return cfg;
}

/// Text form that parse_dsl reads back to an identical config.
inline std::string to_dsl(const ArchConfig &cfg) {
  std::ostringstream os;
  os << "arch " << cfg.name << '\n';
  for (const auto &l : cfg.layers) {
    switch (l.kind) {
    case LayerKind::conv:
      os << "conv " << l.k_t << 'x' << l.k_f << ' ' << l.in_maps << ' ' << l.out_maps;
      if (l.pad_t == 1 && l.pad_f == 1) os << " pad";
      else if (l.pad_t || l.pad_f) os << " pad=" << l.pad_t << 'x' << l.pad_f;
      break;
    case LayerKind::pool: os << "pool " << l.pool_t << 'x' << l.pool_f; break;
    case LayerKind::flatten: os << "flatten"; break;
    case LayerKind::fc:
      if (l.output) os << "fc out";
      else os << "fc " << l.width;
      break;
    case LayerKind::softmax: os << "softmax"; break;
    }
    os << '\n';
  }
  os << "untie " << cfg.untied_fc() << '\n';
  return os.str();
}

/// Preset name, or architecture text when the argument spans several tokens.
inline ArchConfig parse_arch(std::string_view text_or_name) {
  const auto t = detail::trim(text_or_name);
  if (t.find_first_of(" \t\n") == std::string::npos) return preset(t);
  return parse_dsl(text_or_name);
}

/// Rewrites the first conv (or the first fc when there is no conv) to take
/// `channels` input maps.
inline ArchConfig with_input_channels(ArchConfig cfg, std::size_t channels) {
  for (auto &l : cfg.layers)
    if (l.kind == LayerKind::conv) {
      l.in_maps = channels;
      break;
    }
  return cfg;
}

struct LayerShape {
  std::size_t layer = 0;
  Shape shape; ///< per-sample: maps x time x freq, or width for fc layers
};

struct ShapeReport {
  std::vector<LayerShape> layers;
  std::size_t flatten_width = 0;
  /// Input width of every fc layer, keyed by layer index (0 elsewhere).
  std::vector<std::size_t> fan_in;
};

inline std::string layer_label(const LayerSpec &l) {
  std::ostringstream os;
  switch (l.kind) {
  case LayerKind::conv:
    os << "conv" << l.k_t << 'x' << l.k_f << '(' << l.in_maps << ',' << l.out_maps << ')';
    if (l.pad_t || l.pad_f) os << " pad " << l.pad_t << 'x' << l.pad_f;
    break;
  case LayerKind::pool: os << "pool " << l.pool_t << 'x' << l.pool_f; break;
  case LayerKind::flatten: os << "flatten"; break;
  case LayerKind::fc:
    if (l.output) os << "fc out";
    else os << "fc " << l.width;
    break;
  case LayerKind::softmax: os << "softmax"; break;
  }
  return os.str();
}

/// Walks the layer list applying the conv and pool extent rules.
inline ShapeReport infer_shapes(const ArchConfig &cfg, const InputGeometry &geom,
                                std::size_t output_width = 0) {
  if (geom.channels == 0 || geom.time == 0 || geom.freq == 0)
    throw GeometryError("input geometry extents must be positive");
  ShapeReport r;
  r.fan_in.assign(cfg.layers.size(), 0);
  std::size_t c = geom.channels, t = geom.time, f = geom.freq, width = 0;
  bool flat = false;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto &l = cfg.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_label(l) + ")";
    switch (l.kind) {
    case LayerKind::conv: {
      if (flat) throw DimensionError(where + ": conv after flatten");
      if (l.in_maps != c)
        throw DimensionError(where + ": expects " + std::to_string(l.in_maps) +
                             " input maps, receives " + std::to_string(c));
      const std::ptrdiff_t nt = std::ptrdiff_t(t + 2 * l.pad_t) - std::ptrdiff_t(l.k_t) + 1;
      const std::ptrdiff_t nf = std::ptrdiff_t(f + 2 * l.pad_f) - std::ptrdiff_t(l.k_f) + 1;
      if (nt <= 0 || nf <= 0)
        throw GeometryError(where + ": output extent " + std::to_string(nt) + "x" +
                            std::to_string(nf) + " from input " + std::to_string(t) + "x" +
                            std::to_string(f) + " is not positive");
      c = l.out_maps;
      t = std::size_t(nt);
      f = std::size_t(nf);
      r.layers.push_back({i, {c, t, f}});
      break;
    }
    case LayerKind::pool: {
      if (flat) throw DimensionError(where + ": pool after flatten");
      const std::size_t nt = t / l.pool_t, nf = f / l.pool_f;
      if (nt == 0 || nf == 0)
        throw GeometryError(where + ": input " + std::to_string(t) + "x" + std::to_string(f) +
                            " is smaller than the pool window");
      t = nt;
      f = nf;
      r.layers.push_back({i, {c, t, f}});
      break;
    }
    case LayerKind::flatten:
      if (!flat) {
        width = c * t * f;
        r.flatten_width = width;
        flat = true;
      }
      r.layers.push_back({i, {width}});
      break;
    case LayerKind::fc:
      if (!flat) {
        width = c * t * f;
        r.flatten_width = width;
        flat = true;
      }
      r.fan_in[i] = width;
      width = l.output ? output_width : l.width;
      r.layers.push_back({i, {width}});
      break;
    case LayerKind::softmax: r.layers.push_back({i, {width}}); break;
    }
  }
  return r;
}

struct ParamCount {
  std::size_t total = 0;
  std::vector<std::size_t> per_layer; ///< aligned with cfg.layers
  std::size_t conv_total = 0;
  std::size_t fc_total = 0;
};

inline ParamCount count_params(const ArchConfig &cfg, const InputGeometry &geom,
                               std::size_t output_width) {
  const auto shapes = infer_shapes(cfg, geom, output_width);
  ParamCount pc;
  pc.per_layer.assign(cfg.layers.size(), 0);
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto &l = cfg.layers[i];
    if (l.kind == LayerKind::conv) {
      pc.per_layer[i] = l.out_maps * l.in_maps * l.k_t * l.k_f + l.out_maps;
      pc.conv_total += pc.per_layer[i];
    } else if (l.kind == LayerKind::fc) {
      const std::size_t out = l.output ? output_width : l.width;
      pc.per_layer[i] = shapes.fan_in[i] * out + out;
      pc.fc_total += pc.per_layer[i];
    }
    pc.total += pc.per_layer[i];
  }
  return pc;
}

/// Half-width of the uniform initialization range for a layer:
/// (kW * kH * input maps)^-1/2, with fc layers read as 1x1 kernels over
/// fan_in maps.
inline double init_range(const LayerSpec &l, std::size_t fan_in) {
  if (l.kind == LayerKind::conv) return 1.0 / std::sqrt(double(l.k_t * l.k_f * l.in_maps));
  return 1.0 / std::sqrt(double(fan_in));
}

template <typename T> struct WeightBias {
  Tensor<T> weight; ///< conv: out x in x kH x kW; fc: fan_in x width
  Tensor<T> bias;
};

/// Draws one weight layer: uniform in [-a, a] from its own seed, zero bias.
template <typename T>
WeightBias<T> init_layer(const LayerSpec &l, std::size_t fan_in, std::size_t output_width,
                         std::uint64_t seed) {
  Rng rng(seed);
  const double a = init_range(l, fan_in);
  WeightBias<T> wb;
  if (l.kind == LayerKind::conv) {
    wb.weight = Tensor<T>(Shape{l.out_maps, l.in_maps, l.k_t, l.k_f});
    wb.bias = Tensor<T>(Shape{l.out_maps});
  } else if (l.kind == LayerKind::fc) {
    const std::size_t out = l.output ? output_width : l.width;
    if (out == 0) throw ContractError("output fc needs a positive output width");
    wb.weight = Tensor<T>(Shape{fan_in, out});
    wb.bias = Tensor<T>(Shape{out});
  } else {
    throw ContractError(std::string(kind_name(l.kind)) + " layers have no parameters");
  }
  for (auto &v : wb.weight.data()) v = static_cast<T>(rng.uniform(-a, a));
  return wb;
}

/// Parameters for every weight layer in order; layer i draws from
/// derive_seed(seed, i), so one layer never shifts another's values.
template <typename T>
std::vector<std::pair<std::size_t, WeightBias<T>>>
init_params(const ArchConfig &cfg, const InputGeometry &geom, std::size_t output_width,
            std::uint64_t seed) {
  const auto shapes = infer_shapes(cfg, geom, output_width);
  std::vector<std::pair<std::size_t, WeightBias<T>>> out;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i)
    if (cfg.layers[i].has_weights())
      out.emplace_back(i, init_layer<T>(cfg.layers[i], shapes.fan_in[i], output_width,
                                        derive_seed(seed, i)));
  return out;
}

} // namespace convlab
