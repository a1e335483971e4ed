#include <gtest/gtest.h>

#include <cmath>

#include "convlab/features.hpp"
#include "convlab/rng.hpp"
#include "convlab/synthetic.hpp"

using namespace convlab;

namespace {

Utterance ramp(std::size_t frames, std::size_t bins = 4) {
  Utterance u;
  u.frames = frames;
  u.bins = bins;
  u.data.resize(frames * bins);
  u.targets.assign(frames, 0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t b = 0; b < bins; ++b) u.at(0, t, b) = float(t * 100 + b);
  return u;
}

Utterance random_utt(std::size_t frames, std::size_t bins, Rng &rng) {
  Utterance u = ramp(frames, bins);
  for (auto &v : u.data) v = float(rng.normal());
  return u;
}

} // namespace

TEST(MultiScale, ParseNotation) {
  const auto s = MultiScaleSpec::parse("3S/5");
  EXPECT_EQ(s.context, 5u);
  EXPECT_EQ(s.strides, (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(MultiScaleSpec::parse("1S/8").strides, (std::vector<std::size_t>{1}));
  EXPECT_THROW(MultiScaleSpec::parse("3/5"), ContractError);
  EXPECT_THROW(MultiScaleSpec::parse("0S/5"), ContractError);
}

TEST(MultiScale, ThreeElevenByFortyMaps) {
  Utterance u = ramp(300, 40);
  const auto w = build_multiscale(u, 150, MultiScaleSpec::parse("3S/5"));
  EXPECT_EQ(w.shape(), (Shape{3, 11, 40}));
}

TEST(MultiScale, StrideOneIsVerbatim) {
  Utterance u = ramp(300, 40);
  const auto w = build_multiscale(u, 100, MultiScaleSpec::parse("1S/5"));
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t b = 0; b < 40; ++b) EXPECT_EQ(w.at({0, r, b}), u.at(0, 95 + r, b));
}

TEST(MultiScale, ClampsAtEdges) {
  Utterance u = ramp(50);
  MultiScaleSpec spec{5, {1, 4}};
  const auto w = build_multiscale(u, 2, spec);
  // stride 4 rows 0..4 would be frames -18..-2: all frame 0.
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(w.at({1, r, 0}), u.at(0, 0, 0));
  EXPECT_EQ(w.at({1, 5, 0}), u.at(0, 2, 0));
  EXPECT_EQ(w.at({1, 10, 0}), u.at(0, 22, 0));
  const auto end = build_multiscale(u, 49, spec);
  EXPECT_EQ(end.at({1, 10, 3}), u.at(0, 49, 3));
}

TEST(MultiScale, DecimationReproducesFramesAtStridePositions) {
  Rng rng(2);
  Utterance u = random_utt(400, 8, rng);
  MultiScaleSpec spec{6, {1, 2, 4, 8}};
  const std::size_t t = 200;
  const auto w = build_multiscale(u, t, spec);
  for (std::size_t si = 0; si < spec.strides.size(); ++si)
    for (std::size_t r = 0; r < spec.window(); ++r) {
      const std::size_t src = t + spec.strides[si] * r - spec.strides[si] * spec.context;
      for (std::size_t b = 0; b < 8; ++b) ASSERT_EQ(w.at({si, r, b}), u.at(0, src, b));
    }
}

TEST(MultiScale, ChannelsScaleExtentsDoNot) {
  Rng rng(4);
  Utterance u = add_deltas(random_utt(100, 40, rng));
  for (std::size_t n = 1; n <= 4; ++n) {
    MultiScaleSpec spec;
    spec.context = 5;
    spec.strides.clear();
    for (std::size_t i = 0; i < n; ++i) spec.strides.push_back(std::size_t(1) << i);
    const auto w = build_multiscale(u, 50, spec);
    EXPECT_EQ(w.shape(), (Shape{3 * n, 11, 40}));
    FeatureConfig fc{spec, true};
    EXPECT_EQ(fc.geometry(40), (InputGeometry{3 * n, 11, 40}));
  }
}

TEST(MultiScale, StridesValidated) {
  Utterance u = ramp(10);
  EXPECT_THROW(build_multiscale(u, 0, MultiScaleSpec{2, {2, 4}}), ContractError);
  EXPECT_THROW(build_multiscale(u, 0, MultiScaleSpec{2, {1, 1}}), ContractError);
  EXPECT_THROW(build_multiscale(u, 10, MultiScaleSpec{2, {1}}), IndexError);
}

TEST(Deltas, ConstantSignalGivesZero) {
  Utterance u = ramp(20);
  for (auto &v : u.data) v = 3.5f;
  const auto d = add_deltas(u);
  ASSERT_EQ(d.channels, 3u);
  for (std::size_t c = 1; c < 3; ++c)
    for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(d.at(c, t, 0), 0.0f);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(d.at(0, t, 1), 3.5f);
}

TEST(Deltas, RampHasUnitSlopeInside) {
  Utterance u = ramp(20, 1);
  for (std::size_t t = 0; t < 20; ++t) u.at(0, t, 0) = float(t);
  const auto d = add_deltas(u);
  // (1*(+2) + 2*(+4)) / 10 = 1
  for (std::size_t t = 2; t < 18; ++t) EXPECT_FLOAT_EQ(d.at(1, t, 0), 1.0f);
  for (std::size_t t = 4; t < 16; ++t) EXPECT_FLOAT_EQ(d.at(2, t, 0), 0.0f);
  // first frame: (1*(1-0) + 2*(2-0)) / 10
  EXPECT_FLOAT_EQ(d.at(1, 0, 0), 0.5f);
}

TEST(Deltas, SingleFrameIsFlat) {
  Utterance u = ramp(1, 3);
  const auto d = add_deltas(u);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(d.at(1, 0, b), 0.0f);
    EXPECT_EQ(d.at(2, 0, b), 0.0f);
  }
}

TEST(Deltas, LinearOnInterior) {
  Rng rng(8);
  const std::size_t n = 60;
  std::vector<float> x(n), y(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = float(rng.normal());
    y[i] = float(rng.normal());
    z[i] = 2.0f * x[i] - 3.0f * y[i];
  }
  const auto dx = delta_series(x, n, 1), dy = delta_series(y, n, 1), dz = delta_series(z, n, 1);
  for (std::size_t t = 2; t + 2 < n; ++t) EXPECT_NEAR(dz[t], 2 * dx[t] - 3 * dy[t], 1e-5);
}

TEST(Deltas, CorpusAndMultichannel) {
  Rng rng(1);
  Utterance u = add_deltas(random_utt(30, 5, rng));
  const auto twice = add_deltas(u);
  EXPECT_EQ(twice.channels, 9u);
  EXPECT_EQ(twice.data.size(), 9u * 30 * 5);
  for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(twice.at(2, t, 1), u.at(2, t, 1));
}

TEST(Normalize, ZeroMeanUnitVariance) {
  auto c = gen_synthetic_corpus(2, 5, 3000, 12, 3);
  const auto st = normalize(c);
  EXPECT_EQ(st.mean.size(), 12u);
  const auto again = compute_norm_stats(c);
  for (std::size_t b = 0; b < 12; ++b) {
    EXPECT_NEAR(again.mean[b], 0.0, 1e-6);
    EXPECT_NEAR(again.var[b], 1.0, 1e-4);
  }
}

TEST(Normalize, SecondPassIsIdentity) {
  auto c = gen_synthetic_corpus(2, 5, 2000, 8, 5);
  normalize(c);
  const auto before = c;
  normalize(c);
  for (std::size_t i = 0; i < c.utterances.size(); ++i)
    for (std::size_t k = 0; k < c.utterances[i].data.size(); ++k)
      ASSERT_NEAR(c.utterances[i].data[k], before.utterances[i].data[k], 1e-5);
}

TEST(Normalize, SharedAcrossLanguages) {
  Corpus c;
  c.mel_bins = 1;
  c.languages = {{0, "a", 1}, {1, "b", 1}};
  for (std::uint16_t l = 0; l < 2; ++l) {
    Utterance u = ramp(4, 1);
    u.language = l;
    for (std::size_t t = 0; t < 4; ++t) u.at(0, t, 0) = float(l * 10 + (t % 2));
    c.utterances.push_back(u);
  }
  const auto st = normalize(c);
  EXPECT_NEAR(st.mean[0], 5.5, 1e-12);
  // Language 0 sits below the shared mean, language 1 above it.
  EXPECT_LT(c.utterances[0].at(0, 0, 0), 0.0f);
  EXPECT_GT(c.utterances[1].at(0, 0, 0), 0.0f);
}

TEST(Normalize, ZeroVarianceBinNamed) {
  Corpus c;
  c.mel_bins = 3;
  c.languages = {{0, "a", 1}};
  Utterance u = ramp(10, 3);
  for (std::size_t t = 0; t < 10; ++t) u.at(0, t, 1) = 2.0f;
  c.utterances.push_back(u);
  try {
    normalize(c);
    FAIL();
  } catch (const DegenerateFeatureError &e) {
    EXPECT_EQ(e.bin(), 1u);
  }
  EXPECT_THROW(normalize(*new Corpus()), ContractError);
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  const auto a = gen_synthetic_corpus(3, 20, 20000, 40, 42);
  const auto b = gen_synthetic_corpus(3, 20, 20000, 40, 42);
  EXPECT_EQ(a, b);
  const auto c = gen_synthetic_corpus(3, 20, 20000, 40, 43);
  EXPECT_NE(a.utterances.front().data, c.utterances.front().data);
  validate_corpus(a);
  for (std::uint16_t l = 0; l < 3; ++l) EXPECT_EQ(a.frames(l), 20000u);
}

TEST(Synthetic, SkewedClassHistogram) {
  const auto c = gen_synthetic_corpus(3, 20, 20000, 40, 42);
  for (std::uint16_t l = 0; l < 3; ++l) {
    const auto counts = c.class_counts(l);
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    ASSERT_GT(*lo, 0.0);
    EXPECT_GE(*hi / *lo, 5.0) << "language " << l;
  }
}

TEST(Synthetic, SplitsShareClassesButNotFrames) {
  SyntheticOptions held;
  held.split = 1;
  const auto a = gen_synthetic_corpus(2, 6, 3000, 16, 9);
  const auto b = gen_synthetic_corpus(2, 6, 3000, 16, 9, held);
  EXPECT_EQ(a.languages, b.languages);
  EXPECT_NE(a.utterances.front().data, b.utterances.front().data);
  SyntheticOptions per;
  per.frames_per_language = {100, 700};
  const auto d = gen_synthetic_corpus(2, 6, 0, 16, 9, per);
  EXPECT_EQ(d.frames(0), 100u);
  EXPECT_EQ(d.frames(1), 700u);
  EXPECT_THROW(gen_synthetic_corpus(0, 6, 10, 16, 9), ContractError);
}
