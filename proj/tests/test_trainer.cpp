#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "convlab/synthetic.hpp"
#include "convlab/trainer.hpp"

using namespace convlab;

namespace {

Corpus small_corpus(std::uint64_t seed = 5) {
  SyntheticOptions so;
  so.frames_per_language = {600, 900};
  auto c = gen_synthetic_corpus(2, 6, 0, 8, seed, so);
  normalize(c);
  return c;
}

TrainRun small_run() {
  TrainRun run;
  run.arch = parse_dsl("conv 3x3 1 4\npool 1x2\nfc 16\nfc out\nsoftmax\n");
  run.features.multiscale = MultiScaleSpec::parse("1S/2");
  run.batch_size = 8;
  run.epochs = 2;
  run.updates_per_epoch = 15;
  run.log_every = 5;
  run.seed = 42;
  return run;
}

std::filesystem::path scratch(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("convlab_trainer_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path &p) { return binio::read_file(p.string()); }

} // namespace

TEST(Trainer, DerivesUpdatesPerEpochFromCorpus) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.updates_per_epoch = 0;
  Trainer<float> t(corpus, run);
  // ceil(1500 frames / (8 * 2 languages))
  EXPECT_EQ(t.run_config().updates_per_epoch, 94u);
  EXPECT_EQ(t.total_updates(), 188u);
}

TEST(Trainer, SameSeedGivesIdenticalTrajectoryAndMetrics) {
  auto corpus = small_corpus();
  std::ostringstream a, b;
  auto ha = train<float>(corpus, small_run(), jsonl_sink(a));
  auto hb = train<float>(corpus, small_run(), jsonl_sink(b));
  ASSERT_EQ(ha.steps.size(), hb.steps.size());
  for (std::size_t i = 0; i < ha.steps.size(); ++i) EXPECT_EQ(ha.steps[i].loss, hb.steps[i].loss);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_FALSE(a.str().empty());

  auto other = small_run();
  other.seed = 43;
  auto hc = train<float>(corpus, other);
  EXPECT_NE(ha.steps.front().loss, hc.steps.front().loss);
}

TEST(Trainer, EmitsStepAndEpochRecords) {
  auto corpus = small_corpus();
  std::vector<Record> records;
  train<float>(corpus, small_run(), [&](const Record &r) { records.push_back(r); });
  std::size_t steps = 0, epochs = 0;
  for (const auto &r : records) {
    for (const char *k : {"step", "language", "loss", "gamma", "accuracy"})
      EXPECT_TRUE(r.contains(k)) << r.dump();
    if (r["type"] == "step") {
      ++steps;
      EXPECT_EQ(r["step"].get<std::uint64_t>() % 5, 0u);
    } else {
      ++epochs;
      EXPECT_TRUE(r["accuracy"].is_number());
    }
  }
  EXPECT_EQ(steps, 2u * 30 / 5);
  EXPECT_EQ(epochs, 2u * 2);
}

TEST(Trainer, LossFallsOnLearnableData) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.epochs = 4;
  Trainer<float> t(corpus, run);
  t.run();
  const auto &ep = t.history().epochs;
  EXPECT_LT(ep.back().train.cross_entropy, ep.front().train.cross_entropy);
  EXPECT_GT(ep.back().train.accuracy, 1.0 / 6.0);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.epochs = 4;
  run.eval_each_epoch = false;
  Trainer<float> full(corpus, run);
  full.run();

  Trainer<float> first(corpus, run);
  for (int i = 0; i < 10; ++i) first.step();
  const auto path = scratch("resume.ckpt").string();
  first.save(path);
  Trainer<float> second(corpus, run);
  second.restore(path);
  std::filesystem::remove(path);
  EXPECT_EQ(second.step_count(), 10u);
  second.run();

  const auto &a = full.history().steps;
  const auto &b = second.history().steps;
  ASSERT_EQ(b.size() + 20, a.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b[i].step, a[i + 20].step);
    EXPECT_EQ(b[i].loss, a[i + 20].loss) << "step " << b[i].step;
  }
  EXPECT_EQ(encode_checkpoint(full.capture()), encode_checkpoint(second.capture()));
}

TEST(Trainer, RestoreRejectsDifferentRun) {
  auto corpus = small_corpus();
  auto run = small_run();
  Trainer<float> a(corpus, run);
  a.step();
  const auto ck = a.capture();
  auto other = run;
  other.seed = 7;
  Trainer<float> b(corpus, other);
  EXPECT_THROW(b.restore(ck), IncompatibilityError);
  other = run;
  other.batch_size = 4;
  Trainer<float> c(corpus, other);
  EXPECT_THROW(c.restore(ck), IncompatibilityError);
  other = run;
  other.languages = {1};
  Trainer<float> d(corpus, other);
  EXPECT_THROW(d.restore(ck), IncompatibilityError);
}

TEST(Trainer, EpochCheckpointsAreByteIdenticalAcrossRuns) {
  auto corpus = small_corpus();
  const auto da = scratch("ck_a"), db = scratch("ck_b");
  auto ra = small_run(), rb = small_run();
  ra.checkpoint_dir = da.string();
  rb.checkpoint_dir = db.string();
  train<float>(corpus, ra);
  train<float>(corpus, rb);
  for (int e = 1; e <= 2; ++e) {
    const auto name = "epoch-" + std::to_string(e) + ".ckpt";
    ASSERT_TRUE(std::filesystem::exists(da / name));
    EXPECT_EQ(slurp(da / name), slurp(db / name));
  }
  std::filesystem::remove_all(da);
  std::filesystem::remove_all(db);
}

TEST(Trainer, DivergenceAbortsWithLastCheckpoint) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.optimizer.mode = OptimizerMode::sgd;
  run.optimizer.lr = 1e30;
  run.epochs = 50;
  run.updates_per_epoch = 1;
  run.eval_each_epoch = false;
  const auto dir = scratch("diverge");
  run.checkpoint_dir = dir.string();
  Trainer<float> t(corpus, run);
  try {
    t.run();
    FAIL() << "expected divergence";
  } catch (const DivergedError &e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_EQ(e.last_good_checkpoint(),
              (dir / ("epoch-" + std::to_string(e.step()) + ".ckpt")).string());
    EXPECT_TRUE(std::filesystem::exists(e.last_good_checkpoint()));
  }
  std::filesystem::remove_all(dir);
}

TEST(Trainer, FinetuneSwitchesToSgd) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.optimizer.finetune_after_epoch = 1;
  Trainer<float> t(corpus, run);
  for (int i = 0; i < 15; ++i) t.step();
  EXPECT_EQ(t.optimizer().mode(), OptimizerMode::sgd);
  t.run();
  EXPECT_EQ(t.optimizer().mode(), OptimizerMode::sgd);
}

TEST(Trainer, SamplingEntropyFallsAsGammaRises) {
  SyntheticOptions so;
  so.frequency_ratio = 200.0;
  auto corpus = gen_synthetic_corpus(1, 12, 3000, 8, 9, so);
  normalize(corpus);
  auto run = small_run();
  run.schedule = GammaSchedule::parse("0:0,1:1");
  run.epochs = 5;
  run.updates_per_epoch = 400;
  run.batch_size = 16;
  run.eval_each_epoch = false;
  Trainer<float> t(corpus, run);
  t.run();
  const auto &ep = t.history().epochs;
  ASSERT_EQ(ep.size(), 5u);
  for (std::size_t e = 1; e < ep.size(); ++e)
    EXPECT_LT(ep[e].sample_entropy, ep[e - 1].sample_entropy) << "epoch " << e + 1;
  // The first epoch mixes gamma over [0, 0.2]: its entropy lies between the
  // gamma = 0.2 and gamma = 0 values, up to sampling noise.
  const auto counts = corpus.class_counts(0);
  EXPECT_LE(ep.front().sample_entropy, std::log(12.0));
  EXPECT_GE(ep.front().sample_entropy, entropy(class_probs(counts, 0.2)) - 0.02);
  EXPECT_NEAR(ep.back().sample_entropy, entropy(class_probs(counts, 0.9)), 0.1);
}

TEST(Trainer, RejectsBadRuns) {
  auto corpus = small_corpus();
  auto run = small_run();
  run.batch_size = 0;
  EXPECT_THROW(Trainer<float>(corpus, run), ContractError);
  run = small_run();
  run.languages = {4};
  EXPECT_THROW(Trainer<float>(corpus, run), NotFoundError);
  Corpus empty = corpus;
  empty.utterances.clear();
  EXPECT_THROW(Trainer<float>(empty, small_run()), ContractError);
}
