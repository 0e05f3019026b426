// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "facevc/io.hpp"
#include "facevc/trainer.hpp"
#include "fixtures.hpp"

namespace facevc {
namespace {

using testing_fixtures::normalized;
using testing_fixtures::small_arch;
using testing_fixtures::small_gen;
using testing_fixtures::TempDir;

struct Corpus {
  std::vector<PairedExample> pairs;
  NormStats norm;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    auto raw = generate_pairs(3, 6, small_gen());
    Corpus out;
    out.norm = compute_norm_stats(raw);
    out.pairs = normalized(raw, out.norm);
    return out;
  }();
  return c;
}

TrainConfig small_config(const std::string& precision = "double") {
  TrainConfig c;
  c.batch_size = 4;
  c.crop_frames = 16;
  c.steps = 30;
  c.kl_warmup_steps = 10;
  c.checkpoint_every = 0;
  c.precision = precision;
  c.seed = 5;
  return c;
}

TrainRun writing_to(const std::string& dir) {
  TrainRun run;
  run.out_dir = dir;
  return run;
}

template <typename T>
std::vector<Tensor<T>> values_of(ModelParams<T>& params) {
  std::vector<Tensor<T>> out;
  for (auto* p : params.parameters()) out.push_back(p->value);
  return out;
}

TEST(Trainer, KlWarmupSchedule) {
  TrainConfig c;
  c.kl_warmup_steps = 4;
  EXPECT_DOUBLE_EQ(kl_weight_at(c, 0), 0.25);
  EXPECT_DOUBLE_EQ(kl_weight_at(c, 2), 0.75);
  EXPECT_DOUBLE_EQ(kl_weight_at(c, 3), 1.0);
  EXPECT_DOUBLE_EQ(kl_weight_at(c, 100), 1.0);
  c.kl_warmup_steps = 0;
  EXPECT_DOUBLE_EQ(kl_weight_at(c, 0), 1.0);
}

TEST(Trainer, LearningRateSchedule) {
  TrainConfig c;
  c.learning_rate = 2.0;
  c.lr_decay_steps = 10;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 2.0);
  EXPECT_NEAR(learning_rate_at(c, 5), 2.0 * (0.05 + 0.95 * 0.5), 1e-15);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 10), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 1000), 0.1);
  for (std::size_t s = 1; s <= 10; ++s) EXPECT_LT(learning_rate_at(c, s), learning_rate_at(c, s - 1));
  c.lr_decay_steps = 0;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 7), 2.0);
}

TEST(Trainer, FirstAdamStepMovesEachElementByTheLearningRate) {
  const TrainConfig cfg = small_config();
  auto state = init_train_state<double>(small_arch(), cfg, corpus().norm);
  const auto before = values_of(state.params);
  const BatchSampler sampler(corpus().pairs, cfg.seed, cfg.batch_size, cfg.crop_frames);
  train_step(state.params, sampler.batch<double>(0), state.adam, state.rng, cfg, 0);
  const auto ps = state.params.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t k = 0; k < ps[i]->value.size(); ++k) {
      const double delta = ps[i]->value[k] - before[i][k];
      const double g = ps[i]->grad[k];
      if (g == 0.0) {
        ASSERT_EQ(delta, 0.0) << ps[i]->name;
      } else {
        // Bias-corrected m / sqrt(v) is sign(g) on the first step.
        const double expected = -cfg.learning_rate * g / (std::abs(g) + kAdamEpsilon);
        ASSERT_NEAR(delta, expected, 1e-12) << ps[i]->name << "[" << k << "]";
      }
    }
  }
  EXPECT_EQ(state.adam.t, 1u);
}

TEST(Trainer, AlternatingStepsFreezeTheOtherNetworks) {
  TrainConfig cfg = small_config();
  cfg.alternate = true;
  auto state = init_train_state<double>(small_arch(), cfg, corpus().norm);
  std::set<const Parameter<double>*> voice;
  state.params.voice_encoder.visit([&](Parameter<double>& p) { voice.insert(&p); });
  const BatchSampler sampler(corpus().pairs, cfg.seed, cfg.batch_size, cfg.crop_frames);
  for (std::size_t step : {0u, 1u}) {
    const auto before = values_of(state.params);
    train_step(state.params, sampler.batch<double>(step), state.adam, state.rng, cfg, step);
    const auto ps = state.params.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const bool should_move = (voice.count(ps[i]) != 0) == (step == 1);
      if (!should_move) {
        EXPECT_EQ(ps[i]->value, before[i]) << "step " << step << " " << ps[i]->name;
      }
      EXPECT_TRUE(ps[i]->requires_grad);
    }
  }
}

TEST(Trainer, FixedBatchObjectiveImproves) {
  TrainConfig cfg = small_config();
  cfg.kl_warmup_steps = 0;
  cfg.learning_rate = 1e-3;
  cfg.lr_decay_steps = 0;
  auto state = init_train_state<double>(small_arch(), cfg, corpus().norm);
  const BatchSampler sampler(corpus().pairs, cfg.seed, 8, cfg.crop_frames);
  const Batch<double> batch = sampler.batch<double>(0);
  auto total = [&] {
    Rng rng(77);
    double acc = 0;
    for (int i = 0; i < 10; ++i) acc += total_objective(state.params, batch, rng, cfg.lambda).total;
    return acc / 10;
  };
  const double before = total();
  for (std::size_t s = 0; s < 200; ++s) train_step(state.params, batch, state.adam, state.rng, cfg, s);
  const double after = total();
  // The loss -total drops by at least a fifth of its initial magnitude.
  EXPECT_GE(after - before, 0.2 * std::abs(before)) << before << " -> " << after;
}

TEST(Trainer, RunsAreDeterministic) {
  const TrainConfig cfg = small_config("float");
  auto a = init_train_state<float>(small_arch(), cfg, corpus().norm);
  auto b = init_train_state<float>(small_arch(), cfg, corpus().norm);
  const auto ha = train(a, corpus().pairs, 12);
  const auto hb = train(b, corpus().pairs, 12);
  ASSERT_EQ(ha.size(), 12u);
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_EQ(ha[i].total, hb[i].total);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Trainer, ResumeMatchesAnUninterruptedRun) {
  TempDir dir("resume");
  const TrainConfig cfg = small_config("double");
  auto straight = init_train_state<double>(small_arch(), cfg, corpus().norm);
  train(straight, corpus().pairs, 20, writing_to(dir.file("straight")));

  auto first = init_train_state<double>(small_arch(), cfg, corpus().norm);
  train(first, corpus().pairs, 9, writing_to(dir.file("split")));
  auto resumed = load_checkpoint<double>(dir.file("split/checkpoint.cvck"));
  EXPECT_EQ(resumed.step, 9u);
  train(resumed, corpus().pairs, 20, writing_to(dir.file("split")));

  const auto a = values_of(straight.params), b = values_of(resumed.params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(max_abs_diff(a[i], b[i]), 1e-10);
  EXPECT_EQ(encode_checkpoint(straight), encode_checkpoint(resumed));
  EXPECT_EQ(read_file(dir.file("straight/metrics.csv")), read_file(dir.file("split/metrics.csv")));
}

TEST(Trainer, MetricsFileIsReproducible) {
  TempDir dir("metrics");
  const TrainConfig cfg = small_config("float");
  for (const char* name : {"a", "b"}) {
    auto s = init_train_state<float>(small_arch(), cfg, corpus().norm);
    train(s, corpus().pairs, 6, writing_to(dir.file(name)));
  }
  const std::string text = read_file(dir.file("a/metrics.csv"));
  EXPECT_EQ(text, read_file(dir.file("b/metrics.csv")));
  EXPECT_EQ(text.substr(0, text.find('\n')), kMetricsHeader);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST(Trainer, CheckpointRoundTripsByteForByte) {
  const TrainConfig cfg = small_config("float");
  auto s = init_train_state<float>(small_arch(), cfg, corpus().norm);
  train(s, corpus().pairs, 3);
  const std::string bytes = encode_checkpoint(s);
  auto back = decode_checkpoint<float>(bytes, "mem");
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(back.step, 3u);
  EXPECT_EQ(back.config, cfg);
  EXPECT_EQ(back.arch, small_arch());
  EXPECT_EQ(back.norm, corpus().norm);
  EXPECT_TRUE(back.rng == s.rng);
}

TEST(Trainer, CheckpointMismatchesAreRejected) {
  TempDir dir("ckpt");
  auto s = init_train_state<float>(small_arch(), small_config("float"), corpus().norm);
  const std::string path = dir.file("c.cvck");
  save_checkpoint(path, s);
  EXPECT_EQ(checkpoint_precision(path), "float");

  EXPECT_THROW(load_checkpoint<double>(path), ConfigError);
  ArchConfig other = small_arch();
  other.code_dim = 4;
  EXPECT_THROW(load_checkpoint<float>(path, &other), ConfigError);
  const ArchConfig same = small_arch();
  EXPECT_NO_THROW(load_checkpoint<float>(path, &same));

  const std::string bytes = read_file(path);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint<float>(std::string_view(bytes).substr(0, cut), "cut"), FormatError) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(bad, "magic"), FormatError);
  EXPECT_THROW(decode_checkpoint<float>(bytes + "z", "trailing"), FormatError);
  EXPECT_THROW(load_checkpoint<float>(dir.file("missing.cvck")), FormatError);
}

TEST(Trainer, NonFiniteLossRaisesDivergenceAndLeavesStateUntouched) {
  const TrainConfig cfg = small_config();
  auto state = init_train_state<double>(small_arch(), cfg, corpus().norm);
  state.params.parameters().front()->value[0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = state.params.parameters().back()->value;
  const BatchSampler sampler(corpus().pairs, cfg.seed, cfg.batch_size, cfg.crop_frames);
  try {
    train_step(state.params, sampler.batch<double>(0), state.adam, state.rng, cfg, 0);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("speech_recon="), std::string::npos) << e.what();
  }
  EXPECT_EQ(state.params.parameters().back()->value, before);
  EXPECT_EQ(state.adam.t, 0u);
}

TEST(BatchSampler, BatchesArePureFunctionsOfTheStep) {
  const auto& pairs = corpus().pairs;
  const BatchSampler a(pairs, 9, 5, 16), b(pairs, 9, 5, 16);
  EXPECT_EQ(a.batch<double>(7).features, b.batch<double>(7).features);
  const auto later = a.batch<double>(40);
  EXPECT_EQ(a.batch<double>(7).images, b.batch<double>(7).images);
  EXPECT_EQ(later.features, b.batch<double>(40).features);
  EXPECT_NE(a.indices(1), BatchSampler(pairs, 10, 5, 16).indices(1));
}

TEST(BatchSampler, EachEpochVisitsEveryPairOnce) {
  const auto& pairs = corpus().pairs;  // 6 pairs in each group
  const BatchSampler s(pairs, 1, 4, 16);
  for (std::size_t epoch = 0; epoch < 2; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::size_t step = epoch * 6; step < epoch * 6 + 6; ++step) {
      for (std::size_t i : s.indices(step)) seen.insert(i);
    }
    ASSERT_EQ(seen.size(), pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(seen.count(i), 1u);
  }
}

TEST(BatchSampler, BatchesHoldEveryGroupEqually) {
  const auto& pairs = corpus().pairs;
  const BatchSampler s(pairs, 4, 8, 16);
  for (std::size_t step = 0; step < 20; ++step) {
    std::vector<int> count(kGroupCount, 0);
    for (std::size_t i : s.indices(step)) ++count[static_cast<std::size_t>(pairs[i].attrs.group())];
    EXPECT_EQ(count, std::vector<int>(kGroupCount, 2)) << "step " << step;
  }
  // A corpus with a single group still yields full batches.
  std::vector<PairedExample> one;
  for (const auto& p : pairs) {
    if (p.attrs.group() == 2) one.push_back(p);
  }
  EXPECT_EQ(BatchSampler(one, 4, 8, 16).indices(3).size(), 8u);
}

TEST(BatchSampler, CropsAreWindowsOrEdgePadded) {
  std::vector<PairedExample> pairs(2);
  for (std::size_t k = 0; k < 2; ++k) {
    pairs[k].x = Tensor<double>({2, 5});
    for (std::size_t t = 0; t < 5; ++t) pairs[k].x.at(0, t) = pairs[k].x.at(1, t) = static_cast<double>(t);
    pairs[k].y = Tensor<double>({1, 2, 2}, 0.5);
  }
  const auto padded = BatchSampler(pairs, 1, 2, 8).batch<double>(0);
  EXPECT_EQ(padded.features.shape(), (Shape{2, 1, 2, 8}));
  EXPECT_EQ(padded.features.at(0, 0, 1, 7), 4.0);
  const auto window = BatchSampler(pairs, 1, 2, 3).batch<double>(0);
  const double start = window.features.at(0, 0, 0, 0);
  EXPECT_EQ(window.features.at(0, 0, 0, 2), start + 2);
}

TEST(TrainConfig, RoundTripsAndValidates) {
  TrainConfig c;
  c.learning_rate = 3e-4;
  c.alternate = true;
  EXPECT_EQ(TrainConfig::from_map(c.to_map()), c);
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(TrainConfig::from_map({{"train.precision", "half"}}).validate(), ConfigError);
  EXPECT_THROW(TrainConfig::from_map({{"train.bogus", "1"}}), ConfigError);
  EXPECT_THROW(init_train_state<float>(small_arch(), small_config("double"), {}), ConfigError);
}

}  // namespace
}  // namespace facevc
