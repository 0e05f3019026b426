// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "facevc/cli.hpp"
#include "facevc/config.hpp"
#include "facevc/io.hpp"
#include "fixtures.hpp"

namespace facevc {
namespace {

using testing_fixtures::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "facevc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Small model and corpus so that a full train / convert / eval cycle takes seconds.
std::string small_config_text() {
  RunConfig c;
  c.arch = testing_fixtures::small_arch();
  c.gen = testing_fixtures::small_gen();
  c.train.batch_size = 4;
  c.train.crop_frames = 16;
  c.train.steps = 6;
  c.train.checkpoint_every = 0;
  c.train.kl_warmup_steps = 2;
  return c.serialize();
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = dir_.file("run.cfg");
    write_file_atomic(config_, small_config_text());
    ASSERT_EQ(run({"gen-data", "--out", dir_.file("train"), "--seed", "1", "--per-group", "4", "--config", config_}).code,
              kExitOk);
    ASSERT_EQ(run({"gen-data", "--out", dir_.file("test"), "--seed", "2", "--per-group", "2", "--config", config_}).code,
              kExitOk);
  }

  Result train(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"train", "--config", config_, "--data", dir_.file("train/manifest.csv"),
                                     "--out", out, "--log-every", "0"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  TempDir dir_{"cli"};
  std::string config_;
};

TEST_F(CliRun, TrainConvertGenerateAndEvaluate) {
  const Result t = train(dir_.file("model"));
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const std::string ckpt = dir_.file("model/checkpoint.cvck");
  const std::string feat = dir_.file("test/features/pair_00000.cvt");
  const std::string face = dir_.file("test/images/pair_00003.pgm");

  ASSERT_EQ(run({"convert", "--ckpt", ckpt, "--in-feat", feat, "--face", face, "--out", dir_.file("a.cvt")}).code,
            kExitOk);
  ASSERT_EQ(run({"convert", "--ckpt", ckpt, "--in-feat", feat, "--face", face, "--out", dir_.file("b.cvt")}).code,
            kExitOk);
  EXPECT_EQ(read_file(dir_.file("a.cvt")), read_file(dir_.file("b.cvt")));
  EXPECT_EQ(load_features(dir_.file("a.cvt")).shape(), load_features(feat).shape());

  ASSERT_EQ(run({"gen-face", "--ckpt", ckpt, "--in-feat", feat, "--out", dir_.file("f.pgm")}).code, kExitOk);
  EXPECT_EQ(load_image(dir_.file("f.pgm")).shape(), (Shape{1, 8, 8}));

  const Result e = run({"eval", "--ckpt", ckpt, "--data", dir_.file("test/manifest.csv"), "--train-data",
                        dir_.file("train/manifest.csv"), "--report", dir_.file("report.csv")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const std::string report = read_file(dir_.file("report.csv"));
  EXPECT_EQ(report.substr(0, report.find('\n')), "method,attribute,accuracy,mcd_mean,n");
  EXPECT_NE(report.find("baseline1,gender,"), std::string::npos);
}

TEST_F(CliRun, TrainingIsByteReproducibleAndResumable) {
  ASSERT_EQ(train(dir_.file("a")).code, kExitOk);
  ASSERT_EQ(train(dir_.file("b")).code, kExitOk);
  EXPECT_EQ(read_file(dir_.file("a/checkpoint.cvck")), read_file(dir_.file("b/checkpoint.cvck")));
  EXPECT_EQ(read_file(dir_.file("a/metrics.csv")), read_file(dir_.file("b/metrics.csv")));

  ASSERT_EQ(train(dir_.file("c"), {"--steps", "3"}).code, kExitOk);
  const Result r = train(dir_.file("c"), {"--resume"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("resuming"), std::string::npos);
  EXPECT_EQ(read_file(dir_.file("a/checkpoint.cvck")), read_file(dir_.file("c/checkpoint.cvck")));
  EXPECT_EQ(read_file(dir_.file("a/metrics.csv")), read_file(dir_.file("c/metrics.csv")));

  // Changing anything but the step count on resume is a usage error.
  EXPECT_EQ(train(dir_.file("c"), {"--resume", "--lr", "0.5"}).code, kExitUsage);
}

TEST_F(CliRun, BadInputsMapToDataErrors) {
  ASSERT_EQ(train(dir_.file("m")).code, kExitOk);
  const std::string ckpt = dir_.file("m/checkpoint.cvck");
  write_file_atomic(dir_.file("junk.cvt"), "not a tensor");
  const Result r = run({"convert", "--ckpt", ckpt, "--in-feat", dir_.file("junk.cvt"), "--face",
                        dir_.file("test/images/pair_00000.pgm"), "--out", dir_.file("o.cvt")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("CVT1"), std::string::npos) << r.err;

  const std::string bytes = read_file(ckpt);
  write_file_atomic(dir_.file("cut.cvck"), bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(run({"gen-face", "--ckpt", dir_.file("cut.cvck"), "--in-feat", dir_.file("test/features/pair_00000.cvt"),
                 "--out", dir_.file("o.pgm")})
                .code,
            kExitData);
}

TEST(Cli, MissingRequiredOptionPrintsUsage) {
  const Result r = run({"convert", "--in-feat", "x.cvt", "--face", "y.pgm", "--out", "z.cvt"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--ckpt"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, ConfigurationProblemsAreUsageErrors) {
  TempDir dir("clicfg");
  write_file_atomic(dir.file("bad.cfg"), "train.nope = 3\n");
  EXPECT_EQ(run({"train", "--config", dir.file("bad.cfg"), "--data", "x", "--out", dir.file("o")}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--out", dir.file("o")}).code, kExitUsage);  // no data
  EXPECT_EQ(run({"train", "--data", dir.file("none.csv"), "--out", dir.file("o"), "--batch-size", "1"}).code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--data", dir.file("none.csv"), "--out", dir.file("o")}).code, kExitData);
}

TEST(Cli, GradCheckPasses) {
  const Result r = run({"grad-check", "--seeds", "1"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("PASS seed=1"), std::string::npos) << r.out;
}

TEST(Cli, DefaultsParseBackToTheDefaultConfiguration) {
  const Result r = run({"defaults"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(RunConfig::parse(r.out), RunConfig{});
}

TEST(Config, SerializeParseIsIdempotent) {
  RunConfig c;
  c.train.learning_rate = 0.000123456789;
  c.train.independent_pairing = true;
  c.arch = testing_fixtures::small_arch();
  c.gen.image_noise = 0.1;
  c.data_path = "data/manifest.csv";
  const std::string text = c.serialize();
  const RunConfig back = RunConfig::parse(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.serialize(), text);
}

TEST(Config, RejectsUnknownRepeatedAndMalformedLines) {
  auto message = [](const std::string& text) {
    try {
      RunConfig::parse(text, "cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("# ok\n\ntrain.colour = 1\n").find("train.colour"), std::string::npos);
  EXPECT_NE(message("x.y = 1\n").find("unknown"), std::string::npos);
  EXPECT_NE(message("train.steps = 1\ntrain.steps = 2\n").find("cfg:2"), std::string::npos);
  EXPECT_NE(message("train.steps\n").find("cfg:1"), std::string::npos);
  EXPECT_NE(message("train.steps = -4\n").find("train.steps"), std::string::npos);
  EXPECT_THROW(RunConfig::load("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, EveryKeyIsDocumented) {
  const auto kv = RunConfig{}.to_map();
  const auto& docs = config_key_docs();
  EXPECT_EQ(docs.size(), kv.size());
  for (const auto& d : docs) EXPECT_EQ(kv.count(d.key), 1u) << d.key;
}

}  // namespace
}  // namespace facevc
