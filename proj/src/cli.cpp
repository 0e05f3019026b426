// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <optional>

#include "facevc/config.hpp"
#include "facevc/eval.hpp"
#include "facevc/gradcheck.hpp"
#include "facevc/io.hpp"

namespace facevc {

namespace fs = std::filesystem;

namespace {

struct GenDataArgs {
  std::string out;
  std::string config;
  std::uint64_t seed = 1;
  std::size_t per_group = 200;
  std::optional<std::uint64_t> world_seed;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate;
  std::optional<double> lambda;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> precision;
  bool resume = false;
  std::size_t log_every = 100;
};

struct ConvertArgs {
  std::string ckpt;
  std::string in_feat;
  std::string face;
  std::string out;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string train_data;
  std::string report;
};

struct GradCheckArgs {
  std::uint64_t seed = 1;
  std::size_t seeds = 3;
  bool verbose = false;
};

// Loads a checkpoint in its stored precision and hands the state to `fn`.
template <typename F>
int with_checkpoint(const std::string& path, F&& fn) {
  if (checkpoint_precision(path) == "float") {
    TrainState<float> st = load_checkpoint<float>(path);
    return fn(st);
  }
  TrainState<double> st = load_checkpoint<double>(path);
  return fn(st);
}

template <typename T>
void require_norm(const TrainState<T>& st, const std::string& path) {
  if (st.norm.empty()) throw FormatError(path + ": checkpoint carries no feature normalization statistics");
}

int gen_data(const GenDataArgs& a, std::ostream& out) {
  GenParams gen = a.config.empty() ? GenParams{} : RunConfig::load(a.config).gen;
  if (a.world_seed) gen.world_seed = *a.world_seed;
  const CorpusManifest m = generate_corpus(a.out, a.seed, a.per_group, gen);
  out << "wrote " << m.entries.size() << " pairs to " << (fs::path(a.out) / "manifest.csv").string() << "\n";
  return kExitOk;
}

template <typename T>
int train_as(const RunConfig& cfg, const TrainArgs& a, std::ostream& out) {
  const CorpusManifest manifest = read_manifest(cfg.data_path);
  std::vector<PairedExample> pairs = load_pairs(manifest);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.cvck").string();

  TrainState<T> state;
  if (a.resume && fs::exists(ckpt_path)) {
    state = load_checkpoint<T>(ckpt_path, &cfg.arch);
    TrainConfig stored = state.config;
    stored.steps = cfg.train.steps;
    if (!(stored == cfg.train)) {
      throw ConfigError(ckpt_path + ": training configuration differs from the checkpoint (only train.steps may change)");
    }
    state.config.steps = cfg.train.steps;
    out << "resuming from " << ckpt_path << " at step " << state.step << "\n";
  } else {
    state = init_train_state<T>(cfg.arch, cfg.train, manifest_norm_stats(manifest, pairs));
  }
  for (auto& p : pairs) p.x = state.norm.normalize(p.x);

  fs::create_directories(cfg.out_dir);
  write_file_atomic((fs::path(cfg.out_dir) / "config.txt").string(), cfg.serialize());
  out << "training " << state.params.parameter_count() << " parameters on " << pairs.size() << " pairs\n";
  TrainRun run;
  run.out_dir = cfg.out_dir;
  run.log = &out;
  run.log_every = a.log_every;
  train(state, pairs, cfg.train.steps, run);
  out << "wrote " << ckpt_path << " and " << (fs::path(cfg.out_dir) / "metrics.csv").string() << "\n";
  return kExitOk;
}

int train_cmd(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  if (!a.data.empty()) cfg.data_path = a.data;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.learning_rate) cfg.train.learning_rate = *a.learning_rate;
  if (a.lambda) cfg.train.lambda = *a.lambda;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.precision) cfg.train.precision = *a.precision;
  if (cfg.data_path.empty()) throw ConfigError("no training data: pass --data or set path.data");
  if (cfg.out_dir.empty()) throw ConfigError("no output directory: pass --out or set path.out");
  cfg.train.validate();
  cfg.arch.validate();
  return cfg.train.precision == "float" ? train_as<float>(cfg, a, out) : train_as<double>(cfg, a, out);
}

int convert_cmd(const ConvertArgs& a, std::ostream& out) {
  const Tensor<double> x = load_features(a.in_feat);
  const Tensor<double> y = load_image(a.face);
  return with_checkpoint(a.ckpt, [&](auto& st) {
    require_norm(st, a.ckpt);
    save_features(a.out, convert_raw(st.params, st.norm, x, y));
    out << "wrote " << a.out << "\n";
    return int{kExitOk};
  });
}

int gen_face_cmd(const ConvertArgs& a, std::ostream& out) {
  const Tensor<double> x = load_features(a.in_feat);
  return with_checkpoint(a.ckpt, [&](auto& st) {
    require_norm(st, a.ckpt);
    save_image(a.out, generate_face_raw(st.params, st.norm, x));
    out << "wrote " << a.out << "\n";
    return int{kExitOk};
  });
}

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const std::vector<PairedExample> test = load_pairs(read_manifest(a.data));
  const std::vector<PairedExample> train_pairs = a.train_data.empty() ? test : load_pairs(read_manifest(a.train_data));
  if (a.train_data.empty()) out << "note: probes and baseline statistics fitted on the evaluated manifest\n";
  return with_checkpoint(a.ckpt, [&](auto& st) {
    require_norm(st, a.ckpt);
    const EvalReport report = evaluate(st.params, st.norm, train_pairs, test);
    const std::string csv = report_csv(report);
    write_file_atomic(a.report, csv);
    out << csv << "face_reconstruction_mse," << format_double(report.face_mse) << "\n";
    return int{kExitOk};
  });
}

int grad_check_cmd(const GradCheckArgs& a, std::ostream& out) {
  bool ok = true;
  for (std::size_t k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = a.seed + k;
    const GradCheckReport r = grad_check(seed);
    for (const auto& e : r.entries) {
      if (a.verbose || !e.passed()) {
        out << (e.passed() ? "PASS " : "FAIL ") << "seed=" << seed << " " << e.name
            << " rel_error=" << format_double(e.error) << "\n";
      }
    }
    out << (r.passed() ? "PASS" : "FAIL") << " seed=" << seed << " checks=" << r.entries.size()
        << " max_rel_error=" << format_double(r.max_error()) << " tolerance=" << format_double(kGradCheckTolerance)
        << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crossmodal voice conversion and face generation from paired speech features and face images."};
  app.name("facevc");
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic paired corpus");
  gen->add_option("--out", gd.out, "output directory")->required();
  gen->add_option("--seed", gd.seed, "sample seed")->capture_default_str();
  gen->add_option("--per-group", gd.per_group, "pairs per attribute group")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--world-seed", gd.world_seed, "content mixing seed (overrides gen.world_seed)");
  gen->add_option("--config", gd.config, "run configuration (gen.* keys)")->check(CLI::ExistingFile);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train the model; flags override the configuration file");
  tr->add_option("--config", ta.config, "run configuration")->check(CLI::ExistingFile);
  tr->add_option("--data", ta.data, "training manifest");
  tr->add_option("--out", ta.out, "output directory for checkpoint.cvck and metrics.csv");
  tr->add_option("--steps", ta.steps, "train.steps");
  tr->add_option("--seed", ta.seed, "train.seed");
  tr->add_option("--lr", ta.learning_rate, "train.learning_rate");
  tr->add_option("--lambda", ta.lambda, "train.lambda");
  tr->add_option("--batch-size", ta.batch_size, "train.batch_size");
  tr->add_option("--precision", ta.precision, "train.precision")->check(CLI::IsMember({"float", "double"}));
  tr->add_flag("--resume", ta.resume, "continue from the checkpoint in the output directory");
  tr->add_option("--log-every", ta.log_every, "steps between log lines (0 = silent)")->capture_default_str();

  ConvertArgs ca;
  auto* cv = app.add_subcommand("convert", "convert an utterance towards the voice implied by a face image");
  cv->add_option("--ckpt", ca.ckpt, "checkpoint")->required();
  cv->add_option("--in-feat", ca.in_feat, "input features (CVT1)")->required();
  cv->add_option("--face", ca.face, "target face image (PGM)")->required();
  cv->add_option("--out", ca.out, "output features (CVT1)")->required();

  ConvertArgs fa;
  auto* gf = app.add_subcommand("gen-face", "generate a face image from an utterance");
  gf->add_option("--ckpt", fa.ckpt, "checkpoint")->required();
  gf->add_option("--in-feat", fa.in_feat, "input features (CVT1)")->required();
  gf->add_option("--out", fa.out, "output image (PGM)")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "probe accuracy and MCD of the model against the baseline");
  ev->add_option("--ckpt", ea.ckpt, "checkpoint")->required();
  ev->add_option("--data", ea.data, "evaluation manifest")->required();
  ev->add_option("--train-data", ea.train_data, "manifest for probes and baseline statistics");
  ev->add_option("--report", ea.report, "output CSV")->required();

  GradCheckArgs ga;
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every op and the full objective");
  gc->add_option("--seed", ga.seed, "first seed")->capture_default_str();
  gc->add_option("--seeds", ga.seeds, "number of consecutive seeds")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_flag("--verbose", ga.verbose, "list every checked tensor");

  auto* df = app.add_subcommand("defaults", "print the documented default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return gen_data(gd, out);
    if (tr->parsed()) return train_cmd(ta, out);
    if (cv->parsed()) return convert_cmd(ca, out);
    if (gf->parsed()) return gen_face_cmd(fa, out);
    if (ev->parsed()) return eval_cmd(ea, out);
    if (gc->parsed()) return grad_check_cmd(ga, out);
    if (df->parsed()) {
      out << documented_defaults();
      return kExitOk;
    }
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace facevc
