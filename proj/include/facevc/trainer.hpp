// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic mini-batch training with Adam, metrics and checkpoints.
//
// A run is a pure function of (seed, config, data, build): the batch of step
// s depends only on (seed, s), and the model noise comes from one Rng whose
// state is checkpointed, so a resumed run continues bit-identically.
//
// Checkpoint file, little-endian:
//   "CVCK" | u32 version | u32 section count |
//   per section: u32 name length | name | u64 payload length | payload
// Numeric payloads are CVT1 tensors; the others are text.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "facevc/data.hpp"
#include "facevc/objectives.hpp"

namespace facevc {

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t steps = 5000;
  double learning_rate = 3e-4;
  // Cosine decay of the step size to kLrFloorFraction over this many steps,
  // constant afterwards; 0 keeps it constant.
  std::size_t lr_decay_steps = 5000;
  double lambda = 1.0;
  std::uint64_t seed = 1;
  std::size_t kl_warmup_steps = 500;  // 0 disables the warm-up
  std::size_t checkpoint_every = 1000;
  std::string precision = "float";    // "float" or "double"
  std::size_t crop_frames = 64;
  bool independent_pairing = false;
  bool mean_propagation = false;
  // Odd steps update only the voice encoder, even steps everything else.
  bool alternate = false;

  void validate() const;
  std::map<std::string, std::string> to_map() const;  // keys "train.*"
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;
inline constexpr double kLrFloorFraction = 0.05;

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;  // aligned with ModelParams::parameters()
  std::vector<Tensor<T>> v;
  std::uint64_t t = 0;

  static AdamState zeros(ModelParams<T>& params);
};

// KL weight of the 0-based step: linear from 1/warmup up to 1.
double kl_weight_at(const TrainConfig& config, std::size_t step);
// Adam step size of the 0-based step.
double learning_rate_at(const TrainConfig& config, std::size_t step);

// One Adam step on -(J + lambda R). Throws DivergenceError carrying the
// breakdown and step when the loss or a gradient is not finite; params and
// optimizer state are left untouched in that case.
template <typename T>
LossBreakdown train_step(ModelParams<T>& params, const Batch<T>& batch, AdamState<T>& adam, Rng& rng,
                         const TrainConfig& config, std::size_t step);

// Batches as a pure function of (seed, step). Batch slots cycle through the
// attribute groups present, so a batch of 8 over 4 groups holds 2 of each;
// within a group, pairs follow one seeded permutation per group epoch. Every
// sequence is cropped at a seeded offset or edge-padded to crop_frames.
//
// Balanced batches keep the batch-norm statistics of a training step from
// depending on which attributes happened to be drawn.
class BatchSampler {
 public:
  BatchSampler(const std::vector<PairedExample>& pairs, std::uint64_t seed, std::size_t batch_size,
               std::size_t crop_frames);

  std::vector<std::size_t> indices(std::size_t step) const;
  template <typename T>
  Batch<T> batch(std::size_t step) const;

 private:
  const std::vector<std::size_t>& permutation(std::size_t group, std::size_t epoch) const;

  const std::vector<PairedExample>* pairs_;
  std::uint64_t seed_;
  std::size_t batch_size_;
  std::size_t crop_;
  std::vector<std::vector<std::size_t>> groups_;  // pair indices of each non-empty group
  mutable std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> perms_;
};

template <typename T>
struct TrainState {
  ArchConfig arch;
  TrainConfig config;
  NormStats norm;
  ModelParams<T> params;
  AdamState<T> adam;
  Rng rng;
  std::size_t step = 0;  // completed steps
};

template <typename T>
TrainState<T> init_train_state(const ArchConfig& arch, const TrainConfig& config, const NormStats& norm);

struct TrainRun {
  std::string out_dir;  // metrics.csv and checkpoint.cvck; empty writes nothing
  std::ostream* log = nullptr;
  std::size_t log_every = 100;
  std::function<void(std::size_t, const LossBreakdown&)> on_step;
};

inline constexpr const char* kMetricsHeader = "step,speech_recon,face_recon,kl_z,kl_c,regularizer_r,total";
std::string metrics_row(std::size_t step, const LossBreakdown& b);

// Runs steps state.step .. until-1 on normalized pairs and returns their
// breakdowns. Resuming keeps the metrics rows up to state.step.
template <typename T>
std::vector<LossBreakdown> train(TrainState<T>& state, const std::vector<PairedExample>& pairs,
                                 std::size_t until, const TrainRun& run = {});

template <typename T>
std::string encode_checkpoint(TrainState<T>& state);
template <typename T>
void save_checkpoint(const std::string& path, TrainState<T>& state);
// ConfigError on a precision mismatch or when `expected_arch` differs from
// the stored architecture; FormatError on a corrupt file.
template <typename T>
TrainState<T> decode_checkpoint(std::string_view bytes, const std::string& what,
                                const ArchConfig* expected_arch = nullptr);
template <typename T>
TrainState<T> load_checkpoint(const std::string& path, const ArchConfig* expected_arch = nullptr);

// "float" or "double".
std::string checkpoint_precision(const std::string& path);

}  // namespace facevc
