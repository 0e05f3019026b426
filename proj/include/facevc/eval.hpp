// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Objective evaluation: the mean/variance-matching baseline converter,
// linear attribute probes and mel-cepstral distortion.

#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "facevc/data.hpp"
#include "facevc/networks.hpp"

namespace facevc {

// Per-group, per-dimension statistics of raw training features.
struct GroupStats {
  std::array<NormStats, kGroupCount> groups;
  const NormStats& at(AttributeLabel a) const { return groups[static_cast<std::size_t>(a.group())]; }
};

GroupStats compute_group_stats(const std::vector<PairedExample>& pairs);

// x'_d = (x_d - mu_src,d) / sigma_src,d * sigma_tgt,d + mu_tgt,d
Tensor<double> baseline1_convert(const Tensor<double>& x, const NormStats& src, const NormStats& tgt);

// Binary logistic regression on inputs standardized with statistics of the
// training inputs; fit by full-batch gradient descent from zero weights.
class LinearProbe {
 public:
  static constexpr std::size_t kSteps = 500;
  static constexpr double kLearningRate = 0.1;

  // Throws DegenerateError when `labels` holds a single class.
  void fit(const std::vector<std::vector<double>>& inputs, const std::vector<int>& labels);
  double probability(const std::vector<double>& input) const;
  int predict(const std::vector<double>& input) const { return probability(input) >= 0.5 ? 1 : 0; }

  const std::vector<double>& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  std::vector<double> mean_, scale_, w_;
  double b_ = 0;
};

struct ProbeModel {
  LinearProbe gender;  // 1 = female
  LinearProbe age;     // 1 = aged
};

struct ProbeItem {
  std::vector<double> input;
  AttributeLabel target;
};

struct ProbeAccuracy {
  double gender = 0;
  double age = 0;
  std::size_t n = 0;
};

std::vector<double> time_average(const Tensor<double>& features);  // [D,N] -> D
std::vector<double> flatten(const Tensor<double>& image);

ProbeModel train_probe(const std::vector<ProbeItem>& items);
// Time-averaged raw features / flattened images of the pairs.
ProbeModel train_feature_probe(const std::vector<PairedExample>& pairs);
ProbeModel train_image_probe(const std::vector<PairedExample>& pairs);

// Throws DegenerateError on an empty item list.
ProbeAccuracy probe_score(const ProbeModel& probe, const std::vector<ProbeItem>& items);

inline constexpr double kMcdScale = 6.141851463713754;  // 10 sqrt(2) / ln 10

// Frame mean of kMcdScale * ||a_t - b_t||_2 over dims [first_dim, D).
double mcd(const Tensor<double>& a, const Tensor<double>& b, std::size_t first_dim = 1);

// Inference on raw (unnormalized) features.
template <typename T>
Tensor<double> convert_raw(ModelParams<T>& params, const NormStats& norm, const Tensor<double>& features,
                           const Tensor<double>& image);
template <typename T>
Tensor<double> generate_face_raw(ModelParams<T>& params, const NormStats& norm, const Tensor<double>& features);
// face_decode(face_encode(y).mean).mean
template <typename T>
Tensor<double> reconstruct_face(ModelParams<T>& params, const Tensor<double>& image);

struct EvalRow {
  std::string method;
  std::string attribute;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double mcd_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double face_mse = 0;        // reconstruction error of held-out images
  double speech_mcd = 0;      // utterance round trip with the paired face
  const EvalRow& row(const std::string& method, const std::string& attribute) const;
};

// Every test utterance is converted towards each group, using the face of
// the (i mod count)-th test pair of that group. Probes and Baseline1 stats
// come from `train`.
template <typename T>
EvalReport evaluate(ModelParams<T>& params, const NormStats& norm, const std::vector<PairedExample>& train,
                    const std::vector<PairedExample>& test);

std::string report_csv(const EvalReport& report);

}  // namespace facevc
