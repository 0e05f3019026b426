// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// The five networks of the crossmodal model and the two generation paths.
//
//   utterance encoder  q(z|x)    GLU conv stack, reshape, 1x1 heads
//   utterance decoder  p(x|z,c)  mirrored transposed GLU stack, c broadcast
//                                and concatenated at every block input
//   face encoder       q(c|y)    conv + BN + leaky ReLU, affine heads
//   face decoder       p(y|c)    affine + transposed conv stack, sigmoid mean
//   voice encoder      r(c|x)    utterance-encoder topology with Dc-channel
//                                heads, one code per output frame
//
// Acoustic features enter as [B,1,D,N] images; latent sequences are
// [B,D',1,N']; codes are [B,Dc]; face images are [B,C,I,J].

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facevc/gaussian.hpp"
#include "facevc/layers.hpp"

namespace facevc {

struct Kernel2 {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Kernel2&, const Kernel2&) = default;
};

struct ArchConfig {
  std::size_t feature_dim = 36;
  std::size_t latent_channels = 8;
  std::size_t code_dim = 16;
  std::size_t image_size = 32;
  std::size_t image_channels = 1;
  std::vector<std::size_t> utterance_channels{16, 32, 64};
  std::vector<Kernel2> utterance_kernels{{3, 9}, {4, 8}, {4, 8}};
  std::vector<Kernel2> utterance_strides{{1, 1}, {2, 2}, {2, 2}};
  std::vector<std::size_t> voice_channels{16, 32, 64};
  std::vector<Kernel2> voice_kernels{{3, 9}, {4, 8}, {4, 8}};
  std::vector<Kernel2> voice_strides{{1, 1}, {2, 2}, {2, 4}};
  std::vector<std::size_t> face_channels{32, 64, 128};
  std::size_t face_kernel = 4;
  // Decoder variances are learned per element unless fixed to one.
  bool fixed_decoder_variance = false;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;

  std::size_t time_downsample() const;
  std::size_t voice_time_downsample() const;
  // Frequency extent left after the utterance / voice encoder strides.
  std::size_t utterance_feature_extent() const;
  std::size_t voice_feature_extent() const;
  std::size_t face_grid() const;
  // Smallest accepted sequence length for the utterance and voice encoders.
  std::size_t min_frames() const { return std::max(time_downsample(), voice_time_downsample()); }

  // Throws ConfigError listing every inconsistency.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static ArchConfig from_map(const std::map<std::string, std::string>& kv);
  // Small configuration used by the finite-difference checks.
  static ArchConfig tiny();
};

// Gaussian parameters as plain tensors (inference results).
template <typename T>
struct GaussianValue {
  Tensor<T> mean;
  Tensor<T> var;
};

template <typename T>
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(const std::string& name, const ArchConfig& arch,
                  const std::vector<std::size_t>& channels, const std::vector<Kernel2>& kernels,
                  const std::vector<Kernel2>& strides, std::size_t out_channels, Rng& rng);

  // x [B,1,D,N] -> Gaussian over [B,out,1,N/stride_w].
  DiagGaussian<T> forward(Graph<T>& g, Var<T> x, Mode mode);

  template <typename F>
  void visit(F&& f) {
    for (auto& b : blocks_) b.visit(f);
    mean_head_.visit(f);
    var_head_.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    for (auto& b : blocks_) b.visit_stats(f);
  }

 private:
  std::vector<GluBlock<T>> blocks_;
  ConvLayer<T> mean_head_;
  ConvLayer<T> var_head_;
  std::size_t feature_dim_ = 0;
  std::size_t time_downsample_ = 1;
  std::string name_;
};

template <typename T>
class UtteranceDecoder {
 public:
  UtteranceDecoder() = default;
  UtteranceDecoder(const ArchConfig& arch, Rng& rng);

  // z [B,D',1,N'], c [B,Dc] -> Gaussian over [B,1,D,N'*stride].
  DiagGaussian<T> forward(Graph<T>& g, Var<T> z, Var<T> c, Mode mode);

  template <typename F>
  void visit(F&& f) {
    input_block_.visit(f);
    for (auto& b : blocks_) b.visit(f);
    mean_head_.visit(f);
    if (!fixed_variance_) var_head_.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    input_block_.visit_stats(f);
    for (auto& b : blocks_) b.visit_stats(f);
  }

 private:
  GluBlock<T> input_block_;
  std::vector<GluBlock<T>> blocks_;
  ConvLayer<T> mean_head_;
  ConvLayer<T> var_head_;
  std::size_t latent_channels_ = 0;
  std::size_t code_dim_ = 0;
  std::size_t top_channels_ = 0;
  std::size_t top_extent_ = 0;
  bool fixed_variance_ = false;
};

template <typename T>
class FaceEncoder {
 public:
  FaceEncoder() = default;
  FaceEncoder(const ArchConfig& arch, Rng& rng);

  // y [B,C,I,J] -> Gaussian over [B,Dc].
  DiagGaussian<T> forward(Graph<T>& g, Var<T> y, Mode mode);

  template <typename F>
  void visit(F&& f) {
    for (auto& c : convs_) c.visit(f);
    for (auto& n : norms_) n.visit(f);
    mean_head_.visit(f);
    var_head_.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    for (auto& n : norms_) n.visit_stats(f);
  }

 private:
  std::vector<ConvLayer<T>> convs_;
  std::vector<BatchNormLayer<T>> norms_;
  LinearLayer<T> mean_head_;
  LinearLayer<T> var_head_;
  Shape image_shape_;
};

template <typename T>
class FaceDecoder {
 public:
  FaceDecoder() = default;
  FaceDecoder(const ArchConfig& arch, Rng& rng);

  // c [B,Dc] -> Gaussian over [B,C,I,J]; the mean lies in [0,1].
  DiagGaussian<T> forward(Graph<T>& g, Var<T> c, Mode mode);

  template <typename F>
  void visit(F&& f) {
    input_.visit(f);
    input_norm_.visit(f);
    for (auto& d : deconvs_) d.visit(f);
    for (auto& n : norms_) n.visit(f);
    mean_head_.visit(f);
    if (!fixed_variance_) var_head_.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    input_norm_.visit_stats(f);
    for (auto& n : norms_) n.visit_stats(f);
  }

 private:
  LinearLayer<T> input_;
  BatchNormLayer<T> input_norm_;
  std::vector<ConvLayer<T>> deconvs_;
  std::vector<BatchNormLayer<T>> norms_;
  ConvLayer<T> mean_head_;
  ConvLayer<T> var_head_;
  std::size_t code_dim_ = 0;
  std::size_t top_channels_ = 0;
  std::size_t grid_ = 0;
  bool fixed_variance_ = false;
};

// The five parameter sets. Field comments give the conventional symbols.
template <typename T>
struct ModelParams {
  ArchConfig arch;
  UtteranceDecoder<T> utterance_decoder;  // theta_a
  SequenceEncoder<T> utterance_encoder;   // phi_a
  FaceDecoder<T> face_decoder;            // theta_v
  FaceEncoder<T> face_encoder;            // phi_v
  SequenceEncoder<T> voice_encoder;       // psi

  template <typename F>
  void visit(F&& f) {
    utterance_decoder.visit(f);
    utterance_encoder.visit(f);
    face_decoder.visit(f);
    face_encoder.visit(f);
    voice_encoder.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    utterance_decoder.visit_stats(f);
    utterance_encoder.visit_stats(f);
    face_decoder.visit_stats(f);
    face_encoder.visit_stats(f);
    voice_encoder.visit_stats(f);
  }

  std::vector<Parameter<T>*> parameters();
  void zero_grad();
  std::size_t parameter_count();
};

template <typename T>
ModelParams<T> init_params(const ArchConfig& arch, std::uint64_t seed);

// Single-utterance / single-image inference in evaluation mode. Features are
// [D,N], images [C,I,J], codes [Dc], latent sequences [D',N'].
template <typename T>
GaussianValue<T> utterance_encode(ModelParams<T>& params, const Tensor<T>& features);
template <typename T>
GaussianValue<T> utterance_decode(ModelParams<T>& params, const Tensor<T>& latent,
                                  const Tensor<T>& code);
template <typename T>
GaussianValue<T> face_encode(ModelParams<T>& params, const Tensor<T>& image);
template <typename T>
GaussianValue<T> face_decode(ModelParams<T>& params, const Tensor<T>& code);
// Per-frame code distribution [Dc,N''].
template <typename T>
GaussianValue<T> voice_encode(ModelParams<T>& params, const Tensor<T>& features);

// x_hat = mu_theta_a(mu_phi_a(x), mu_phi_v(y)); any length >= min_frames, padded
// internally by edge replication and cropped back.
template <typename T>
Tensor<T> convert_voice(ModelParams<T>& params, const Tensor<T>& features, const Tensor<T>& image);

// y_hat = mu_theta_v(time-mean of mu_psi(x)).
template <typename T>
Tensor<T> generate_face(ModelParams<T>& params, const Tensor<T>& features);

// [D,N] -> [D,N+k] with the last frame repeated so that N+k is a multiple.
template <typename T>
Tensor<T> pad_frames(const Tensor<T>& features, std::size_t multiple);

}  // namespace facevc
