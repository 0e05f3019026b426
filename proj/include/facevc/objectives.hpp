// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Training criterion of the crossmodal model:
//
//   J = E[log p(x|z,c)] + E[log p(y|c)] - KL[q(z|x)||p(z)] - KL[q(c|y)||p(c)]
//   R = E[log r(c|x)],  x ~ p(x|z,c), z ~ q(z|x~), c ~ q(c|y~)
//   total = J + lambda * R
//
// Every term is a mean over the examples of the batch. The voice encoder
// emits one code per output frame; log r(c|x) is the mean over frames of the
// per-frame log-densities of the broadcast code.

#pragma once

#include <string>

#include "facevc/networks.hpp"
#include "facevc/rng.hpp"

namespace facevc {

struct LossBreakdown {
  double speech_recon = 0;
  double face_recon = 0;
  double kl_z = 0;
  double kl_c = 0;
  double regularizer_r = 0;
  double lambda = 0;
  double total = 0;

  // speech_recon + face_recon - kl_z - kl_c + lambda * regularizer_r
  static double combine(double speech, double face, double kl_z, double kl_c, double r, double lambda) {
    return speech + face - kl_z - kl_c + lambda * r;
  }
  bool finite() const;
  std::string describe() const;
};

struct ObjectiveOptions {
  double lambda = 1.0;
  // Weight on both KL terms in the optimised objective (KL warm-up); the
  // reported breakdown always uses weight one.
  double kl_weight = 1.0;
  // Draw (x~, y~) for R from independently shuffled pairs instead of reusing
  // the samples of J.
  bool independent_pairing = false;
  // Feed the decoder mean instead of a reparameterised sample of x to r(c|x).
  bool mean_propagation = false;
};

// Features [B,1,D,N] and images [B,C,I,J] of aligned pairs.
template <typename T>
struct Batch {
  Tensor<T> features;
  Tensor<T> images;
  std::size_t size() const { return features.empty() ? 0 : features.dim(0); }
};

template <typename T>
struct ObjectiveTerms {
  Var<T> speech_recon;
  Var<T> face_recon;
  Var<T> kl_z;
  Var<T> kl_c;
  Var<T> regularizer_r;  // invalid when R was not requested
  // speech + face - kl_weight * (kl_z + kl_c) + lambda * R
  Var<T> objective;
  LossBreakdown breakdown;
};

// The four J terms from given distributions (batch means over `batch_size`).
template <typename T>
ObjectiveTerms<T> assemble_elbo(const DiagGaussian<T>& q_z, const DiagGaussian<T>& q_c,
                                const DiagGaussian<T>& p_x, Var<T> x, const DiagGaussian<T>& p_y,
                                Var<T> y, std::size_t batch_size, double kl_weight = 1.0);

// log r(c|x) averaged over frames and batch: code [B,Dc], q_code over [B,Dc,1,N''].
template <typename T>
Var<T> code_log_likelihood(const DiagGaussian<T>& q_code, Var<T> code);

// Builds J (and R when with_r) on `g` in training mode. Noise is drawn from
// rng in the order: z noise, c noise, then for R either x noise
// (shared pairing) or a permutation, z noise, c noise and x noise.
template <typename T>
ObjectiveTerms<T> build_objective(Graph<T>& g, ModelParams<T>& params, const Batch<T>& batch,
                                  Rng& rng, const ObjectiveOptions& options, bool with_r);

template <typename T>
LossBreakdown elbo_joint(ModelParams<T>& params, const Batch<T>& batch, Rng& rng);

template <typename T>
double regularizer_r(ModelParams<T>& params, const Batch<T>& batch, Rng& rng,
                     const ObjectiveOptions& options = {});

template <typename T>
LossBreakdown total_objective(ModelParams<T>& params, const Batch<T>& batch, Rng& rng, double lambda);

}  // namespace facevc
