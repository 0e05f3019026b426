// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/objectives.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace facevc {

bool LossBreakdown::finite() const {
  return std::isfinite(speech_recon) && std::isfinite(face_recon) && std::isfinite(kl_z) &&
         std::isfinite(kl_c) && std::isfinite(regularizer_r) && std::isfinite(total);
}

std::string LossBreakdown::describe() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "speech_recon=%.6g face_recon=%.6g kl_z=%.6g kl_c=%.6g regularizer_r=%.6g total=%.6g",
                speech_recon, face_recon, kl_z, kl_c, regularizer_r, total);
  return buf;
}

template <typename T>
ObjectiveTerms<T> assemble_elbo(const DiagGaussian<T>& q_z, const DiagGaussian<T>& q_c,
                                const DiagGaussian<T>& p_x, Var<T> x, const DiagGaussian<T>& p_y,
                                Var<T> y, std::size_t batch_size, double kl_weight) {
  const T inv_b = T(1) / static_cast<T>(batch_size);
  ObjectiveTerms<T> t;
  t.speech_recon = scale(log_density(p_x, x), inv_b);
  t.face_recon = scale(log_density(p_y, y), inv_b);
  t.kl_z = scale(kl_to_standard_normal(q_z), inv_b);
  t.kl_c = scale(kl_to_standard_normal(q_c), inv_b);
  t.objective = sub(add(t.speech_recon, t.face_recon),
                    scale(add(t.kl_z, t.kl_c), static_cast<T>(kl_weight)));
  LossBreakdown& b = t.breakdown;
  b.speech_recon = static_cast<double>(t.speech_recon.value()[0]);
  b.face_recon = static_cast<double>(t.face_recon.value()[0]);
  b.kl_z = static_cast<double>(t.kl_z.value()[0]);
  b.kl_c = static_cast<double>(t.kl_c.value()[0]);
  b.total = LossBreakdown::combine(b.speech_recon, b.face_recon, b.kl_z, b.kl_c, 0.0, 0.0);
  return t;
}

template <typename T>
Var<T> code_log_likelihood(const DiagGaussian<T>& q_code, Var<T> code) {
  const Shape& s = q_code.shape();
  if (s.size() != 4 || s[2] != 1 || code.shape() != Shape{s[0], s[1]}) {
    throw DimensionError("code_log_likelihood: code " + shape_string(code.shape()) +
                         " vs per-frame distribution " + shape_string(s));
  }
  Var<T> broadcast = broadcast_code(code, 1, s[3]);
  return scale(log_density(q_code, broadcast), T(1) / static_cast<T>(s[0] * s[3]));
}

template <typename T>
ObjectiveTerms<T> build_objective(Graph<T>& g, ModelParams<T>& params, const Batch<T>& batch,
                                  Rng& rng, const ObjectiveOptions& options, bool with_r) {
  const std::size_t n = batch.size();
  if (n < 2) throw DegenerateError("objective needs a batch of at least 2 pairs, got " + std::to_string(n));
  if (batch.images.empty() || batch.images.dim(0) != n) {
    throw DimensionError("batch has " + std::to_string(n) + " feature sequences but images " +
                         shape_string(batch.images.shape()));
  }
  if (options.lambda < 0) throw ConfigError("lambda must be >= 0");

  Var<T> x = g.constant(batch.features);
  Var<T> y = g.constant(batch.images);
  DiagGaussian<T> q_z = params.utterance_encoder.forward(g, x, Mode::train);
  DiagGaussian<T> q_c = params.face_encoder.forward(g, y, Mode::train);
  Var<T> z = sample_reparameterized(q_z, rng.normal_tensor<T>(q_z.shape()));
  Var<T> c = sample_reparameterized(q_c, rng.normal_tensor<T>(q_c.shape()));
  DiagGaussian<T> p_x = params.utterance_decoder.forward(g, z, c, Mode::train);
  DiagGaussian<T> p_y = params.face_decoder.forward(g, c, Mode::train);

  ObjectiveTerms<T> t = assemble_elbo(q_z, q_c, p_x, x, p_y, y, n, options.kl_weight);
  if (!with_r) return t;

  DiagGaussian<T> p_x_r = p_x;
  Var<T> c_r = c;
  if (options.independent_pairing) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Tensor<T> shuffled(batch.images.shape());
    const std::size_t stride = batch.images.size() / n;
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(batch.images.data() + perm[i] * stride, stride, shuffled.data() + i * stride);
    }
    Var<T> z_r = sample_reparameterized(q_z, rng.normal_tensor<T>(q_z.shape()));
    DiagGaussian<T> q_c_r = params.face_encoder.forward(g, g.constant(std::move(shuffled)), Mode::train);
    c_r = sample_reparameterized(q_c_r, rng.normal_tensor<T>(q_c_r.shape()));
    p_x_r = params.utterance_decoder.forward(g, z_r, c_r, Mode::train);
  }
  Var<T> x_gen = options.mean_propagation
                     ? p_x_r.mean()
                     : sample_reparameterized(p_x_r, rng.normal_tensor<T>(p_x_r.shape()));
  DiagGaussian<T> q_code = params.voice_encoder.forward(g, x_gen, Mode::train);
  t.regularizer_r = code_log_likelihood(q_code, c_r);
  t.objective = add(t.objective, scale(t.regularizer_r, static_cast<T>(options.lambda)));

  LossBreakdown& b = t.breakdown;
  b.regularizer_r = static_cast<double>(t.regularizer_r.value()[0]);
  b.lambda = options.lambda;
  b.total = LossBreakdown::combine(b.speech_recon, b.face_recon, b.kl_z, b.kl_c, b.regularizer_r,
                                   b.lambda);
  return t;
}

template <typename T>
LossBreakdown elbo_joint(ModelParams<T>& params, const Batch<T>& batch, Rng& rng) {
  Graph<T> g(false);
  return build_objective(g, params, batch, rng, ObjectiveOptions{}, false).breakdown;
}

template <typename T>
double regularizer_r(ModelParams<T>& params, const Batch<T>& batch, Rng& rng,
                     const ObjectiveOptions& options) {
  Graph<T> g(false);
  return build_objective(g, params, batch, rng, options, true).breakdown.regularizer_r;
}

template <typename T>
LossBreakdown total_objective(ModelParams<T>& params, const Batch<T>& batch, Rng& rng, double lambda) {
  Graph<T> g(false);
  ObjectiveOptions options;
  options.lambda = lambda;
  return build_objective(g, params, batch, rng, options, true).breakdown;
}

#define FACEVC_INSTANTIATE_OBJECTIVES(T)                                                           \
  template ObjectiveTerms<T> assemble_elbo(const DiagGaussian<T>&, const DiagGaussian<T>&,         \
                                           const DiagGaussian<T>&, Var<T>, const DiagGaussian<T>&, \
                                           Var<T>, std::size_t, double);                          \
  template Var<T> code_log_likelihood(const DiagGaussian<T>&, Var<T>);                             \
  template ObjectiveTerms<T> build_objective(Graph<T>&, ModelParams<T>&, const Batch<T>&, Rng&,    \
                                             const ObjectiveOptions&, bool);                       \
  template LossBreakdown elbo_joint(ModelParams<T>&, const Batch<T>&, Rng&);                       \
  template double regularizer_r(ModelParams<T>&, const Batch<T>&, Rng&, const ObjectiveOptions&);  \
  template LossBreakdown total_objective(ModelParams<T>&, const Batch<T>&, Rng&, double);

FACEVC_INSTANTIATE_OBJECTIVES(float)
FACEVC_INSTANTIATE_OBJECTIVES(double)

}  // namespace facevc
