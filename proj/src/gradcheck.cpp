// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace facevc {

namespace {

using VarList = std::vector<Var<double>>;

// sum(w * y) for a fixed random w, so every output element matters.
Var<double> weigh(Graph<double>& g, Var<double> y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, g.constant(rng.normal_tensor<double>(y.shape()))));
}

Tensor<double> uniform_tensor(const Shape& s, double lo, double hi, Rng& rng) {
  Tensor<double> t(s);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero, for ops with a kink at the origin.
Tensor<double> off_zero_tensor(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  for (auto& v : t.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.5);
  return t;
}

}  // namespace

bool GradCheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed(); });
}

double GradCheckReport::max_error() const {
  double m = 0;
  for (const auto& e : entries) m = std::max(m, e.error);
  return m;
}

void GradCheckReport::append(const GradCheckReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

double relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor) {
  double diff = 0, scale = floor;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

GradCheckReport check_function(const std::string& name, const std::vector<Tensor<double>>& inputs,
                               const ScalarFn& fn, double step) {
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    VarList vars;
    for (const auto& t : inputs) vars.push_back(g.input(t));
    Var<double> loss = fn(g, vars);
    g.backward(loss);
    for (const auto& v : vars) analytic.push_back(g.grad(v));
  }
  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Graph<double> g;
    VarList vars;
    for (const auto& t : xs) vars.push_back(g.input(t));
    return fn(g, vars).value()[0];
  };

  GradCheckReport report;
  std::vector<Tensor<double>> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Tensor<double> numeric(xs[k].shape());
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double saved = xs[k][i];
      xs[k][i] = saved + step;
      const double up = evaluate(xs);
      xs[k][i] = saved - step;
      const double down = evaluate(xs);
      xs[k][i] = saved;
      numeric[i] = (up - down) / (2 * step);
    }
    report.entries.push_back({name + "/" + std::to_string(k), relative_error(analytic[k], numeric), numeric.size()});
  }
  return report;
}

GradCheckReport grad_check_ops(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 21));
  const std::uint64_t w = mix_seed(seed, 22);
  const Shape s{2, 3, 2, 2};
  auto normal = [&](const Shape& shape) { return rng.normal_tensor<double>(shape); };
  GradCheckReport r;

  r.append(check_function("add", {normal(s), normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, add(v[0], v[1]), w); }));
  r.append(check_function("sub", {normal(s), normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, sub(v[0], v[1]), w); }));
  r.append(check_function("mul", {normal(s), normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, mul(v[0], v[1]), w); }));
  r.append(check_function("scale", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, scale(v[0], -1.7), w); }));
  r.append(check_function("add_scalar", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, add_scalar(v[0], 0.3), w); }));
  r.append(check_function("sum", {normal(s)}, [&](Graph<double>&, const VarList& v) { return sum(v[0]); }));
  r.append(check_function("square", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, square(v[0]), w); }));
  r.append(check_function("exp", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, exp(v[0]), w); }));
  r.append(check_function("log", {uniform_tensor(s, 0.5, 2.0, rng)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, log(v[0]), w); }));
  r.append(check_function("sigmoid", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, sigmoid(v[0]), w); }));
  r.append(check_function("softplus", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, softplus(v[0]), w); }));
  r.append(check_function("positive_variance", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, positive_variance(v[0]), w); }));
  r.append(check_function("leaky_relu", {off_zero_tensor(s, rng)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, leaky_relu(v[0]), w); }));
  r.append(check_function("reshape", {normal(s)},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, reshape(v[0], {2, 12}), w); }));
  r.append(check_function("concat_channels", {normal(s), normal({2, 2, 2, 2})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, concat_channels(v[0], v[1]), w);
  }));
  r.append(check_function("broadcast_code", {normal({2, 3})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, broadcast_code(v[0], 2, 5), w);
  }));
  r.append(check_function("add_channel_bias", {normal(s), normal({3})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, add_channel_bias(v[0], v[1]), w);
  }));
  r.append(check_function("linear", {normal({4, 5}), normal({3, 5}), normal({3})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, linear(v[0], v[1], v[2]), w);
  }));

  const ConvGeometry strided{2, 1, 1, 1};
  r.append(check_function("conv2d", {normal({2, 3, 7, 9}), normal({4, 3, 4, 3})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, conv2d(v[0], v[1], strided), w);
  }));
  r.append(check_function("conv2d_pointwise", {normal({2, 3, 4, 5}), normal({2, 3, 1, 1})},
                          [&](Graph<double>& g, const VarList& v) { return weigh(g, conv2d(v[0], v[1], {}), w); }));
  r.append(check_function("deconv2d", {normal({2, 4, 4, 5}), normal({4, 3, 4, 3})}, [&](Graph<double>& g, const VarList& v) {
    return weigh(g, deconv2d(v[0], v[1], strided), w);
  }));
  r.append(check_function("glu", {normal({2, 2, 6, 6}), normal({3, 2, 3, 3}), normal({3, 2, 3, 3})},
                          [&](Graph<double>& g, const VarList& v) {
                            const ConvGeometry same{1, 1, 1, 1};
                            return weigh(g, mul(conv2d(v[0], v[1], same), sigmoid(conv2d(v[0], v[2], same))), w);
                          }));

  const Tensor<double> gamma = uniform_tensor({3}, 0.5, 1.5, rng);
  r.append(check_function("batch_norm_train", {normal({4, 3, 2, 2}), gamma, normal({3})},
                          [&](Graph<double>& g, const VarList& v) {
                            auto stats = RunningStats<double>::fresh(3);
                            return weigh(g, batch_norm(v[0], v[1], v[2], stats, Mode::train), w);
                          }));
  const RunningStats<double> eval_stats{normal({3}), uniform_tensor({3}, 0.5, 2.0, rng)};
  r.append(check_function("batch_norm_eval", {normal({4, 3, 2, 2}), gamma, normal({3})},
                          [&](Graph<double>& g, const VarList& v) {
                            auto stats = eval_stats;
                            return weigh(g, batch_norm(v[0], v[1], v[2], stats, Mode::eval), w);
                          }));

  const Shape gs{3, 4};
  r.append(check_function("kl_to_standard_normal", {normal(gs), uniform_tensor(gs, 0.3, 2.0, rng)},
                          [&](Graph<double>&, const VarList& v) {
                            return kl_to_standard_normal(DiagGaussian<double>(v[0], v[1]));
                          }));
  r.append(check_function("log_density", {normal(gs), uniform_tensor(gs, 0.3, 2.0, rng), normal(gs)},
                          [&](Graph<double>&, const VarList& v) {
                            return log_density(DiagGaussian<double>(v[0], v[1]), v[2]);
                          }));
  const Tensor<double> eps = normal(gs);
  r.append(check_function("sample_reparameterized", {normal(gs), uniform_tensor(gs, 0.3, 2.0, rng)},
                          [&](Graph<double>& g, const VarList& v) {
                            return weigh(g, sample_reparameterized(DiagGaussian<double>(v[0], v[1]), eps), w);
                          }));
  return r;
}

GradCheckReport grad_check_objective(std::uint64_t seed, const ObjectiveOptions& options, const ArchConfig& arch) {
  ModelParams<double> params = init_params<double>(arch, seed);
  Rng data(mix_seed(seed, 31));
  const std::size_t batch_size = 3;
  const std::size_t frames = 2 * arch.min_frames();
  Batch<double> batch{data.normal_tensor<double>({batch_size, 1, arch.feature_dim, frames}),
                      uniform_tensor({batch_size, arch.image_channels, arch.image_size, arch.image_size}, 0.05,
                                     0.95, data)};
  const std::uint64_t noise_seed = mix_seed(seed, 32);

  auto objective = [&](bool backward) {
    Graph<double> g(backward);
    Rng noise(noise_seed);
    ObjectiveTerms<double> t = build_objective(g, params, batch, noise, options, true);
    if (backward) g.backward(t.objective);
    return t.objective.value()[0];
  };

  params.zero_grad();
  objective(true);
  GradCheckReport report;
  for (Parameter<double>* p : params.parameters()) {
    Tensor<double> numeric(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + kGradCheckStep;
      const double up = objective(false);
      p->value[i] = saved - kGradCheckStep;
      const double down = objective(false);
      p->value[i] = saved;
      numeric[i] = (up - down) / (2 * kGradCheckStep);
    }
    report.entries.push_back({"objective/" + p->name, relative_error(p->grad, numeric), numeric.size()});
  }
  return report;
}

GradCheckReport grad_check(std::uint64_t seed) {
  GradCheckReport r = grad_check_ops(seed);
  r.append(grad_check_objective(seed));
  return r;
}

}  // namespace facevc
