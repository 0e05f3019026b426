// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/eval.hpp"

#include <cmath>
#include <cstdio>

#include "facevc/kv.hpp"

namespace facevc {

GroupStats compute_group_stats(const std::vector<PairedExample>& pairs) {
  std::array<std::vector<PairedExample>, kGroupCount> split_pairs;
  for (const auto& p : pairs) split_pairs[static_cast<std::size_t>(p.attrs.group())].push_back(p);
  GroupStats s;
  for (int g = 0; g < kGroupCount; ++g) {
    if (split_pairs[g].empty()) {
      throw DegenerateError("no training features for group " + AttributeLabel::from_group(g).name());
    }
    s.groups[g] = compute_norm_stats(split_pairs[g]);
  }
  return s;
}

Tensor<double> baseline1_convert(const Tensor<double>& x, const NormStats& src, const NormStats& tgt) {
  if (x.rank() != 2 || src.mean.size() != x.dim(0) || tgt.mean.size() != x.dim(0)) {
    throw DimensionError("baseline conversion: features " + shape_string(x.shape()) + ", source stats " +
                         std::to_string(src.mean.size()) + ", target stats " + std::to_string(tgt.mean.size()));
  }
  Tensor<double> out(x.shape());
  for (std::size_t d = 0; d < x.dim(0); ++d) {
    for (std::size_t t = 0; t < x.dim(1); ++t) {
      out.at(d, t) = (x.at(d, t) - src.mean[d]) / src.std[d] * tgt.std[d] + tgt.mean[d];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probes

void LinearProbe::fit(const std::vector<std::vector<double>>& inputs, const std::vector<int>& labels) {
  if (inputs.empty() || inputs.size() != labels.size()) throw DegenerateError("probe needs labelled inputs");
  const std::size_t n = inputs.size();
  const std::size_t d = inputs.front().size();
  std::size_t positives = 0;
  for (int y : labels) positives += y != 0;
  if (positives == 0 || positives == n) throw DegenerateError("probe training data holds a single class");

  mean_.assign(d, 0);
  scale_.assign(d, 0);
  for (const auto& x : inputs) {
    if (x.size() != d) throw DimensionError("probe inputs differ in length");
    for (std::size_t j = 0; j < d; ++j) mean_[j] += x[j];
  }
  for (auto& m : mean_) m /= static_cast<double>(n);
  for (const auto& x : inputs) {
    for (std::size_t j = 0; j < d; ++j) scale_[j] += (x[j] - mean_[j]) * (x[j] - mean_[j]);
  }
  for (auto& s : scale_) s = 1.0 / std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);

  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[i][j] = (inputs[i][j] - mean_[j]) * scale_[j];
  }
  w_.assign(d, 0);
  b_ = 0;
  std::vector<double> gw(d);
  for (std::size_t step = 0; step < kSteps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double a = b_;
      for (std::size_t j = 0; j < d; ++j) a += w_[j] * z[i][j];
      const double r = 1.0 / (1.0 + std::exp(-a)) - (labels[i] != 0 ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * z[i][j];
      gb += r;
    }
    for (std::size_t j = 0; j < d; ++j) w_[j] -= kLearningRate * gw[j] / static_cast<double>(n);
    b_ -= kLearningRate * gb / static_cast<double>(n);
  }
}

double LinearProbe::probability(const std::vector<double>& x) const {
  if (x.size() != w_.size()) {
    throw DimensionError("probe expects " + std::to_string(w_.size()) + " inputs, got " + std::to_string(x.size()));
  }
  double a = b_;
  for (std::size_t j = 0; j < x.size(); ++j) a += w_[j] * (x[j] - mean_[j]) * scale_[j];
  return 1.0 / (1.0 + std::exp(-a));
}

std::vector<double> time_average(const Tensor<double>& x) {
  if (x.rank() != 2) throw DimensionError("time average expects [D,N], got " + shape_string(x.shape()));
  std::vector<double> out(x.dim(0), 0);
  for (std::size_t d = 0; d < x.dim(0); ++d) {
    for (std::size_t t = 0; t < x.dim(1); ++t) out[d] += x.at(d, t);
    out[d] /= static_cast<double>(x.dim(1));
  }
  return out;
}

std::vector<double> flatten(const Tensor<double>& image) { return image.storage(); }

ProbeModel train_probe(const std::vector<ProbeItem>& items) {
  std::vector<std::vector<double>> inputs;
  std::vector<int> gender, age;
  for (const auto& it : items) {
    inputs.push_back(it.input);
    gender.push_back(it.target.gender == Gender::female);
    age.push_back(it.target.age == Age::aged);
  }
  ProbeModel m;
  m.gender.fit(inputs, gender);
  m.age.fit(inputs, age);
  return m;
}

ProbeModel train_feature_probe(const std::vector<PairedExample>& pairs) {
  std::vector<ProbeItem> items;
  for (const auto& p : pairs) items.push_back({time_average(p.x), p.attrs});
  return train_probe(items);
}

ProbeModel train_image_probe(const std::vector<PairedExample>& pairs) {
  std::vector<ProbeItem> items;
  for (const auto& p : pairs) items.push_back({flatten(p.y), p.attrs});
  return train_probe(items);
}

ProbeAccuracy probe_score(const ProbeModel& probe, const std::vector<ProbeItem>& items) {
  if (items.empty()) throw DegenerateError("probe_score on an empty item list");
  ProbeAccuracy acc;
  std::size_t g = 0, a = 0;
  for (const auto& it : items) {
    g += probe.gender.predict(it.input) == (it.target.gender == Gender::female ? 1 : 0);
    a += probe.age.predict(it.input) == (it.target.age == Age::aged ? 1 : 0);
  }
  acc.n = items.size();
  acc.gender = static_cast<double>(g) / static_cast<double>(acc.n);
  acc.age = static_cast<double>(a) / static_cast<double>(acc.n);
  return acc;
}

double mcd(const Tensor<double>& a, const Tensor<double>& b, std::size_t first_dim) {
  if (a.shape() != b.shape() || a.rank() != 2) {
    throw DimensionError("mcd of " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  double total = 0;
  for (std::size_t t = 0; t < a.dim(1); ++t) {
    double sq = 0;
    for (std::size_t d = first_dim; d < a.dim(0); ++d) {
      const double diff = a.at(d, t) - b.at(d, t);
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return kMcdScale * total / static_cast<double>(a.dim(1));
}

// ---------------------------------------------------------------------------
// Model pipelines

template <typename T>
Tensor<double> convert_raw(ModelParams<T>& params, const NormStats& norm, const Tensor<double>& features,
                           const Tensor<double>& image) {
  const Tensor<T> x = norm.normalize(features).template cast<T>();
  const Tensor<T> out = convert_voice(params, x, image.template cast<T>());
  return norm.denormalize(out.template cast<double>());
}

template <typename T>
Tensor<double> generate_face_raw(ModelParams<T>& params, const NormStats& norm, const Tensor<double>& features) {
  return generate_face(params, norm.normalize(features).template cast<T>()).template cast<double>();
}

template <typename T>
Tensor<double> reconstruct_face(ModelParams<T>& params, const Tensor<double>& image) {
  const GaussianValue<T> code = face_encode(params, image.template cast<T>());
  return face_decode(params, code.mean).mean.template cast<double>();
}

const EvalRow& EvalReport::row(const std::string& method, const std::string& attribute) const {
  for (const auto& r : rows) {
    if (r.method == method && r.attribute == attribute) return r;
  }
  throw Error("report has no row " + method + "/" + attribute);
}

template <typename T>
EvalReport evaluate(ModelParams<T>& params, const NormStats& norm, const std::vector<PairedExample>& train,
                    const std::vector<PairedExample>& test) {
  if (test.empty()) throw DegenerateError("evaluation set is empty");
  const ProbeModel feature_probe = train_feature_probe(train);
  const ProbeModel image_probe = train_image_probe(train);
  const GroupStats stats = compute_group_stats(train);

  std::array<std::vector<std::size_t>, kGroupCount> faces;
  for (std::size_t i = 0; i < test.size(); ++i) faces[static_cast<std::size_t>(test[i].attrs.group())].push_back(i);
  for (int g = 0; g < kGroupCount; ++g) {
    if (faces[g].empty()) throw DegenerateError("evaluation set has no pair in group " + AttributeLabel::from_group(g).name());
  }

  std::vector<ProbeItem> proposed_items, baseline_items, face_items;
  double proposed_mcd = 0, baseline_mcd = 0, roundtrip_mcd = 0, face_se = 0;
  std::size_t face_values = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const PairedExample& src = test[i];
    for (int g = 0; g < kGroupCount; ++g) {
      const AttributeLabel target = AttributeLabel::from_group(g);
      const auto& pool = faces[g];
      const PairedExample& face_pair = test[pool[i % pool.size()]];
      const Tensor<double> converted = convert_raw(params, norm, src.x, face_pair.y);
      proposed_items.push_back({time_average(converted), target});
      proposed_mcd += mcd(converted, src.x);
      const Tensor<double> b1 = baseline1_convert(src.x, stats.at(src.attrs), stats.at(target));
      baseline_items.push_back({time_average(b1), target});
      baseline_mcd += mcd(b1, src.x);
    }
    roundtrip_mcd += mcd(convert_raw(params, norm, src.x, src.y), src.x);
    face_items.push_back({flatten(generate_face_raw(params, norm, src.x)), src.attrs});
    const Tensor<double> recon = reconstruct_face(params, src.y);
    for (std::size_t k = 0; k < recon.size(); ++k) face_se += (recon[k] - src.y[k]) * (recon[k] - src.y[k]);
    face_values += recon.size();
  }

  const ProbeAccuracy pa = probe_score(feature_probe, proposed_items);
  const ProbeAccuracy ba = probe_score(feature_probe, baseline_items);
  const ProbeAccuracy fa = probe_score(image_probe, face_items);
  const double nconv = static_cast<double>(proposed_items.size());
  const double nutt = static_cast<double>(test.size());

  EvalReport r;
  r.speech_mcd = roundtrip_mcd / nutt;
  r.face_mse = face_se / static_cast<double>(face_values);
  r.rows.push_back({"proposed", "gender", pa.gender, proposed_mcd / nconv, pa.n});
  r.rows.push_back({"proposed", "age", pa.age, proposed_mcd / nconv, pa.n});
  r.rows.push_back({"baseline1", "gender", ba.gender, baseline_mcd / nconv, ba.n});
  r.rows.push_back({"baseline1", "age", ba.age, baseline_mcd / nconv, ba.n});
  r.rows.push_back({"proposed", "face_gender", fa.gender, std::numeric_limits<double>::quiet_NaN(), fa.n});
  r.rows.push_back({"proposed", "face_age", fa.age, std::numeric_limits<double>::quiet_NaN(), fa.n});
  r.rows.push_back({"proposed", "reconstruction", std::numeric_limits<double>::quiet_NaN(), r.speech_mcd, test.size()});
  return r;
}

std::string report_csv(const EvalReport& report) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  std::string out = "method,attribute,accuracy,mcd_mean,n\n";
  for (const auto& r : report.rows) {
    out += r.method + "," + r.attribute + "," + cell(r.accuracy) + "," + cell(r.mcd_mean) + "," + std::to_string(r.n) + "\n";
  }
  return out;
}

#define FACEVC_INSTANTIATE_EVAL(T)                                                                              \
  template Tensor<double> convert_raw(ModelParams<T>&, const NormStats&, const Tensor<double>&,                \
                                      const Tensor<double>&);                                                   \
  template Tensor<double> generate_face_raw(ModelParams<T>&, const NormStats&, const Tensor<double>&);         \
  template Tensor<double> reconstruct_face(ModelParams<T>&, const Tensor<double>&);                            \
  template EvalReport evaluate(ModelParams<T>&, const NormStats&, const std::vector<PairedExample>&,           \
                               const std::vector<PairedExample>&);

FACEVC_INSTANTIATE_EVAL(float)
FACEVC_INSTANTIATE_EVAL(double)

}  // namespace facevc
