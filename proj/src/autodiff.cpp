// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace facevc {

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (!loss.valid() || &loss.graph() != this) throw Error("backward on a variable of another graph");
  if (loss.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor<T>{};
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Tensor<T>(loss.shape(), T(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      T* dst = n.param->grad.data();
      const T* src = n.grad.data();
      for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
    }
  }
}

template <typename T>
Tensor<T> Graph<T>::grad(Var<T> v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor<T>(n.value.shape(), T(0));
  return n.grad;
}

template <typename T>
Tensor<T>& Graph<T>::accumulator(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape(), T(0));
  return n.grad;
}

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// y = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, F f, DF dfdx) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, dfdx](Graph<T>& g, std::size_t self) {
    const Tensor<T>& xv = g.value(ia);
    const Tensor<T>& yv = g.value(self);
    const Tensor<T>& gy = g.upstream(self);
    Tensor<T>& gx = g.accumulator(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * dfdx(xv[i], yv[i]);
  });
}

template <typename T>
T stable_softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "add");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    for (std::size_t id : {ia, ib}) {
      if (!g.requires_grad(id)) continue;
      Tensor<T>& acc = g.accumulator(id);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "sub");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    if (g.requires_grad(ia)) {
      Tensor<T>& acc = g.accumulator(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& acc = g.accumulator(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "mul");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    if (g.requires_grad(ia)) {
      const Tensor<T>& bv = g.value(ib);
      Tensor<T>& acc = g.accumulator(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i] * bv[i];
    }
    if (g.requires_grad(ib)) {
      const Tensor<T>& av = g.value(ia);
      Tensor<T>& acc = g.accumulator(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary(a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& x = a.value();
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  const std::size_t ia = a.id();
  return a.graph().record(Tensor<T>({1}, acc), {a}, [ia](Graph<T>& g, std::size_t self) {
    const T gy = g.upstream(self)[0];
    Tensor<T>& gx = g.accumulator(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy;
  });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T(0))) throw DimensionError("log of a non-positive value");
  }
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(a, [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> softplus(Var<T> a) {
  return unary(a, [](T x) { return stable_softplus(x); }, [](T x, T) { return stable_sigmoid(x); });
}

template <typename T>
Var<T> positive_variance(Var<T> a, T floor) {
  return unary(
      a, [floor](T x) { return stable_softplus(x) + floor; },
      [](T x, T) { return stable_sigmoid(x); });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope) {
  return unary(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> y = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    Tensor<T>& gx = g.accumulator(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sa.size() >= 2 && sa.size() == sb.size() && sa[0] == sb[0];
  for (std::size_t i = 2; ok && i < sa.size(); ++i) ok = sa[i] == sb[i];
  if (!ok) {
    throw DimensionError("concat_channels: " + shape_string(sa) + " with " + shape_string(sb));
  }
  const std::size_t batch = sa[0];
  const std::size_t inner = a.size() / (batch * sa[1]);
  const std::size_t na = sa[1] * inner, nb = sb[1] * inner;
  Shape out_shape = sa;
  out_shape[1] = sa[1] + sb[1];
  Tensor<T> y(out_shape);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(av.data() + n * na, na, y.data() + n * (na + nb));
    std::copy_n(bv.data() + n * nb, nb, y.data() + n * (na + nb) + na);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b},
                          [ia, ib, batch, na, nb](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    if (g.requires_grad(ia)) {
      Tensor<T>& acc = g.accumulator(ia);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < na; ++i) acc[n * na + i] += gy[n * (na + nb) + i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& acc = g.accumulator(ib);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < nb; ++i) acc[n * nb + i] += gy[n * (na + nb) + na + i];
    }
  });
}

template <typename T>
Var<T> broadcast_code(Var<T> code, std::size_t height, std::size_t width) {
  const Shape& s = code.shape();
  if (s.size() != 2) throw DimensionError("broadcast_code expects [B,C], got " + shape_string(s));
  const std::size_t rows = s[0] * s[1], plane = height * width;
  Tensor<T> y({s[0], s[1], height, width});
  const Tensor<T>& c = code.value();
  for (std::size_t r = 0; r < rows; ++r) std::fill_n(y.data() + r * plane, plane, c[r]);
  const std::size_t ic = code.id();
  return code.graph().record(std::move(y), {code}, [ic, rows, plane](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    Tensor<T>& acc = g.accumulator(ic);
    for (std::size_t r = 0; r < rows; ++r) {
      T s = 0;
      for (std::size_t k = 0; k < plane; ++k) s += gy[r * plane + k];
      acc[r] += s;
    }
  });
}

template <typename T>
Var<T> add_channel_bias(Var<T> x, Var<T> bias) {
  const Shape& s = x.shape();
  if (s.size() < 2 || bias.shape() != Shape{s[1]}) {
    throw DimensionError("add_channel_bias: input " + shape_string(s) + ", bias " +
                         shape_string(bias.shape()));
  }
  const std::size_t batch = s[0], channels = s[1], inner = x.size() / (batch * channels);
  Tensor<T> y = x.value();
  const Tensor<T>& b = bias.value();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      T* row = y.data() + (n * channels + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) row[k] += b[c];
    }
  const std::size_t ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(y), {x, bias},
                          [ix, ib, batch, channels, inner](Graph<T>& g, std::size_t self) {
    const Tensor<T>& gy = g.upstream(self);
    if (g.requires_grad(ix)) {
      Tensor<T>& acc = g.accumulator(ix);
      for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& acc = g.accumulator(ib);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
          const T* row = gy.data() + (n * channels + c) * inner;
          T s = 0;
          for (std::size_t k = 0; k < inner; ++k) s += row[k];
          acc[c] += s;
        }
    }
  });
}

#define FACEVC_INSTANTIATE_AUTODIFF(T)                                      \
  template class Graph<T>;                                                  \
  template Var<T> add(Var<T>, Var<T>);                                      \
  template Var<T> sub(Var<T>, Var<T>);                                      \
  template Var<T> mul(Var<T>, Var<T>);                                      \
  template Var<T> scale(Var<T>, T);                                         \
  template Var<T> add_scalar(Var<T>, T);                                    \
  template Var<T> sum(Var<T>);                                              \
  template Var<T> square(Var<T>);                                           \
  template Var<T> exp(Var<T>);                                              \
  template Var<T> log(Var<T>);                                              \
  template Var<T> sigmoid(Var<T>);                                          \
  template Var<T> softplus(Var<T>);                                         \
  template Var<T> positive_variance(Var<T>, T);                             \
  template Var<T> leaky_relu(Var<T>, T);                                    \
  template Var<T> reshape(Var<T>, Shape);                                   \
  template Var<T> concat_channels(Var<T>, Var<T>);                          \
  template Var<T> broadcast_code(Var<T>, std::size_t, std::size_t);         \
  template Var<T> add_channel_bias(Var<T>, Var<T>);

FACEVC_INSTANTIATE_AUTODIFF(float)
FACEVC_INSTANTIATE_AUTODIFF(double)

}  // namespace facevc
