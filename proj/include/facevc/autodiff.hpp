// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Tape-based reverse-mode automatic differentiation over Tensor<T>.
//
// A Graph records every operation in execution order. Each node keeps its
// forward value and, if any input needs a gradient, a closure that pushes the
// node's incoming gradient back into its inputs. Graph::backward walks the
// nodes in exact reverse recording order, which is a valid reverse topological
// order because inputs are always recorded before their consumers.
//
// Leaves bound to a Parameter add their gradient into Parameter::grad after
// every backward call, so gradients of several losses accumulate until the
// caller zeroes them.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>

#include "facevc/tensor.hpp"

namespace facevc {

template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), T(0)) {}

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = true;

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Graph;

// Lightweight handle to a node of a Graph.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  // With track_gradients = false parameters enter as constants (inference).
  explicit Graph(bool track_gradients) : track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, {}, nullptr); }

  // A leaf whose gradient is kept on the graph (read it with grad()).
  Var<T> input(Tensor<T> value) { return push(std::move(value), true, {}, nullptr); }

  Var<T> parameter(Parameter<T>& p) {
    const bool needs = track_ && p.requires_grad;
    return push(p.value, needs, {}, needs ? &p : nullptr);
  }

  // Records an op output. The closure is dropped when no input needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var<T>& v : inputs) {
      if (v.valid() && &v.graph() != this) throw Error("mixing variables of different graphs");
      needs = needs || (v.valid() && nodes_[v.id()].requires_grad);
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{}, nullptr);
  }

  // Reverse pass from a scalar loss. Node gradients are reset first; Parameter
  // gradients accumulate.
  void backward(Var<T> loss);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient of the last backward pass w.r.t. a node; zeros if nothing reached it.
  Tensor<T> grad(Var<T> v) const;

  // For op implementations: the incoming gradient of a node during backward,
  // and the accumulator of an input.
  const Tensor<T>& upstream(std::size_t id) const { return nodes_[id].grad; }
  Tensor<T>& accumulator(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn, Parameter<T>* param) {
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, requires_grad, std::move(fn), param});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  bool track_ = true;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> square(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> softplus(Var<T> a);
template <typename T> Var<T> leaky_relu(Var<T> a, T slope = T(0.2));

// softplus(a) + floor: the positive head used for every variance output.
template <typename T> Var<T> positive_variance(Var<T> a, T floor = T(1e-6));

template <typename T> Var<T> reshape(Var<T> a, Shape shape);

// [B,C1,...] ++ [B,C2,...] -> [B,C1+C2,...]
template <typename T> Var<T> concat_channels(Var<T> a, Var<T> b);

// [B,C] -> [B,C,H,W] by repeating each code over the H x W grid.
template <typename T> Var<T> broadcast_code(Var<T> code, std::size_t height, std::size_t width);

// [B,C,...] + bias[C]
template <typename T> Var<T> add_channel_bias(Var<T> x, Var<T> bias);

// [B,in] x weight[out,in]^T + bias[out]
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);

// ---------------------------------------------------------------------------
// Convolutions

struct ConvGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);
std::size_t deconv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                 std::size_t pad);

// input [B,Cin,H,W], kernel [Cout,Cin,kh,kw] -> [B,Cout,H',W'].
template <typename T> Var<T> conv2d(Var<T> input, Var<T> kernel, const ConvGeometry& geom);

// Transposed convolution, the input-adjoint of conv2d with the same kernel:
// input [B,Cin,h,w], kernel [Cin,Cout,kh,kw] -> [B,Cout,(h-1)sh-2ph+kh,(w-1)sw-2pw+kw].
template <typename T> Var<T> deconv2d(Var<T> input, Var<T> kernel, const ConvGeometry& geom);

// Tensor-level conveniences (no graph); single example shapes [C,H,W] also accepted.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvGeometry& geom);
template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvGeometry& geom);

// ---------------------------------------------------------------------------
// Batch normalisation

enum class Mode { train, eval };

template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;

  static RunningStats fresh(std::size_t channels) {
    return {Tensor<T>({channels}, T(0)), Tensor<T>({channels}, T(1))};
  }
  bool populated() const { return !mean.empty() && mean.shape() == var.shape(); }
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// x [B,C,...]; gamma, beta [C]. Training mode normalises with batch statistics
// and updates `stats` by exponential moving average.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, RunningStats<T>& stats, Mode mode);

}  // namespace facevc
