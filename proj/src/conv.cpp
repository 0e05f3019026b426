// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// conv2d / deconv2d via im2col + GEMM, and the affine layer.

#include <Eigen/Core>

#include <memory>

#include "facevc/autodiff.hpp"

namespace facevc {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct Plan {
  std::size_t batch, c_in, h, w;        // conv input (deconv output)
  std::size_t c_out, kh, kw;
  std::size_t ho, wo;                   // conv output (deconv input)
  ConvGeometry g;

  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t out_plane() const { return ho * wo; }
  bool pointwise() const {
    return kh == 1 && kw == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 && g.pad_w == 0;
  }
};

// col[(c*kh + i)*kw + j][oh*wo + ow] = x[c][oh*sh - ph + i][ow*sw - pw + j]
template <typename T>
void im2col(const Plan& p, const T* x, T* col) {
  const long ph = static_cast<long>(p.g.pad_h), pw = static_cast<long>(p.g.pad_w);
  for (std::size_t c = 0; c < p.c_in; ++c)
    for (std::size_t i = 0; i < p.kh; ++i)
      for (std::size_t j = 0; j < p.kw; ++j) {
        T* row = col + ((c * p.kh + i) * p.kw + j) * p.out_plane();
        for (std::size_t oh = 0; oh < p.ho; ++oh) {
          const long ih = static_cast<long>(oh * p.g.stride_h + i) - ph;
          T* dst = row + oh * p.wo;
          if (ih < 0 || ih >= static_cast<long>(p.h)) {
            std::fill_n(dst, p.wo, T(0));
            continue;
          }
          const T* src = x + (c * p.h + static_cast<std::size_t>(ih)) * p.w;
          for (std::size_t ow = 0; ow < p.wo; ++ow) {
            const long iw = static_cast<long>(ow * p.g.stride_w + j) - pw;
            dst[ow] = (iw < 0 || iw >= static_cast<long>(p.w)) ? T(0) : src[iw];
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back into an image (x must be zeroed
// or hold values to accumulate into).
template <typename T>
void col2im(const Plan& p, const T* col, T* x) {
  const long ph = static_cast<long>(p.g.pad_h), pw = static_cast<long>(p.g.pad_w);
  for (std::size_t c = 0; c < p.c_in; ++c)
    for (std::size_t i = 0; i < p.kh; ++i)
      for (std::size_t j = 0; j < p.kw; ++j) {
        const T* row = col + ((c * p.kh + i) * p.kw + j) * p.out_plane();
        for (std::size_t oh = 0; oh < p.ho; ++oh) {
          const long ih = static_cast<long>(oh * p.g.stride_h + i) - ph;
          if (ih < 0 || ih >= static_cast<long>(p.h)) continue;
          T* dst = x + (c * p.h + static_cast<std::size_t>(ih)) * p.w;
          const T* src = row + oh * p.wo;
          for (std::size_t ow = 0; ow < p.wo; ++ow) {
            const long iw = static_cast<long>(ow * p.g.stride_w + j) - pw;
            if (iw >= 0 && iw < static_cast<long>(p.w)) dst[iw] += src[ow];
          }
        }
      }
}

void check_geometry(const ConvGeometry& g) {
  if (g.stride_h == 0 || g.stride_w == 0) throw DimensionError("convolution strides must be >= 1");
}

Plan conv_plan(const Shape& in, const Shape& k, const ConvGeometry& g) {
  check_geometry(g);
  if (in.size() != 4 || k.size() != 4 || k[1] != in[1]) {
    throw DimensionError("conv2d: input " + shape_string(in) + " incompatible with kernel " +
                         shape_string(k));
  }
  Plan p{in[0], in[1], in[2], in[3], k[0], k[2], k[3], 0, 0, g};
  p.ho = conv_output_extent(p.h, p.kh, g.stride_h, g.pad_h);
  p.wo = conv_output_extent(p.w, p.kw, g.stride_w, g.pad_w);
  return p;
}

// For deconv the roles flip: the deconv input is the conv output grid.
Plan deconv_plan(const Shape& in, const Shape& k, const ConvGeometry& g) {
  check_geometry(g);
  if (in.size() != 4 || k.size() != 4 || k[0] != in[1]) {
    throw DimensionError("deconv2d: input " + shape_string(in) + " incompatible with kernel " +
                         shape_string(k));
  }
  Plan p{in[0], k[1], 0, 0, k[0], k[2], k[3], in[2], in[3], g};
  p.h = deconv_output_extent(p.ho, p.kh, g.stride_h, g.pad_h);
  p.w = deconv_output_extent(p.wo, p.kw, g.stride_w, g.pad_w);
  // The forward conv over the produced grid must land back on (ho, wo).
  if (conv_output_extent(p.h, p.kh, g.stride_h, g.pad_h) != p.ho ||
      conv_output_extent(p.w, p.kw, g.stride_w, g.pad_w) != p.wo) {
    throw DimensionError("deconv2d: geometry does not invert for input " + shape_string(in));
  }
  return p;
}

template <typename T>
Tensor<T> as_batched(const Tensor<T>& t) {
  if (t.rank() == 3) return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)});
  return t;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw DimensionError("convolution stride must be >= 1");
  if (kernel == 0 || kernel > in + 2 * pad) {
    throw DimensionError("kernel extent " + std::to_string(kernel) + " exceeds padded input " +
                         std::to_string(in) + "+2*" + std::to_string(pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t deconv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                 std::size_t pad) {
  if (stride == 0) throw DimensionError("convolution stride must be >= 1");
  const long out = static_cast<long>((in - 1) * stride + kernel) - 2 * static_cast<long>(pad);
  if (in == 0 || out <= 0) {
    throw DimensionError("transposed convolution of extent " + std::to_string(in) + " with kernel " +
                         std::to_string(kernel) + " and padding " + std::to_string(pad) +
                         " is empty");
  }
  return static_cast<std::size_t>(out);
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, const ConvGeometry& geom) {
  const Plan p = conv_plan(input.shape(), kernel.shape(), geom);
  const std::size_t patch = p.patch(), plane = p.out_plane();
  Tensor<T> out({p.batch, p.c_out, p.ho, p.wo});
  const T* x = input.value().data();
  ConstMapMat<T> km(kernel.value().data(), p.c_out, patch);

  // Columns are kept for the kernel gradient.
  std::shared_ptr<std::vector<T>> cols;
  if (!p.pointwise()) {
    cols = std::make_shared<std::vector<T>>(p.batch * patch * plane);
  }
  for (std::size_t n = 0; n < p.batch; ++n) {
    const T* xn = x + n * p.c_in * p.h * p.w;
    const T* colp = xn;
    if (cols) {
      im2col(p, xn, cols->data() + n * patch * plane);
      colp = cols->data() + n * patch * plane;
    }
    MapMat<T>(out.data() + n * p.c_out * plane, p.c_out, plane).noalias() =
        km * ConstMapMat<T>(colp, patch, plane);
  }

  const std::size_t ix = input.id(), ik = kernel.id();
  return input.graph().record(std::move(out), {input, kernel},
                              [p, cols, ix, ik](Graph<T>& g, std::size_t self) {
    const std::size_t patch = p.patch(), plane = p.out_plane();
    const Tensor<T>& gy = g.upstream(self);
    ConstMapMat<T> km(g.value(ik).data(), p.c_out, patch);
    if (g.requires_grad(ik)) {
      MapMat<T> gk(g.accumulator(ik).data(), p.c_out, patch);
      for (std::size_t n = 0; n < p.batch; ++n) {
        const T* colp = cols ? cols->data() + n * patch * plane
                             : g.value(ix).data() + n * p.c_in * p.h * p.w;
        gk.noalias() += ConstMapMat<T>(gy.data() + n * p.c_out * plane, p.c_out, plane) *
                        ConstMapMat<T>(colp, patch, plane).transpose();
      }
    }
    if (g.requires_grad(ix)) {
      T* gx = g.accumulator(ix).data();
      RowMat<T> dcol(patch, plane);
      for (std::size_t n = 0; n < p.batch; ++n) {
        ConstMapMat<T> gyn(gy.data() + n * p.c_out * plane, p.c_out, plane);
        T* gxn = gx + n * p.c_in * p.h * p.w;
        if (p.pointwise()) {
          MapMat<T>(gxn, patch, plane).noalias() += km.transpose() * gyn;
        } else {
          dcol.noalias() = km.transpose() * gyn;
          col2im(p, dcol.data(), gxn);
        }
      }
    }
  });
}

template <typename T>
Var<T> deconv2d(Var<T> input, Var<T> kernel, const ConvGeometry& geom) {
  const Plan p = deconv_plan(input.shape(), kernel.shape(), geom);
  const std::size_t patch = p.patch(), plane = p.out_plane();
  // The deconv kernel [Cin_d, Cout_d, kh, kw] is the conv kernel [c_out, c_in, kh, kw].
  ConstMapMat<T> km(kernel.value().data(), p.c_out, patch);
  Tensor<T> out({p.batch, p.c_in, p.h, p.w});
  const T* x = input.value().data();
  RowMat<T> col(patch, plane);
  for (std::size_t n = 0; n < p.batch; ++n) {
    ConstMapMat<T> xn(x + n * p.c_out * plane, p.c_out, plane);
    T* on = out.data() + n * p.c_in * p.h * p.w;
    if (p.pointwise()) {
      MapMat<T>(on, patch, plane).noalias() = km.transpose() * xn;
    } else {
      col.noalias() = km.transpose() * xn;
      col2im(p, col.data(), on);
    }
  }

  const std::size_t ix = input.id(), ik = kernel.id();
  return input.graph().record(std::move(out), {input, kernel},
                              [p, ix, ik](Graph<T>& g, std::size_t self) {
    const std::size_t patch = p.patch(), plane = p.out_plane();
    const Tensor<T>& gy = g.upstream(self);
    const T* x = g.value(ix).data();
    ConstMapMat<T> km(g.value(ik).data(), p.c_out, patch);
    RowMat<T> dcol(patch, plane);
    const bool need_k = g.requires_grad(ik), need_x = g.requires_grad(ix);
    for (std::size_t n = 0; n < p.batch; ++n) {
      const T* gyn = gy.data() + n * p.c_in * p.h * p.w;
      const T* dcolp = gyn;
      if (!p.pointwise()) {
        im2col(p, gyn, dcol.data());
        dcolp = dcol.data();
      }
      ConstMapMat<T> dc(dcolp, patch, plane);
      if (need_k) {
        MapMat<T>(g.accumulator(ik).data(), p.c_out, patch).noalias() +=
            ConstMapMat<T>(x + n * p.c_out * plane, p.c_out, plane) * dc.transpose();
      }
      if (need_x) {
        MapMat<T>(g.accumulator(ix).data() + n * p.c_out * plane, p.c_out, plane).noalias() +=
            km * dc;
      }
    }
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvGeometry& geom) {
  Graph<T> g;
  Tensor<T> out = conv2d(g.constant(as_batched(input)), g.constant(kernel), geom).value();
  if (input.rank() == 3) return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
  return out;
}

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvGeometry& geom) {
  Graph<T> g;
  Tensor<T> out = deconv2d(g.constant(as_batched(input)), g.constant(kernel), geom).value();
  if (input.rank() == 3) return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
  return out;
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() != 2 || sw.size() != 2 || sw[1] != sx[1] || bias.shape() != Shape{sw[0]}) {
    throw DimensionError("linear: input " + shape_string(sx) + ", weight " + shape_string(sw) +
                         ", bias " + shape_string(bias.shape()));
  }
  const std::size_t batch = sx[0], in = sx[1], out_dim = sw[0];
  Tensor<T> y({batch, out_dim});
  MapMat<T> ym(y.data(), batch, out_dim);
  ConstMapMat<T> xm(x.value().data(), batch, in);
  ConstMapMat<T> wm(weight.value().data(), out_dim, in);
  ym.noalias() = xm * wm.transpose();
  const T* b = bias.value().data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out_dim; ++o) y.at(n, o) += b[o];

  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.graph().record(std::move(y), {x, weight, bias},
                          [ix, iw, ib, batch, in, out_dim](Graph<T>& g, std::size_t self) {
    ConstMapMat<T> gy(g.upstream(self).data(), batch, out_dim);
    if (g.requires_grad(ix)) {
      MapMat<T>(g.accumulator(ix).data(), batch, in).noalias() +=
          gy * ConstMapMat<T>(g.value(iw).data(), out_dim, in);
    }
    if (g.requires_grad(iw)) {
      MapMat<T>(g.accumulator(iw).data(), out_dim, in).noalias() +=
          gy.transpose() * ConstMapMat<T>(g.value(ix).data(), batch, in);
    }
    if (g.requires_grad(ib)) {
      T* gb = g.accumulator(ib).data();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += gy(n, o);
    }
  });
}

#define FACEVC_INSTANTIATE_CONV(T)                                                    \
  template Var<T> conv2d(Var<T>, Var<T>, const ConvGeometry&);                        \
  template Var<T> deconv2d(Var<T>, Var<T>, const ConvGeometry&);                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&); \
  template Tensor<T> deconv2d(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&); \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);

FACEVC_INSTANTIATE_CONV(float)
FACEVC_INSTANTIATE_CONV(double)

}  // namespace facevc
