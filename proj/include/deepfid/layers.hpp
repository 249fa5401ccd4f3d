/*
 * Copyright 2026 DeepFid Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Layer types and their forward/backward kernels. Convolutions run as
// im2col + GEMM; everything heavy is an Eigen matrix product. Shapes are
// per-sample {H,W,C} or {N}; batches prepend the sample count (NHWC).

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "deepfid/tensor.hpp"

namespace deepfid {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                               Eigen::Dynamic, Eigen::RowMajor>>;

// Stride-1 2-D convolution. Weight layout [KH, KW, CIN, COUT] so that the
// flattened weight matrix lines up with im2col column order.
struct Conv2d {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, pad = 0;
  Tensor weight;  // [k, k, in_ch, out_ch]
  Tensor bias;    // [out_ch]

  Conv2d() = default;
  Conv2d(std::size_t cin, std::size_t cout, std::size_t k, std::size_t p)
      : in_ch(cin), out_ch(cout), kernel(k), pad(p),
        weight(Tensor::zeros({k, k, cin, cout})),
        bias(Tensor::zeros({cout})) {
    if (k == 0 || cin == 0 || cout == 0)
      throw std::invalid_argument("conv: zero-sized dimension");
    if (p >= k) throw std::invalid_argument("conv: pad must be < kernel");
  }
};

struct ReLU {};

// Non-overlapping max pooling, window == stride. Trailing rows/cols that do
// not fill a window are dropped.
struct MaxPool2d {
  std::size_t k = 2;
};

struct GlobalAvgPool {};

struct Flatten {};

struct Dense {
  std::size_t in = 0, out = 0;
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Dense() = default;
  Dense(std::size_t n_in, std::size_t n_out)
      : in(n_in), out(n_out), weight(Tensor::zeros({n_in, n_out})),
        bias(Tensor::zeros({n_out})) {
    if (n_in == 0 || n_out == 0)
      throw std::invalid_argument("dense: zero-sized dimension");
  }
};

using Layer = std::variant<Conv2d, ReLU, MaxPool2d, GlobalAvgPool, Flatten, Dense>;

// Per-sample output shape of a layer given its per-sample input shape.
inline std::vector<std::size_t> layer_out_shape(
    const Layer& layer, const std::vector<std::size_t>& in) {
  struct V {
    const std::vector<std::size_t>& in;
    std::vector<std::size_t> operator()(const Conv2d& l) const {
      if (in.size() != 3) throw std::invalid_argument("conv expects HWC input");
      if (in[2] != l.in_ch)
        throw std::invalid_argument("conv channel mismatch");
      std::size_t span = l.kernel;  // stride 1
      if (in[0] + 2 * l.pad < span || in[1] + 2 * l.pad < span)
        throw std::invalid_argument("conv input smaller than kernel");
      return {in[0] + 2 * l.pad - span + 1, in[1] + 2 * l.pad - span + 1,
              l.out_ch};
    }
    std::vector<std::size_t> operator()(const ReLU&) const { return in; }
    std::vector<std::size_t> operator()(const MaxPool2d& l) const {
      if (in.size() != 3) throw std::invalid_argument("pool expects HWC input");
      if (in[0] < l.k || in[1] < l.k)
        throw std::invalid_argument("pool window larger than input");
      return {in[0] / l.k, in[1] / l.k, in[2]};
    }
    std::vector<std::size_t> operator()(const GlobalAvgPool&) const {
      if (in.size() != 3)
        throw std::invalid_argument("global pool expects HWC input");
      return {in[2]};
    }
    std::vector<std::size_t> operator()(const Flatten&) const {
      std::size_t n = 1;
      for (std::size_t d : in) n *= d;
      return {n};
    }
    std::vector<std::size_t> operator()(const Dense& l) const {
      if (in.size() != 1 || in[0] != l.in)
        throw std::invalid_argument("dense input size mismatch");
      return {l.out};
    }
  };
  return std::visit(V{in}, layer);
}

// Cached intermediates for one layer of one forward pass.
struct LayerCache {
  std::vector<std::size_t> in_shape;   // per-sample
  std::vector<std::size_t> out_shape;  // per-sample
  Tensor input;                        // conv / relu / dense / pool
  Tensor col;                          // conv: im2col matrix, reused backward
  std::vector<std::int64_t> argmax;    // maxpool: flat input index per output
};

namespace detail {

inline std::size_t prod(const std::vector<std::size_t>& v) {
  std::size_t n = 1;
  for (std::size_t d : v) n *= d;
  return n;
}

// Builds the im2col matrix [B*OH*OW, KH*KW*CIN] for stride-1 convolution.
inline void im2col(const Tensor& in, std::size_t B, std::size_t H,
                   std::size_t W, std::size_t C, std::size_t k, std::size_t pad,
                   Tensor& col) {
  std::size_t OH = H + 2 * pad - k + 1;
  std::size_t OW = W + 2 * pad - k + 1;
  std::size_t row_len = k * k * C;
  col = Tensor::zeros({B * OH * OW, row_len});
  const double* src = in.data.data();
  double* dst = col.data.data();
  for (std::size_t b = 0; b < B; ++b) {
    const double* img = src + b * H * W * C;
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        double* row = dst + ((b * OH + oh) * OW + ow) * row_len;
        for (std::size_t kh = 0; kh < k; ++kh) {
          std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) -
                              static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kw = 0; kw < k; ++kw) {
            std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
            const double* px = img + (ih * static_cast<std::ptrdiff_t>(W) + iw) * C;
            double* cell = row + (kh * k + kw) * C;
            for (std::size_t c = 0; c < C; ++c) cell[c] = px[c];
          }
        }
      }
    }
  }
}

// Scatters an im2col-shaped gradient back onto the input image (additive).
inline void col2im(const Tensor& dcol, std::size_t B, std::size_t H,
                   std::size_t W, std::size_t C, std::size_t k, std::size_t pad,
                   Tensor& din) {
  std::size_t OH = H + 2 * pad - k + 1;
  std::size_t OW = W + 2 * pad - k + 1;
  std::size_t row_len = k * k * C;
  din = Tensor::zeros({B, H, W, C});
  const double* src = dcol.data.data();
  double* dst = din.data.data();
  for (std::size_t b = 0; b < B; ++b) {
    double* img = dst + b * H * W * C;
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        const double* row = src + ((b * OH + oh) * OW + ow) * row_len;
        for (std::size_t kh = 0; kh < k; ++kh) {
          std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) -
                              static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kw = 0; kw < k; ++kw) {
            std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
            double* px = img + (ih * static_cast<std::ptrdiff_t>(W) + iw) * C;
            const double* cell = row + (kh * k + kw) * C;
            for (std::size_t c = 0; c < C; ++c) px[c] += cell[c];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Forward pass of one layer on a batch. When `cache` is non-null the call
// stores what the matching backward pass needs.
inline Tensor layer_forward(const Layer& layer, const Tensor& in,
                            LayerCache* cache) {
  std::size_t B = in.dim(0);
  std::vector<std::size_t> in_sample(in.shape.begin() + 1, in.shape.end());
  std::vector<std::size_t> out_sample = layer_out_shape(
      layer, in_sample);
  if (cache) {
    cache->in_shape = in_sample;
    cache->out_shape = out_sample;
  }

  if (const auto* l = std::get_if<Conv2d>(&layer)) {
    std::size_t H = in_sample[0], W = in_sample[1], C = in_sample[2];
    std::size_t OH = out_sample[0], OW = out_sample[1];
    Tensor col;
    Tensor& colref = cache ? cache->col : col;
    detail::im2col(in, B, H, W, C, l->kernel, l->pad, colref);
    Tensor out = Tensor::zeros({B, OH, OW, l->out_ch});
    CMatMap cm(colref.data.data(), static_cast<Eigen::Index>(B * OH * OW),
               static_cast<Eigen::Index>(l->kernel * l->kernel * C));
    CMatMap wm(l->weight.data.data(),
               static_cast<Eigen::Index>(l->kernel * l->kernel * C),
               static_cast<Eigen::Index>(l->out_ch));
    MatMap om(out.data.data(), cm.rows(), wm.cols());
    om.noalias() = cm * wm;
    Eigen::Map<const Eigen::RowVectorXd> bm(l->bias.data.data(),
                                            static_cast<Eigen::Index>(l->out_ch));
    om.rowwise() += bm;
    if (cache) cache->input = in;
    return out;
  }
  if (std::get_if<ReLU>(&layer)) {
    Tensor out = in;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    if (cache) cache->input = in;
    return out;
  }
  if (const auto* l = std::get_if<MaxPool2d>(&layer)) {
    std::size_t H = in_sample[0], W = in_sample[1], C = in_sample[2];
    std::size_t OH = out_sample[0], OW = out_sample[1];
    Tensor out = Tensor::zeros({B, OH, OW, C});
    std::vector<std::int64_t> arg(cache ? out.size() : 0);
    const double* src = in.data.data();
    double* dst = out.data.data();
    for (std::size_t b = 0; b < B; ++b) {
      const double* img = src + b * H * W * C;
      for (std::size_t oh = 0; oh < OH; ++oh) {
        for (std::size_t ow = 0; ow < OW; ++ow) {
          for (std::size_t c = 0; c < C; ++c) {
            double best = -1e300;
            std::size_t best_idx = 0;
            for (std::size_t kh = 0; kh < l->k; ++kh) {
              for (std::size_t kw = 0; kw < l->k; ++kw) {
                std::size_t ih = oh * l->k + kh, iw = ow * l->k + kw;
                std::size_t idx = (ih * W + iw) * C + c;
                if (img[idx] > best) {
                  best = img[idx];
                  best_idx = idx;
                }
              }
            }
            std::size_t o = ((b * OH + oh) * OW + ow) * C + c;
            dst[o] = best;
            if (cache) arg[o] = static_cast<std::int64_t>(b * H * W * C + best_idx);
          }
        }
      }
    }
    if (cache) {
      cache->argmax = std::move(arg);
    }
    return out;
  }
  if (std::get_if<GlobalAvgPool>(&layer)) {
    std::size_t H = in_sample[0], W = in_sample[1], C = in_sample[2];
    Tensor out = Tensor::zeros({B, C});
    double inv = 1.0 / static_cast<double>(H * W);
    const double* src = in.data.data();
    for (std::size_t b = 0; b < B; ++b) {
      double* row = out.data.data() + b * C;
      const double* img = src + b * H * W * C;
      for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t c = 0; c < C; ++c) row[c] += img[p * C + c];
      for (std::size_t c = 0; c < C; ++c) row[c] *= inv;
    }
    return out;
  }
  if (std::get_if<Flatten>(&layer)) {
    Tensor out = in;
    out.shape = {B, out_sample[0]};
    return out;
  }
  if (const auto* l = std::get_if<Dense>(&layer)) {
    Tensor out = Tensor::zeros({B, l->out});
    CMatMap xm(in.data.data(), static_cast<Eigen::Index>(B),
               static_cast<Eigen::Index>(l->in));
    CMatMap wm(l->weight.data.data(), static_cast<Eigen::Index>(l->in),
               static_cast<Eigen::Index>(l->out));
    MatMap om(out.data.data(), xm.rows(), wm.cols());
    om.noalias() = xm * wm;
    Eigen::Map<const Eigen::RowVectorXd> bm(l->bias.data.data(),
                                            static_cast<Eigen::Index>(l->out));
    om.rowwise() += bm;
    if (cache) cache->input = in;
    return out;
  }
  throw std::logic_error("unhandled layer type");
}

// Backward pass of one layer. `gout` is dL/d(output); returns dL/d(input).
// Parameter gradients are accumulated into `gw`/`gb` when non-null (null
// means the parameters are frozen and their gradients are not needed).
inline Tensor layer_backward(const Layer& layer, const LayerCache& cache,
                             const Tensor& gout, Tensor* gw, Tensor* gb,
                             bool need_input_grad) {
  std::size_t B = gout.dim(0);

  if (const auto* l = std::get_if<Conv2d>(&layer)) {
    std::size_t H = cache.in_shape[0], W = cache.in_shape[1],
                C = cache.in_shape[2];
    std::size_t OH = cache.out_shape[0], OW = cache.out_shape[1];
    std::size_t rows = B * OH * OW;
    std::size_t row_len = l->kernel * l->kernel * C;
    CMatMap gm(gout.data.data(), static_cast<Eigen::Index>(rows),
               static_cast<Eigen::Index>(l->out_ch));
    if (gw) {
      CMatMap cm(cache.col.data.data(), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(row_len));
      MatMap gwm(gw->data.data(), static_cast<Eigen::Index>(row_len),
                 static_cast<Eigen::Index>(l->out_ch));
      gwm.noalias() += cm.transpose() * gm;
    }
    if (gb) {
      Eigen::Map<Eigen::RowVectorXd> gbm(gb->data.data(),
                                         static_cast<Eigen::Index>(l->out_ch));
      gbm += gm.colwise().sum();
    }
    if (!need_input_grad) return Tensor();
    Tensor dcol = Tensor::zeros({rows, row_len});
    CMatMap wm(l->weight.data.data(), static_cast<Eigen::Index>(row_len),
               static_cast<Eigen::Index>(l->out_ch));
    MatMap dcm(dcol.data.data(), static_cast<Eigen::Index>(rows),
               static_cast<Eigen::Index>(row_len));
    dcm.noalias() = gm * wm.transpose();
    Tensor din;
    detail::col2im(dcol, B, H, W, C, l->kernel, l->pad, din);
    return din;
  }
  if (std::get_if<ReLU>(&layer)) {
    if (!need_input_grad) return Tensor();
    Tensor din = gout;
    for (std::size_t i = 0; i < din.size(); ++i)
      if (cache.input.data[i] <= 0.0) din.data[i] = 0.0;
    return din;
  }
  if (std::get_if<MaxPool2d>(&layer)) {
    if (!need_input_grad) return Tensor();
    std::vector<std::size_t> shape = {B};
    shape.insert(shape.end(), cache.in_shape.begin(), cache.in_shape.end());
    Tensor din = Tensor::zeros(shape);
    for (std::size_t i = 0; i < gout.size(); ++i)
      din.data[static_cast<std::size_t>(cache.argmax[i])] += gout.data[i];
    return din;
  }
  if (std::get_if<GlobalAvgPool>(&layer)) {
    if (!need_input_grad) return Tensor();
    std::size_t H = cache.in_shape[0], W = cache.in_shape[1],
                C = cache.in_shape[2];
    Tensor din = Tensor::zeros({B, H, W, C});
    double inv = 1.0 / static_cast<double>(H * W);
    for (std::size_t b = 0; b < B; ++b) {
      const double* g = gout.data.data() + b * C;
      double* img = din.data.data() + b * H * W * C;
      for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t c = 0; c < C; ++c) img[p * C + c] = g[c] * inv;
    }
    return din;
  }
  if (std::get_if<Flatten>(&layer)) {
    if (!need_input_grad) return Tensor();
    Tensor din = gout;
    std::vector<std::size_t> shape = {B};
    shape.insert(shape.end(), cache.in_shape.begin(), cache.in_shape.end());
    din.shape = shape;
    return din;
  }
  if (const auto* l = std::get_if<Dense>(&layer)) {
    CMatMap gm(gout.data.data(), static_cast<Eigen::Index>(B),
               static_cast<Eigen::Index>(l->out));
    if (gw) {
      CMatMap xm(cache.input.data.data(), static_cast<Eigen::Index>(B),
                 static_cast<Eigen::Index>(l->in));
      MatMap gwm(gw->data.data(), static_cast<Eigen::Index>(l->in),
                 static_cast<Eigen::Index>(l->out));
      gwm.noalias() += xm.transpose() * gm;
    }
    if (gb) {
      Eigen::Map<Eigen::RowVectorXd> gbm(gb->data.data(),
                                         static_cast<Eigen::Index>(l->out));
      gbm += gm.colwise().sum();
    }
    if (!need_input_grad) return Tensor();
    Tensor din = Tensor::zeros({B, l->in});
    CMatMap wm(l->weight.data.data(), static_cast<Eigen::Index>(l->in),
               static_cast<Eigen::Index>(l->out));
    MatMap dm(din.data.data(), static_cast<Eigen::Index>(B),
              static_cast<Eigen::Index>(l->in));
    dm.noalias() = gm * wm.transpose();
    return din;
  }
  throw std::logic_error("unhandled layer type");
}

}  // namespace deepfid
