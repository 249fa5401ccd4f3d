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

// Preservation losses measured against a frozen host snapshot:
//   weight loss      sum of squared parameter drift,
//   feature loss     sum of squared penultimate-feature drift per sample,
//   probability loss KL divergence of host softmax vs current softmax.
// Each has a closed-form gradient seed used during embedding.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "deepfid/dataset.hpp"
#include "deepfid/net.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

// Runs the backbone over a large image tensor in fixed-size chunks.
// Reductions downstream are per-sample, so chunking cannot change results.
inline Tensor batched_features(const Network& net, const Tensor& images,
                               std::size_t eval_batch = 256) {
  if (eval_batch == 0) throw std::invalid_argument("eval_batch must be > 0");
  std::size_t n = images.dim(0);
  std::size_t per = images.sample_stride();
  Tensor out = Tensor::zeros({n, net.feature_dim()});
  std::vector<std::size_t> chunk_shape = images.shape;
  for (std::size_t off = 0; off < n; off += eval_batch) {
    std::size_t count = std::min(eval_batch, n - off);
    chunk_shape[0] = count;
    Tensor chunk(chunk_shape,
                 std::vector<double>(images.data.begin() + off * per,
                                     images.data.begin() + (off + count) * per));
    Tensor f = forward_features(net, chunk);
    std::copy(f.data.begin(), f.data.end(),
              out.data.begin() + off * net.feature_dim());
  }
  return out;
}

// Frozen view of the host model used by every preservation measurement: the
// parameters, the penultimate features of each training sample, and the
// host's softmax row for each training sample.
struct HostSnapshot {
  Network net;
  Tensor features;  // [N, d]
  Tensor probs;     // [N, K]
};

inline HostSnapshot make_snapshot(const Network& host, const LearningSet& train,
                                  std::size_t eval_batch = 256) {
  train.validate();
  HostSnapshot snap;
  snap.net = host;
  snap.features = batched_features(host, train.images, eval_batch);
  snap.probs = softmax(head_logits(host, snap.features));
  return snap;
}

inline Tensor gather_rows(const Tensor& matrix, const std::vector<std::size_t>& rows) {
  if (matrix.rank() != 2) throw std::invalid_argument("gather_rows expects [N,d]");
  std::size_t d = matrix.dim(1);
  Tensor out = Tensor::zeros({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= matrix.dim(0))
      throw std::out_of_range("gather_rows: row out of range");
    std::copy_n(matrix.data.begin() + rows[i] * d, d, out.data.begin() + i * d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total weight loss: ||W - W_host||^2 over all parameters, accumulated per
// tensor in canonical parameter order, flat row-major within each tensor.
// Architectures must match exactly.

inline double loss_twl(const Network& current, const Network& host) {
  if (backbone_descriptor(current.backbone) != backbone_descriptor(host.backbone) ||
      current.input_shape != host.input_shape ||
      !current.head.same_shape(host.head))
    throw std::invalid_argument("loss_twl: architectures differ");
  std::vector<ParamRef> cur = params(current);
  std::vector<ParamRef> ref = params(host);
  double total = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const Tensor& a = *cur[i].tensor;
    const Tensor& b = *ref[i].tensor;
    double part = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      double diff = a.data[j] - b.data[j];
      part += diff * diff;
    }
    total += part;
  }
  return total;
}

// Adds d(alpha * twl)/d(param) = 2*alpha*(p - p_host) for trainable tensors.
inline void add_twl_gradient(GradientSet& gs, const Network& current,
                             const Network& host, double alpha,
                             const FreezeMask& mask) {
  std::vector<ParamRef> cur = params(current);
  std::vector<ParamRef> ref = params(host);
  for (std::size_t i = 0; i < cur.size(); ++i) {
    if (!mask.trainable[i]) continue;
    Tensor& g = gs.grads[i];
    const Tensor& a = *cur[i].tensor;
    const Tensor& b = *ref[i].tensor;
    for (std::size_t j = 0; j < g.size(); ++j)
      g.data[j] += 2.0 * alpha * (a.data[j] - b.data[j]);
  }
}

// Penultimate feature loss: sum over rows of squared feature drift.
inline double loss_pfl(const Tensor& features, const Tensor& host_features) {
  if (!features.same_shape(host_features))
    throw std::invalid_argument("loss_pfl: feature shape mismatch");
  std::size_t rows = features.dim(0), d = features.dim(1);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double part = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double diff = features.data[r * d + j] - host_features.data[r * d + j];
      part += diff * diff;
    }
    total += part;
  }
  return total;
}

// Seed for dL/d(features) of beta * pfl on rows [row_begin, row_end) of a
// batch whose host features are `host_rows` (aligned to those rows).
inline Tensor pfl_feature_grad(const Tensor& features, const Tensor& host_rows,
                               std::size_t row_begin, std::size_t row_end,
                               double beta) {
  std::size_t d = features.dim(1);
  if (host_rows.dim(0) != row_end - row_begin || host_rows.dim(1) != d)
    throw std::invalid_argument("pfl_feature_grad: host row block mismatch");
  Tensor g = Tensor::zeros(features.shape);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* h = host_rows.data.data() + (r - row_begin) * d;
    for (std::size_t j = 0; j < d; ++j)
      g.data[r * d + j] =
          2.0 * beta * (features.data[r * d + j] - h[j]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// KL divergence of two discrete distributions, sum_k p_k log(p_k / q_k),
// with 0 * log 0 = 0 and q floored at 1e-12. Both inputs must be valid
// distributions: nonnegative entries summing to 1 within 1e-9.

inline double kld(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kld: dimension mismatch");
  if (p.empty()) throw std::invalid_argument("kld: empty distributions");
  double ps = 0.0, qs = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0 || q[k] < 0.0)
      throw std::invalid_argument("kld: negative probability");
    ps += p[k];
    qs += q[k];
  }
  if (std::abs(ps - 1.0) > 1e-9 || std::abs(qs - 1.0) > 1e-9)
    throw std::invalid_argument("kld: inputs do not sum to 1");
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    double qk = q[k] < 1e-12 ? 1e-12 : q[k];
    sum += p[k] * std::log(p[k] / qk);
  }
  return sum;
}

// Softmax probability loss over aligned row blocks: sum of
// kld(host_row, current_row). The host distribution is the first argument
// of every divergence.
inline double loss_spl(const Tensor& host_probs, const Tensor& current_probs) {
  if (!host_probs.same_shape(current_probs))
    throw std::invalid_argument("loss_spl: shape mismatch");
  std::size_t rows = host_probs.dim(0), K = host_probs.dim(1);
  double total = 0.0;
  std::vector<double> p(K), q(K);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(host_probs.data.begin() + r * K, K, p.begin());
    std::copy_n(current_probs.data.begin() + r * K, K, q.begin());
    total += kld(p, q);
  }
  return total;
}

// Seed for dL/d(logits) of gamma * spl on rows [row_begin, row_end):
// gamma * (softmax(logits) - host_probs) per row.
inline Tensor spl_logit_grad(const Tensor& logits, const Tensor& host_rows,
                             std::size_t row_begin, std::size_t row_end,
                             double gamma) {
  std::size_t K = logits.dim(1);
  if (host_rows.dim(0) != row_end - row_begin || host_rows.dim(1) != K)
    throw std::invalid_argument("spl_logit_grad: host row block mismatch");
  Tensor probs = softmax(logits);
  Tensor g = Tensor::zeros(logits.shape);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* h = host_rows.data.data() + (r - row_begin) * K;
    for (std::size_t k = 0; k < K; ++k)
      g.data[r * K + k] = gamma * (probs.data[r * K + k] - h[k]);
  }
  return g;
}

}  // namespace deepfid
