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

// Network = convolutional backbone + linear classification head (no bias).
// The head weight w[d][k] holds prototype vector k in column k; the output
// of the last backbone layer is the feature vector z, logits = z . w.

#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepfid/layers.hpp"
#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

struct Network {
  std::vector<std::size_t> input_shape;  // {H, W, C}
  std::vector<Layer> backbone;
  Tensor head;  // [d, K]
  // Bumped whenever parameters change; traces remember the value they were
  // created under so a stale trace is detected instead of silently reused.
  std::uint64_t version = 0;

  std::size_t feature_dim() const { return head.dim(0); }
  std::size_t classes() const { return head.dim(1); }
  void note_param_change() { ++version; }
};

// ---------------------------------------------------------------------------
// Architecture descriptors. A backbone is a comma-separated list:
//   conv:<out_ch>:<kernel>:<pad> | relu | maxpool:<k> | gap | flatten |
//   dense:<out>
// The descriptor plus input shape and class count rebuilds the graph exactly.

inline std::vector<std::size_t> backbone_out_shape(
    const std::vector<Layer>& layers, std::vector<std::size_t> shape) {
  for (const Layer& l : layers) shape = layer_out_shape(l, shape);
  return shape;
}

inline std::string backbone_descriptor(const std::vector<Layer>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ",";
    struct V {
      std::string operator()(const Conv2d& l) const {
        return "conv:" + std::to_string(l.out_ch) + ":" +
               std::to_string(l.kernel) + ":" + std::to_string(l.pad);
      }
      std::string operator()(const ReLU&) const { return "relu"; }
      std::string operator()(const MaxPool2d& l) const {
        return "maxpool:" + std::to_string(l.k);
      }
      std::string operator()(const GlobalAvgPool&) const { return "gap"; }
      std::string operator()(const Flatten&) const { return "flatten"; }
      std::string operator()(const Dense& l) const {
        return "dense:" + std::to_string(l.out);
      }
    };
    out += std::visit(V{}, layers[i]);
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_str(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline std::size_t parse_size(const std::string& s, const std::string& what) {
  if (s.empty()) throw std::invalid_argument("empty " + what);
  // stoull accepts a leading '-' and wraps; a negative count is never valid here.
  if (s.find('-') != std::string::npos)
    throw std::invalid_argument("bad " + what + ": '" + s + "'");
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad " + what + ": '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument("bad " + what + ": '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

// Parses a backbone descriptor; channel counts are resolved against
// `input_shape` as layers are appended, so inconsistent descriptors throw.
inline std::vector<Layer> parse_backbone(const std::string& desc,
                                         std::vector<std::size_t> input_shape) {
  std::vector<Layer> layers;
  std::vector<std::size_t> shape = std::move(input_shape);
  for (const std::string& item : detail::split_str(desc, ',')) {
    std::vector<std::string> f = detail::split_str(item, ':');
    const std::string& kind = f[0];
    if (kind == "conv") {
      if (f.size() != 4)
        throw std::invalid_argument("conv needs out:kernel:pad, got '" + item + "'");
      if (shape.size() != 3)
        throw std::invalid_argument("conv after non-spatial layer");
      layers.emplace_back(Conv2d(shape[2], detail::parse_size(f[1], "conv out"),
                                 detail::parse_size(f[2], "conv kernel"),
                                 detail::parse_size(f[3], "conv pad")));
    } else if (kind == "relu") {
      if (f.size() != 1) throw std::invalid_argument("relu takes no fields");
      layers.emplace_back(ReLU{});
    } else if (kind == "maxpool") {
      if (f.size() != 2) throw std::invalid_argument("maxpool needs window");
      layers.emplace_back(MaxPool2d{detail::parse_size(f[1], "pool window")});
    } else if (kind == "gap") {
      if (f.size() != 1) throw std::invalid_argument("gap takes no fields");
      layers.emplace_back(GlobalAvgPool{});
    } else if (kind == "flatten") {
      if (f.size() != 1) throw std::invalid_argument("flatten takes no fields");
      layers.emplace_back(Flatten{});
    } else if (kind == "dense") {
      if (f.size() != 2) throw std::invalid_argument("dense needs out size");
      if (shape.size() != 1)
        throw std::invalid_argument("dense needs a flat input; add flatten or gap");
      layers.emplace_back(Dense(shape[0], detail::parse_size(f[1], "dense out")));
    } else {
      throw std::invalid_argument("unknown layer '" + item + "'");
    }
    shape = layer_out_shape(layers.back(), shape);
  }
  if (shape.size() != 1)
    throw std::invalid_argument("backbone must end in a flat feature vector");
  return layers;
}

// Builds a network with zero-valued parameters. Call init_network afterwards
// for random initialization.
inline Network make_network(std::vector<std::size_t> input_shape,
                            const std::string& backbone_desc,
                            std::size_t num_classes) {
  if (input_shape.size() != 3)
    throw std::invalid_argument("input shape must be {H, W, C}");
  if (num_classes < 2)
    throw std::invalid_argument("need at least two classes");
  Network net;
  net.input_shape = std::move(input_shape);
  net.backbone = parse_backbone(backbone_desc, net.input_shape);
  std::size_t d = backbone_out_shape(net.backbone, net.input_shape)[0];
  net.head = Tensor::zeros({d, num_classes});
  return net;
}

// ---------------------------------------------------------------------------
// Parameter registry. Canonical order: backbone layers front to back, weight
// before bias, head weight last. Gradients, Adam moments and freeze masks all
// align with this order.

struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool is_bias;
  bool is_head;
};

inline std::vector<ParamRef> params(Network& net) {
  std::vector<ParamRef> out;
  std::size_t conv_idx = 0, dense_idx = 0;
  for (Layer& l : net.backbone) {
    if (auto* c = std::get_if<Conv2d>(&l)) {
      std::string base = "conv" + std::to_string(++conv_idx);
      out.push_back({base + ".weight", &c->weight, false, false});
      out.push_back({base + ".bias", &c->bias, true, false});
    } else if (auto* d = std::get_if<Dense>(&l)) {
      std::string base = "dense" + std::to_string(++dense_idx);
      out.push_back({base + ".weight", &d->weight, false, false});
      out.push_back({base + ".bias", &d->bias, true, false});
    }
  }
  out.push_back({"head.weight", &net.head, false, true});
  return out;
}

inline std::vector<ParamRef> params(const Network& net) {
  return params(const_cast<Network&>(net));
}

inline std::size_t param_count(const Network& net) {
  std::size_t n = 0;
  for (const ParamRef& p : params(net)) n += p.tensor->size();
  return n;
}

// He-normal weights (fan-in scaled), zero biases, 1/sqrt(d)-scaled head.
// Each tensor draws from its own derived stream so layer count or order
// changes do not shift unrelated tensors.
inline void init_network(Network& net, std::uint64_t seed) {
  std::vector<ParamRef> ps = params(net);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Tensor& t = *ps[i].tensor;
    if (ps[i].is_bias) {
      for (double& v : t.data) v = 0.0;
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t j = 0; j + 1 < t.shape.size(); ++j) fan_in *= t.shape[j];
    double stddev = ps[i].is_head ? std::sqrt(1.0 / static_cast<double>(fan_in))
                                  : std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, streams::kWeightInit, i));
    for (double& v : t.data) v = rng.normal(0.0, stddev);
  }
  net.note_param_change();
}

// ---------------------------------------------------------------------------
// Freezing. The selector names which parameter set stays TRAINABLE; the rest
// is frozen (bit-identical through any number of optimizer steps).

enum class Trainable { all, head_only, backbone_only };

struct FreezeMask {
  std::vector<std::uint8_t> trainable;  // aligned with params()

  bool any_backbone(const Network& net) const {
    std::vector<ParamRef> ps = params(net);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (trainable[i] && !ps[i].is_head) return true;
    return false;
  }
  bool head(const Network& net) const {
    std::vector<ParamRef> ps = params(net);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ps[i].is_head) return trainable[i] != 0;
    return false;
  }
};

inline FreezeMask freeze(const Network& net, Trainable sel) {
  std::vector<ParamRef> ps = params(net);
  FreezeMask mask;
  mask.trainable.resize(ps.size(), 1);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    switch (sel) {
      case Trainable::all:
        mask.trainable[i] = 1;
        break;
      case Trainable::head_only:
        mask.trainable[i] = ps[i].is_head ? 1 : 0;
        break;
      case Trainable::backbone_only:
        mask.trainable[i] = ps[i].is_head ? 0 : 1;
        break;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Forward / backward.

struct Trace {
  std::uint64_t net_version = 0;
  std::vector<LayerCache> caches;
  Tensor features;  // [B, d]
  Tensor logits;    // [B, K]
};

struct GradientSet {
  std::vector<Tensor> grads;  // aligned with params()
};

inline GradientSet zero_gradients(const Network& net) {
  GradientSet gs;
  for (const ParamRef& p : params(net)) gs.grads.push_back(Tensor::zeros(p.tensor->shape));
  return gs;
}

// Runs the backbone on a batch [B,H,W,C] and returns features [B,d].
inline Tensor forward_features(const Network& net, const Tensor& batch,
                               Trace* trace = nullptr) {
  if (batch.rank() != net.input_shape.size() + 1)
    throw std::invalid_argument("forward: batch rank mismatch");
  for (std::size_t i = 0; i < net.input_shape.size(); ++i)
    if (batch.dim(i + 1) != net.input_shape[i])
      throw std::invalid_argument("forward: batch shape " +
                                  shape_to_string(batch.shape) +
                                  " does not match network input");
  if (trace) {
    trace->net_version = net.version;
    trace->caches.assign(net.backbone.size(), LayerCache{});
  }
  Tensor x = batch;
  for (std::size_t i = 0; i < net.backbone.size(); ++i)
    x = layer_forward(net.backbone[i], x, trace ? &trace->caches[i] : nullptr);
  return x;
}

inline Tensor head_logits(const Network& net, const Tensor& features) {
  std::size_t B = features.dim(0);
  Tensor logits = Tensor::zeros({B, net.classes()});
  CMatMap zm(features.data.data(), static_cast<Eigen::Index>(B),
             static_cast<Eigen::Index>(net.feature_dim()));
  CMatMap wm(net.head.data.data(), static_cast<Eigen::Index>(net.feature_dim()),
             static_cast<Eigen::Index>(net.classes()));
  MatMap lm(logits.data.data(), zm.rows(), wm.cols());
  lm.noalias() = zm * wm;
  return logits;
}

// Full forward. Returns logits [B,K]; `trace` (if given) also keeps features
// and per-layer caches for backward().
inline Tensor forward(const Network& net, const Tensor& batch,
                      Trace* trace = nullptr) {
  Tensor features = forward_features(net, batch, trace);
  Tensor logits = head_logits(net, features);
  if (trace) {
    trace->features = features;
    trace->logits = logits;
  }
  return logits;
}

// Row-stabilized softmax over the last axis of [B,K].
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax expects [B,K]");
  Tensor probs = logits;
  std::size_t B = logits.dim(0), K = logits.dim(1);
  for (std::size_t b = 0; b < B; ++b) {
    double* row = probs.data.data() + b * K;
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      row[k] = std::exp(row[k] - m);
      sum += row[k];
    }
    for (std::size_t k = 0; k < K; ++k) row[k] /= sum;
  }
  return probs;
}

// Mean cross-entropy of integer labels under the rows [row_begin, row_end).
// Computed through log-sum-exp, so saturated logits stay finite.
inline double cross_entropy_rows(const Tensor& logits,
                                 const std::vector<int>& labels,
                                 std::size_t row_begin, std::size_t row_end) {
  if (logits.rank() != 2)
    throw std::invalid_argument("cross_entropy expects [B,K]");
  std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  if (row_end > B || row_begin > row_end)
    throw std::invalid_argument("cross_entropy: bad row range");
  if (row_end == row_begin)
    throw std::invalid_argument("cross_entropy: empty row range");
  double total = 0.0;
  for (std::size_t b = row_begin; b < row_end; ++b) {
    int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= K)
      throw std::out_of_range("cross_entropy: label out of range");
    const double* row = logits.data.data() + b * K;
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(row[k] - m);
    total += (m + std::log(sum)) - row[y];
  }
  return total / static_cast<double>(row_end - row_begin);
}

inline double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  return cross_entropy_rows(logits, labels, 0, logits.dim(0));
}

// d(mean CE)/d(logits) with the mean over [row_begin, row_end); rows outside
// the range get zero gradient.
inline Tensor cross_entropy_grad_rows(const Tensor& logits,
                                      const std::vector<int>& labels,
                                      std::size_t row_begin,
                                      std::size_t row_end) {
  std::size_t B = logits.dim(0), K = logits.dim(1);
  if (row_end > B || row_begin >= row_end)
    throw std::invalid_argument("cross_entropy_grad: bad row range");
  Tensor g = Tensor::zeros({B, K});
  double inv = 1.0 / static_cast<double>(row_end - row_begin);
  for (std::size_t b = row_begin; b < row_end; ++b) {
    const double* row = logits.data.data() + b * K;
    double* grow = g.data.data() + b * K;
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      grow[k] = std::exp(row[k] - m);
      sum += grow[k];
    }
    for (std::size_t k = 0; k < K; ++k) grow[k] = grow[k] / sum * inv;
    grow[labels[b]] -= inv;
  }
  return g;
}

inline Tensor cross_entropy_grad(const Tensor& logits,
                                 const std::vector<int>& labels) {
  return cross_entropy_grad_rows(logits, labels, 0, logits.dim(0));
}

// Reverse pass over a recorded trace. `dlogits` seeds dL/d(logits);
// `dfeatures` (optional, may be empty) adds a direct dL/d(features) term for
// losses defined on the feature layer. Frozen parameters get zero gradient
// and, when a whole prefix of the backbone is frozen, computation below the
// deepest trainable layer is skipped.
inline GradientSet backward(const Network& net, const Trace& trace,
                            const Tensor& dlogits, const Tensor& dfeatures,
                            const FreezeMask& mask) {
  if (trace.net_version != net.version)
    throw std::logic_error(
        "backward: trace is stale (parameters changed after forward)");
  std::vector<ParamRef> ps = params(net);
  if (mask.trainable.size() != ps.size())
    throw std::invalid_argument("backward: freeze mask size mismatch");
  std::size_t B = dlogits.dim(0);
  if (dlogits.dim(0) != trace.features.dim(0) ||
      dlogits.dim(1) != net.classes())
    throw std::invalid_argument("backward: dlogits shape mismatch");

  GradientSet gs = zero_gradients(net);

  // Head gradient and dL/d(features).
  std::size_t head_idx = ps.size() - 1;
  if (mask.trainable[head_idx]) {
    CMatMap zm(trace.features.data.data(), static_cast<Eigen::Index>(B),
               static_cast<Eigen::Index>(net.feature_dim()));
    CMatMap gm(dlogits.data.data(), static_cast<Eigen::Index>(B),
               static_cast<Eigen::Index>(net.classes()));
    MatMap gw(gs.grads[head_idx].data.data(),
              static_cast<Eigen::Index>(net.feature_dim()),
              static_cast<Eigen::Index>(net.classes()));
    gw.noalias() = zm.transpose() * gm;
  }

  // Deepest backbone layer whose parameters are trainable.
  std::ptrdiff_t lowest = static_cast<std::ptrdiff_t>(net.backbone.size());
  {
    std::size_t pi = 0;
    std::size_t li = 0;
    for (const Layer& l : net.backbone) {
      std::size_t count =
          std::holds_alternative<Conv2d>(l) || std::holds_alternative<Dense>(l)
              ? 2
              : 0;
      for (std::size_t c = 0; c < count; ++c)
        if (mask.trainable[pi + c])
          lowest = std::min(lowest, static_cast<std::ptrdiff_t>(li));
      pi += count;
      ++li;
    }
  }
  // With the whole backbone frozen nothing below the feature layer is
  // needed; a direct feature-loss term cannot reach any trainable parameter
  // either, so the pass ends here.
  if (lowest >= static_cast<std::ptrdiff_t>(net.backbone.size())) return gs;

  // dL/d(features) = dlogits . head^T (+ direct feature-loss term).
  Tensor dfeat = Tensor::zeros({B, net.feature_dim()});
  {
    CMatMap gm(dlogits.data.data(), static_cast<Eigen::Index>(B),
               static_cast<Eigen::Index>(net.classes()));
    CMatMap wm(net.head.data.data(), static_cast<Eigen::Index>(net.feature_dim()),
               static_cast<Eigen::Index>(net.classes()));
    MatMap dm(dfeat.data.data(), static_cast<Eigen::Index>(B),
              static_cast<Eigen::Index>(net.feature_dim()));
    dm.noalias() = gm * wm.transpose();
  }
  if (!dfeatures.data.empty()) {
    if (!dfeatures.same_shape(dfeat))
      throw std::invalid_argument("backward: dfeatures shape mismatch");
    for (std::size_t i = 0; i < dfeat.size(); ++i)
      dfeat.data[i] += dfeatures.data[i];
  }

  // Walk the backbone in reverse down to the deepest trainable layer.
  std::vector<std::size_t> first_param_of(net.backbone.size(), 0);
  {
    std::size_t pi = 0;
    for (std::size_t li = 0; li < net.backbone.size(); ++li) {
      first_param_of[li] = pi;
      const Layer& l = net.backbone[li];
      if (std::holds_alternative<Conv2d>(l) || std::holds_alternative<Dense>(l))
        pi += 2;
    }
  }
  Tensor g = dfeat;
  for (std::ptrdiff_t li = static_cast<std::ptrdiff_t>(net.backbone.size()) - 1;
       li >= lowest; --li) {
    const Layer& l = net.backbone[li];
    bool has_params =
        std::holds_alternative<Conv2d>(l) || std::holds_alternative<Dense>(l);
    Tensor* gw = nullptr;
    Tensor* gb = nullptr;
    if (has_params) {
      std::size_t pi = first_param_of[li];
      if (mask.trainable[pi]) gw = &gs.grads[pi];
      if (mask.trainable[pi + 1]) gb = &gs.grads[pi + 1];
    }
    bool need_input = li > lowest;
    g = layer_backward(l, trace.caches[li], g, gw, gb, need_input);
  }
  return gs;
}

}  // namespace deepfid
