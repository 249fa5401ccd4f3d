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

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "deepfid/net.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

// Adam with bias correction. Moments align with params(net); frozen tensors
// are skipped entirely, so their parameters AND moments stay bit-identical
// no matter how many steps run.
struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline OptimizerState make_optimizer(const Network& net, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
  OptimizerState st;
  st.lr = lr;
  for (const ParamRef& p : params(net)) {
    st.m.push_back(Tensor::zeros(p.tensor->shape));
    st.v.push_back(Tensor::zeros(p.tensor->shape));
  }
  return st;
}

inline void adam_step(Network& net, const GradientSet& grads,
                      OptimizerState& st, const FreezeMask& mask) {
  std::vector<ParamRef> ps = params(net);
  if (grads.grads.size() != ps.size() || st.m.size() != ps.size() ||
      st.v.size() != ps.size() || mask.trainable.size() != ps.size())
    throw std::invalid_argument("adam: per-tensor vectors misaligned");
  st.step += 1;
  double t = static_cast<double>(st.step);
  double c1 = 1.0 - std::pow(st.beta1, t);
  double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!mask.trainable[i]) continue;
    Tensor& p = *ps[i].tensor;
    const Tensor& g = grads.grads[i];
    if (!g.same_shape(p))
      throw std::invalid_argument("adam: gradient shape mismatch for " +
                                  ps[i].name);
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      double gj = g.data[j];
      m.data[j] = st.beta1 * m.data[j] + (1.0 - st.beta1) * gj;
      v.data[j] = st.beta2 * v.data[j] + (1.0 - st.beta2) * gj * gj;
      double mhat = m.data[j] / c1;
      double vhat = v.data[j] / c2;
      p.data[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
  net.note_param_change();
}

}  // namespace deepfid
