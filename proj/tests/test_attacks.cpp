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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "deepfid/attacks.hpp"

using namespace deepfid;

TEST_CASE("half conversion matches frozen IEEE binary16 vectors") {
  struct Vec {
    float in;
    std::uint16_t half;
  };
  // computed independently with round-to-nearest-even semantics
  const Vec vectors[] = {
      {1.0f, 0x3c00},
      {-2.0f, 0xc000},
      {65504.0f, 0x7bff},                  // largest finite half
      {65520.0f, 0x7c00},                  // rounds up to infinity
      {std::ldexp(1.0f, -24), 0x0001},     // smallest subnormal
      {std::ldexp(1.0f, -25), 0x0000},     // halfway, ties to even (zero)
      {std::ldexp(3.0f, -25), 0x0002},     // halfway, ties up to even
      {1.0f + std::ldexp(1.0f, -11), 0x3c00},  // halfway, ties down to even
      {1.0f + std::ldexp(3.0f, -11), 0x3c02},  // halfway, ties up to even
      {0.1f, 0x2e66},
      {3.14159265f, 0x4248},
      {0.0f, 0x0000},
      {-0.0f, 0x8000},
  };
  for (const Vec& v : vectors) {
    INFO("input " << v.in);
    CHECK(float_to_half(v.in) == v.half);
  }
  CHECK(float_to_half(std::numeric_limits<float>::infinity()) == 0x7c00);
  CHECK(float_to_half(-std::numeric_limits<float>::infinity()) == 0xfc00);
  std::uint16_t nan_half = float_to_half(std::numeric_limits<float>::quiet_NaN());
  CHECK((nan_half & 0x7c00) == 0x7c00);
  CHECK((nan_half & 0x03ff) != 0);
}

TEST_CASE("half to float is exact and inverts the conversion") {
  CHECK(half_to_float(0x3c00) == 1.0f);
  CHECK(half_to_float(0xc000) == -2.0f);
  CHECK(half_to_float(0x7bff) == 65504.0f);
  CHECK(half_to_float(0x0001) == std::ldexp(1.0f, -24));
  CHECK(half_to_float(0x0400) == std::ldexp(1.0f, -14));  // smallest normal
  CHECK(std::isinf(half_to_float(0x7c00)));
  CHECK(std::isnan(half_to_float(0x7e00)));
  // every finite half value survives float -> half unchanged
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    std::uint16_t bits = static_cast<std::uint16_t>(h);
    if ((bits & 0x7c00) == 0x7c00) continue;  // inf / nan
    REQUIRE(float_to_half(half_to_float(bits)) == bits);
  }
}

TEST_CASE("rounding through half precision is idempotent") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-6.0, 4.0));
    double once = round_through_half(v);
    CHECK(round_through_half(once) == once);
  }
}

TEST_CASE("weight truncation quantizes every parameter tensor") {
  Network net = make_network({6, 6, 1}, "conv:3:3:1,relu,maxpool:2,flatten,dense:5", 4);
  init_network(net, 7);
  Network out = truncate_weights(net);
  std::vector<ParamRef> a = params(net);
  std::vector<ParamRef> b = params(out);
  bool changed = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].tensor->size(); ++j) {
      CHECK(b[i].tensor->data[j] == round_through_half(a[i].tensor->data[j]));
      changed |= b[i].tensor->data[j] != a[i].tensor->data[j];
    }
  CHECK(changed);
  // already-quantized models pass through bitwise
  Network twice = truncate_weights(out);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(params(twice)[i].tensor->data == b[i].tensor->data);
  CHECK_THROWS_AS(truncate_weights(net, 8), std::invalid_argument);
}

TEST_CASE("pruning zeroes exactly the smallest-magnitude weights") {
  Network net = make_network({4, 4, 1}, "flatten,dense:3", 2);
  // hand-set weights: dense [16,3] = 48, dense bias 3, head [3,2] = 6
  std::vector<ParamRef> ps = params(net);
  REQUIRE(ps.size() == 3);
  Tensor& dense_w = *ps[0].tensor;
  Tensor& dense_b = *ps[1].tensor;
  Tensor& head = *ps[2].tensor;
  REQUIRE(ps[1].is_bias);
  for (std::size_t j = 0; j < dense_w.size(); ++j)
    dense_w.data[j] = 1.0 + static_cast<double>(j);  // magnitudes 1..48
  for (std::size_t j = 0; j < dense_b.size(); ++j) dense_b.data[j] = 0.001;
  for (std::size_t j = 0; j < head.size(); ++j)
    head.data[j] = -(0.25 + 0.25 * static_cast<double>(j));  // 0.25..1.5
  net.note_param_change();

  // eligible = 48 + 6 = 54; floor(0.2 * 54) = 10 smallest magnitudes:
  // all six head entries (0.25..1.5) plus dense 1.0, 2.0, 3.0, 4.0
  Network out = prune_weights(net, 0.2);
  std::vector<ParamRef> qs = params(out);
  for (std::size_t j = 0; j < 6; ++j) CHECK(qs[2].tensor->data[j] == 0.0);
  for (std::size_t j = 0; j < 4; ++j) CHECK(qs[0].tensor->data[j] == 0.0);
  CHECK(qs[0].tensor->data[4] == 5.0);  // first survivor
  // biases never pruned
  CHECK(qs[1].tensor->data == dense_b.data);
  // original untouched
  CHECK(ps[2].tensor->data[0] == -0.25);
}

TEST_CASE("prune tie-break favors earlier canonical order") {
  Network net = make_network({2, 2, 1}, "flatten,dense:2", 2);
  std::vector<ParamRef> ps = params(net);
  Tensor& w = *ps[0].tensor;  // [4,2] = 8 entries
  Tensor& h = *ps[2].tensor;  // [2,2] = 4 entries
  for (double& v : w.data) v = 0.5;
  for (double& v : ps[1].tensor->data) v = 0.0;
  for (double& v : h.data) v = 0.5;  // all twelve eligible entries tie
  net.note_param_change();

  // floor(0.5 * 12) = 6: exactly the first six in canonical order, which
  // all live in the dense weight tensor
  std::vector<PruneTarget> sel = prune_selection(net, 0.5);
  REQUIRE(sel.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(sel[i].param_index == 0);
    CHECK(sel[i].offset == i);
  }
}

TEST_CASE("prune count is the floor of fraction times eligible") {
  Network net = make_network({3, 3, 1}, "flatten,dense:3", 2);
  init_network(net, 1);
  // eligible = 9*3 + 3*2 = 33
  CHECK(prune_selection(net, 0.0).empty());
  CHECK(prune_selection(net, 0.1).size() == 3);    // floor(3.3)
  CHECK(prune_selection(net, 0.5).size() == 16);   // floor(16.5)
  CHECK(prune_selection(net, 0.999).size() == 32);
  CHECK_THROWS_AS(prune_selection(net, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(prune_selection(net, -0.1), std::invalid_argument);
}

TEST_CASE("fine-tuning attack with zero epochs is the identity") {
  Network net = make_network({6, 6, 1}, "flatten,dense:4", 3);
  init_network(net, 2);
  LearningSet train;
  train.num_classes = 3;
  train.images = Tensor::zeros({6, 6, 6, 1});
  Rng rng(4);
  for (double& v : train.images.data) v = rng.uniform(0.0, 1.0);
  train.labels = {0, 1, 2, 0, 1, 2};

  Network same = finetune_attack(net, train, 0);
  std::vector<ParamRef> a = params(net), b = params(same);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i].tensor->data == b[i].tensor->data);

  Network moved = finetune_attack(net, train, 2, 1e-3, 3, 1);
  CHECK(loss_twl(moved, net) > 0.0);
  // the attacked copy moved; the original did not
  CHECK(a[0].tensor->data == params(net)[0].tensor->data);
}
