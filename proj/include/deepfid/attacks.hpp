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

// Removal attacks an adversary without the key might run: clean fine-tuning,
// precision truncation, and global magnitude pruning. Each returns a new
// model, leaving the input untouched.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "deepfid/dataset.hpp"
#include "deepfid/embed.hpp"
#include "deepfid/net.hpp"

namespace deepfid {

// ---------------------------------------------------------------------------
// IEEE 754 binary16 round trip. float -> half uses round-to-nearest-even
// (subnormals included, overflow to infinity); half -> float is exact.

inline std::uint16_t float_to_half(float f) {
  std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  std::uint32_t exp = (x >> 23) & 0xffu;
  std::uint32_t mant = x & 0x7fffffu;
  if (exp == 0xffu)  // inf / nan
    return static_cast<std::uint16_t>(
        sign | 0x7c00u | (mant ? 0x200u | (mant >> 13) : 0u));
  std::int32_t e = static_cast<std::int32_t>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);  // overflow
  if (e <= 0) {
    // Subnormal half (or zero). Shift the implicit-1 mantissa so the result
    // has exponent 0, rounding the dropped bits to nearest even.
    if (e < -10) return sign;  // underflow to zero
    std::uint32_t full = mant | 0x800000u;
    std::uint32_t shift = static_cast<std::uint32_t>(14 - e);  // 14..24
    std::uint32_t half_mant = full >> shift;
    std::uint32_t dropped = full & ((1u << shift) - 1u);
    std::uint32_t halfway = 1u << (shift - 1);
    if (dropped > halfway || (dropped == halfway && (half_mant & 1u)))
      ++half_mant;
    return static_cast<std::uint16_t>(sign | half_mant);
  }
  std::uint32_t half_mant = mant >> 13;
  std::uint32_t dropped = mant & 0x1fffu;
  std::uint16_t h = static_cast<std::uint16_t>(
      sign | (static_cast<std::uint32_t>(e) << 10) | half_mant);
  if (dropped > 0x1000u || (dropped == 0x1000u && (h & 1u)))
    ++h;  // carry may roll mantissa into the exponent; that is correct RNE
  return h;
}

inline float half_to_float(std::uint16_t h) {
  std::uint32_t sign = (static_cast<std::uint32_t>(h) & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t x;
  if (exp == 0) {
    if (mant == 0) {
      x = sign;
    } else {
      // normalize the subnormal
      int shift = 0;
      while (!(mant & 0x400u)) {
        mant <<= 1;
        ++shift;
      }
      mant &= 0x3ffu;
      x = sign | ((127 - 15 + 1 - shift) << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    x = sign | 0x7f800000u | (mant << 13);
  } else {
    x = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(x);
}

inline double round_through_half(double v) {
  return static_cast<double>(half_to_float(float_to_half(static_cast<float>(v))));
}

// Quantizes every parameter through 16-bit floating point and back.
inline Network truncate_weights(const Network& net, int bits = 16) {
  if (bits != 16)
    throw std::invalid_argument("only 16-bit truncation is supported");
  Network out = net;
  for (const ParamRef& p : params(out))
    for (double& v : p.tensor->data) v = round_through_half(v);
  out.note_param_change();
  return out;
}

// ---------------------------------------------------------------------------
// Global unstructured magnitude pruning. All weight tensors participate
// (conv filters, dense matrices, the head); biases are excluded. Exactly
// floor(fraction * eligible) entries are zeroed: the smallest magnitudes,
// ties broken by canonical flat index order.

struct PruneTarget {
  std::size_t param_index;  // into params(net)
  std::size_t offset;       // flat offset within the tensor
};

inline std::vector<PruneTarget> prune_selection(const Network& net,
                                                double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("prune fraction must be in [0,1)");
  std::vector<ParamRef> ps = params(net);
  struct Entry {
    double mag;
    std::size_t order;  // global index over eligible entries
    std::size_t param_index;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::size_t order = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].is_bias) continue;
    const Tensor& t = *ps[i].tensor;
    for (std::size_t j = 0; j < t.size(); ++j)
      entries.push_back({std::abs(t.data[j]), order++, i, j});
  }
  std::size_t count = static_cast<std::size_t>(
      fraction * static_cast<double>(entries.size()));
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    return a.order < b.order;
  });
  std::vector<PruneTarget> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({entries[i].param_index, entries[i].offset});
  return out;
}

inline Network prune_weights(const Network& net, double fraction) {
  std::vector<PruneTarget> targets = prune_selection(net, fraction);
  Network out = net;
  std::vector<ParamRef> ps = params(out);
  for (const PruneTarget& t : targets)
    ps[t.param_index].tensor->data[t.offset] = 0.0;
  out.note_param_change();
  return out;
}

// ---------------------------------------------------------------------------
// Clean fine-tuning: the adversary retrains on task data without triggers,
// hoping the watermark decays.

inline Network finetune_attack(const Network& net, const LearningSet& train,
                               std::size_t epochs = 50, double lr = 1e-4,
                               std::size_t batch_size = 32,
                               std::uint64_t seed = 0) {
  Network out = net;
  if (epochs == 0) return out;
  train_plain(out, train, nullptr, epochs, lr, batch_size, seed);
  return out;
}

}  // namespace deepfid
