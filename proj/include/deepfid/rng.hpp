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

// Deterministic random source. All randomness in the library flows through
// this header so that a (seed, stream) pair reproduces bit-identical values
// on every platform. std::mt19937_64 supplies raw bits; the floating-point
// distributions are implemented here because libstdc++'s are not pinned by
// the standard and differ across implementations.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace deepfid {

// SplitMix64 step, used to derive independent substreams from one user seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives the seed for a named substream. `stream` is a small constant unique
// to the consumer (dataset shuffle, weight init, ...), `index` an optional
// per-item counter (epoch number, tensor index, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = base;
  std::uint64_t a = splitmix64(s);
  s = a ^ (stream * 0x9e3779b97f4a7c15ULL);
  std::uint64_t b = splitmix64(s);
  s = b ^ (index * 0xc2b2ae3d27d4eb4fULL);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // log(0) guard
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n) by rejection sampling.
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    std::uint64_t bound = n;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return static_cast<std::size_t>(x % bound);
  }

  // Fisher-Yates shuffle, iterating from the back.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Substream tags. Arbitrary distinct constants; changing one changes every
// artifact downstream, so they are frozen.
namespace streams {
inline constexpr std::uint64_t kWeightInit = 0x5749ULL;   // "WI"
inline constexpr std::uint64_t kShuffle = 0x5348ULL;      // "SH"
inline constexpr std::uint64_t kSplit = 0x5350ULL;        // "SP"
inline constexpr std::uint64_t kNoise = 0x4e4fULL;        // "NO"
inline constexpr std::uint64_t kAbstract = 0x4142ULL;     // "AB"
inline constexpr std::uint64_t kLabels = 0x4c41ULL;       // "LA"
inline constexpr std::uint64_t kTriggerPick = 0x5450ULL;  // "TP"
inline constexpr std::uint64_t kCorpus = 0x434fULL;       // "CO"
inline constexpr std::uint64_t kSphere = 0x53c3ULL;
}  // namespace streams

}  // namespace deepfid
