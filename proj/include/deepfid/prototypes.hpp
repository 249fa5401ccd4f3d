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

// Head prototype geometry. The head weight [d,K] holds one prototype column
// per class; its pairwise bisectors are the decision boundaries, so fixing
// the matrix fixes the boundary. Constructions here give well-spread unit
// prototypes for training the head from scratch with the geometry pinned.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/net.hpp"
#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

// K unit prototypes evenly spaced on the circle (d = 2).
inline Tensor uniform_circle(std::size_t K) {
  if (K < 2) throw std::invalid_argument("need >= 2 prototypes");
  Tensor w = Tensor::zeros({2, K});
  const double two_pi = 6.28318530717958647692;
  for (std::size_t k = 0; k < K; ++k) {
    double a = two_pi * static_cast<double>(k) / static_cast<double>(K);
    w.data[0 * K + k] = std::cos(a);
    w.data[1 * K + k] = std::sin(a);
  }
  return w;
}

// Vertices of a regular (K-1)-simplex centered at the origin, embedded in
// R^d (zero-padded when d > K-1). Unit columns, pairwise dot -1/(K-1).
// Built by the standard recurrence: column j fixes coordinates 0..j.
inline Tensor regular_simplex(std::size_t d, std::size_t K) {
  if (K < 2) throw std::invalid_argument("need >= 2 prototypes");
  if (d + 1 < K)
    throw std::invalid_argument("regular simplex needs d >= K-1 (" +
                                std::to_string(d) + " < " +
                                std::to_string(K - 1) + ")");
  double target = -1.0 / static_cast<double>(K - 1);
  std::vector<std::vector<double>> v(K, std::vector<double>(K - 1, 0.0));
  for (std::size_t i = 0; i < K; ++i) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < i && j + 1 < K; ++j) norm2 += v[i][j] * v[i][j];
    if (i + 1 < K) {
      v[i][i] = std::sqrt(1.0 - norm2);
      for (std::size_t r = i + 1; r < K; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < i; ++j) dot += v[i][j] * v[r][j];
        v[r][i] = (target - dot) / v[i][i];
      }
    }
  }
  Tensor w = Tensor::zeros({d, K});
  for (std::size_t k = 0; k < K; ++k) {
    // The recurrence leaves tiny norm drift on the last vertex; renormalize.
    double norm = 0.0;
    for (std::size_t j = 0; j + 1 < K; ++j) norm += v[k][j] * v[k][j];
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j + 1 < K; ++j) w.data[j * K + k] = v[k][j] / norm;
  }
  return w;
}

// K unit prototypes in R^3 spread by electrostatic repulsion from a
// Fibonacci-sphere start with a seeded jitter. Fixed iteration count and
// step schedule keep the result a pure function of (K, seed).
inline Tensor sphere_code3(std::size_t K, std::uint64_t seed,
                           std::size_t iterations = 1000) {
  if (K < 2) throw std::invalid_argument("need >= 2 prototypes");
  const double pi = 3.14159265358979323846;
  const double golden = pi * (3.0 - std::sqrt(5.0));
  std::vector<std::array<double, 3>> v(K);
  Rng rng(derive_seed(seed, streams::kSphere));
  for (std::size_t k = 0; k < K; ++k) {
    double y = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(K);
    double r = std::sqrt(1.0 - y * y);
    double th = golden * static_cast<double>(k);
    v[k] = {r * std::cos(th) + 1e-3 * rng.normal(),
            y + 1e-3 * rng.normal(),
            r * std::sin(th) + 1e-3 * rng.normal()};
    double n = std::sqrt(v[k][0] * v[k][0] + v[k][1] * v[k][1] + v[k][2] * v[k][2]);
    for (double& c : v[k]) c /= n;
  }
  for (std::size_t it = 0; it < iterations; ++it) {
    double step = 0.05 / (1.0 + 0.01 * static_cast<double>(it));
    std::vector<std::array<double, 3>> force(K, {0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        if (i == j) continue;
        double dx = v[i][0] - v[j][0];
        double dy = v[i][1] - v[j][1];
        double dz = v[i][2] - v[j][2];
        double dist2 = dx * dx + dy * dy + dz * dz + 1e-12;
        double inv = 1.0 / (dist2 * std::sqrt(dist2));
        force[i][0] += dx * inv;
        force[i][1] += dy * inv;
        force[i][2] += dz * inv;
      }
    for (std::size_t i = 0; i < K; ++i) {
      for (int c = 0; c < 3; ++c) v[i][c] += step * force[i][c];
      double n = std::sqrt(v[i][0] * v[i][0] + v[i][1] * v[i][1] + v[i][2] * v[i][2]);
      for (double& c : v[i]) c /= n;
    }
  }
  Tensor w = Tensor::zeros({3, K});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < 3; ++j) w.data[j * K + k] = v[k][j];
  return w;
}

// Frozen copy of a trained host's prototype matrix.
inline Tensor prototypes_from_host(const Network& net) { return net.head; }

// Preset prototype geometry for training a fixed head from scratch: exact
// circle at d=2, relaxed sphere code at d=3, regular simplex otherwise.
inline Tensor preset_prototypes(std::size_t d, std::size_t K, std::uint64_t seed) {
  if (d == 2) return uniform_circle(K);
  if (d == 3) return sphere_code3(K, seed);
  return regular_simplex(d, K);
}

// Sum of squared element differences between two prototype matrices in flat
// row-major order. Zero exactly when the matrices are bit-identical.
inline double boundary_delta(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("boundary_delta: shape mismatch " +
                                shape_to_string(a.shape) + " vs " +
                                shape_to_string(b.shape));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a.data[i] - b.data[i];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace deepfid
