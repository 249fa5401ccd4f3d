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
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepfid {

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > SIZE_MAX / d)
      throw std::overflow_error("tensor shape overflows size_t");
    n *= d;
  }
  return n;
}

// Dense row-major f64 tensor. Image batches use NHWC layout. The invariant
// data.size() == product(shape) holds for every construction path; code that
// reshapes must keep it.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_product(shape))
      throw std::invalid_argument("tensor data does not match shape");
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = shape_product(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> s, double value) {
    std::size_t n = shape_product(s);
    return Tensor(std::move(s), std::vector<double>(n, value));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const {
    if (i >= shape.size()) throw std::out_of_range("tensor dim index");
    return shape[i];
  }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Flat offset of one sample in an NHWC batch.
  std::size_t sample_stride() const {
    if (shape.empty()) throw std::logic_error("sample_stride on rank-0 tensor");
    return size() / shape[0];
  }
};

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace deepfid
