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

// Self-contained procedural digit corpus: affine-jittered glyph renders with
// blur and pixel noise, 28x28 grayscale, ten balanced classes. Purely a
// function of (seed, index), so any run anywhere regenerates identical data.
// Stands in for a downloaded handwriting set in tests and demos; real IDX
// data drops in through the same ingestion path.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "deepfid/dataset.hpp"
#include "deepfid/font5x7.hpp"
#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

namespace detail {

// Bilinear sample of a 5x7 glyph bitmap treated as a continuous field,
// zero outside its bounds.
inline double glyph_sample(const std::uint8_t* rows, double gy, double gx) {
  int y0 = static_cast<int>(std::floor(gy));
  int x0 = static_cast<int>(std::floor(gx));
  double fy = gy - y0, fx = gx - x0;
  auto at = [&](int y, int x) -> double {
    if (y < 0 || y >= kGlyphHeight || x < 0 || x >= kGlyphWidth) return 0.0;
    return (rows[y] & (0x10 >> x)) ? 1.0 : 0.0;
  };
  return at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x0 + 1) * (1 - fy) * fx +
         at(y0 + 1, x0) * fy * (1 - fx) + at(y0 + 1, x0 + 1) * fy * fx;
}

}  // namespace detail

struct DigitStyle {
  std::size_t size = 28;
  double scale_lo = 2.6, scale_hi = 3.4;  // per-axis glyph magnification
  double rotate = 0.30;                   // max |angle| in radians
  double jitter = 2.5;                    // max |center offset| in pixels
  double noise = 0.18;                    // additive pixel noise stddev
  double fg_lo = 0.75, fg_hi = 1.0;       // foreground intensity range
  double bg_hi = 0.10;                    // background intensity range
};

// Renders one digit image [size, size, 1]. Deterministic in (seed, index).
inline Tensor render_digit(int digit, std::uint64_t seed, std::uint64_t index,
                           const DigitStyle& style = {}) {
  Rng rng(derive_seed(seed, streams::kCorpus, index));
  std::size_t S = style.size;
  double sy = rng.uniform(style.scale_lo, style.scale_hi);
  double sx = rng.uniform(style.scale_lo, style.scale_hi);
  double theta = rng.uniform(-style.rotate, style.rotate);
  double cy = static_cast<double>(S) / 2.0 + rng.uniform(-style.jitter, style.jitter);
  double cx = static_cast<double>(S) / 2.0 + rng.uniform(-style.jitter, style.jitter);
  double fg = rng.uniform(style.fg_lo, style.fg_hi);
  double bg = rng.uniform(0.0, style.bg_hi);
  const std::uint8_t* rows = glyph5x7(static_cast<char>('0' + digit));
  double ct = std::cos(theta), st = std::sin(theta);

  std::vector<double> ink(S * S, 0.0);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      double dy = static_cast<double>(y) - cy;
      double dx = static_cast<double>(x) - cx;
      double gy = (-dx * st + dy * ct) / sy + kGlyphHeight / 2.0 - 0.5;
      double gx = (dx * ct + dy * st) / sx + kGlyphWidth / 2.0 - 0.5;
      ink[y * S + x] = detail::glyph_sample(rows, gy, gx);
    }

  // 3x3 binomial blur, edge-clamped.
  std::vector<double> blurred(S * S, 0.0);
  static const double kernel[3][3] = {
      {1 / 16.0, 2 / 16.0, 1 / 16.0},
      {2 / 16.0, 4 / 16.0, 2 / 16.0},
      {1 / 16.0, 2 / 16.0, 1 / 16.0}};
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      double acc = 0.0;
      for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
          std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + ky;
          std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + kx;
          if (yy < 0) yy = 0;
          if (xx < 0) xx = 0;
          if (yy >= static_cast<std::ptrdiff_t>(S)) yy = S - 1;
          if (xx >= static_cast<std::ptrdiff_t>(S)) xx = S - 1;
          acc += kernel[ky + 1][kx + 1] * ink[yy * S + xx];
        }
      blurred[y * S + x] = acc;
    }

  Tensor img = Tensor::zeros({S, S, 1});
  for (std::size_t p = 0; p < S * S; ++p) {
    double v = bg + (fg - bg) * blurred[p] + style.noise * rng.normal();
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    img.data[p] = v;
  }
  return img;
}

// Balanced corpus: label i%10, one render per index.
inline LearningSet generate_digits(std::size_t n, std::uint64_t seed,
                                   const DigitStyle& style = {}) {
  LearningSet set;
  set.num_classes = 10;
  std::size_t S = style.size;
  set.images = Tensor::zeros({n, S, S, 1});
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int digit = static_cast<int>(i % 10);
    Tensor img = render_digit(digit, seed, i, style);
    std::copy(img.data.begin(), img.data.end(),
              set.images.data.begin() + i * S * S);
    set.labels[i] = digit;
  }
  return set;
}

}  // namespace deepfid
