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

// Watermark keys: out-of-distribution trigger images plus their assigned
// target labels. A model carries the watermark when it classifies the
// triggers as the key says; the key file is the ownership credential.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/checkpoint.hpp"
#include "deepfid/font5x7.hpp"
#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

struct WatermarkKey {
  Tensor triggers;          // [n, H, W, C] in [0,1]
  std::vector<int> labels;  // [n], values in [0, num_classes)
  int num_classes = 0;
  std::string kind;  // "noise" | "abstract" | "abstract+string"
  std::uint64_t seed = 0;

  std::size_t count() const { return labels.size(); }

  void validate() const {
    if (triggers.rank() != 4)
      throw std::invalid_argument("key triggers must be [n,H,W,C]");
    if (triggers.dim(0) != labels.size())
      throw std::invalid_argument("key trigger/label count mismatch");
    if (num_classes < 2)
      throw std::invalid_argument("key needs >= 2 classes");
    for (int y : labels)
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("key label out of range");
    for (double v : triggers.data)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("trigger pixel outside [0,1]");
  }
};

// ---------------------------------------------------------------------------
// Trigger image generators.

// The raw standard-normal draws behind gen_noise, exposed so statistical
// checks can see values before the affine map and clamping.
inline Tensor gen_noise_raw(std::size_t n, std::vector<std::size_t> shape,
                            std::uint64_t seed) {
  if (shape.size() != 3) throw std::invalid_argument("trigger shape must be {H,W,C}");
  std::vector<std::size_t> full = {n};
  full.insert(full.end(), shape.begin(), shape.end());
  Tensor out = Tensor::zeros(full);
  Rng rng(derive_seed(seed, streams::kNoise));
  for (double& v : out.data) v = rng.normal();
  return out;
}

// Gaussian noise triggers: pixel ~ N(0.5, 0.25^2) clamped to [0,1].
inline Tensor gen_noise(std::size_t n, std::vector<std::size_t> shape,
                        std::uint64_t seed) {
  Tensor out = gen_noise_raw(n, std::move(shape), seed);
  for (double& v : out.data) {
    v = 0.5 + 0.25 * v;
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
  }
  return out;
}

// Procedural abstract images: a few soft blobs and ring arcs accumulated and
// squashed through tanh, smooth and bounded away from flat black/white.
inline Tensor gen_abstract(std::size_t n, std::vector<std::size_t> shape,
                           std::uint64_t seed) {
  if (shape.size() != 3) throw std::invalid_argument("trigger shape must be {H,W,C}");
  std::size_t H = shape[0], W = shape[1], C = shape[2];
  std::vector<std::size_t> full = {n, H, W, C};
  Tensor out = Tensor::zeros(full);
  const double two_pi = 6.28318530717958647692;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, streams::kAbstract, i));
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> acc(H * W, 0.0);
      std::size_t blobs = 4 + rng.below(6);
      for (std::size_t bidx = 0; bidx < blobs; ++bidx) {
        double cy = rng.uniform(0.0, static_cast<double>(H));
        double cx = rng.uniform(0.0, static_cast<double>(W));
        double sg = rng.uniform(1.5, static_cast<double>(H) / 4.0);
        double amp = rng.uniform(0.4, 1.2) * (rng.below(2) ? 1.0 : -1.0);
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            double dy = static_cast<double>(y) - cy;
            double dx = static_cast<double>(x) - cx;
            acc[y * W + x] += amp * std::exp(-(dy * dy + dx * dx) / (2 * sg * sg));
          }
      }
      std::size_t arcs = 1 + rng.below(3);
      for (std::size_t aidx = 0; aidx < arcs; ++aidx) {
        double cy = rng.uniform(0.0, static_cast<double>(H));
        double cx = rng.uniform(0.0, static_cast<double>(W));
        double radius = rng.uniform(static_cast<double>(H) / 6.0,
                                    static_cast<double>(H) / 2.2);
        double theta0 = rng.uniform(0.0, two_pi);
        double span = rng.uniform(two_pi / 4.0, two_pi);
        double thick = rng.uniform(0.8, 1.8);
        double amp = rng.uniform(0.4, 1.2) * (rng.below(2) ? 1.0 : -1.0);
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            double dy = static_cast<double>(y) - cy;
            double dx = static_cast<double>(x) - cx;
            double r = std::sqrt(dy * dy + dx * dx);
            double ang = std::atan2(dy, dx);
            double rel = std::fmod(ang - theta0 + two_pi, two_pi);
            if (rel > span) continue;
            double dr = r - radius;
            acc[y * W + x] += amp * std::exp(-(dr * dr) / (2 * thick * thick));
          }
      }
      for (std::size_t p = 0; p < H * W; ++p)
        out.data[(i * H * W + p) * C + c] = 0.5 + 0.45 * std::tanh(acc[p]);
    }
  }
  return out;
}

// Stamps `text` onto one trigger image [H,W,C] at (row, col), setting glyph
// pixels to full intensity. Rejects unsupported characters and out-of-bounds
// placement before touching any pixel.
inline void overlay_string(Tensor& image, const std::string& text,
                           std::size_t row, std::size_t col) {
  if (image.rank() != 3)
    throw std::invalid_argument("overlay_string expects one image [H,W,C]");
  if (text.empty()) throw std::invalid_argument("overlay text is empty");
  std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  for (char ch : text)
    if (!glyph5x7(ch))
      throw std::invalid_argument(std::string("no glyph for character '") + ch +
                                  "' (supported: 0-9, A-Z, space)");
  std::size_t width = text.size() * kGlyphAdvance - 1;
  if (row + kGlyphHeight > H || col + width > W)
    throw std::invalid_argument("text does not fit: needs " +
                                std::to_string(width) + "x" +
                                std::to_string(kGlyphHeight) + " at (" +
                                std::to_string(row) + "," + std::to_string(col) +
                                ") in " + std::to_string(H) + "x" +
                                std::to_string(W));
  for (std::size_t g = 0; g < text.size(); ++g) {
    const std::uint8_t* rows = glyph5x7(text[g]);
    for (int y = 0; y < kGlyphHeight; ++y)
      for (int x = 0; x < kGlyphWidth; ++x)
        if (rows[y] & (0x10 >> x)) {
          std::size_t py = row + static_cast<std::size_t>(y);
          std::size_t px = col + g * kGlyphAdvance + static_cast<std::size_t>(x);
          for (std::size_t c = 0; c < C; ++c)
            image.data[(py * W + px) * C + c] = 1.0;
        }
  }
}

// Uniformly random target labels for n triggers.
inline std::vector<int> assign_labels(std::size_t n, int num_classes,
                                      std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("need >= 2 classes");
  std::vector<int> out(n);
  Rng rng(derive_seed(seed, streams::kLabels));
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<int>(rng.below(static_cast<std::size_t>(num_classes)));
  return out;
}

// Builds a complete key. `kind` is one of "noise", "abstract",
// "abstract+string"; the string variant stamps `text` on every trigger.
inline WatermarkKey make_key(const std::string& kind, std::size_t n,
                             std::vector<std::size_t> shape, int num_classes,
                             std::uint64_t seed,
                             const std::string& text = "TEST",
                             std::size_t text_row = 2, std::size_t text_col = 2) {
  WatermarkKey key;
  key.kind = kind;
  key.seed = seed;
  key.num_classes = num_classes;
  if (kind == "noise") {
    key.triggers = gen_noise(n, shape, seed);
  } else if (kind == "abstract" || kind == "abstract+string") {
    key.triggers = gen_abstract(n, shape, seed);
    if (kind == "abstract+string") {
      std::size_t per = key.triggers.sample_stride();
      for (std::size_t i = 0; i < n; ++i) {
        Tensor img(std::vector<std::size_t>(shape.begin(), shape.end()),
                   std::vector<double>(key.triggers.data.begin() + i * per,
                                       key.triggers.data.begin() + (i + 1) * per));
        overlay_string(img, text, text_row, text_col);
        std::copy(img.data.begin(), img.data.end(),
                  key.triggers.data.begin() + i * per);
      }
    }
  } else {
    throw std::invalid_argument("unknown trigger kind '" + kind +
                                "' (noise | abstract | abstract+string)");
  }
  key.labels = assign_labels(n, num_classes, seed);
  key.validate();
  return key;
}

// ---------------------------------------------------------------------------
// Key files reuse the named-tensor container; labels ride as f64 and are
// validated back into integers on load.

inline void save_key(const std::string& path, const WatermarkKey& key,
                     const std::map<std::string, std::string>& extra = {}) {
  key.validate();
  std::vector<std::pair<std::string, std::string>> entries = {
      {"format", "watermark-key"},
      {"kind", key.kind},
      {"count", std::to_string(key.count())},
      {"classes", std::to_string(key.num_classes)},
      {"seed", std::to_string(key.seed)},
  };
  for (const auto& [k, v] : extra) entries.emplace_back(k, v);
  Tensor labels = Tensor::zeros({key.count()});
  for (std::size_t i = 0; i < key.count(); ++i)
    labels.data[i] = static_cast<double>(key.labels[i]);
  std::vector<std::pair<std::string, const Tensor*>> tensors = {
      {"triggers", &key.triggers}, {"labels", &labels}};
  write_file_bytes(path, serialize_tensors(make_preamble(entries), tensors));
}

inline WatermarkKey load_key(const std::string& path) {
  TensorFile tf = load_tensor_file(path);
  auto it = tf.preamble.find("format");
  if (it == tf.preamble.end() || it->second != "watermark-key")
    throw CheckpointError(path + ": not a watermark key file");
  WatermarkKey key;
  key.kind = tf.preamble.count("kind") ? tf.preamble.at("kind") : "";
  key.seed = tf.preamble.count("seed")
                 ? static_cast<std::uint64_t>(std::stoull(tf.preamble.at("seed")))
                 : 0;
  key.num_classes = static_cast<int>(
      detail::parse_size(tf.preamble.count("classes") ? tf.preamble.at("classes")
                                                      : "",
                         "key classes"));
  key.triggers = tf.get("triggers");
  const Tensor& labels = tf.get("labels");
  key.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double v = labels.data[i];
    if (v != std::floor(v) || v < 0.0)
      throw CheckpointError(path + ": non-integer label in key");
    key.labels[i] = static_cast<int>(v);
  }
  key.validate();
  return key;
}

}  // namespace deepfid
