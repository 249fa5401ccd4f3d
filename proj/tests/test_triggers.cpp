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
#include <cstdio>
#include <vector>

#include "deepfid/triggers.hpp"

using namespace deepfid;

TEST_CASE("noise pixels follow the affine-clamped normal map") {
  Tensor raw = gen_noise_raw(20, {8, 8, 1}, 5);
  Tensor img = gen_noise(20, {8, 8, 1}, 5);
  REQUIRE(raw.size() == img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double want = 0.5 + 0.25 * raw.data[i];
    if (want < 0.0) want = 0.0;
    if (want > 1.0) want = 1.0;
    CHECK(img.data[i] == want);
  }
}

TEST_CASE("raw noise draws are standard normal and seed-deterministic") {
  Tensor a = gen_noise_raw(100, {8, 8, 1}, 3);
  Tensor b = gen_noise_raw(100, {8, 8, 1}, 3);
  Tensor c = gen_noise_raw(100, {8, 8, 1}, 4);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  double sum = 0.0, sq = 0.0;
  for (double v : a.data) {
    sum += v;
    sq += v * v;
  }
  double n = static_cast<double>(a.size());
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("abstract triggers stay inside the tanh band") {
  Tensor img = gen_abstract(4, {16, 16, 1}, 1);
  double lo = 1.0, hi = 0.0;
  for (double v : img.data) {
    REQUIRE(v >= 0.05);
    REQUIRE(v <= 0.95);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // not flat: the blobs must actually produce contrast
  CHECK(hi - lo > 0.2);
}

TEST_CASE("overlay stamps glyph bits at full intensity") {
  Tensor img = Tensor::full({12, 20, 1}, 0.3);
  overlay_string(img, "A1", 2, 3);
  const std::uint8_t* a = glyph5x7('A');
  const std::uint8_t* one = glyph5x7('1');
  for (int y = 0; y < kGlyphHeight; ++y)
    for (int x = 0; x < kGlyphWidth; ++x) {
      double va = img.data[(2 + y) * 20 + 3 + x];
      double v1 = img.data[(2 + y) * 20 + 3 + kGlyphAdvance + x];
      CHECK(va == ((a[y] & (0x10 >> x)) ? 1.0 : 0.3));
      CHECK(v1 == ((one[y] & (0x10 >> x)) ? 1.0 : 0.3));
    }
  // the inter-glyph gap column stays untouched
  for (int y = 0; y < kGlyphHeight; ++y)
    CHECK(img.data[(2 + y) * 20 + 3 + kGlyphWidth] == 0.3);
}

TEST_CASE("overlay rejects bad input before mutating") {
  Tensor img = Tensor::full({10, 10, 1}, 0.3);
  Tensor before = img;
  CHECK_THROWS_AS(overlay_string(img, "a", 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(overlay_string(img, "", 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(overlay_string(img, "TOO WIDE", 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(overlay_string(img, "X", 5, 0), std::invalid_argument);
  CHECK(img.data == before.data);
}

TEST_CASE("labels are deterministic, in range, and hit every class") {
  std::vector<int> a = assign_labels(500, 10, 7);
  std::vector<int> b = assign_labels(500, 10, 7);
  CHECK(a == b);
  std::vector<int> counts(10, 0);
  for (int y : a) {
    REQUIRE(y >= 0);
    REQUIRE(y < 10);
    counts[y]++;
  }
  for (int c : counts) CHECK(c > 0);
  CHECK_THROWS_AS(assign_labels(5, 1, 0), std::invalid_argument);
}

TEST_CASE("labels and pixels come from independent streams") {
  // same master seed must not entangle the two: regenerating only labels
  // leaves triggers unchanged and vice versa
  WatermarkKey key = make_key("noise", 10, {8, 8, 1}, 10, 9);
  Tensor pixels = gen_noise(10, {8, 8, 1}, 9);
  std::vector<int> labels = assign_labels(10, 10, 9);
  CHECK(key.triggers.data == pixels.data);
  CHECK(key.labels == labels);
}

TEST_CASE("string variant stamps text on every trigger") {
  WatermarkKey key = make_key("abstract+string", 3, {16, 32, 1}, 10, 2, "HI");
  const std::uint8_t* h = glyph5x7('H');
  for (std::size_t i = 0; i < 3; ++i)
    for (int y = 0; y < kGlyphHeight; ++y)
      for (int x = 0; x < kGlyphWidth; ++x)
        if (h[y] & (0x10 >> x))
          CHECK(key.triggers.data[i * 16 * 32 + (2 + y) * 32 + 2 + x] == 1.0);
  CHECK_THROWS_AS(make_key("blotch", 3, {16, 16, 1}, 10, 2),
                  std::invalid_argument);
}

TEST_CASE("key survives a save/load round trip bit-exactly") {
  WatermarkKey key = make_key("noise", 25, {8, 8, 1}, 10, 11);
  std::string path = "key_test_tmp.dfk";
  save_key(path, key, {{"note", "round trip"}});
  WatermarkKey back = load_key(path);
  CHECK(back.triggers.data == key.triggers.data);
  CHECK(back.labels == key.labels);
  CHECK(back.num_classes == 10);
  CHECK(back.kind == "noise");
  CHECK(back.seed == 11);
  std::remove(path.c_str());
}

TEST_CASE("load rejects files that are not keys") {
  std::string path = "key_test_bad_tmp.dfk";
  Tensor t = Tensor::zeros({2});
  std::vector<std::pair<std::string, const Tensor*>> tensors = {{"t", &t}};
  write_file_bytes(path,
                   serialize_tensors(make_preamble({{"format", "other"}}), tensors));
  CHECK_THROWS_AS(load_key(path), CheckpointError);
  std::remove(path.c_str());
}
