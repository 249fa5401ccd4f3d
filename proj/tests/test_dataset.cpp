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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "deepfid/dataset.hpp"
#include "deepfid/rng.hpp"

using namespace deepfid;

namespace {

LearningSet tiny_set(std::size_t n, int K, std::uint64_t seed) {
  LearningSet s;
  s.num_classes = K;
  s.images = Tensor::zeros({n, 2, 2, 1});
  s.labels.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    s.labels[i] = static_cast<int>(rng.below(K));
    for (std::size_t p = 0; p < 4; ++p)
      s.images.data[i * 4 + p] = static_cast<double>(i) + 0.1 * p;
  }
  return s;
}

}  // namespace

TEST_CASE("validate rejects inconsistent sets") {
  LearningSet s = tiny_set(5, 3, 1);
  CHECK_NOTHROW(s.validate());
  s.labels[0] = 3;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.labels[0] = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.labels[0] = 0;
  s.labels.pop_back();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("gather copies pixels and labels by index") {
  LearningSet s = tiny_set(6, 2, 2);
  auto [images, labels] = gather(s, {4, 0, 4});
  REQUIRE(images.shape == std::vector<std::size_t>{3, 2, 2, 1});
  CHECK(labels[0] == s.labels[4]);
  CHECK(labels[1] == s.labels[0]);
  CHECK(images.data[0] == s.images.data[16]);
  CHECK(images.data[4] == s.images.data[0]);
  CHECK(images.data[8] == s.images.data[16]);
  CHECK_THROWS_AS(gather(s, {6}), std::out_of_range);
}

TEST_CASE("split is a disjoint, exhaustive, deterministic partition") {
  LearningSet s = tiny_set(103, 5, 3);
  SplitResult a = split(s, 0.25, 9);
  SplitResult b = split(s, 0.25, 9);
  SplitResult c = split(s, 0.25, 10);
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.val_indices == b.val_indices);
  CHECK(a.val_indices != c.val_indices);

  std::set<std::size_t> seen;
  for (std::size_t i : a.train_indices) seen.insert(i);
  for (std::size_t i : a.val_indices) seen.insert(i);
  CHECK(seen.size() == 103);
  CHECK(a.train_indices.size() + a.val_indices.size() == 103);
  CHECK(std::is_sorted(a.train_indices.begin(), a.train_indices.end()));
  CHECK(std::is_sorted(a.val_indices.begin(), a.val_indices.end()));
}

TEST_CASE("split is stratified: per-class floor plus largest remainder") {
  LearningSet s = tiny_set(103, 5, 3);
  SplitResult r = split(s, 0.25, 9);

  // independent oracle for the per-class validation counts
  std::vector<std::size_t> nk(5, 0);
  for (int y : s.labels) nk[y]++;
  std::vector<std::size_t> want(5, 0);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  std::size_t target =
      static_cast<std::size_t>(std::llround(0.25 * 103.0));
  for (std::size_t k = 0; k < 5; ++k) {
    if (nk[k] <= 1) continue;
    double exact = 0.25 * static_cast<double>(nk[k]);
    want[k] = static_cast<std::size_t>(exact);
    if (want[k] >= nk[k]) want[k] = nk[k] - 1;
    assigned += want[k];
    rem.emplace_back(exact - static_cast<double>(want[k]), k);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (const auto& [f, k] : rem) {
    if (assigned >= target) break;
    if (want[k] + 1 >= nk[k]) continue;
    ++want[k];
    ++assigned;
  }

  std::vector<std::size_t> got(5, 0);
  for (std::size_t i : r.val_indices) got[s.labels[i]]++;
  for (std::size_t k = 0; k < 5; ++k) {
    INFO("class " << k);
    CHECK(got[k] == want[k]);
  }
}

TEST_CASE("split keeps singleton classes in train") {
  LearningSet s = tiny_set(21, 3, 4);
  // force class 2 to a single sample
  for (std::size_t i = 0; i < 21; ++i)
    if (s.labels[i] == 2) s.labels[i] = 0;
  s.labels[20] = 2;
  SplitResult r = split(s, 0.5, 1);
  for (std::size_t i : r.val_indices) CHECK(s.labels[i] != 2);
  bool in_train = false;
  for (std::size_t i : r.train_indices) in_train |= (i == 20);
  CHECK(in_train);
}

TEST_CASE("zero fraction puts everything in train") {
  LearningSet s = tiny_set(10, 2, 5);
  SplitResult r = split(s, 0.0, 0);
  CHECK(r.val_indices.empty());
  CHECK(r.train_indices.size() == 10);
  CHECK_THROWS_AS(split(s, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(s, -0.1, 0), std::invalid_argument);
}

TEST_CASE("split csv lists every index once with its subset") {
  LearningSet s = tiny_set(12, 3, 6);
  SplitResult r = split(s, 0.25, 2);
  std::string path = "split_test_tmp.csv";
  write_split_csv(path, r);
  std::ifstream f(path);
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "index,subset");
  std::size_t rows = 0, vals = 0;
  while (std::getline(f, line)) {
    CHECK(line.find(',') != std::string::npos);
    if (line.find(",validation") != std::string::npos) ++vals;
    ++rows;
  }
  CHECK(rows == 12);
  CHECK(vals == r.val_indices.size());
  std::remove(path.c_str());
}

TEST_CASE("epoch batches cover every sample exactly once") {
  std::vector<Batch> batches = epoch_batches(103, 50, 32, 4, 11, 3);
  std::vector<int> seen(103, 0);
  for (const Batch& b : batches) {
    CHECK(b.train_indices.size() <= 32);
    CHECK(b.trigger_indices.size() == 4);
    for (std::size_t i : b.train_indices) {
      REQUIRE(i < 103);
      seen[i]++;
    }
    for (std::size_t t : b.trigger_indices) REQUIRE(t < 50);
  }
  for (int c : seen) CHECK(c == 1);
  std::size_t expect_batches = (103 + 31) / 32;
  CHECK(batches.size() == expect_batches);
}

TEST_CASE("epoch batches differ across epochs but replay per (seed, epoch)") {
  std::vector<Batch> a = epoch_batches(64, 10, 16, 2, 7, 1);
  std::vector<Batch> b = epoch_batches(64, 10, 16, 2, 7, 1);
  std::vector<Batch> c = epoch_batches(64, 10, 16, 2, 7, 2);
  REQUIRE(a.size() == b.size());
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].train_indices == b[i].train_indices &&
           a[i].trigger_indices == b[i].trigger_indices;
    if (a[i].train_indices != c[i].train_indices) differs = true;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("m=0 yields trigger-free batches even without triggers") {
  std::vector<Batch> batches = epoch_batches(10, 0, 4, 0, 1, 1);
  for (const Batch& b : batches) CHECK(b.trigger_indices.empty());
  CHECK_THROWS_AS(epoch_batches(10, 0, 4, 2, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(epoch_batches(0, 5, 4, 2, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(epoch_batches(10, 5, 0, 2, 1, 1), std::invalid_argument);
}
