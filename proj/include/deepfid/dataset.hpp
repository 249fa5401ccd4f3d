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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

// A labeled image set. Images are NHWC in [0,1]; labels in [0, num_classes).
struct LearningSet {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t count() const { return labels.size(); }

  void validate() const {
    if (images.rank() != 4)
      throw std::invalid_argument("learning set images must be [n,H,W,C]");
    if (images.dim(0) != labels.size())
      throw std::invalid_argument("image/label count mismatch");
    if (num_classes < 2)
      throw std::invalid_argument("learning set needs >= 2 classes");
    for (int y : labels)
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("label " + std::to_string(y) +
                                    " outside [0," +
                                    std::to_string(num_classes) + ")");
  }
};

// Copies the selected samples into a contiguous batch.
inline std::pair<Tensor, std::vector<int>> gather(
    const LearningSet& set, const std::vector<std::size_t>& indices) {
  std::size_t per = set.images.sample_stride();
  std::vector<std::size_t> shape = set.images.shape;
  shape[0] = indices.size();
  Tensor batch = Tensor::zeros(shape);
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::size_t src = indices[i];
    if (src >= set.count()) throw std::out_of_range("gather: index out of range");
    std::copy_n(set.images.data.begin() + src * per, per,
                batch.data.begin() + i * per);
    labels[i] = set.labels[src];
  }
  return {std::move(batch), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Stratified split. Validation counts per class follow floor + largest
// remainder so the overall fraction is honored as closely as integer counts
// allow; a class with a single sample always stays in train. Both subsets
// keep ascending original-index order, and the chosen index partition is
// returned for export.

struct SplitResult {
  LearningSet train;
  LearningSet validation;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

inline SplitResult split(const LearningSet& set, double val_fraction,
                         std::uint64_t seed) {
  set.validate();
  if (!(val_fraction >= 0.0) || !(val_fraction < 1.0))
    throw std::invalid_argument("val_fraction must be in [0,1)");
  std::size_t n = set.count();
  std::size_t K = static_cast<std::size_t>(set.num_classes);

  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(set.labels[i])].push_back(i);

  // Per-class validation counts: floor(frac*n_k), then distribute the
  // remainder of round(frac*n) by largest fractional part (ties: lower class
  // index first). Singleton classes are pinned to train.
  std::size_t target = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(n)));
  std::vector<std::size_t> take(K, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t nk = by_class[k].size();
    if (nk <= 1) continue;
    double exact = val_fraction * static_cast<double>(nk);
    take[k] = static_cast<std::size_t>(exact);
    if (take[k] >= nk) take[k] = nk - 1;  // keep at least one train sample
    assigned += take[k];
    remainders.emplace_back(exact - static_cast<double>(take[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [frac, k] : remainders) {
    if (assigned >= target) break;
    if (take[k] + 1 >= by_class[k].size()) continue;
    ++take[k];
    ++assigned;
  }

  SplitResult out;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t>& idx = by_class[k];
    Rng rng(derive_seed(seed, streams::kSplit, k));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < take[k])
        out.val_indices.push_back(idx[i]);
      else
        out.train_indices.push_back(idx[i]);
    }
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.val_indices.begin(), out.val_indices.end());

  auto build = [&](const std::vector<std::size_t>& indices) {
    auto [images, labels] = gather(set, indices);
    LearningSet s;
    s.images = std::move(images);
    s.labels = std::move(labels);
    s.num_classes = set.num_classes;
    return s;
  };
  out.train = build(out.train_indices);
  out.validation = build(out.val_indices);
  return out;
}

inline void write_split_csv(const std::string& path, const SplitResult& sr) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << "index,subset\n";
  std::size_t n = sr.train_indices.size() + sr.val_indices.size();
  std::vector<char> is_val(n, 0);
  for (std::size_t i : sr.val_indices) is_val[i] = 1;
  for (std::size_t i = 0; i < n; ++i)
    f << i << "," << (is_val[i] ? "validation" : "train") << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Epoch batching. Every training sample appears exactly once per epoch in a
// seeded shuffled order; each batch is then padded with `m` trigger indices
// drawn with replacement. Pure index math; callers gather pixels themselves.

struct Batch {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> trigger_indices;
};

inline std::vector<Batch> epoch_batches(std::size_t n_train,
                                        std::size_t n_triggers,
                                        std::size_t batch_size, std::size_t m,
                                        std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  if (n_train == 0) throw std::invalid_argument("no training samples");
  if (m > 0 && n_triggers == 0)
    throw std::invalid_argument("m > 0 but the trigger set is empty");
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle_rng(derive_seed(seed, streams::kShuffle, epoch));
  shuffle_rng.shuffle(perm);
  Rng pick_rng(derive_seed(seed, streams::kTriggerPick, epoch));
  std::vector<Batch> batches;
  for (std::size_t off = 0; off < n_train; off += batch_size) {
    Batch b;
    std::size_t end = std::min(off + batch_size, n_train);
    b.train_indices.assign(perm.begin() + off, perm.begin() + end);
    for (std::size_t i = 0; i < m; ++i)
      b.trigger_indices.push_back(pick_rng.below(n_triggers));
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace deepfid
