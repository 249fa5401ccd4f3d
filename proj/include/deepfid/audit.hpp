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

// Measurements over a watermarked model: task accuracy, trigger accuracy,
// the preservation metrics against the host snapshot, ownership verification,
// and the CSV/JSON report plumbing.

#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "deepfid/dataset.hpp"
#include "deepfid/losses.hpp"
#include "deepfid/net.hpp"
#include "deepfid/prototypes.hpp"
#include "deepfid/textio.hpp"
#include "deepfid/triggers.hpp"

namespace deepfid {

// Argmax with lowest-index tie-break.
inline int argmax_row(const double* row, std::size_t K) {
  int best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (row[k] > row[best]) best = static_cast<int>(k);
  return best;
}

inline std::vector<int> predict(const Network& net, const Tensor& images,
                                std::size_t eval_batch = 256) {
  Tensor features = batched_features(net, images, eval_batch);
  Tensor logits = head_logits(net, features);
  std::size_t n = logits.dim(0), K = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = argmax_row(logits.data.data() + i * K, K);
  return out;
}

inline double accuracy(const Network& net, const LearningSet& set,
                       std::size_t eval_batch = 256) {
  set.validate();
  if (set.count() == 0) throw std::invalid_argument("accuracy of an empty set");
  std::vector<int> pred = predict(net, set.images, eval_batch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == set.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline double trigger_accuracy(const Network& net, const WatermarkKey& key,
                               std::size_t eval_batch = 256) {
  key.validate();
  if (key.count() == 0) throw std::invalid_argument("empty watermark key");
  std::vector<int> pred = predict(net, key.triggers, eval_batch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == key.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Fidelity report: one row per (scheme, seed) with every preservation metric.
// avg_pfl and avg_spl are per-training-sample averages; twl and
// boundary_delta are totals.

struct FidelityReport {
  std::string scheme;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  std::size_t K = 0;
  double val_acc = 0.0;
  double trig_acc = 0.0;
  double twl = 0.0;
  double avg_pfl = 0.0;
  double avg_spl = 0.0;
  double boundary_delta = 0.0;
  std::size_t epochs = 0;
};

// Measures a watermarked model against the host snapshot. `scheme`, `seed`
// and `epochs` are caller-supplied provenance for the row.
inline FidelityReport report(const HostSnapshot& snap, const Network& marked,
                             const LearningSet& train,
                             const LearningSet& validation,
                             const WatermarkKey& key, const std::string& scheme,
                             std::uint64_t seed, std::size_t epochs,
                             std::size_t eval_batch = 256) {
  FidelityReport r;
  r.scheme = scheme;
  r.seed = seed;
  r.d = marked.feature_dim();
  r.K = marked.classes();
  r.epochs = epochs;
  r.val_acc = accuracy(marked, validation, eval_batch);
  r.trig_acc = trigger_accuracy(marked, key, eval_batch);
  r.twl = loss_twl(marked, snap.net);
  Tensor features = batched_features(marked, train.images, eval_batch);
  double n = static_cast<double>(train.count());
  r.avg_pfl = loss_pfl(features, snap.features) / n;
  Tensor probs = softmax(head_logits(marked, features));
  r.avg_spl = loss_spl(snap.probs, probs) / n;
  r.boundary_delta = boundary_delta(marked.head, snap.net.head);
  return r;
}

inline std::string report_csv_header() {
  return "scheme,seed,d,K,val_acc,trig_acc,twl,avg_pfl,avg_spl,boundary_delta,"
         "epochs";
}

inline std::string report_csv_row(const FidelityReport& r) {
  std::string out;
  out += r.scheme;
  out += "," + std::to_string(r.seed);
  out += "," + std::to_string(r.d);
  out += "," + std::to_string(r.K);
  out += "," + fmt_g17(r.val_acc);
  out += "," + fmt_g17(r.trig_acc);
  out += "," + fmt_g17(r.twl);
  out += "," + fmt_g17(r.avg_pfl);
  out += "," + fmt_g17(r.avg_spl);
  out += "," + fmt_g17(r.boundary_delta);
  out += "," + std::to_string(r.epochs);
  return out;
}

// Writes rows under the canonical header. `comment` (config hash, seed)
// rides as a leading '#' line when non-empty.
inline void write_report_csv(const std::string& path,
                             const std::vector<FidelityReport>& rows,
                             const std::string& comment = "") {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  if (!comment.empty()) f << "# " << comment << "\n";
  f << report_csv_header() << "\n";
  for (const FidelityReport& r : rows) f << report_csv_row(r) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string report_json(const FidelityReport& r,
                               const std::string& config_hash) {
  std::string out = "{";
  out += "\"scheme\":\"" + r.scheme + "\"";
  out += ",\"seed\":" + std::to_string(r.seed);
  out += ",\"d\":" + std::to_string(r.d);
  out += ",\"K\":" + std::to_string(r.K);
  out += ",\"val_acc\":" + fmt_g17(r.val_acc);
  out += ",\"trig_acc\":" + fmt_g17(r.trig_acc);
  out += ",\"twl\":" + fmt_g17(r.twl);
  out += ",\"avg_pfl\":" + fmt_g17(r.avg_pfl);
  out += ",\"avg_spl\":" + fmt_g17(r.avg_spl);
  out += ",\"boundary_delta\":" + fmt_g17(r.boundary_delta);
  out += ",\"epochs\":" + std::to_string(r.epochs);
  if (!config_hash.empty()) out += ",\"config\":\"" + config_hash + "\"";
  out += "}";
  return out;
}

// ---------------------------------------------------------------------------
// Feature dump for plotting: one row per sample with its feature vector,
// then the prototype columns so the decision geometry can be drawn on top.

inline void dump_features(const std::string& path, const Network& net,
                          const LearningSet& set, std::size_t eval_batch = 256,
                          const std::string& comment = "") {
  set.validate();
  Tensor features = batched_features(net, set.images, eval_batch);
  std::size_t d = net.feature_dim(), K = net.classes();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  if (!comment.empty()) f << "# " << comment << "\n";
  f << "kind,index,label";
  for (std::size_t j = 0; j < d; ++j) f << ",z" << j;
  f << "\n";
  for (std::size_t i = 0; i < set.count(); ++i) {
    f << "sample," << i << "," << set.labels[i];
    for (std::size_t j = 0; j < d; ++j)
      f << "," << fmt_g17(features.data[i * d + j]);
    f << "\n";
  }
  for (std::size_t k = 0; k < K; ++k) {
    f << "prototype," << k << "," << k;
    for (std::size_t j = 0; j < d; ++j)
      f << "," << fmt_g17(net.head.data[j * K + k]);
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Ownership verification: the key holder claims the model if the fraction of
// triggers classified as the key dictates clears the threshold. The threshold
// must sit strictly above chance (1/K) or the test is meaningless.

struct Verdict {
  bool owned = false;
  double match_fraction = 0.0;
  double threshold = 0.0;
};

inline Verdict verify(const Network& net, const WatermarkKey& key,
                      double threshold = 0.9, std::size_t eval_batch = 256) {
  double chance = 1.0 / static_cast<double>(key.num_classes);
  if (!(threshold > chance) || !(threshold <= 1.0))
    throw std::invalid_argument(
        "verification threshold must be in (1/K, 1], got " +
        fmt_g17(threshold));
  Verdict v;
  v.threshold = threshold;
  v.match_fraction = trigger_accuracy(net, key, eval_batch);
  v.owned = v.match_fraction >= threshold;
  return v;
}

}  // namespace deepfid
