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

// Watermark embedding. Nine schemes differ in what is trainable, how the
// model is initialized, which batch rows receive cross-entropy, and which
// preservation loss regularizes the update:
//
//   FTLL           tune head only
//   FTAL           tune everything
//   FTAL+TWL       tune everything + alpha * weight drift penalty
//   FixLL          head frozen, tune backbone
//   FixLL+TWL      head frozen + alpha * weight drift penalty
//   FixLL+PFL      head frozen, CE on trigger rows only,
//                  beta * feature drift on the batch's train rows
//   FixLL+SPL      head frozen, CE on trigger rows only,
//                  gamma * softmax KL drift on the batch's train rows
//   scratch        fresh random model, tune everything
//   FixLL+scratch  fresh random backbone, head preset to spread prototypes
//                  and frozen
//
// Fine-tuning schemes start from the host parameters. Every batch is
// `batch_size` shuffled train samples plus `m` triggers drawn with
// replacement; an epoch covers each train sample exactly once.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/audit.hpp"
#include "deepfid/dataset.hpp"
#include "deepfid/losses.hpp"
#include "deepfid/net.hpp"
#include "deepfid/optim.hpp"
#include "deepfid/prototypes.hpp"
#include "deepfid/textio.hpp"
#include "deepfid/triggers.hpp"

namespace deepfid {

enum class Scheme {
  ftll,
  ftal,
  ftal_twl,
  fixll,
  fixll_twl,
  fixll_pfl,
  fixll_spl,
  scratch,
  fixll_scratch,
};

inline const std::vector<std::pair<Scheme, std::string>>& scheme_names() {
  static const std::vector<std::pair<Scheme, std::string>> names = {
      {Scheme::ftll, "FTLL"},
      {Scheme::ftal, "FTAL"},
      {Scheme::ftal_twl, "FTAL+TWL"},
      {Scheme::fixll, "FixLL"},
      {Scheme::fixll_twl, "FixLL+TWL"},
      {Scheme::fixll_pfl, "FixLL+PFL"},
      {Scheme::fixll_spl, "FixLL+SPL"},
      {Scheme::scratch, "scratch"},
      {Scheme::fixll_scratch, "FixLL+scratch"},
  };
  return names;
}

inline std::string scheme_name(Scheme s) {
  for (const auto& [sc, name] : scheme_names())
    if (sc == s) return name;
  throw std::logic_error("unnamed scheme");
}

inline Scheme parse_scheme(const std::string& name) {
  for (const auto& [sc, n] : scheme_names())
    if (n == name) return sc;
  std::string known;
  for (const auto& [sc, n] : scheme_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scheme '" + name + "' (one of: " + known + ")");
}

struct SchemeTraits {
  Trainable trainable = Trainable::all;
  bool use_twl = false;
  bool use_pfl = false;
  bool use_spl = false;
  bool ce_triggers_only = false;
  bool from_scratch = false;
  bool preset_head = false;
};

inline SchemeTraits scheme_traits(Scheme s) {
  switch (s) {
    case Scheme::ftll:
      return {Trainable::head_only, false, false, false, false, false, false};
    case Scheme::ftal:
      return {Trainable::all, false, false, false, false, false, false};
    case Scheme::ftal_twl:
      return {Trainable::all, true, false, false, false, false, false};
    case Scheme::fixll:
      return {Trainable::backbone_only, false, false, false, false, false, false};
    case Scheme::fixll_twl:
      return {Trainable::backbone_only, true, false, false, false, false, false};
    case Scheme::fixll_pfl:
      return {Trainable::backbone_only, false, true, false, true, false, false};
    case Scheme::fixll_spl:
      return {Trainable::backbone_only, false, false, true, true, false, false};
    case Scheme::scratch:
      return {Trainable::all, false, false, false, false, true, false};
    case Scheme::fixll_scratch:
      return {Trainable::backbone_only, false, false, false, false, true, true};
  }
  throw std::logic_error("unhandled scheme");
}

struct EmbedConfig {
  Scheme scheme = Scheme::fixll_pfl;
  double alpha = 0.01;    // weight drift penalty
  double beta = 0.01;     // feature drift penalty
  double gamma = 1000.0;  // softmax drift penalty
  std::size_t batch_size = 32;
  std::size_t m = 4;  // triggers appended to each batch
  double lr = 0.0;    // 0 = scheme default (1e-4 fine-tune, 1e-3 scratch)
  std::size_t max_epochs = 100;
  std::size_t min_epochs = 0;  // epochs to run before the success stop may fire
  double epsilon = 0.005;  // tolerated validation accuracy drop
  std::uint64_t seed = 0;
  std::size_t eval_batch = 256;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
    if (m == 0) throw std::invalid_argument("need m >= 1 triggers per batch");
    if (max_epochs == 0) throw std::invalid_argument("max_epochs must be > 0");
    if (min_epochs > max_epochs)
      throw std::invalid_argument("min_epochs must be <= max_epochs");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("epsilon must be in (0,1)");
    if (lr < 0) throw std::invalid_argument("lr must be nonnegative");
    if (eval_batch == 0) throw std::invalid_argument("eval_batch must be > 0");
  }

  double effective_lr(const SchemeTraits& t) const {
    if (lr > 0) return lr;
    return t.from_scratch ? 1e-3 : 1e-4;
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double val_acc = 0.0;
  double trig_acc = 0.0;
  double twl = 0.0;
  double avg_pfl = 0.0;
  double avg_spl = 0.0;
  double boundary_delta = 0.0;
};

struct EmbedResult {
  Network net;
  std::vector<EpochStats> history;
  std::size_t epochs_used = 0;
  bool converged = false;       // early stop fired: triggers 100% and
                                // validation drop within epsilon
  std::size_t best_epoch = 0;   // 1-based epoch the returned model comes from
};

inline void write_history_csv(const std::string& path,
                              const std::vector<EpochStats>& history,
                              const std::string& comment = "") {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  if (!comment.empty()) f << "# " << comment << "\n";
  f << "epoch,val_acc,trig_acc,twl,avg_pfl,avg_spl,boundary_delta\n";
  for (const EpochStats& e : history)
    f << e.epoch << "," << fmt_g17(e.val_acc) << "," << fmt_g17(e.trig_acc)
      << "," << fmt_g17(e.twl) << "," << fmt_g17(e.avg_pfl) << ","
      << fmt_g17(e.avg_spl) << "," << fmt_g17(e.boundary_delta) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace detail {

// Copies the selected train samples and key triggers into one batch.
inline std::pair<Tensor, std::vector<int>> assemble_batch(
    const LearningSet& train, const WatermarkKey& key, const Batch& batch) {
  std::size_t per = train.images.sample_stride();
  std::size_t total = batch.train_indices.size() + batch.trigger_indices.size();
  std::vector<std::size_t> shape = train.images.shape;
  shape[0] = total;
  Tensor images = Tensor::zeros(shape);
  std::vector<int> labels(total);
  for (std::size_t i = 0; i < batch.train_indices.size(); ++i) {
    std::copy_n(train.images.data.begin() + batch.train_indices[i] * per, per,
                images.data.begin() + i * per);
    labels[i] = train.labels[batch.train_indices[i]];
  }
  std::size_t base = batch.train_indices.size();
  for (std::size_t i = 0; i < batch.trigger_indices.size(); ++i) {
    std::copy_n(key.triggers.data.begin() + batch.trigger_indices[i] * per, per,
                images.data.begin() + (base + i) * per);
    labels[base + i] = key.labels[batch.trigger_indices[i]];
  }
  return {std::move(images), std::move(labels)};
}

struct BestTracker {
  // Best epoch with perfect trigger accuracy: max val_acc, ties by lower
  // avg_pfl, then by earlier epoch. Fallback when no epoch qualifies: max
  // trig_acc, ties by val_acc, then earlier epoch.
  std::optional<EpochStats> candidate;
  Network candidate_net;
  std::optional<EpochStats> fallback;
  Network fallback_net;

  void offer(const EpochStats& e, const Network& net) {
    if (e.trig_acc == 1.0) {
      bool better = !candidate ||
                    e.val_acc > candidate->val_acc ||
                    (e.val_acc == candidate->val_acc &&
                     e.avg_pfl < candidate->avg_pfl);
      if (better) {
        candidate = e;
        candidate_net = net;
      }
    }
    bool fb_better = !fallback || e.trig_acc > fallback->trig_acc ||
                     (e.trig_acc == fallback->trig_acc &&
                      e.val_acc > fallback->val_acc);
    if (fb_better) {
      fallback = e;
      fallback_net = net;
    }
  }

  std::pair<EpochStats, Network> take() {
    if (candidate) return {*candidate, std::move(candidate_net)};
    if (fallback) return {*fallback, std::move(fallback_net)};
    throw std::logic_error("no epochs recorded");
  }
};

}  // namespace detail

// Embeds the key into (a derivative of) the host model. `snap` must be the
// host snapshot over `train`. The returned model is the best recorded epoch:
// highest validation accuracy among epochs with perfect trigger accuracy
// (ties: lower avg_pfl); if no epoch reached perfect trigger accuracy, the
// epoch with the highest trigger accuracy (ties: higher val_acc). The
// `converged` flag reports whether the early-stop condition (perfect
// triggers and validation drop within epsilon of the host) was met.
inline EmbedResult embed_with_snapshot(const HostSnapshot& snap,
                                       const LearningSet& train,
                                       const LearningSet& validation,
                                       const WatermarkKey& key,
                                       const EmbedConfig& cfg) {
  cfg.validate();
  train.validate();
  validation.validate();
  key.validate();
  if (key.triggers.shape != std::vector<std::size_t>{key.count(),
                                                     snap.net.input_shape[0],
                                                     snap.net.input_shape[1],
                                                     snap.net.input_shape[2]})
    throw std::invalid_argument("trigger shape does not match network input");
  if (static_cast<std::size_t>(key.num_classes) != snap.net.classes())
    throw std::invalid_argument("key class count does not match network head");

  SchemeTraits traits = scheme_traits(cfg.scheme);
  double host_val_acc = accuracy(snap.net, validation, cfg.eval_batch);

  Network net = snap.net;  // fine-tune start
  if (traits.from_scratch) {
    net = make_network(snap.net.input_shape,
                       backbone_descriptor(snap.net.backbone),
                       snap.net.classes());
    init_network(net, cfg.seed);
    if (traits.preset_head) {
      net.head = preset_prototypes(net.feature_dim(), net.classes(), cfg.seed);
      net.note_param_change();
    }
  }
  FreezeMask mask = freeze(net, traits.trainable);
  OptimizerState opt = make_optimizer(net, cfg.effective_lr(traits));

  // Head-only tuning never changes the backbone, so every feature vector is
  // fixed for the whole run; train on cached features instead of images.
  bool cached_path = traits.trainable == Trainable::head_only;
  Tensor train_feats, val_feats, trig_feats;
  if (cached_path) {
    train_feats = snap.features;  // backbone identical to host
    val_feats = batched_features(net, validation.images, cfg.eval_batch);
    trig_feats = batched_features(net, key.triggers, cfg.eval_batch);
  }

  double n_train = static_cast<double>(train.count());
  EmbedResult result;
  detail::BestTracker best;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<Batch> batches = epoch_batches(
        train.count(), key.count(), cfg.batch_size, cfg.m, cfg.seed, epoch);
    for (const Batch& b : batches) {
      std::size_t T = b.train_indices.size();
      std::size_t total = T + b.trigger_indices.size();
      if (cached_path) {
        // Assemble the feature-row batch and step the head directly.
        Tensor rows = Tensor::zeros({total, net.feature_dim()});
        std::vector<int> labels(total);
        std::size_t d = net.feature_dim();
        for (std::size_t i = 0; i < T; ++i) {
          std::copy_n(train_feats.data.begin() + b.train_indices[i] * d, d,
                      rows.data.begin() + i * d);
          labels[i] = train.labels[b.train_indices[i]];
        }
        for (std::size_t i = 0; i < b.trigger_indices.size(); ++i) {
          std::copy_n(trig_feats.data.begin() + b.trigger_indices[i] * d, d,
                      rows.data.begin() + (T + i) * d);
          labels[T + i] = key.labels[b.trigger_indices[i]];
        }
        Tensor logits = head_logits(net, rows);
        Tensor dlogits = cross_entropy_grad_rows(logits, labels, 0, total);
        GradientSet gs = zero_gradients(net);
        CMatMap zm(rows.data.data(), static_cast<Eigen::Index>(total),
                   static_cast<Eigen::Index>(d));
        CMatMap gm(dlogits.data.data(), static_cast<Eigen::Index>(total),
                   static_cast<Eigen::Index>(net.classes()));
        MatMap gw(gs.grads.back().data.data(), static_cast<Eigen::Index>(d),
                  static_cast<Eigen::Index>(net.classes()));
        gw.noalias() = zm.transpose() * gm;
        adam_step(net, gs, opt, mask);
        continue;
      }
      auto [images, labels] = detail::assemble_batch(train, key, b);
      Trace trace;
      Tensor logits = forward(net, images, &trace);
      Tensor dlogits =
          traits.ce_triggers_only
              ? cross_entropy_grad_rows(logits, labels, T, total)
              : cross_entropy_grad_rows(logits, labels, 0, total);
      if (traits.use_spl) {
        Tensor host_rows = gather_rows(snap.probs, b.train_indices);
        Tensor g = spl_logit_grad(logits, host_rows, 0, T, cfg.gamma);
        for (std::size_t i = 0; i < dlogits.size(); ++i)
          dlogits.data[i] += g.data[i];
      }
      Tensor dfeat;
      if (traits.use_pfl) {
        Tensor host_rows = gather_rows(snap.features, b.train_indices);
        dfeat = pfl_feature_grad(trace.features, host_rows, 0, T, cfg.beta);
      }
      GradientSet gs = backward(net, trace, dlogits, dfeat, mask);
      if (traits.use_twl) add_twl_gradient(gs, net, snap.net, cfg.alpha, mask);
      adam_step(net, gs, opt, mask);
    }

    for (const ParamRef& p : params(net))
      if (!p.tensor->all_finite())
        throw std::runtime_error(
            "embedding diverged: non-finite values in " + p.name +
            " at epoch " + std::to_string(epoch));

    EpochStats ev;
    ev.epoch = epoch;
    if (cached_path) {
      Tensor val_logits = head_logits(net, val_feats);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < validation.count(); ++i)
        if (argmax_row(val_logits.data.data() + i * net.classes(),
                       net.classes()) == validation.labels[i])
          ++hits;
      ev.val_acc = static_cast<double>(hits) / static_cast<double>(validation.count());
      Tensor trig_logits = head_logits(net, trig_feats);
      hits = 0;
      for (std::size_t i = 0; i < key.count(); ++i)
        if (argmax_row(trig_logits.data.data() + i * net.classes(),
                       net.classes()) == key.labels[i])
          ++hits;
      ev.trig_acc = static_cast<double>(hits) / static_cast<double>(key.count());
      ev.twl = loss_twl(net, snap.net);
      ev.avg_pfl = loss_pfl(train_feats, snap.features) / n_train;
      Tensor probs = softmax(head_logits(net, train_feats));
      ev.avg_spl = loss_spl(snap.probs, probs) / n_train;
      ev.boundary_delta = boundary_delta(net.head, snap.net.head);
    } else {
      ev.val_acc = accuracy(net, validation, cfg.eval_batch);
      ev.trig_acc = trigger_accuracy(net, key, cfg.eval_batch);
      ev.twl = loss_twl(net, snap.net);
      Tensor feats = batched_features(net, train.images, cfg.eval_batch);
      ev.avg_pfl = loss_pfl(feats, snap.features) / n_train;
      Tensor probs = softmax(head_logits(net, feats));
      ev.avg_spl = loss_spl(snap.probs, probs) / n_train;
      ev.boundary_delta = boundary_delta(net.head, snap.net.head);
    }
    result.history.push_back(ev);
    best.offer(ev, net);

    // `converged` records that the success condition held at some epoch;
    // min_epochs only delays the stop, it does not change the flag.
    if (ev.trig_acc == 1.0 && host_val_acc - ev.val_acc <= cfg.epsilon) {
      result.converged = true;
      if (epoch >= cfg.min_epochs) break;
    }
  }

  result.epochs_used = result.history.size();
  auto [stats, chosen] = best.take();
  result.net = std::move(chosen);
  result.best_epoch = stats.epoch;
  return result;
}

inline EmbedResult embed(const Network& host, const LearningSet& train,
                         const LearningSet& validation, const WatermarkKey& key,
                         const EmbedConfig& cfg) {
  HostSnapshot snap = make_snapshot(host, train, cfg.eval_batch);
  return embed_with_snapshot(snap, train, validation, key, cfg);
}

// ---------------------------------------------------------------------------
// Plain cross-entropy training (no triggers). Used to train host models and
// as the fine-tuning attack primitive. When `track` is non-null, per-epoch
// mean training CE and validation accuracy are recorded; when `keep_best`
// is set the parameters of the best-validation epoch are restored at the end.

struct TrainEpoch {
  std::size_t epoch = 0;
  double train_ce = 0.0;
  double val_acc = 0.0;
};

inline void train_plain(Network& net, const LearningSet& train,
                        const LearningSet* validation, std::size_t epochs,
                        double lr, std::size_t batch_size, std::uint64_t seed,
                        bool keep_best = false,
                        std::vector<TrainEpoch>* track = nullptr,
                        std::size_t eval_batch = 256) {
  train.validate();
  if (keep_best && !validation)
    throw std::invalid_argument("keep_best needs a validation set");
  FreezeMask mask = freeze(net, Trainable::all);
  OptimizerState opt = make_optimizer(net, lr);
  Network best_net = net;
  double best_acc = -1.0;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<Batch> batches =
        epoch_batches(train.count(), 0, batch_size, 0, seed, epoch);
    double ce_sum = 0.0;
    std::size_t ce_rows = 0;
    for (const Batch& b : batches) {
      auto [images, labels] = gather(train, b.train_indices);
      Trace trace;
      Tensor logits = forward(net, images, &trace);
      ce_sum += cross_entropy(logits, labels) * static_cast<double>(labels.size());
      ce_rows += labels.size();
      Tensor dlogits = cross_entropy_grad(logits, labels);
      GradientSet gs = backward(net, trace, dlogits, Tensor(), mask);
      adam_step(net, gs, opt, mask);
    }
    TrainEpoch te;
    te.epoch = epoch;
    te.train_ce = ce_sum / static_cast<double>(ce_rows);
    if (validation) {
      te.val_acc = accuracy(net, *validation, eval_batch);
      if (keep_best && te.val_acc > best_acc) {
        best_acc = te.val_acc;
        best_net = net;
      }
    }
    if (track) track->push_back(te);
  }
  if (keep_best && best_acc >= 0.0) net = std::move(best_net);
}

}  // namespace deepfid
