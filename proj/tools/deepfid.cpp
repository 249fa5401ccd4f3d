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

// Command-line front end: train hosts, embed watermarks, audit fidelity,
// attack models, verify ownership, sweep hyperparameters.
//
// Exit codes: 0 success, 2 usage/config error, 3 embedding non-convergence,
// 4 verification negative.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deepfid/deepfid.hpp"

namespace fs = std::filesystem;
using namespace deepfid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNoConverge = 3;
constexpr int kExitNotOwned = 4;

// Common options shared by the subcommands.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI configuration file");
  cmd->add_option("--seed", c.seed, "run seed")
      ->each([&c](const std::string&) { c.seed_given = true; });
  cmd->add_option("--out-dir", c.out_dir, "directory for output artifacts");
}

Config load_cfg(const Common& c) {
  Config cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  return cfg;
}

std::uint64_t effective_seed(const Common& c, const Config& cfg) {
  if (c.seed_given) return c.seed;
  return cfg.get_u64("data", "seed", 0);  // data seed is the fallback only
}

// Relative data paths fall back to $DEEPFID_DATA_DIR when not found as given.
std::string resolve_data_path(const std::string& path) {
  if (fs::exists(path)) return path;
  const char* root = std::getenv("DEEPFID_DATA_DIR");
  if (root && *root && !fs::path(path).is_absolute()) {
    fs::path candidate = fs::path(root) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  throw ConfigError("data file not found: " + path +
                    (root && *root ? " (also tried under DEEPFID_DATA_DIR=" +
                                         std::string(root) + ")"
                                   : " (DEEPFID_DATA_DIR not set)"));
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

// Loads the full labeled set named by [data]: either procedural synthetic
// digits or IDX image/label files.
LearningSet load_full_set(const Config& cfg) {
  LearningSet set;
  if (cfg.get_bool("data", "synthetic", false)) {
    std::size_t count = cfg.get_size("data", "count", 12000);
    std::uint64_t dseed = cfg.get_u64("data", "seed", 0);
    set = generate_digits(count, dseed);
  } else {
    std::string images = cfg.require("data", "images");
    std::string labels = cfg.require("data", "labels");
    IdxContent ic = parse_idx_file(resolve_data_path(images));
    if (ic.is_labels)
      throw ConfigError(images + ": expected an image file, found labels");
    IdxContent lc = parse_idx_file(resolve_data_path(labels));
    if (!lc.is_labels)
      throw ConfigError(labels + ": expected a label file, found images");
    set.images = std::move(ic.images);
    set.labels = std::move(lc.labels);
    set.num_classes = static_cast<int>(cfg.get_size("model", "classes", 10));
    if (set.images.dim(0) != set.labels.size())
      throw ConfigError("image/label count mismatch: " +
                        std::to_string(set.images.dim(0)) + " vs " +
                        std::to_string(set.labels.size()));
  }
  set.validate();
  return set;
}

SplitResult load_split(const Config& cfg) {
  LearningSet all = load_full_set(cfg);
  double frac = cfg.get_double("data", "val_fraction", 1.0 / 6.0);
  std::uint64_t dseed = cfg.get_u64("data", "seed", 0);
  return split(all, frac, dseed);
}

std::string stamp(const Config& cfg, std::uint64_t seed) {
  return "config=" + cfg.hash() + " seed=" + std::to_string(seed);
}

EmbedConfig embed_config_from(const Config& cfg, std::uint64_t seed) {
  EmbedConfig ec;
  ec.scheme = parse_scheme(cfg.get("embed", "scheme", "FixLL+PFL"));
  ec.alpha = cfg.get_double("embed", "alpha", 0.01);
  ec.beta = cfg.get_double("embed", "beta", 0.01);
  ec.gamma = cfg.get_double("embed", "gamma", 1000.0);
  ec.m = cfg.get_size("embed", "m", 4);
  ec.batch_size = cfg.get_size("embed", "batch_size", 32);
  ec.lr = cfg.get_double("embed", "lr", 0.0);
  ec.max_epochs = cfg.get_size("embed", "max_epochs", 100);
  ec.min_epochs = cfg.get_size("embed", "min_epochs", 0);
  ec.epsilon = cfg.get_double("embed", "epsilon", 0.005);
  ec.eval_batch = cfg.get_size("embed", "eval_batch", 256);
  ec.seed = seed;
  return ec;
}

// Runs one embedding and writes all artifacts into `dir`. Returns the exit
// code and, through `out_report`, the audited row.
int run_embed_cell(const Config& cfg, const HostSnapshot& snap,
                   const SplitResult& sr, const WatermarkKey& key,
                   const EmbedConfig& ec, const std::string& dir,
                   FidelityReport* out_report) {
  fs::create_directories(dir);
  EmbedResult er = embed_with_snapshot(snap, sr.train, sr.validation, key, ec);
  std::string comment = stamp(cfg, ec.seed);
  write_history_csv((fs::path(dir) / "history.csv").string(), er.history, comment);
  std::map<std::string, std::string> extra = {
      {"config", cfg.hash()},
      {"seed", std::to_string(ec.seed)},
      {"scheme", scheme_name(ec.scheme)},
      {"epochs", std::to_string(er.epochs_used)},
      {"best_epoch", std::to_string(er.best_epoch)},
      {"converged", er.converged ? "1" : "0"},
  };
  save_network((fs::path(dir) / "wm.ckpt").string(), er.net, extra);
  FidelityReport rep = report(snap, er.net, sr.train, sr.validation, key,
                              scheme_name(ec.scheme), ec.seed, er.epochs_used,
                              ec.eval_batch);
  write_report_csv((fs::path(dir) / "report.csv").string(), {rep}, comment);
  write_file_bytes((fs::path(dir) / "report.json").string(),
                   report_json(rep, cfg.hash()) + "\n");
  if (out_report) *out_report = rep;
  return er.converged ? kExitOk : kExitNoConverge;
}

WatermarkKey load_key_checked(const std::string& path) {
  return load_key(resolve_data_path(path));
}

int cmd_train_host(const Common& c, const Config& cfg) {
  SplitResult sr = load_split(cfg);
  std::uint64_t seed = effective_seed(c, cfg);
  std::string backbone = cfg.get(
      "model", "backbone",
      "conv:8:3:1,relu,maxpool:2,conv:16:3:1,relu,maxpool:2,flatten,dense:64");
  std::vector<std::size_t> input = {sr.train.images.dim(1),
                                    sr.train.images.dim(2),
                                    sr.train.images.dim(3)};
  Network net =
      make_network(input, backbone, cfg.get_size("model", "classes", 10));
  init_network(net, seed);
  std::vector<TrainEpoch> track;
  train_plain(net, sr.train, &sr.validation, cfg.get_size("model", "epochs", 100),
              cfg.get_double("model", "lr", 1e-3),
              cfg.get_size("model", "batch_size", 32), seed, true, &track);
  save_network(out_path(c, "host.ckpt"), net,
               {{"config", cfg.hash()}, {"seed", std::to_string(seed)}});
  std::string comment = stamp(cfg, seed);
  {
    std::string text = "# " + comment + "\nepoch,train_ce,val_acc\n";
    for (const TrainEpoch& e : track)
      text += std::to_string(e.epoch) + "," + fmt_g17(e.train_ce) + "," +
              fmt_g17(e.val_acc) + "\n";
    write_file_bytes(out_path(c, "train_metrics.csv"), text);
  }
  write_split_csv(out_path(c, "split.csv"), sr);
  std::printf("host: val_acc=%s -> %s\n",
              fmt_g17(accuracy(net, sr.validation)).c_str(),
              out_path(c, "host.ckpt").c_str());
  return kExitOk;
}

int cmd_embed(const Common& c, const Config& cfg, const std::string& host_path,
              const std::string& key_path) {
  SplitResult sr = load_split(cfg);
  LoadedNetwork host = load_network(resolve_data_path(host_path));
  WatermarkKey key = load_key_checked(key_path);
  std::uint64_t seed = c.seed_given ? c.seed : 0;
  EmbedConfig ec = embed_config_from(cfg, seed);
  HostSnapshot snap = make_snapshot(host.net, sr.train, ec.eval_batch);
  FidelityReport rep;
  int rc = run_embed_cell(cfg, snap, sr, key, ec, c.out_dir, &rep);
  std::printf("%s seed=%llu: val=%s trig=%s epochs=%zu%s\n",
              rep.scheme.c_str(), static_cast<unsigned long long>(rep.seed),
              fmt_g17(rep.val_acc).c_str(), fmt_g17(rep.trig_acc).c_str(),
              rep.epochs, rc == kExitNoConverge ? " (did not converge)" : "");
  return rc;
}

int cmd_audit(const Common& c, const Config& cfg, const std::string& host_path,
              const std::string& wm_path, const std::string& key_path,
              const std::string& features_path) {
  SplitResult sr = load_split(cfg);
  LoadedNetwork host = load_network(resolve_data_path(host_path));
  LoadedNetwork wm = load_network(resolve_data_path(wm_path));
  WatermarkKey key = load_key_checked(key_path);
  std::size_t eval_batch = cfg.get_size("embed", "eval_batch", 256);
  HostSnapshot snap = make_snapshot(host.net, sr.train, eval_batch);
  std::string scheme = wm.preamble.count("scheme") ? wm.preamble.at("scheme")
                                                   : "unknown";
  std::uint64_t seed =
      wm.preamble.count("seed") ? std::stoull(wm.preamble.at("seed")) : 0;
  std::size_t epochs =
      wm.preamble.count("epochs") ? std::stoull(wm.preamble.at("epochs")) : 0;
  FidelityReport rep = report(snap, wm.net, sr.train, sr.validation, key,
                              scheme, seed, epochs, eval_batch);
  std::string comment = stamp(cfg, seed);
  write_report_csv(out_path(c, "report.csv"), {rep}, comment);
  write_file_bytes(out_path(c, "report.json"), report_json(rep, cfg.hash()) + "\n");
  if (!features_path.empty())
    dump_features(out_path(c, features_path), wm.net, sr.train, eval_batch,
                  comment);
  std::printf("%s\n", report_json(rep, cfg.hash()).c_str());
  return kExitOk;
}

int cmd_attack(const Common& c, const Config& cfg, const std::string& host_path,
               const std::string& wm_path, const std::string& key_path,
               const std::string& kind, double fraction, std::size_t epochs,
               double lr, int bits) {
  SplitResult sr = load_split(cfg);
  LoadedNetwork host = load_network(resolve_data_path(host_path));
  LoadedNetwork wm = load_network(resolve_data_path(wm_path));
  WatermarkKey key = load_key_checked(key_path);
  std::size_t eval_batch = cfg.get_size("embed", "eval_batch", 256);
  std::uint64_t seed = c.seed_given ? c.seed : 0;

  Network attacked;
  std::map<std::string, std::string> how = {{"attack", kind}};
  if (kind == "finetune") {
    attacked = finetune_attack(wm.net, sr.train, epochs, lr,
                               cfg.get_size("attack", "batch_size", 32), seed);
    how["attack_epochs"] = std::to_string(epochs);
    how["attack_lr"] = fmt_g17(lr);
  } else if (kind == "truncate") {
    attacked = truncate_weights(wm.net, bits);
    how["attack_bits"] = std::to_string(bits);
  } else if (kind == "prune") {
    attacked = prune_weights(wm.net, fraction);
    how["attack_fraction"] = fmt_g17(fraction);
  } else {
    throw ConfigError("unknown attack '" + kind +
                      "' (finetune | truncate | prune)");
  }

  HostSnapshot snap = make_snapshot(host.net, sr.train, eval_batch);
  std::string scheme = wm.preamble.count("scheme") ? wm.preamble.at("scheme")
                                                   : "unknown";
  std::uint64_t wm_seed =
      wm.preamble.count("seed") ? std::stoull(wm.preamble.at("seed")) : 0;
  FidelityReport before = report(snap, wm.net, sr.train, sr.validation, key,
                                 scheme, wm_seed, 0, eval_batch);
  FidelityReport after = report(snap, attacked, sr.train, sr.validation, key,
                                scheme + "+" + kind, wm_seed,
                                kind == "finetune" ? epochs : 0, eval_batch);
  std::string comment = stamp(cfg, seed);
  how["config"] = cfg.hash();
  how["seed"] = std::to_string(seed);
  save_network(out_path(c, "attacked.ckpt"), attacked, how);
  write_report_csv(out_path(c, "report_before.csv"), {before}, comment);
  write_report_csv(out_path(c, "report_after.csv"), {after}, comment);
  std::printf("%s: trig %s -> %s, val %s -> %s\n", kind.c_str(),
              fmt_g17(before.trig_acc).c_str(), fmt_g17(after.trig_acc).c_str(),
              fmt_g17(before.val_acc).c_str(), fmt_g17(after.val_acc).c_str());
  return kExitOk;
}

int cmd_verify(const Common& c, const std::string& model_path,
               const std::string& key_path, double threshold) {
  LoadedNetwork model = load_network(resolve_data_path(model_path));
  WatermarkKey key = load_key_checked(key_path);
  Verdict v = verify(model.net, key, threshold);
  std::string json = std::string("{\"owned\":") + (v.owned ? "true" : "false") +
                     ",\"match_fraction\":" + fmt_g17(v.match_fraction) +
                     ",\"threshold\":" + fmt_g17(v.threshold) + "}";
  write_file_bytes(out_path(c, "verdict.json"), json + "\n");
  std::printf("%s\n", json.c_str());
  return v.owned ? kExitOk : kExitNotOwned;
}

int cmd_gen_key(const Common& c, const Config& cfg, const std::string& out_file,
                const std::string& kind, std::size_t count, std::size_t height,
                std::size_t width, std::size_t channels, int classes,
                const std::string& text) {
  std::uint64_t seed = c.seed_given ? c.seed : 0;
  std::size_t row = cfg.get_size("key", "text_row", 2);
  std::size_t col = cfg.get_size("key", "text_col", 2);
  WatermarkKey key =
      make_key(kind, count, {height, width, channels}, classes, seed, text, row, col);
  Config stamped = cfg;
  stamped.set("key", "kind", kind);
  stamped.set("key", "count", std::to_string(count));
  save_key(out_path(c, out_file), key,
           {{"config", stamped.hash()}});
  std::printf("key: %zu %s triggers, %d classes -> %s\n", key.count(),
              kind.c_str(), classes, out_path(c, out_file).c_str());
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
  return out;
}

int cmd_sweep(const Common& c, const Config& cfg, const std::string& host_path,
              const std::string& key_path) {
  SplitResult sr = load_split(cfg);
  LoadedNetwork host = load_network(resolve_data_path(host_path));
  WatermarkKey key = load_key_checked(key_path);
  EmbedConfig base = embed_config_from(cfg, 0);
  HostSnapshot snap = make_snapshot(host.net, sr.train, base.eval_batch);

  std::vector<std::string> schemes =
      split_list(cfg.get("sweep", "schemes", cfg.get("embed", "scheme", "FixLL+PFL")));
  std::vector<std::string> seed_list = split_list(cfg.get("sweep", "seeds", "0"));

  struct Cell {
    std::string scheme;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const std::string& s : schemes)
    for (const std::string& sd : seed_list)
      cells.push_back({s, std::stoull(sd)});
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.scheme != b.scheme) return a.scheme < b.scheme;
    return a.seed < b.seed;
  });

  std::vector<FidelityReport> rows;
  std::string failures;
  bool any_failure = false;
  for (const Cell& cell : cells) {
    EmbedConfig ec = base;
    ec.scheme = parse_scheme(cell.scheme);
    ec.seed = cell.seed;
    std::string slug = cell.scheme + "_s" + std::to_string(cell.seed);
    std::string dir = (fs::path(c.out_dir) / "cells" / slug).string();
    FidelityReport rep;
    try {
      int rc = run_embed_cell(cfg, snap, sr, key, ec, dir, &rep);
      rows.push_back(rep);
      if (rc != kExitOk) {
        any_failure = true;
        failures += slug + ",did not converge\n";
      }
      std::printf("cell %s: val=%s trig=%s epochs=%zu\n", slug.c_str(),
                  fmt_g17(rep.val_acc).c_str(), fmt_g17(rep.trig_acc).c_str(),
                  rep.epochs);
    } catch (const std::exception& e) {
      any_failure = true;
      failures += slug + "," + e.what() + "\n";
      std::fprintf(stderr, "cell %s failed: %s\n", slug.c_str(), e.what());
    }
  }
  write_report_csv(out_path(c, "report.csv"), rows, "config=" + cfg.hash());
  if (!failures.empty())
    write_file_bytes(out_path(c, "failures.csv"), "cell,reason\n" + failures);
  return any_failure ? kExitNoConverge : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backdoor watermark embedding and fidelity auditing for small "
               "image classifiers"};
  app.require_subcommand(1);

  Common c_train, c_embed, c_audit, c_attack, c_verify, c_key, c_sweep;

  CLI::App* train = app.add_subcommand("train-host", "train a host model");
  add_common(train, c_train);

  CLI::App* embed_cmd =
      app.add_subcommand("embed", "embed a watermark into a host model");
  add_common(embed_cmd, c_embed);
  std::string e_host, e_key, e_scheme;
  double e_alpha = -1, e_beta = -1, e_gamma = -1, e_lr = -1, e_eps = -1;
  long long e_m = -1, e_maxep = -1;
  embed_cmd->add_option("--host", e_host, "host checkpoint")->required();
  embed_cmd->add_option("--key", e_key, "watermark key file")->required();
  embed_cmd->add_option("--scheme", e_scheme, "embedding scheme name");
  embed_cmd->add_option("--alpha", e_alpha, "weight drift penalty");
  embed_cmd->add_option("--beta", e_beta, "feature drift penalty");
  embed_cmd->add_option("--gamma", e_gamma, "softmax drift penalty");
  embed_cmd->add_option("--m", e_m, "triggers per batch");
  embed_cmd->add_option("--lr", e_lr, "learning rate override");
  embed_cmd->add_option("--max-epochs", e_maxep, "epoch cap");
  embed_cmd->add_option("--epsilon", e_eps, "allowed validation drop");

  CLI::App* audit_cmd =
      app.add_subcommand("audit", "measure fidelity of a watermarked model");
  add_common(audit_cmd, c_audit);
  std::string a_host, a_wm, a_key, a_features;
  audit_cmd->add_option("--host", a_host, "host checkpoint")->required();
  audit_cmd->add_option("--wm", a_wm, "watermarked checkpoint")->required();
  audit_cmd->add_option("--key", a_key, "watermark key file")->required();
  audit_cmd->add_option("--dump-features", a_features,
                        "also dump train features + prototypes to this file");

  CLI::App* attack_cmd =
      app.add_subcommand("attack", "run a removal attack on a model");
  add_common(attack_cmd, c_attack);
  std::string t_host, t_wm, t_key, t_kind;
  double t_fraction = 0.2, t_lr = 1e-4;
  long long t_epochs = 50;
  int t_bits = 16;
  attack_cmd->add_option("--host", t_host, "host checkpoint")->required();
  attack_cmd->add_option("--wm", t_wm, "watermarked checkpoint")->required();
  attack_cmd->add_option("--key", t_key, "watermark key file")->required();
  attack_cmd->add_option("--kind", t_kind, "finetune | truncate | prune")
      ->required();
  attack_cmd->add_option("--fraction", t_fraction, "prune fraction");
  attack_cmd->add_option("--epochs", t_epochs, "finetune epochs");
  attack_cmd->add_option("--lr", t_lr, "finetune learning rate");
  attack_cmd->add_option("--bits", t_bits, "truncation precision");

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "check a model against a watermark key");
  add_common(verify_cmd, c_verify);
  std::string v_model, v_key;
  double v_threshold = 0.9;
  verify_cmd->add_option("--model", v_model, "model checkpoint")->required();
  verify_cmd->add_option("--key", v_key, "watermark key file")->required();
  verify_cmd->add_option("--threshold", v_threshold,
                         "ownership threshold in (1/K, 1]");

  CLI::App* key_cmd = app.add_subcommand("gen-key", "generate a watermark key");
  add_common(key_cmd, c_key);
  std::string k_out = "key.dfk", k_kind = "noise", k_text = "TEST";
  std::size_t k_count = 100, k_h = 28, k_w = 28, k_c = 1;
  int k_classes = 10;
  key_cmd->add_option("--out", k_out, "output key file name");
  key_cmd->add_option("--kind", k_kind, "noise | abstract | abstract+string");
  key_cmd->add_option("--count", k_count, "number of triggers");
  key_cmd->add_option("--height", k_h, "trigger height");
  key_cmd->add_option("--width", k_w, "trigger width");
  key_cmd->add_option("--channels", k_c, "trigger channels");
  key_cmd->add_option("--classes", k_classes, "label classes");
  key_cmd->add_option("--text", k_text, "overlay text for abstract+string");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run a grid of embeddings");
  add_common(sweep_cmd, c_sweep);
  std::string s_host, s_key;
  sweep_cmd->add_option("--host", s_host, "host checkpoint")->required();
  sweep_cmd->add_option("--key", s_key, "watermark key file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train_host(c_train, load_cfg(c_train));
    if (*embed_cmd) {
      Config cfg = load_cfg(c_embed);
      if (!e_scheme.empty()) cfg.set("embed", "scheme", e_scheme);
      if (e_alpha >= 0) cfg.set("embed", "alpha", fmt_g17(e_alpha));
      if (e_beta >= 0) cfg.set("embed", "beta", fmt_g17(e_beta));
      if (e_gamma >= 0) cfg.set("embed", "gamma", fmt_g17(e_gamma));
      if (e_m >= 0) cfg.set("embed", "m", std::to_string(e_m));
      if (e_lr >= 0) cfg.set("embed", "lr", fmt_g17(e_lr));
      if (e_maxep >= 0) cfg.set("embed", "max_epochs", std::to_string(e_maxep));
      if (e_eps >= 0) cfg.set("embed", "epsilon", fmt_g17(e_eps));
      return cmd_embed(c_embed, cfg, e_host, e_key);
    }
    if (*audit_cmd)
      return cmd_audit(c_audit, load_cfg(c_audit), a_host, a_wm, a_key,
                       a_features);
    if (*attack_cmd)
      return cmd_attack(c_attack, load_cfg(c_attack), t_host, t_wm, t_key,
                        t_kind, t_fraction, static_cast<std::size_t>(t_epochs),
                        t_lr, t_bits);
    if (*verify_cmd) return cmd_verify(c_verify, v_model, v_key, v_threshold);
    if (*key_cmd)
      return cmd_gen_key(c_key, load_cfg(c_key), k_out, k_kind, k_count, k_h,
                         k_w, k_c, k_classes, k_text);
    if (*sweep_cmd) return cmd_sweep(c_sweep, load_cfg(c_sweep), s_host, s_key);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const IdxParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
