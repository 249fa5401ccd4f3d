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
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "deepfid/checkpoint.hpp"
#include "deepfid/rng.hpp"

using namespace deepfid;

namespace {

std::vector<std::uint8_t> to_bytes(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("named tensors round-trip bit-exactly") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  Tensor scalar = Tensor::zeros({});
  Rng rng(1);
  for (double& v : a.data) v = rng.normal();
  for (double& v : b.data) v = rng.normal() * 1e-300;
  scalar.data[0] = -0.0;

  std::string pre = make_preamble({{"format", "test"}, {"note", "x=y is fine in values"}});
  std::string bytes = serialize_tensors(
      pre, {{"alpha", &a}, {"beta", &b}, {"s", &scalar}});
  TensorFile tf = parse_tensors(to_bytes(bytes), "mem");

  CHECK(tf.preamble.at("format") == "test");
  CHECK(tf.preamble.at("note") == "x=y is fine in values");
  REQUIRE(tf.tensors.size() == 3);
  CHECK(tf.tensors[0].first == "alpha");  // file order preserved
  CHECK(tf.get("alpha").shape == a.shape);
  CHECK(tf.get("alpha").data == a.data);
  CHECK(tf.get("beta").data == b.data);
  CHECK(tf.get("s").rank() == 0);
  CHECK(std::signbit(tf.get("s").data[0]));
  CHECK(tf.has("beta"));
  CHECK(!tf.has("gamma"));
  CHECK_THROWS_AS(tf.get("gamma"), CheckpointError);

  // serialization is canonical: same content, same bytes
  CHECK(serialize_tensors(pre, {{"alpha", &a}, {"beta", &b}, {"s", &scalar}}) ==
        bytes);
}

TEST_CASE("preamble rejects unrepresentable entries") {
  CHECK_THROWS_AS(make_preamble({{"a=b", "v"}}), std::invalid_argument);
  CHECK_THROWS_AS(make_preamble({{"a\nb", "v"}}), std::invalid_argument);
  CHECK_THROWS_AS(make_preamble({{"a", "v\nw"}}), std::invalid_argument);
  CHECK_THROWS_AS(parse_preamble("no equals sign"), CheckpointError);
  std::map<std::string, std::string> m = parse_preamble("a=1\n\nb=2\n");
  CHECK(m.size() == 2);
  CHECK(m.at("b") == "2");
}

TEST_CASE("container rejects bad magic and version") {
  Tensor t = Tensor::zeros({2});
  std::string good = serialize_tensors(make_preamble({{"k", "v"}}), {{"t", &t}});

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH(parse_tensors(to_bytes(bad_magic), "m"),
                    Catch::Matchers::ContainsSubstring("magic"));

  std::string bad_version = good;
  bad_version[8] = 9;  // little-endian version word
  CHECK_THROWS_WITH(parse_tensors(to_bytes(bad_version), "m"),
                    Catch::Matchers::ContainsSubstring("version"));
}

TEST_CASE("container rejects every truncation without crashing") {
  Tensor a = Tensor::zeros({3, 2});
  for (std::size_t i = 0; i < 6; ++i) a.data[i] = static_cast<double>(i);
  std::string good =
      serialize_tensors(make_preamble({{"format", "test"}}), {{"t", &a}});
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    std::vector<std::uint8_t> prefix = to_bytes(good.substr(0, cut));
    CHECK_THROWS_AS(parse_tensors(prefix, "m"), CheckpointError);
  }
  CHECK_NOTHROW(parse_tensors(to_bytes(good), "m"));
}

TEST_CASE("container survives random byte corruption without crashing") {
  Tensor a = Tensor::zeros({4, 4});
  Rng vals(3);
  for (double& v : a.data) v = vals.normal();
  std::string good =
      serialize_tensors(make_preamble({{"format", "test"}}), {{"m", &a}});
  Rng rng(4);
  std::size_t rejected = 0;
  for (int i = 0; i < 300; ++i) {
    std::string mut = good;
    std::size_t pos = rng.below(mut.size());
    mut[pos] = static_cast<char>(mut[pos] ^ static_cast<char>(1 + rng.below(255)));
    try {
      TensorFile tf = parse_tensors(to_bytes(mut), "fuzz");
      (void)tf;
    } catch (const CheckpointError&) {
      ++rejected;
    }
    // flipping value bytes parses fine; structural flips must throw, never crash
  }
  CHECK(rejected > 0);
}

TEST_CASE("oversized declared lengths are rejected early") {
  Tensor t = Tensor::zeros({2});
  std::string good = serialize_tensors(make_preamble({{"k", "v"}}), {{"t", &t}});
  // preamble length field lives at offset 16
  std::string huge = good;
  huge[16] = '\xff';
  huge[17] = '\xff';
  huge[18] = '\xff';
  huge[19] = '\xff';
  CHECK_THROWS_AS(parse_tensors(to_bytes(huge), "m"), CheckpointError);

  // giant tensor dimensions must not trigger an allocation attempt
  std::string pre = make_preamble({{"k", "v"}});
  std::string evil;
  evil.append(detail::kTensorMagic, 8);
  detail::put_u64(evil, detail::kContainerVersion);
  detail::put_u64(evil, pre.size());
  evil += pre;
  detail::put_u64(evil, 1);  // one tensor
  detail::put_u64(evil, 1);
  evil += "t";
  detail::put_u64(evil, 3);  // rank 3
  detail::put_u64(evil, 0xffffffffull);
  detail::put_u64(evil, 0xffffffffull);
  detail::put_u64(evil, 0xffffffffull);
  CHECK_THROWS_AS(parse_tensors(to_bytes(evil), "m"), CheckpointError);

  std::string weird = good;
  // rank field of tensor "t": magic 8 + version 8 + plen 8 + pre + count 8 +
  // nlen 8 + name 1
  std::size_t rank_off = 8 + 8 + 8 + pre.size() + 8 + 8 + 1;
  weird[rank_off] = 100;
  CHECK_THROWS_WITH(parse_tensors(to_bytes(weird), "m"),
                    Catch::Matchers::ContainsSubstring("rank"));
}

TEST_CASE("network checkpoints restore the same function bit for bit") {
  Network net = make_network({8, 8, 1}, "conv:3:3:1,relu,maxpool:2,flatten,dense:6", 4);
  init_network(net, 9);
  std::string path = "ckpt_test_tmp.ckpt";
  save_network(path, net, {{"seed", "9"}, {"config", "cafebabe"}});
  LoadedNetwork back = load_network(path);

  CHECK(back.preamble.at("format") == "network");
  CHECK(back.preamble.at("seed") == "9");
  CHECK(back.preamble.at("config") == "cafebabe");
  CHECK(back.preamble.at("classes") == "4");
  CHECK(back.net.input_shape == net.input_shape);
  CHECK(backbone_descriptor(back.net.backbone) == backbone_descriptor(net.backbone));

  std::vector<ParamRef> a = params(net), b = params(back.net);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor->data == b[i].tensor->data);
  }

  // same input, same logits, bitwise
  Tensor x = Tensor::zeros({2, 8, 8, 1});
  Rng rng(11);
  for (double& v : x.data) v = rng.uniform(0.0, 1.0);
  CHECK(forward(net, x).data == forward(back.net, x).data);

  // saving the loaded model reproduces the file byte for byte
  std::string path2 = "ckpt_test_tmp2.ckpt";
  save_network(path2, back.net, {{"seed", "9"}, {"config", "cafebabe"}});
  CHECK(read_file_bytes(path) == read_file_bytes(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("network loading rejects mismatched or missing tensors") {
  Network net = make_network({6, 6, 1}, "flatten,dense:5", 3);
  init_network(net, 1);
  std::string path = "ckpt_bad_tmp.ckpt";

  // wrong-shape tensor under a correct name
  {
    std::vector<std::pair<std::string, std::string>> entries = {
        {"format", "network"},
        {"input", "6x6x1"},
        {"backbone", "flatten,dense:5"},
        {"feature_dim", "5"},
        {"classes", "3"},
    };
    Tensor wrong = Tensor::zeros({4, 5});
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    std::vector<ParamRef> ps = params(net);
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      tensors.emplace_back(ps[i].name, ps[i].tensor);
    tensors.emplace_back(ps.back().name, &wrong);
    write_file_bytes(path, serialize_tensors(make_preamble(entries), tensors));
    CHECK_THROWS_WITH(load_network(path),
                      Catch::Matchers::ContainsSubstring("shape"));
  }

  // missing tensor
  {
    std::vector<std::pair<std::string, std::string>> entries = {
        {"format", "network"},
        {"input", "6x6x1"},
        {"backbone", "flatten,dense:5"},
        {"feature_dim", "5"},
        {"classes", "3"},
    };
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    std::vector<ParamRef> ps = params(net);
    for (std::size_t i = 0; i + 1 < ps.size(); ++i)
      tensors.emplace_back(ps[i].name, ps[i].tensor);
    write_file_bytes(path, serialize_tensors(make_preamble(entries), tensors));
    CHECK_THROWS_WITH(load_network(path),
                      Catch::Matchers::ContainsSubstring("missing"));
  }

  // inconsistent feature_dim
  {
    save_network(path, net);
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    std::string s(bytes.begin(), bytes.end());
    std::size_t pos = s.find("feature_dim=5");
    REQUIRE(pos != std::string::npos);
    s[pos + std::strlen("feature_dim=")] = '7';
    write_file_bytes(path, s);
    CHECK_THROWS_WITH(load_network(path),
                      Catch::Matchers::ContainsSubstring("feature_dim"));
  }

  // wrong format tag
  {
    Tensor t = Tensor::zeros({1});
    write_file_bytes(path, serialize_tensors(make_preamble({{"format", "blob"}}),
                                             {{"t", &t}}));
    CHECK_THROWS_AS(load_network(path), CheckpointError);
  }
  std::remove(path.c_str());
}

TEST_CASE("input shape strings round trip") {
  CHECK(input_shape_string({28, 28, 1}) == "28x28x1");
  CHECK(parse_input_shape("28x28x1") == std::vector<std::size_t>{28, 28, 1});
  CHECK(parse_input_shape("7") == std::vector<std::size_t>{7});
  CHECK_THROWS_AS(parse_input_shape("28xx1"), std::exception);
  CHECK_THROWS_AS(parse_input_shape("axb"), std::exception);
}
