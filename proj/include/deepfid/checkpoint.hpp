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

// Named-tensor container, the on-disk format for model checkpoints and
// watermark keys. Layout (all integers little-endian u64, floats f64 bits):
//
//   "DFIDTNSR" | version | preamble_len | preamble utf-8 | tensor_count |
//   { name_len | name | rank | dims... | values... } *
//
// The preamble is key=value lines; for a network it carries the architecture
// descriptor so the graph can be rebuilt before tensors are assigned.
// Writing the same content twice produces identical bytes.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "deepfid/net.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline constexpr char kTensorMagic[8] = {'D', 'F', 'I', 'D', 'T', 'N', 'S', 'R'};
inline constexpr std::uint64_t kContainerVersion = 1;

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct ByteReader {
  const std::uint8_t* p;
  std::size_t len;
  std::size_t off = 0;
  std::string context;

  void need(std::size_t n, const char* what) const {
    if (off + n > len)
      throw CheckpointError(context + ": truncated while reading " +
                            std::string(what) + " at offset " +
                            std::to_string(off));
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(p[off + i]) << (8 * i);
    off += 8;
    return v;
  }
  double f64(const char* what) {
    return std::bit_cast<double>(u64(what));
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(p + off), n);
    off += n;
    return s;
  }
};

}  // namespace detail

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

// Preamble text from ordered key/value pairs; the order given is the order
// written, so callers control byte-level layout.
inline std::string make_preamble(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos)
      throw std::invalid_argument("preamble entries must be single-line, '='-free keys");
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

inline std::map<std::string, std::string> parse_preamble(const std::string& text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError("preamble line without '=': " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

inline std::string serialize_tensors(
    const std::string& preamble,
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::string out;
  out.append(detail::kTensorMagic, 8);
  detail::put_u64(out, detail::kContainerVersion);
  detail::put_u64(out, preamble.size());
  out += preamble;
  detail::put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    detail::put_u64(out, name.size());
    out += name;
    detail::put_u64(out, t->rank());
    for (std::size_t d : t->shape) detail::put_u64(out, d);
    for (double v : t->data) detail::put_f64(out, v);
  }
  return out;
}

struct TensorFile {
  std::string preamble_text;
  std::map<std::string, std::string> preamble;
  std::vector<std::pair<std::string, Tensor>> tensors;  // file order

  const Tensor& get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw CheckpointError("tensor '" + name + "' missing from container");
  }
  bool has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return true;
    return false;
  }
};

inline TensorFile parse_tensors(const std::vector<std::uint8_t>& bytes,
                                const std::string& context) {
  detail::ByteReader r{bytes.data(), bytes.size(), 0, context};
  r.need(8, "magic");
  if (std::memcmp(bytes.data(), detail::kTensorMagic, 8) != 0)
    throw CheckpointError(context + ": bad magic, not a tensor container");
  r.off = 8;
  std::uint64_t version = r.u64("version");
  if (version != detail::kContainerVersion)
    throw CheckpointError(context + ": unsupported container version " +
                          std::to_string(version));
  std::uint64_t plen = r.u64("preamble length");
  if (plen > bytes.size())
    throw CheckpointError(context + ": preamble length exceeds file size");
  TensorFile tf;
  tf.preamble_text = r.bytes(static_cast<std::size_t>(plen), "preamble");
  tf.preamble = parse_preamble(tf.preamble_text);
  std::uint64_t count = r.u64("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t nlen = r.u64("tensor name length");
    if (nlen > bytes.size())
      throw CheckpointError(context + ": tensor name length exceeds file size");
    std::string name = r.bytes(static_cast<std::size_t>(nlen), "tensor name");
    std::uint64_t rank = r.u64("tensor rank");
    if (rank > 8) throw CheckpointError(context + ": implausible tensor rank");
    std::vector<std::size_t> shape;
    std::size_t n = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      std::uint64_t dim = r.u64("tensor dim");
      if (dim != 0 && n > bytes.size() / dim)
        throw CheckpointError(context + ": tensor size exceeds file size");
      n *= static_cast<std::size_t>(dim);
      shape.push_back(static_cast<std::size_t>(dim));
    }
    r.need(n * 8, "tensor values");
    std::vector<double> data(n);
    for (std::size_t j = 0; j < n; ++j) data[j] = r.f64("tensor value");
    tf.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return tf;
}

inline TensorFile load_tensor_file(const std::string& path) {
  return parse_tensors(read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// Network checkpoints.

inline std::string input_shape_string(const std::vector<std::size_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

inline std::vector<std::size_t> parse_input_shape(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& part : detail::split_str(s, 'x'))
    out.push_back(detail::parse_size(part, "input shape"));
  return out;
}

// `extra` entries (config hash, seed, provenance of transforms) are appended
// to the preamble in sorted key order.
inline void save_network(const std::string& path, const Network& net,
                         const std::map<std::string, std::string>& extra = {}) {
  std::vector<std::pair<std::string, std::string>> entries = {
      {"format", "network"},
      {"input", input_shape_string(net.input_shape)},
      {"backbone", backbone_descriptor(net.backbone)},
      {"feature_dim", std::to_string(net.feature_dim())},
      {"classes", std::to_string(net.classes())},
  };
  for (const auto& [k, v] : extra) entries.emplace_back(k, v);
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const ParamRef& p : params(net)) tensors.emplace_back(p.name, p.tensor);
  write_file_bytes(path, serialize_tensors(make_preamble(entries), tensors));
}

struct LoadedNetwork {
  Network net;
  std::map<std::string, std::string> preamble;
};

inline LoadedNetwork load_network(const std::string& path) {
  TensorFile tf = load_tensor_file(path);
  auto need = [&](const char* key) -> const std::string& {
    auto it = tf.preamble.find(key);
    if (it == tf.preamble.end())
      throw CheckpointError(path + ": preamble missing '" + key + "'");
    return it->second;
  };
  if (need("format") != "network")
    throw CheckpointError(path + ": not a network checkpoint (format=" +
                          need("format") + ")");
  LoadedNetwork out;
  out.net = make_network(parse_input_shape(need("input")), need("backbone"),
                         detail::parse_size(need("classes"), "classes"));
  if (out.net.feature_dim() !=
      detail::parse_size(need("feature_dim"), "feature_dim"))
    throw CheckpointError(path + ": feature_dim does not match architecture");
  for (const ParamRef& p : params(out.net)) {
    const Tensor& t = tf.get(p.name);
    if (!t.same_shape(*p.tensor))
      throw CheckpointError(path + ": tensor '" + p.name + "' has shape " +
                            shape_to_string(t.shape) + ", expected " +
                            shape_to_string(p.tensor->shape));
    *p.tensor = t;
  }
  out.net.note_param_change();
  out.preamble = tf.preamble;
  return out;
}

}  // namespace deepfid
