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

// IDX image/label files (the MNIST container format), plain or gzipped.
// Big-endian magic: 0x00000803 = u8 images [n, rows, cols],
// 0x00000801 = u8 labels [n]. Pixels are scaled to [0,1] as value/255.

#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/checkpoint.hpp"
#include "deepfid/tensor.hpp"

namespace deepfid {

class IdxParseError : public std::runtime_error {
 public:
  explicit IdxParseError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off,
                               const char* what) {
  if (off + 4 > b.size())
    throw IdxParseError(std::string("truncated while reading ") + what +
                        " at offset " + std::to_string(off));
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

inline void write_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

}  // namespace detail

inline bool is_gzip(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

// Inflates a whole gzip stream into memory.
inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw std::runtime_error("zlib: inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  int rc = Z_OK;
  do {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IdxParseError("gzip stream is corrupt (zlib code " +
                          std::to_string(rc) + ")");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  } while (rc != Z_STREAM_END && zs.avail_in > 0);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw IdxParseError("gzip stream ended prematurely");
  return out;
}

inline std::string gzip_bytes(const std::string& raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("zlib: deflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  std::string out;
  std::vector<std::uint8_t> buf(1 << 16);
  int rc = Z_OK;
  do {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = deflate(&zs, Z_FINISH);
    out.append(reinterpret_cast<char*>(buf.data()), buf.size() - zs.avail_out);
  } while (rc != Z_STREAM_END);
  deflateEnd(&zs);
  return out;
}

// Parsed IDX payload: exactly one of images/labels depending on the magic.
struct IdxContent {
  bool is_labels = false;
  Tensor images;            // [n, rows, cols, 1], values in [0,1]
  std::vector<int> labels;  // [n]
};

// Parses an IDX byte buffer (gzip-transparent). Rejects wrong magic,
// truncation, and dimension products that overflow or exceed the payload.
inline IdxContent parse_idx(const std::vector<std::uint8_t>& raw) {
  const std::vector<std::uint8_t>& bytes = is_gzip(raw) ? gunzip(raw) : raw;
  std::uint32_t magic = detail::read_be32(bytes, 0, "magic");
  IdxContent out;
  if (magic == 0x00000803u) {
    std::uint64_t n = detail::read_be32(bytes, 4, "image count");
    std::uint64_t rows = detail::read_be32(bytes, 8, "row count");
    std::uint64_t cols = detail::read_be32(bytes, 12, "column count");
    std::uint64_t total = n * rows;
    if (rows != 0 && total / rows != n)
      throw IdxParseError("image dimensions overflow");
    std::uint64_t pixels = total * cols;
    if (cols != 0 && pixels / cols != total)
      throw IdxParseError("image dimensions overflow");
    if (bytes.size() < 16 || bytes.size() - 16 < pixels)
      throw IdxParseError("image payload truncated: need " +
                          std::to_string(pixels) + " bytes, have " +
                          std::to_string(bytes.size() - 16));
    out.images = Tensor::zeros({static_cast<std::size_t>(n),
                                static_cast<std::size_t>(rows),
                                static_cast<std::size_t>(cols), 1});
    for (std::uint64_t i = 0; i < pixels; ++i)
      out.images.data[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    return out;
  }
  if (magic == 0x00000801u) {
    std::uint64_t n = detail::read_be32(bytes, 4, "label count");
    if (bytes.size() < 8 || bytes.size() - 8 < n)
      throw IdxParseError("label payload truncated: need " + std::to_string(n) +
                          " bytes, have " + std::to_string(bytes.size() - 8));
    out.is_labels = true;
    out.labels.resize(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i)
      out.labels[i] = static_cast<int>(bytes[8 + i]);
    return out;
  }
  throw IdxParseError("unknown IDX magic 0x" + [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", magic);
    return std::string(buf);
  }());
}

inline IdxContent parse_idx(const std::string& raw) {
  return parse_idx(std::vector<std::uint8_t>(raw.begin(), raw.end()));
}

inline bool is_gzip(const std::string& bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

inline IdxContent parse_idx_file(const std::string& path) {
  try {
    return parse_idx(read_file_bytes(path));
  } catch (const IdxParseError& e) {
    throw IdxParseError(path + ": " + e.what());
  }
}

// Serializes images [n,rows,cols,1] with values in [0,1]; each pixel is
// round(v*255) clamped to [0,255], so parse(serialize(x)) is exact on u8 data.
inline std::string serialize_idx_images(const Tensor& images) {
  if (images.rank() != 4 || images.dim(3) != 1)
    throw std::invalid_argument("serialize_idx_images expects [n,rows,cols,1]");
  std::string out;
  detail::write_be32(out, 0x00000803u);
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(0)));
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(1)));
  detail::write_be32(out, static_cast<std::uint32_t>(images.dim(2)));
  for (double v : images.data) {
    double scaled = std::nearbyint(v * 255.0);
    if (scaled < 0.0) scaled = 0.0;
    if (scaled > 255.0) scaled = 255.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(scaled)));
  }
  return out;
}

inline std::string serialize_idx_labels(const std::vector<int>& labels) {
  std::string out;
  detail::write_be32(out, 0x00000801u);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int v : labels) {
    if (v < 0 || v > 255)
      throw std::invalid_argument("label out of u8 range: " + std::to_string(v));
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
  }
  return out;
}

}  // namespace deepfid
