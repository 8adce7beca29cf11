/* Copyright 2026 The APT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace apt {

// Raised for malformed embedding files. The message names the failure
// ("bad magic", "version mismatch", "truncated record", ...).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Keyed map from strings to fixed-length float vectors. Keys keep their
// insertion order so that a read followed by a write reproduces the file
// byte for byte.
//
// Key conventions:
//   "img:<image_id>:<element_index>"  vision embedding of an element
//   "prompt:<category>"               frozen category prompt
//   "ocr:<normalized text>"           encoded OCR description
//   ""                                the empty word
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::uint32_t dim);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool contains(std::string_view key) const;

  // Throws std::invalid_argument on wrong length, non-finite values or a
  // duplicate key.
  void insert(std::string key, std::vector<float> values);
  void insert(std::string key, std::span<const double> values);

  // Throws std::out_of_range naming the key when absent.
  std::span<const float> at(std::string_view key) const;
  std::vector<double> at_f64(std::string_view key) const;

  const std::vector<std::string>& keys() const { return keys_; }

  bool operator==(const EmbeddingStore& other) const;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::vector<float>> values_;
};

inline constexpr char kEmbeddingMagic[4] = {'A', 'P', 'T', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::string_view kEmptyWordKey = "";

// Binary layout, all integers little-endian:
//   "APTE" | u32 version=1 | u32 dim | u32 count |
//   count x (u16 key_len | key bytes | dim x f32)
void write_embeddings(const EmbeddingStore& store,
                      const std::filesystem::path& path);
EmbeddingStore read_embeddings(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_embeddings(const EmbeddingStore& store);
EmbeddingStore decode_embeddings(std::span<const std::uint8_t> bytes);

// Unicode NFC followed by trimming of surrounding white space. Throws
// std::invalid_argument on invalid UTF-8.
std::string normalize_text(std::string_view text);

std::string vision_key(std::string_view image_id, std::size_t element_index);
std::string prompt_key(std::string_view category);
// The empty description maps to the reserved empty-word key.
std::string ocr_key(std::string_view description);

}  // namespace apt
