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
#include "apt/embedding_store.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace apt {

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
}

bool EmbeddingStore::contains(std::string_view key) const {
  return values_.find(std::string(key)) != values_.end();
}

void EmbeddingStore::insert(std::string key, std::vector<float> values) {
  if (values.size() != dim_) {
    throw std::invalid_argument("vector for key '" + key + "' has " +
                                std::to_string(values.size()) +
                                " components, expected " +
                                std::to_string(dim_));
  }
  if (!std::all_of(values.begin(), values.end(),
                   [](float v) { return std::isfinite(v); })) {
    throw std::invalid_argument("non-finite value for key '" + key + "'");
  }
  if (key.size() > 0xFFFF) {
    throw std::invalid_argument("key longer than 65535 bytes");
  }
  if (values_.count(key) != 0) {
    throw std::invalid_argument("duplicate key '" + key + "'");
  }
  keys_.push_back(key);
  values_.emplace(std::move(key), std::move(values));
}

void EmbeddingStore::insert(std::string key, std::span<const double> values) {
  insert(std::move(key), std::vector<float>(values.begin(), values.end()));
}

std::span<const float> EmbeddingStore::at(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) {
    throw std::out_of_range("missing embedding key '" + std::string(key) +
                            "'");
  }
  return it->second;
}

std::vector<double> EmbeddingStore::at_f64(std::string_view key) const {
  auto v = at(key);
  return {v.begin(), v.end()};
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  if (dim_ != other.dim_ || keys_ != other.keys_) return false;
  for (const auto& k : keys_) {
    auto a = at(k);
    auto b = other.at(k);
    if (std::memcmp(a.data(), b.data(), a.size_bytes()) != 0) return false;
  }
  return true;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T value;
    std::memcpy(&value, take(sizeof(T), what), sizeof(T));
    return value;
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated record: ") + what);
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingStore& store) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
  put<std::uint32_t>(out, kEmbeddingVersion);
  put<std::uint32_t>(out, store.dim());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& key : store.keys()) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    for (float v : store.at(key)) put<float>(out, v);
  }
  return out;
}

EmbeddingStore decode_embeddings(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::uint8_t* magic = in.take(4, "header");
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw FormatError("bad magic");
  }
  const auto version = in.get<std::uint32_t>("header");
  if (version != kEmbeddingVersion) {
    throw FormatError("version mismatch: file has " + std::to_string(version) +
                      ", reader supports " + std::to_string(kEmbeddingVersion));
  }
  const auto dim = in.get<std::uint32_t>("header");
  const auto count = in.get<std::uint32_t>("header");
  if (dim == 0) throw FormatError("embedding dim must be positive");

  EmbeddingStore store(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto len = in.get<std::uint16_t>("key length");
    const auto* key_bytes = in.take(len, "key bytes");
    std::string key(reinterpret_cast<const char*>(key_bytes), len);
    std::vector<float> values(dim);
    std::memcpy(values.data(), in.take(std::size_t{dim} * 4, "vector values"),
                std::size_t{dim} * 4);
    for (float v : values) {
      if (!std::isfinite(v)) {
        throw FormatError("non-finite value in record '" + key + "'");
      }
    }
    if (store.contains(key)) throw FormatError("duplicate key '" + key + "'");
    store.insert(std::move(key), std::move(values));
  }
  if (!in.done()) throw FormatError("trailing bytes after last record");
  return store;
}

void write_embeddings(const EmbeddingStore& store,
                      const std::filesystem::path& path) {
  const auto bytes = encode_embeddings(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_embeddings(bytes);
}

std::string normalize_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC unavailable");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (u.indexOf(static_cast<UChar>(0xFFFD)) >= 0 &&
      text.find("\xEF\xBF\xBD") == std::string_view::npos) {
    throw std::invalid_argument("invalid UTF-8 in text");
  }
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw std::invalid_argument("NFC normalization failed");
  normalized.trim();
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string vision_key(std::string_view image_id, std::size_t element_index) {
  return "img:" + std::string(image_id) + ":" + std::to_string(element_index);
}

std::string prompt_key(std::string_view category) {
  return "prompt:" + std::string(category);
}

std::string ocr_key(std::string_view description) {
  std::string norm = normalize_text(description);
  if (norm.empty()) return std::string(kEmptyWordKey);
  return "ocr:" + norm;
}

}  // namespace apt
