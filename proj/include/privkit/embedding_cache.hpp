// Copyright 2026 The PrivKit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "privkit/backends.hpp"
#include "privkit/error.hpp"
#include "privkit/image.hpp"
#include "privkit/metrics.hpp"

namespace privkit {

namespace fs = std::filesystem;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Per-backend embedding store keyed by image content hash.
///
/// Layout of <root>/<backend>/:
///   manifest.json  {"backend", "dim", "records": [{image_id, identity, dim,
///                  offset, content_hash}]}, offset in bytes into vectors.bin
///   vectors.bin    little-endian float32, one row per record, manifest order
///
/// Files are replaced with write-temp-then-rename. Rows are only appended,
/// so a manifest always indexes a prefix of any newer vectors.bin.
class EmbeddingCache {
 public:
  struct Record {
    std::string image_id;
    std::string identity;
    std::uint64_t content_hash = 0;
  };

  EmbeddingCache(const fs::path& root, std::string backend_name, std::size_t dim)
      : dir_(root / backend_name), backend_(std::move(backend_name)), dim_(dim) {
    load();
  }

  const fs::path& directory() const { return dir_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<Record>& records() const { return records_; }

  std::optional<std::vector<float>> lookup(std::uint64_t content_hash) const {
    auto it = index_.find(content_hash);
    if (it == index_.end()) return std::nullopt;
    const float* row = rows_.data() + it->second * dim_;
    return std::vector<float>(row, row + dim_);
  }

  void insert(Record record, std::span<const float> vector) {
    PRIVKIT_REQUIRE(vector.size() == dim_, "cache row for '" + record.image_id + "' has wrong dimension");
    if (index_.count(record.content_hash)) return;
    index_.emplace(record.content_hash, records_.size());
    records_.push_back(std::move(record));
    rows_.insert(rows_.end(), vector.begin(), vector.end());
    dirty_ = true;
  }

  void save() {
    if (!dirty_) return;
    fs::create_directories(dir_);
    std::string bin(rows_.size() * sizeof(float), '\0');
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(rows_[i]);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      std::memcpy(bin.data() + i * sizeof(float), &bits, sizeof(bits));
    }
    nlohmann::json manifest{{"backend", backend_}, {"dim", dim_}, {"records", nlohmann::json::array()}};
    for (std::size_t i = 0; i < records_.size(); ++i) {
      manifest["records"].push_back({{"image_id", records_[i].image_id},
                                     {"identity", records_[i].identity},
                                     {"dim", dim_},
                                     {"offset", i * dim_ * sizeof(float)},
                                     {"content_hash", hex64(records_[i].content_hash)}});
    }
    write_file_atomic(dir_ / "vectors.bin", bin);
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
    dirty_ = false;
  }

 private:
  static std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
  }

  void load() {
    const fs::path manifest_path = dir_ / "manifest.json";
    if (!fs::exists(manifest_path)) return;
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt cache manifest '" + manifest_path.string() + "': " + e.what());
    }
    if (manifest.at("dim").get<std::size_t>() != dim_) {
      throw IoError("cache '" + dir_.string() + "' holds dim " + manifest.at("dim").dump() + ", backend declares " +
                    std::to_string(dim_));
    }
    const std::string bin = read_file(dir_ / "vectors.bin");
    for (const auto& r : manifest.at("records")) {
      const std::size_t offset = r.at("offset").get<std::size_t>();
      if (offset + dim_ * sizeof(float) > bin.size()) {
        throw IoError("cache '" + dir_.string() + "' manifest points past the end of vectors.bin");
      }
      std::vector<float> row(dim_);
      for (std::size_t j = 0; j < dim_; ++j) {
        std::uint32_t bits;
        std::memcpy(&bits, bin.data() + offset + j * sizeof(float), sizeof(bits));
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        row[j] = std::bit_cast<float>(bits);
      }
      Record rec{r.at("image_id").get<std::string>(), r.at("identity").get<std::string>(),
                 std::stoull(r.at("content_hash").get<std::string>(), nullptr, 16)};
      insert(std::move(rec), row);
    }
    dirty_ = false;
  }

  fs::path dir_;
  std::string backend_;
  std::size_t dim_;
  std::vector<Record> records_;
  std::vector<float> rows_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  bool dirty_ = false;
};

/// Embeds records into a gallery. Values always pass through float32, so a
/// gallery built from cached rows equals one computed fresh.
inline Gallery embed_gallery(const EmbeddingBackend& backend, std::span<const ImageRecord> records,
                             EmbeddingCache* cache = nullptr) {
  std::vector<GalleryEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    const std::uint64_t key = content_hash(r.pixels);
    std::optional<std::vector<float>> row = cache ? cache->lookup(key) : std::nullopt;
    if (!row) {
      const std::vector<double> v = backend.embed(r.pixels);
      PRIVKIT_REQUIRE(v.size() == backend.dim(), "backend '" + backend.name() + "' returned wrong dimension");
      row.emplace(v.begin(), v.end());
      for (float x : *row) {
        if (!std::isfinite(x)) throw NumericError("backend '" + backend.name() + "' produced a non-finite embedding for '" + r.id + "'");
      }
      if (cache) cache->insert({r.id, r.identity, key}, *row);
    }
    entries.push_back({r.id, r.identity, std::vector<double>(row->begin(), row->end())});
  }
  return Gallery(backend.name(), std::move(entries));
}

}  // namespace privkit
