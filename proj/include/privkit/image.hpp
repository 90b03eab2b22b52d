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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privkit/error.hpp"

namespace privkit {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

/// Dense H x W x C image, row-major with interleaved channels. Values are
/// real-valued; a valid image keeps every value in [0, 1].
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {
    PRIVKIT_REQUIRE(shape.height > 0 && shape.width > 0 && shape.channels > 0,
                    "image shape must be positive, got " + to_string(shape));
  }
  Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    PRIVKIT_REQUIRE(shape.height > 0 && shape.width > 0 && shape.channels > 0,
                    "image shape must be positive, got " + to_string(shape));
    PRIVKIT_REQUIRE(data_.size() == shape.size(),
                    "pixel buffer size does not match shape " + to_string(shape));
  }

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c;
  }

  Shape shape_;
  std::vector<double> data_;
};

/// True when every value is finite and inside [0, 1].
inline bool pixels_valid(const Image& image) {
  return !image.empty() && std::all_of(image.pixels().begin(), image.pixels().end(),
                                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

inline Image clip01(Image image) {
  for (double& v : image.pixels()) v = std::clamp(v, 0.0, 1.0);
  return image;
}

/// 64-bit FNV-1a over the shape and the raw bit patterns of every value.
/// Used as the content key of the embedding cache.
inline std::uint64_t content_hash(const Image& image) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int32_t dims[3] = {image.height(), image.width(), image.channels()};
  mix(dims, sizeof(dims));
  for (double v : image.pixels()) {
    // +0.0 and -0.0 must hash identically.
    const double canonical = v == 0.0 ? 0.0 : v;
    mix(&canonical, sizeof(canonical));
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

enum class Role { original, modified, confounder, target_candidate };

inline std::string_view to_string(Role role) {
  switch (role) {
    case Role::original: return "original";
    case Role::modified: return "modified";
    case Role::confounder: return "confounder";
    case Role::target_candidate: return "target-candidate";
  }
  return "original";
}

inline Role parse_role(std::string_view s) {
  if (s == "original") return Role::original;
  if (s == "modified") return Role::modified;
  if (s == "confounder") return Role::confounder;
  if (s == "target-candidate") return Role::target_candidate;
  throw ContractViolation("unknown image role '" + std::string(s) + "'");
}

struct ImageRecord {
  std::string id;
  std::string identity;
  Image pixels;
  Role role = Role::original;
  std::string source;
};

/// Checks the record invariants; throws ContractViolation naming the record.
inline void validate(const ImageRecord& record) {
  PRIVKIT_REQUIRE(!record.id.empty(), "image record has an empty id");
  PRIVKIT_REQUIRE(!record.identity.empty(), "image '" + record.id + "' has an empty identity");
  PRIVKIT_REQUIRE(pixels_valid(record.pixels),
                  "image '" + record.id + "' has pixels outside [0,1] or non-finite");
}

}  // namespace privkit
