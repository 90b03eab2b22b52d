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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "privkit/error.hpp"
#include "privkit/image.hpp"

namespace privkit {

struct EmbeddingVector {
  std::string backend_name;
  std::vector<double> vector;
  std::string image_id;
};

/// Euclidean distance between two embeddings of the same backend.
inline double embedding_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  PRIVKIT_REQUIRE(a.backend_name == b.backend_name,
                  "embedding backend mismatch: '" + a.backend_name + "' vs '" + b.backend_name + "'");
  PRIVKIT_REQUIRE(a.vector.size() == b.vector.size(),
                  "embedding dimension mismatch: " + std::to_string(a.vector.size()) + " vs " +
                      std::to_string(b.vector.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    const double d = a.vector[i] - b.vector[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

// Backend interfaces. Implementations must be deterministic: identical inputs
// produce bitwise-identical outputs. `thread_safe()` tells orchestration code
// whether one instance may serve concurrent forward/backward calls; when it
// returns false the caller must serialize access.

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual bool supports_gradient() const = 0;
  virtual bool thread_safe() const { return true; }

  virtual std::vector<double> embed(const Image& image) const = 0;

  /// Gradient w.r.t. the pixels of <upstream, embed(image)>.
  virtual Image backpropagate(const Image& image, std::span<const double> upstream) const {
    (void)image;
    (void)upstream;
    throw ConfigError("embedding backend '" + name() + "' does not provide gradients");
  }

  EmbeddingVector embed_record(const ImageRecord& record) const {
    return {name(), embed(record.pixels), record.id};
  }
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual Shape output_shape() const = 0;
  virtual bool supports_gradient() const = 0;
  virtual bool thread_safe() const { return true; }

  virtual Image generate(std::span<const double> latent) const = 0;
  virtual std::vector<double> sample_latent(std::uint64_t seed) const = 0;

  /// Gradient w.r.t. the latent of <upstream, generate(latent)>.
  virtual std::vector<double> backpropagate(std::span<const double> latent, const Image& upstream) const {
    (void)latent;
    (void)upstream;
    throw ConfigError("generator backend '" + name() + "' does not provide gradients");
  }
};

class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;

  virtual const std::string& name() const = 0;
  virtual bool supports_gradient() const = 0;
  virtual bool thread_safe() const { return true; }

  virtual double distance(const Image& a, const Image& b) const = 0;

  /// Gradient of distance(a, b) w.r.t. a.
  virtual Image gradient(const Image& a, const Image& b) const {
    (void)a;
    (void)b;
    throw ConfigError("perceptual distance '" + name() + "' does not provide gradients");
  }
};

}  // namespace privkit
