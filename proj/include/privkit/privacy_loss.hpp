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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "privkit/backends.hpp"
#include "privkit/error.hpp"
#include "privkit/hyperparameters.hpp"
#include "privkit/image.hpp"

namespace privkit {

struct LossTerms {
  double total = 0.0;
  double perceptual = 0.0;
  double embedding = 0.0;
};

/// perceptual(candidate, original) + K * sum_e ||e(candidate) - e(target)||
///
/// Target embeddings are computed once at construction. A null perceptual
/// backend drops the first term, which gives the pixel-cloak objective.
class PrivacyObjective {
 public:
  PrivacyObjective(Image original, const Image& target,
                   std::vector<std::shared_ptr<const EmbeddingBackend>> embeddings,
                   std::shared_ptr<const PerceptualDistance> perceptual, double K,
                   EmbeddingTerm term = EmbeddingTerm::l2)
      : original_(std::move(original)),
        embeddings_(std::move(embeddings)),
        perceptual_(std::move(perceptual)),
        K_(K),
        term_(term) {
    PRIVKIT_REQUIRE(std::isfinite(K_) && K_ >= 0.0, "K must be finite and non-negative");
    for (const auto& e : embeddings_) {
      PRIVKIT_REQUIRE(e != nullptr, "null embedding backend in privacy loss");
      auto v = e->embed(target);
      check_vector(*e, v, "target");
      targets_.push_back(std::move(v));
    }
  }

  LossTerms evaluate(const Image& candidate) const { return run(candidate, nullptr); }

  /// Fills `gradient` with d total / d candidate.
  LossTerms evaluate(const Image& candidate, Image& gradient) const { return run(candidate, &gradient); }

  const Image& original() const { return original_; }

 private:
  static void check_vector(const EmbeddingBackend& e, const std::vector<double>& v, const char* what) {
    PRIVKIT_REQUIRE(v.size() == e.dim(), "embedding backend '" + e.name() + "' returned " +
                                             std::to_string(v.size()) + " values, declared dim " +
                                             std::to_string(e.dim()));
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw NumericError("embedding backend '" + e.name() + "' produced a non-finite value for the " +
                           what + " image");
      }
    }
  }

  LossTerms run(const Image& candidate, Image* gradient) const {
    LossTerms terms;
    if (gradient) *gradient = Image(candidate.shape(), 0.0);

    if (perceptual_) {
      terms.perceptual = perceptual_->distance(candidate, original_);
      if (!std::isfinite(terms.perceptual)) {
        throw NumericError("perceptual distance '" + perceptual_->name() + "' produced a non-finite value");
      }
      if (gradient) {
        const Image g = perceptual_->gradient(candidate, original_);
        for (std::size_t i = 0; i < g.size(); ++i) gradient->pixels()[i] += g.pixels()[i];
      }
    }

    double sum = 0.0;
    for (std::size_t k = 0; k < embeddings_.size(); ++k) {
      const EmbeddingBackend& e = *embeddings_[k];
      const std::vector<double> v = e.embed(candidate);
      check_vector(e, v, "candidate");
      std::vector<double> diff(v.size());
      double sq = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        diff[i] = v[i] - targets_[k][i];
        sq += diff[i] * diff[i];
      }
      const double norm = std::sqrt(sq);
      sum += term_ == EmbeddingTerm::l2 ? norm : sq;
      if (gradient && K_ != 0.0) {
        // d||u|| = u/||u||, taken as 0 at u = 0; d||u||^2 = 2u.
        double scale = 0.0;
        if (term_ == EmbeddingTerm::squared_l2) {
          scale = 2.0 * K_;
        } else if (norm > 0.0) {
          scale = K_ / norm;
        }
        for (double& d : diff) d *= scale;
        const Image g = e.backpropagate(candidate, diff);
        for (std::size_t i = 0; i < g.size(); ++i) gradient->pixels()[i] += g.pixels()[i];
      }
    }
    terms.embedding = sum;
    terms.total = terms.perceptual + K_ * sum;
    if (!std::isfinite(terms.total)) throw NumericError("privacy loss is not finite");
    return terms;
  }

  Image original_;
  std::vector<std::shared_ptr<const EmbeddingBackend>> embeddings_;
  std::shared_ptr<const PerceptualDistance> perceptual_;
  std::vector<std::vector<double>> targets_;
  double K_;
  EmbeddingTerm term_;
};

/// One-shot evaluation of the generative privacy loss.
inline LossTerms privacy_loss(const Image& candidate, const Image& original, const Image& target,
                              std::vector<std::shared_ptr<const EmbeddingBackend>> embeddings,
                              std::shared_ptr<const PerceptualDistance> perceptual, double K,
                              EmbeddingTerm term = EmbeddingTerm::l2) {
  PRIVKIT_REQUIRE(perceptual != nullptr, "privacy_loss needs a perceptual distance");
  return PrivacyObjective(original, target, std::move(embeddings), std::move(perceptual), K, term)
      .evaluate(candidate);
}

}  // namespace privkit
