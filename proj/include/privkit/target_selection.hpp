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
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "privkit/backends.hpp"
#include "privkit/image.hpp"

namespace privkit {

struct TargetPair {
  std::string original_id;
  std::string target_id;
  std::string selection_embedding;
  double distance = 0.0;
  int pool_rank = 0;  // 1 = furthest eligible candidate

  bool operator==(const TargetPair&) const = default;
};

inline void to_json(nlohmann::json& j, const TargetPair& p) {
  j = nlohmann::json{{"original_id", p.original_id},
                     {"target_id", p.target_id},
                     {"selection_embedding", p.selection_embedding},
                     {"distance", p.distance},
                     {"pool_rank", p.pool_rank}};
}

inline void from_json(const nlohmann::json& j, TargetPair& p) {
  j.at("original_id").get_to(p.original_id);
  j.at("target_id").get_to(p.target_id);
  j.at("selection_embedding").get_to(p.selection_embedding);
  j.at("distance").get_to(p.distance);
  j.at("pool_rank").get_to(p.pool_rank);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Per-item generator: the draw for one original depends only on (seed, id),
/// so batch results do not depend on batch order or parallel scheduling.
inline std::mt19937_64 keyed_rng(std::uint64_t seed, std::string_view key) {
  const std::uint64_t k = fnv1a(key);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  return std::mt19937_64(seq);
}

struct EmbeddedCandidate {
  const ImageRecord* record;
  EmbeddingVector embedding;
};

inline TargetPair pick_far_target(const ImageRecord& original, const EmbeddingVector& original_embedding,
                                  std::span<const EmbeddedCandidate> pool, double far_fraction,
                                  std::uint64_t seed) {
  PRIVKIT_REQUIRE(far_fraction > 0.0 && far_fraction <= 1.0, "far_fraction must lie in (0, 1]");
  struct Scored {
    double distance;
    const ImageRecord* record;
  };
  std::vector<Scored> eligible;
  for (const auto& c : pool) {
    if (c.record->identity == original.identity) continue;
    eligible.push_back({embedding_distance(original_embedding, c.embedding), c.record});
  }
  if (eligible.empty()) {
    throw SelectionError("no eligible target for '" + original.id +
                         "': the pool has no image of a different identity");
  }
  std::sort(eligible.begin(), eligible.end(), [](const Scored& a, const Scored& b) {
    if (a.distance != b.distance) return a.distance > b.distance;
    return a.record->id < b.record->id;
  });
  const auto top = static_cast<std::size_t>(
      std::ceil(far_fraction * static_cast<double>(eligible.size()) - 1e-12));
  const std::size_t count = std::clamp<std::size_t>(top, 1, eligible.size());
  auto rng = keyed_rng(seed, original.id);
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
  return {original.id, eligible[pick].record->id, original_embedding.backend_name,
          eligible[pick].distance, static_cast<int>(pick + 1)};
}

}  // namespace detail

/// Picks a seeded uniform target among the ceil(far_fraction * n) furthest
/// pool images, where n counts pool images of a different identity. Ties in
/// distance are ordered by ascending id before the cut.
inline TargetPair select_target(const ImageRecord& original, std::span<const ImageRecord> pool,
                                const EmbeddingBackend& embedding, double far_fraction = 0.1,
                                std::uint64_t seed = 0) {
  std::vector<detail::EmbeddedCandidate> embedded;
  embedded.reserve(pool.size());
  for (const auto& r : pool) {
    if (r.identity == original.identity) continue;
    embedded.push_back({&r, embedding.embed_record(r)});
  }
  return detail::pick_far_target(original, embedding.embed_record(original), embedded, far_fraction, seed);
}

/// One TargetPair per original. Pool embeddings are computed once.
inline std::vector<TargetPair> select_targets_batch(std::span<const ImageRecord> originals,
                                                    std::span<const ImageRecord> pool,
                                                    const EmbeddingBackend& embedding,
                                                    double far_fraction = 0.1, std::uint64_t seed = 0) {
  std::set<std::string> original_ids;
  for (const auto& o : originals) original_ids.insert(o.id);
  for (const auto& p : pool) {
    PRIVKIT_REQUIRE(!original_ids.count(p.id),
                    "target pool and originals overlap on image id '" + p.id + "'");
  }
  std::vector<TargetPair> out;
  if (originals.empty()) return out;

  std::vector<detail::EmbeddedCandidate> embedded;
  embedded.reserve(pool.size());
  for (const auto& r : pool) embedded.push_back({&r, embedding.embed_record(r)});
  out.reserve(originals.size());
  for (const auto& o : originals) {
    out.push_back(detail::pick_far_target(o, embedding.embed_record(o), embedded, far_fraction, seed));
  }
  return out;
}

}  // namespace privkit
