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

// Retrieval privacy metrics over embedding galleries: exact k-NN, Recall@k,
// Between and the Percentage metric, plus the m.i./o.i. query contexts.
//
// Neighbor order is ascending (distance, image_id), so every result is a
// pure function of the gallery contents and not of their order.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "privkit/backends.hpp"
#include "privkit/error.hpp"

namespace privkit {

struct GalleryEntry {
  std::string image_id;
  std::string identity;
  std::vector<double> vector;
};

class Gallery {
 public:
  Gallery() = default;
  Gallery(std::string backend_name, std::vector<GalleryEntry> records)
      : backend_name_(std::move(backend_name)), records_(std::move(records)) {
    std::set<std::string> ids;
    for (const auto& r : records_) {
      PRIVKIT_REQUIRE(ids.insert(r.image_id).second,
                      "duplicate image id '" + r.image_id + "' in gallery for '" + backend_name_ + "'");
      PRIVKIT_REQUIRE(r.vector.size() == records_.front().vector.size(),
                      "gallery vectors for '" + backend_name_ + "' differ in dimension");
    }
  }

  const std::string& backend_name() const { return backend_name_; }
  const std::vector<GalleryEntry>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t dim() const { return records_.empty() ? 0 : records_.front().vector.size(); }

  const GalleryEntry* find(const std::string& id) const {
    for (const auto& r : records_)
      if (r.image_id == id) return &r;
    return nullptr;
  }

  EmbeddingVector embedding(const GalleryEntry& e) const { return {backend_name_, e.vector, e.image_id}; }

  /// Concatenation; image ids must stay unique.
  friend Gallery merge(const Gallery& a, const Gallery& b) {
    PRIVKIT_REQUIRE(a.empty() || b.empty() || a.backend_name_ == b.backend_name_,
                    "cannot merge galleries of backends '" + a.backend_name_ + "' and '" + b.backend_name_ + "'");
    std::vector<GalleryEntry> all = a.records_;
    all.insert(all.end(), b.records_.begin(), b.records_.end());
    return Gallery(a.empty() ? b.backend_name_ : a.backend_name_, std::move(all));
  }

 private:
  std::string backend_name_;
  std::vector<GalleryEntry> records_;
};

struct Neighbor {
  std::string image_id;
  std::string identity;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

namespace detail {

inline void require_same_backend(const std::string& a, const std::string& b) {
  PRIVKIT_REQUIRE(a == b, "query backend '" + a + "' does not match gallery backend '" + b + "'");
}

inline std::vector<Neighbor> ranked(const EmbeddingVector& q, const Gallery& M) {
  std::vector<Neighbor> all;
  all.reserve(M.size());
  for (const auto& r : M.records()) all.push_back({r.image_id, r.identity, embedding_distance(q, M.embedding(r))});
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.image_id < b.image_id;
  });
  return all;
}

}  // namespace detail

/// The k gallery items closest to q, ascending by (distance, image_id).
inline std::vector<Neighbor> nearest_neighbors(const EmbeddingVector& q, const Gallery& M, std::size_t k) {
  detail::require_same_backend(q.backend_name, M.backend_name());
  PRIVKIT_REQUIRE(k >= 1 && k <= M.size(), "k=" + std::to_string(k) + " outside [1, " +
                                               std::to_string(M.size()) + "]");
  std::vector<Neighbor> all = detail::ranked(q, M);
  all.resize(k);
  return all;
}

/// 100 * fraction of queries whose identity is among their k nearest
/// gallery identities. `identity_of` resolves gallery and query ids.
inline double recall_at_k(const Gallery& L, const Gallery& M, std::size_t k,
                          const std::unordered_map<std::string, std::string>& identity_of) {
  PRIVKIT_REQUIRE(!L.empty(), "recall_at_k needs at least one query");
  auto id_of = [&](const std::string& image_id) -> const std::string& {
    auto it = identity_of.find(image_id);
    PRIVKIT_REQUIRE(it != identity_of.end(), "no identity known for image '" + image_id + "'");
    return it->second;
  };
  std::size_t hits = 0;
  for (const auto& q : L.records()) {
    const std::string& who = id_of(q.image_id);
    for (const auto& n : nearest_neighbors(L.embedding(q), M, k)) {
      if (id_of(n.image_id) == who) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(L.size());
}

/// Identity map built from the records of both galleries.
inline std::unordered_map<std::string, std::string> identity_map(const Gallery& L, const Gallery& M) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& r : M.records()) out[r.image_id] = r.identity;
  for (const auto& r : L.records()) out[r.image_id] = r.identity;
  return out;
}

/// Same as above with identities taken from the gallery records themselves.
inline double recall_at_k(const Gallery& L, const Gallery& M, std::size_t k) {
  PRIVKIT_REQUIRE(!L.empty(), "recall_at_k needs at least one query");
  std::size_t hits = 0;
  for (const auto& q : L.records()) {
    for (const auto& n : nearest_neighbors(L.embedding(q), M, k)) {
      if (n.identity == q.identity) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(L.size());
}

/// Number of gallery images strictly closer to q than `match_id` is.
inline std::size_t between(const EmbeddingVector& q, const std::string& match_id, const Gallery& M) {
  detail::require_same_backend(q.backend_name, M.backend_name());
  const GalleryEntry* match = M.find(match_id);
  PRIVKIT_REQUIRE(match != nullptr, "match '" + match_id + "' is not in the gallery");
  const double limit = embedding_distance(q, M.embedding(*match));
  std::size_t count = 0;
  for (const auto& r : M.records()) count += embedding_distance(q, M.embedding(r)) < limit ? 1 : 0;
  return count;
}

/// Which gallery image plays N(q, 1, M) in the Percentage metric.
enum class PercentageMatch {
  same_identity,   // closest gallery image sharing q's identity (default)
  global_nearest,  // literal nearest neighbor; Between is then always 0
};

struct PercentageResult {
  double value = 0.0;
  std::size_t n_excluded = 0;  // queries whose identity is absent from M
};

/// 100 * sum_q Between(q, match(q)) / (|L'| * |M|), where L' drops queries
/// whose identity has no image in M.
inline PercentageResult percentage_metric(const Gallery& L, const Gallery& M,
                                          PercentageMatch reading = PercentageMatch::same_identity) {
  PRIVKIT_REQUIRE(!L.empty(), "percentage_metric needs at least one query");
  PRIVKIT_REQUIRE(!M.empty(), "percentage_metric needs a non-empty gallery");
  PercentageResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& q : L.records()) {
    const EmbeddingVector qv = L.embedding(q);
    const std::vector<Neighbor> order = detail::ranked(qv, M);
    const Neighbor* match = nullptr;
    if (reading == PercentageMatch::global_nearest) {
      match = &order.front();
    } else {
      for (const auto& n : order) {
        if (n.identity == q.identity) {
          match = &n;
          break;
        }
      }
    }
    if (!match) {
      ++out.n_excluded;
      continue;
    }
    sum += static_cast<double>(between(qv, match->image_id, M));
    ++used;
  }
  if (used > 0) out.value = 100.0 * sum / (static_cast<double>(used) * static_cast<double>(M.size()));
  return out;
}

struct QueryContext {
  Gallery queries;
  Gallery gallery;
};

struct Contexts {
  QueryContext mi;  // modified images query originals + confounders
  QueryContext oi;  // original images query modified + confounders
};

/// The confounder set may hold at most one fifth as many images as the
/// original set.
inline Contexts build_contexts(const Gallery& originals, const Gallery& modified, const Gallery& confounders) {
  if (confounders.size() * 5 > originals.size()) {
    throw ConfigError("confounder cap violated: " + std::to_string(confounders.size()) +
                      " confounders for " + std::to_string(originals.size()) + " originals (max 1/5)");
  }
  PRIVKIT_REQUIRE(originals.backend_name() == modified.backend_name(),
                  "original and modified galleries use different backends");
  PRIVKIT_REQUIRE(originals.size() == modified.size(), "originals and modified differ in size");
  std::set<std::string> original_ids;
  for (const auto& r : originals.records()) original_ids.insert(r.image_id);
  for (const auto& r : modified.records()) {
    PRIVKIT_REQUIRE(original_ids.count(r.image_id), "modified image '" + r.image_id + "' has no original");
  }
  return {{modified, merge(originals, confounders)}, {originals, merge(modified, confounders)}};
}

struct MetricReport {
  std::string backend_name;
  std::vector<std::size_t> k_values;
  std::map<std::size_t, double> recall_mi;
  std::map<std::size_t, double> recall_oi;
  double percentage = 0.0;     // m.i. context
  double percentage_oi = 0.0;  // o.i. context
  std::size_t n_queries = 0;
  std::size_t n_gallery = 0;
  std::size_t n_confounders = 0;
  std::size_t n_excluded = 0;
};

namespace detail {

struct ContextScores {
  std::map<std::size_t, double> recall;
  PercentageResult percentage;
};

/// One sort per query yields both metrics: Recall@k needs the rank of the
/// first same-identity neighbor, Percentage needs how many images precede
/// that neighbor with a strictly smaller distance. k above |M| is clamped to
/// |M|, which is the value N(q, k, M) gives when it returns all of M.
inline ContextScores score_context(const QueryContext& ctx, const std::vector<std::size_t>& k_values,
                                   PercentageMatch reading) {
  const Gallery& L = ctx.queries;
  const Gallery& M = ctx.gallery;
  PRIVKIT_REQUIRE(!L.empty() && !M.empty(), "a metric context needs queries and a gallery");
  std::vector<std::size_t> first_rank;  // 0 = identity absent
  double between_sum = 0.0;
  ContextScores out;
  std::size_t used = 0;
  for (const auto& q : L.records()) {
    const std::vector<Neighbor> order = ranked(L.embedding(q), M);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i].identity == q.identity) {
        rank = i + 1;
        break;
      }
    }
    first_rank.push_back(rank);
    if (rank == 0) {
      ++out.percentage.n_excluded;
      continue;
    }
    const double limit = reading == PercentageMatch::global_nearest ? order.front().distance
                                                                    : order[rank - 1].distance;
    std::size_t closer = 0;
    while (closer < order.size() && order[closer].distance < limit) ++closer;
    between_sum += static_cast<double>(closer);
    ++used;
  }
  if (used > 0) {
    out.percentage.value = 100.0 * between_sum / (static_cast<double>(used) * static_cast<double>(M.size()));
  }
  for (std::size_t k : k_values) {
    PRIVKIT_REQUIRE(k >= 1, "k values must be positive");
    const std::size_t eff = std::min(k, M.size());
    std::size_t hits = 0;
    for (std::size_t r : first_rank) hits += (r != 0 && r <= eff) ? 1 : 0;
    out.recall[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(L.size());
  }
  return out;
}

}  // namespace detail

inline MetricReport evaluate_contexts(const Contexts& ctx, std::vector<std::size_t> k_values,
                                      std::size_t n_confounders,
                                      PercentageMatch reading = PercentageMatch::same_identity) {
  std::sort(k_values.begin(), k_values.end());
  k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());
  const auto mi = detail::score_context(ctx.mi, k_values, reading);
  const auto oi = detail::score_context(ctx.oi, k_values, reading);
  MetricReport r;
  r.backend_name = ctx.mi.gallery.backend_name();
  r.k_values = k_values;
  r.recall_mi = mi.recall;
  r.recall_oi = oi.recall;
  r.percentage = mi.percentage.value;
  r.percentage_oi = oi.percentage.value;
  r.n_queries = ctx.mi.queries.size();
  r.n_gallery = ctx.mi.gallery.size();
  r.n_confounders = n_confounders;
  r.n_excluded = mi.percentage.n_excluded;
  return r;
}

}  // namespace privkit
