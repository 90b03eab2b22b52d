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


#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

namespace privkit {
namespace {

using testing::oracle_percentage;
using testing::oracle_recall;
using testing::oracle_sorted;
using testing::random_gallery;

Gallery gallery(std::vector<GalleryEntry> entries, std::string backend = "e") {
  return Gallery(std::move(backend), std::move(entries));
}

EmbeddingVector query(std::vector<double> v) { return {"e", std::move(v), "q"}; }

TEST(NearestNeighbors, ExactMatchComesFirstAtZero) {
  const Gallery M = gallery({{"a", "A", {0.0, 1.0}}, {"b", "B", {1.0, 1.0}}, {"c", "C", {5.0, 5.0}}});
  const auto nn = nearest_neighbors(query({1.0, 1.0}), M, 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].image_id, "b");
  EXPECT_EQ(nn[0].distance, 0.0);
}

TEST(NearestNeighbors, MatchesFullSortOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Gallery M = random_gallery("e", "g", 5, 3, 3, rng);
    const Gallery L = random_gallery("e", "q", 1, 3, 3, rng);
    const auto nn = nearest_neighbors(L.embedding(L.records()[0]), M, 3);
    const auto oracle = oracle_sorted(L.records()[0], M);
    ASSERT_EQ(nn.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(nn[i].image_id, oracle[i].id);
      EXPECT_EQ(nn[i].distance, oracle[i].distance);
    }
  }
}

TEST(NearestNeighbors, TiesOrderByAscendingId) {
  const Gallery M = gallery({{"z", "A", {1.0, 0.0}}, {"m", "B", {0.0, 1.0}}, {"a", "C", {-1.0, 0.0}}});
  const auto nn = nearest_neighbors(query({0.0, 0.0}), M, 3);
  EXPECT_EQ(nn[0].image_id, "a");
  EXPECT_EQ(nn[1].image_id, "m");
  EXPECT_EQ(nn[2].image_id, "z");
}

TEST(NearestNeighbors, IsPermutationInvariant) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Gallery M = random_gallery("e", "g", 12, 2, 4, rng, true);
    std::vector<GalleryEntry> shuffled = M.records();
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Gallery P("e", shuffled);
    const auto q = query({0.5, -0.5});
    EXPECT_EQ(nearest_neighbors(q, M, 12), nearest_neighbors(q, P, 12));
  }
}

TEST(NearestNeighbors, RejectsBadKAndForeignBackend) {
  const Gallery M = gallery({{"a", "A", {0.0}}});
  EXPECT_THROW(nearest_neighbors(query({0.0}), M, 0), ContractViolation);
  EXPECT_THROW(nearest_neighbors(query({0.0}), M, 2), ContractViolation);
  EXPECT_THROW(nearest_neighbors(EmbeddingVector{"other", {0.0}, "q"}, M, 1), ContractViolation);
}

TEST(Recall, ExactDuplicatesGiveFullRecall) {
  std::mt19937_64 rng(1);
  const Gallery L = random_gallery("e", "q", 6, 4, 6, rng);
  std::vector<GalleryEntry> dup = L.records();
  for (auto& e : dup) e.image_id = "m" + e.image_id;
  const Gallery M("e", dup);
  EXPECT_EQ(recall_at_k(L, M, 1), 100.0);
}

TEST(Recall, DisjointIdentitiesGiveZero) {
  std::mt19937_64 rng(2);
  const Gallery L = random_gallery("e", "q", 5, 3, 3, rng);
  std::vector<GalleryEntry> other = random_gallery("e", "g", 8, 3, 3, rng).records();
  for (auto& e : other) e.identity = "x" + e.identity;
  const Gallery M("e", other);
  for (std::size_t k : {1, 3, 8}) EXPECT_EQ(recall_at_k(L, M, k), 0.0);
}

TEST(Recall, MatchesBruteForceOnRandomInstance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Gallery L = random_gallery("e", "q", 6, 4, 4, rng);
    const Gallery M = random_gallery("e", "g", 12, 4, 4, rng);
    for (std::size_t k : {1, 3}) EXPECT_EQ(recall_at_k(L, M, k), oracle_recall(L, M, k));
  }
}

TEST(Recall, IdentityMapOverloadAgrees) {
  std::mt19937_64 rng(4);
  const Gallery L = random_gallery("e", "q", 6, 4, 3, rng);
  const Gallery M = random_gallery("e", "g", 12, 4, 3, rng);
  EXPECT_EQ(recall_at_k(L, M, 3, identity_map(L, M)), recall_at_k(L, M, 3));
}

TEST(Between, NearestMatchIsZeroAndFarthestIsAllOthers) {
  const Gallery M = gallery({{"a", "A", {1.0}}, {"b", "B", {2.0}}, {"c", "C", {3.0}}, {"d", "D", {4.0}}});
  EXPECT_EQ(between(query({0.0}), "a", M), 0u);
  EXPECT_EQ(between(query({0.0}), "d", M), 3u);
  EXPECT_THROW(between(query({0.0}), "missing", M), ContractViolation);
}

TEST(Between, TiesDoNotCount) {
  const Gallery M = gallery({{"a", "A", {1.0}}, {"b", "B", {-1.0}}, {"c", "C", {2.0}}});
  EXPECT_EQ(between(query({0.0}), "a", M), 0u);
  EXPECT_EQ(between(query({0.0}), "b", M), 0u);
  EXPECT_EQ(between(query({0.0}), "c", M), 2u);
}

TEST(Between, MatchesCountingOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Gallery M = random_gallery("e", "g", 10, 3, 4, rng, trial % 2 == 0);
    const Gallery L = random_gallery("e", "q", 1, 3, 4, rng);
    const auto& q = L.records()[0];
    for (const auto& match : M.records()) {
      const double limit = testing::oracle_distance(q.vector, match.vector);
      std::size_t count = 0;
      for (const auto& g : M.records()) count += testing::oracle_distance(q.vector, g.vector) < limit;
      EXPECT_EQ(between(L.embedding(q), match.image_id, M), count);
    }
  }
}

TEST(Percentage, ZeroWhenSameIdentityIsNearest) {
  const Gallery L = gallery({{"q1", "A", {0.0}}, {"q2", "B", {10.0}}});
  const Gallery M = gallery({{"a", "A", {0.1}}, {"b", "B", {10.1}}, {"c", "C", {5.0}}});
  EXPECT_EQ(percentage_metric(L, M).value, 0.0);
}

TEST(Percentage, SingleQueryFarthestMatchIsNinety) {
  std::vector<GalleryEntry> m;
  for (int i = 0; i < 9; ++i) m.push_back({"g" + std::to_string(i), "X" + std::to_string(i), {double(i + 1)}});
  m.push_back({"match", "A", {100.0}});
  const Gallery M = gallery(m);
  const Gallery L = gallery({{"q", "A", {0.0}}});
  EXPECT_EQ(percentage_metric(L, M).value, 90.0);
  EXPECT_EQ(percentage_metric(L, M, PercentageMatch::global_nearest).value, 0.0);
}

TEST(Percentage, MatchesSortingOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const Gallery L = random_gallery("e", "q", 4, 3, 3, rng, trial % 3 == 0);
    const Gallery M = random_gallery("e", "g", 8, 3, 3, rng, trial % 3 == 0);
    std::size_t excluded = 0;
    const double expected = oracle_percentage(L, M, &excluded);
    const PercentageResult got = percentage_metric(L, M);
    EXPECT_EQ(got.value, expected);
    EXPECT_EQ(got.n_excluded, excluded);
  }
}

TEST(Percentage, StaysBelowHundredAndFarConfounderNeverRaisesIt) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Gallery L = random_gallery("e", "q", 5, 3, 3, rng);
    const Gallery M = random_gallery("e", "g", 10, 3, 3, rng);
    const double base = percentage_metric(L, M).value;
    EXPECT_GE(base, 0.0);
    EXPECT_LT(base, 100.0);
    const Gallery far = gallery({{"far", "Z", {1000.0, 1000.0, 1000.0}}});
    EXPECT_LE(percentage_metric(L, merge(M, far)).value, base);
  }
}

TEST(Percentage, QueriesWithoutIdentityInGalleryAreExcluded) {
  const Gallery L = gallery({{"q1", "A", {0.0}}, {"q2", "Z", {0.0}}});
  const Gallery M = gallery({{"a", "A", {3.0}}, {"b", "B", {1.0}}});
  const PercentageResult r = percentage_metric(L, M);
  EXPECT_EQ(r.n_excluded, 1u);
  EXPECT_EQ(r.value, 50.0);
}

TEST(Recall, MonotoneInKAndFullAtGallerySize) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const Gallery L = random_gallery("e", "q", 6, 3, 3, rng);
    const Gallery M = random_gallery("e", "g", 15, 3, 3, rng);
    double prev = 0.0;
    for (std::size_t k = 1; k <= M.size(); ++k) {
      const double r = recall_at_k(L, M, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
    bool all_present = true;
    for (const auto& q : L.records()) {
      all_present = all_present && std::any_of(M.records().begin(), M.records().end(),
                                               [&](const GalleryEntry& g) { return g.identity == q.identity; });
    }
    if (all_present) {
      EXPECT_EQ(prev, 100.0);
    }
  }
}

// --- contexts ----------------------------------------------------------------

Gallery numbered(const std::string& prefix, std::size_t n, double offset) {
  std::vector<GalleryEntry> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), "p" + std::to_string(i), {double(i) * 10.0 + offset, 1.0}});
  }
  return Gallery("e", out);
}

Gallery renamed(const Gallery& g, const std::string& prefix) {
  std::vector<GalleryEntry> out = g.records();
  for (auto& e : out) e.image_id = prefix + e.image_id;
  return Gallery(g.backend_name(), out);
}

TEST(Contexts, GallerySizesIncludeConfounders) {
  const Gallery originals = numbered("o", 10, 0.0);
  const Gallery modified = numbered("o", 10, 0.5);
  const Gallery conf = renamed(numbered("c", 2, 3.0), "x");
  const Contexts ctx = build_contexts(originals, modified, conf);
  EXPECT_EQ(ctx.mi.gallery.size(), 12u);
  EXPECT_EQ(ctx.mi.queries.size(), 10u);
  EXPECT_EQ(ctx.oi.gallery.size(), 12u);
  EXPECT_EQ(ctx.oi.queries.size(), 10u);
}

TEST(Contexts, ConfounderCapIsEnforced) {
  const Gallery originals = numbered("o", 10, 0.0);
  const Gallery modified = numbered("o", 10, 0.5);
  EXPECT_THROW(build_contexts(originals, modified, renamed(numbered("c", 3, 3.0), "x")), ConfigError);
}

TEST(Contexts, UnprotectedModifiedGivesFullRecallBothWays) {
  // injective toy embedding: every image its own point
  const Gallery originals = numbered("o", 10, 0.0);
  const Gallery conf = renamed(numbered("c", 2, 5.0), "x");
  std::vector<GalleryEntry> shifted = conf.records();
  for (auto& e : shifted) e.identity = "conf" + e.identity;
  const Contexts ctx = build_contexts(originals, originals, Gallery("e", shifted));
  const MetricReport r = evaluate_contexts(ctx, {1, 3, 5, 10, 50, 100}, 2);
  EXPECT_EQ(r.recall_mi.at(1), 100.0);
  EXPECT_EQ(r.recall_oi.at(1), 100.0);
  EXPECT_EQ(r.percentage, 0.0);
  EXPECT_EQ(r.n_gallery, 12u);
  EXPECT_EQ(r.n_confounders, 2u);
  EXPECT_EQ(r.recall_mi.at(100), 100.0);
}

TEST(Contexts, ReportMatchesStandaloneMetrics) {
  std::mt19937_64 rng(12);
  const Gallery originals = random_gallery("e", "o", 10, 4, 5, rng);
  std::vector<GalleryEntry> mod = originals.records();
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& e : mod)
    for (auto& v : e.vector) v += n(rng);
  const Gallery modified("e", mod);
  Gallery conf = random_gallery("e", "c", 2, 4, 2, rng);
  const Contexts ctx = build_contexts(originals, modified, conf);
  const MetricReport r = evaluate_contexts(ctx, {1, 3, 5}, conf.size());
  for (std::size_t k : {1, 3, 5}) {
    EXPECT_EQ(r.recall_mi.at(k), oracle_recall(ctx.mi.queries, ctx.mi.gallery, k));
    EXPECT_EQ(r.recall_oi.at(k), oracle_recall(ctx.oi.queries, ctx.oi.gallery, k));
  }
  EXPECT_EQ(r.percentage, oracle_percentage(ctx.mi.queries, ctx.mi.gallery));
  EXPECT_EQ(r.percentage_oi, oracle_percentage(ctx.oi.queries, ctx.oi.gallery));
}

TEST(Gallery, RejectsDuplicateIdsAndRaggedVectors) {
  EXPECT_THROW(gallery({{"a", "A", {0.0}}, {"a", "B", {1.0}}}), ContractViolation);
  EXPECT_THROW(gallery({{"a", "A", {0.0}}, {"b", "B", {1.0, 2.0}}}), ContractViolation);
}

}  // namespace
}  // namespace privkit
