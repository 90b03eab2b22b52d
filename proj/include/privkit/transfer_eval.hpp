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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "privkit/embedding_cache.hpp"
#include "privkit/error.hpp"
#include "privkit/metrics.hpp"
#include "privkit/parallel.hpp"
#include "privkit/registry.hpp"

namespace privkit {

inline const std::vector<std::size_t>& default_k_values() {
  static const std::vector<std::size_t> k{1, 3, 5, 10, 50, 100};
  return k;
}

/// Recall@k used for the transfer scalar.
inline constexpr std::size_t kTransferK = 10;

struct TransferPlan {
  std::vector<std::string> optimize_embeddings;
  std::vector<std::string> evaluate_embeddings;
  std::vector<std::size_t> k_values = default_k_values();
};

inline void validate(const TransferPlan& plan) {
  if (plan.evaluate_embeddings.empty()) throw ConfigError("transfer plan has no evaluation embeddings");
  std::set<std::string> eval(plan.evaluate_embeddings.begin(), plan.evaluate_embeddings.end());
  if (eval.size() != plan.evaluate_embeddings.size()) throw ConfigError("duplicate evaluation embedding");
  for (const auto& name : plan.optimize_embeddings) {
    if (!eval.count(name)) {
      throw ConfigError("optimized embedding '" + name + "' is not in the evaluation set");
    }
  }
  if (std::find(plan.k_values.begin(), plan.k_values.end(), kTransferK) == plan.k_values.end()) {
    throw ConfigError("k_values must include 10");
  }
}

struct TransferReport {
  std::vector<std::string> evaluated;  // plan order
  std::map<std::string, MetricReport> per_embedding;
  std::vector<std::string> optimized_set;
  std::optional<double> transfer_recall;  // absent when every backend was optimized
};

/// Mean Recall@10 (m.i.) over the reported backends not in `optimized`.
inline std::optional<double> transfer_recall(const std::map<std::string, MetricReport>& reports,
                                             std::span<const std::string> optimized) {
  const std::set<std::string> skip(optimized.begin(), optimized.end());
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [name, report] : reports) {
    if (skip.count(name)) continue;
    auto it = report.recall_mi.find(kTransferK);
    PRIVKIT_REQUIRE(it != report.recall_mi.end(), "report for '" + name + "' lacks Recall@10");
    sum += it->second;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct TransferInputs {
  std::span<const ImageRecord> originals;
  std::span<const ImageRecord> modified;
  std::span<const ImageRecord> confounders;
};

/// Embeds all three image sets with every evaluation backend (through the
/// cache when `cache_root` is set), scores both contexts per backend, and
/// aggregates transfer recall over the backends that were not optimized.
inline TransferReport run_transfer_eval(const TransferPlan& plan, const Registry& registry,
                                        const TransferInputs& inputs,
                                        const std::optional<std::filesystem::path>& cache_root = std::nullopt,
                                        std::size_t workers = 1,
                                        PercentageMatch reading = PercentageMatch::same_identity) {
  validate(plan);
  std::vector<std::shared_ptr<const EmbeddingBackend>> backends;
  for (const auto& name : plan.evaluate_embeddings) backends.push_back(registry.embedding(name));

  std::vector<MetricReport> reports(backends.size());
  parallel_for(backends.size(), workers, [&](std::size_t i) {
    const EmbeddingBackend& b = *backends[i];
    std::optional<EmbeddingCache> cache;
    if (cache_root) cache.emplace(*cache_root, b.name(), b.dim());
    EmbeddingCache* c = cache ? &*cache : nullptr;
    const Gallery originals = embed_gallery(b, inputs.originals, c);
    const Gallery modified = embed_gallery(b, inputs.modified, c);
    const Gallery confounders = embed_gallery(b, inputs.confounders, c);
    if (cache) cache->save();
    reports[i] = evaluate_contexts(build_contexts(originals, modified, confounders), plan.k_values,
                                   confounders.size(), reading);
  });

  TransferReport out;
  out.evaluated = plan.evaluate_embeddings;
  out.optimized_set = plan.optimize_embeddings;
  for (std::size_t i = 0; i < backends.size(); ++i) out.per_embedding[backends[i]->name()] = reports[i];
  out.transfer_recall = transfer_recall(out.per_embedding, out.optimized_set);
  return out;
}

struct BudgetVariant {
  double K = 0.0;
  std::size_t num_iterations = 0;

  bool operator==(const BudgetVariant&) const = default;
};

struct BudgetChoice {
  std::size_t index = 0;
  BudgetVariant variant;
  double transfer_recall = 0.0;
  double gap = 0.0;
  bool within_tolerance = false;
};

/// Picks the grid variant whose transfer recall is closest to `reference`.
/// Earlier grid entries win ties. Never throws on a miss; check
/// `within_tolerance`.
inline BudgetChoice match_privacy_budget(double reference, std::span<const BudgetVariant> grid,
                                         double tolerance,
                                         const std::function<double(const BudgetVariant&)>& evaluate) {
  PRIVKIT_REQUIRE(!grid.empty(), "privacy budget grid is empty");
  BudgetChoice best;
  best.gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double tr = evaluate(grid[i]);
    const double gap = std::abs(tr - reference);
    if (gap < best.gap) best = {i, grid[i], tr, gap, false};
  }
  best.within_tolerance = best.gap <= tolerance;
  return best;
}

}  // namespace privkit
