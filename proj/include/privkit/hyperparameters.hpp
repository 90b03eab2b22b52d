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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "privkit/error.hpp"

namespace privkit {

/// How each embedding term enters the loss. `l2` is the default; `squared_l2`
/// exists for sensitivity runs.
enum class EmbeddingTerm { l2, squared_l2 };

inline std::string_view to_string(EmbeddingTerm t) {
  return t == EmbeddingTerm::l2 ? "l2" : "squared_l2";
}

inline EmbeddingTerm parse_embedding_term(std::string_view s) {
  if (s == "l2") return EmbeddingTerm::l2;
  if (s == "squared_l2") return EmbeddingTerm::squared_l2;
  throw ConfigError("unknown embedding_term '" + std::string(s) + "' (expected l2 or squared_l2)");
}

struct Hyperparameters {
  double K = 0.03;
  std::size_t num_iterations = 128;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  double rho = 0.05;
  std::uint64_t seed = 0;
  EmbeddingTerm embedding_term = EmbeddingTerm::l2;

  // Adam constants; recorded in run manifests.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  bool operator==(const Hyperparameters&) const = default;
};

inline void validate(const Hyperparameters& h) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(std::isfinite(h.K) && h.K >= 0.0, "K must be a finite non-negative number");
  need(std::isfinite(h.learning_rate) && h.learning_rate > 0.0, "learning_rate must be positive");
  need(h.batch_size > 0, "batch_size must be positive");
  need(std::isfinite(h.rho) && h.rho >= 0.0, "rho must be a finite non-negative number");
  need(h.beta1 >= 0.0 && h.beta1 < 1.0 && h.beta2 >= 0.0 && h.beta2 < 1.0,
       "Adam betas must lie in [0, 1)");
  need(h.adam_epsilon > 0.0, "adam_epsilon must be positive");
}

/// Named (K, iterations) presets for the generator families.
inline std::optional<Hyperparameters> preset(std::string_view method) {
  Hyperparameters h;
  if (method == "StyleGAN") {
    h.K = 0.03;
    h.num_iterations = 128;
    return h;
  }
  if (method == "VQGAN") {
    h.K = 0.03;
    h.num_iterations = 1000;
    return h;
  }
  return std::nullopt;
}

/// "<Method>_<K>_<iterations>", e.g. "StyleGAN_0.003_500". A bare "<Method>"
/// carries no K/iterations and resolves through preset().
struct VariantName {
  std::string method;
  std::optional<double> K;
  std::optional<std::size_t> num_iterations;
};

inline VariantName parse_variant_name(std::string_view name) {
  if (name.empty()) throw ConfigError("variant name must not be empty");
  VariantName out{std::string(name), std::nullopt, std::nullopt};
  const auto last = name.rfind('_');
  if (last == std::string_view::npos || last == 0) return out;
  const auto mid = name.rfind('_', last - 1);
  if (mid == std::string_view::npos || mid == 0) return out;

  const std::string_view k_text = name.substr(mid + 1, last - mid - 1);
  const std::string_view it_text = name.substr(last + 1);
  double k = 0.0;
  std::size_t iterations = 0;
  auto [kp, kec] = std::from_chars(k_text.data(), k_text.data() + k_text.size(), k);
  auto [ip, iec] = std::from_chars(it_text.data(), it_text.data() + it_text.size(), iterations);
  if (kec != std::errc() || kp != k_text.data() + k_text.size() || iec != std::errc() ||
      ip != it_text.data() + it_text.size() || k_text.empty() || it_text.empty()) {
    return out;
  }
  out.method = std::string(name.substr(0, mid));
  out.K = k;
  out.num_iterations = iterations;
  return out;
}

inline std::string format_variant_name(std::string_view method, double K, std::size_t iterations) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", K);
  return std::string(method) + "_" + buf + "_" + std::to_string(iterations);
}

/// Applies K and iterations from a variant name on top of `base`, falling
/// back to the method preset when the name has no numeric suffix.
inline Hyperparameters resolve_variant(std::string_view name, Hyperparameters base = {}) {
  const VariantName parsed = parse_variant_name(name);
  if (parsed.K) {
    base.K = *parsed.K;
    base.num_iterations = *parsed.num_iterations;
  } else if (auto p = preset(parsed.method)) {
    base.K = p->K;
    base.num_iterations = p->num_iterations;
  }
  return base;
}

}  // namespace privkit
