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

// The single-file JSON run descriptor shared by every CLI command.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "privkit/dataset.hpp"
#include "privkit/embedding_cache.hpp"
#include "privkit/hyperparameters.hpp"
#include "privkit/optimizer.hpp"
#include "privkit/registry.hpp"
#include "privkit/target_selection.hpp"
#include "privkit/toy_backends.hpp"
#include "privkit/transfer_eval.hpp"

namespace privkit {

using nlohmann::json;

struct VariantConfig {
  std::string name;
  Method method = Method::privacygan;
  std::optional<std::string> generator;
  std::vector<std::string> embeddings;  // defaults to plan.optimize_embeddings
  std::string perceptual;
  Hyperparameters hyper;
  std::vector<std::string> stages;      // composition only: variant names in order
};

enum class ExtractMode { images, frames };

struct ExtractConfig {
  ExtractMode mode = ExtractMode::images;
  std::filesystem::path input_dir;
  std::filesystem::path detections;          // frames mode, JSON lines
  std::optional<std::filesystem::path> identities;  // frames mode, {video_id: identity}
  std::size_t per_identity = 5;
  FrameRules rules;
  std::size_t confounders = 0;
  std::size_t target_identities = 0;
  std::optional<std::size_t> max_primary_identities;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;    // directory of the config file
  std::filesystem::path output_dir;
  json backends = json::array();
  std::optional<ExtractConfig> extract;
  std::optional<std::filesystem::path> dataset;  // manifest path; default <output>/dataset/manifest.json
  std::optional<std::string> target_embedding;
  double far_fraction = 0.1;
  std::vector<VariantConfig> variants;
  TransferPlan plan;
  json raw;                          // effective configuration, hashed for provenance

  std::filesystem::path dataset_manifest() const {
    return dataset ? *dataset : output_dir / "dataset" / "manifest.json";
  }

  const VariantConfig& variant(const std::string& name) const {
    for (const auto& v : variants)
      if (v.name == name) return v;
    throw ConfigError("no variant named '" + name + "' in the config");
  }
};

namespace detail {

inline Shape parse_shape(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + " must be [height, width, channels]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

inline Projection parse_projection(const std::string& s) {
  if (s == "identity") return Projection::identity;
  if (s == "gaussian") return Projection::gaussian;
  throw ConfigError("unknown projection '" + s + "'");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void apply_hyper(const json& j, Hyperparameters& h) {
  if (j.contains("K")) h.K = j.at("K").get<double>();
  if (j.contains("num_iterations")) h.num_iterations = j.at("num_iterations").get<std::size_t>();
  if (j.contains("learning_rate")) h.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) h.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("rho")) h.rho = j.at("rho").get<double>();
  if (j.contains("embedding_term")) h.embedding_term = parse_embedding_term(j.at("embedding_term").get<std::string>());
  if (j.contains("beta1")) h.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) h.beta2 = j.at("beta2").get<double>();
  if (j.contains("adam_epsilon")) h.adam_epsilon = j.at("adam_epsilon").get<double>();
}

}  // namespace detail

inline json to_json(const Hyperparameters& h) {
  return {{"K", h.K},
          {"num_iterations", h.num_iterations},
          {"learning_rate", h.learning_rate},
          {"batch_size", h.batch_size},
          {"rho", h.rho},
          {"seed", h.seed},
          {"embedding_term", std::string(to_string(h.embedding_term))},
          {"update_rule", "adam"},
          {"beta1", h.beta1},
          {"beta2", h.beta2},
          {"adam_epsilon", h.adam_epsilon}};
}

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON dump.
inline std::string config_hash(const json& j) { return hex64(detail::fnv1a(j.dump())); }

/// Builds and registers every backend listed under "backends".
inline Registry build_registry(const json& backends) {
  Registry registry;
  for (const auto& b : backends) {
    const std::string name = b.at("name").get<std::string>();
    const std::string kind = b.at("kind").get<std::string>();
    const std::string type = b.value("type", std::string());
    if (kind == "embedding") {
      if (type != "projection") throw ConfigError("unknown embedding type '" + type + "' for '" + name + "'");
      ProjectionEmbedding::Options o;
      o.crop = detail::parse_shape(b.at("crop"), "crop of '" + name + "'");
      o.dim = b.value("dim", std::size_t{0});
      o.projection = detail::parse_projection(b.value("projection", std::string("gaussian")));
      const std::string act = b.value("activation", std::string("none"));
      if (act != "none" && act != "tanh") throw ConfigError("unknown activation '" + act + "'");
      o.activation = act == "tanh" ? Activation::tanh : Activation::none;
      o.seed = b.value("seed", std::uint64_t{0});
      registry.add(std::make_shared<const ProjectionEmbedding>(name, o));
    } else if (kind == "generator") {
      if (type != "linear") throw ConfigError("unknown generator type '" + type + "' for '" + name + "'");
      LinearGenerator::Options o;
      o.shape = detail::parse_shape(b.at("shape"), "shape of '" + name + "'");
      o.latent_dim = b.value("latent_dim", std::size_t{0});
      o.projection = detail::parse_projection(b.value("projection", std::string("identity")));
      o.bias = b.value("bias", 0.0);
      o.latent_mean = b.value("latent_mean", 0.5);
      o.latent_stddev = b.value("latent_stddev", 0.1);
      o.seed = b.value("seed", std::uint64_t{0});
      registry.add(std::make_shared<const LinearGenerator>(name, o));
    } else if (kind == "perceptual") {
      SquaredPixelDistance::Reduction r;
      if (type == "mean_squared") {
        r = SquaredPixelDistance::Reduction::mean;
      } else if (type == "sum_squared") {
        r = SquaredPixelDistance::Reduction::sum;
      } else {
        throw ConfigError("unknown perceptual type '" + type + "' for '" + name + "'");
      }
      registry.add(std::make_shared<const SquaredPixelDistance>(name, r));
    } else {
      throw ConfigError("unknown backend kind '" + kind + "' for '" + name + "'");
    }
  }
  return registry;
}

/// Parses a config document. `base_dir` anchors relative paths; a set
/// `seed_override` replaces the document's seed before hashing.
inline RunConfig parse_run_config(json doc, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  try {
    if (seed_override) doc["seed"] = *seed_override;
    RunConfig c;
    c.raw = doc;
    c.base_dir = base_dir;
    c.name = doc.value("name", std::string("run"));
    c.seed = doc.value("seed", std::uint64_t{0});
    c.output_dir = detail::resolve(base_dir, doc.value("output_dir", std::string("out")));
    c.backends = doc.value("backends", json::array());
    if (doc.contains("dataset")) c.dataset = detail::resolve(base_dir, doc.at("dataset").get<std::string>());

    if (doc.contains("extract")) {
      const json& e = doc.at("extract");
      ExtractConfig x;
      const std::string mode = e.value("mode", std::string("images"));
      if (mode != "images" && mode != "frames") throw ConfigError("extract.mode must be images or frames");
      x.mode = mode == "frames" ? ExtractMode::frames : ExtractMode::images;
      x.input_dir = detail::resolve(base_dir, e.at("input_dir").get<std::string>());
      if (e.contains("detections")) x.detections = detail::resolve(base_dir, e.at("detections").get<std::string>());
      if (e.contains("identities")) x.identities = detail::resolve(base_dir, e.at("identities").get<std::string>());
      x.per_identity = e.value("per_identity", std::size_t{5});
      x.rules.count = x.per_identity;
      x.rules.min_gap = e.value("min_gap", x.rules.min_gap);
      x.rules.brightness_min = e.value("brightness_min", x.rules.brightness_min);
      x.rules.crop_min = e.value("crop_min", x.rules.crop_min);
      x.rules.margin = e.value("margin", x.rules.margin);
      x.confounders = e.value("confounders", std::size_t{0});
      x.target_identities = e.value("target_identities", std::size_t{0});
      if (e.contains("max_primary_identities")) x.max_primary_identities = e.at("max_primary_identities").get<std::size_t>();
      if (x.mode == ExtractMode::frames && x.detections.empty()) {
        throw ConfigError("extract.detections is required in frames mode");
      }
      c.extract = x;
    }

    const json plan = doc.value("plan", json::object());
    c.plan.optimize_embeddings = plan.value("optimize_embeddings", std::vector<std::string>{});
    c.plan.evaluate_embeddings = plan.value("evaluate_embeddings", c.plan.optimize_embeddings);
    c.plan.k_values = plan.value("k_values", default_k_values());

    if (doc.contains("targets")) {
      const json& t = doc.at("targets");
      if (t.contains("embedding")) c.target_embedding = t.at("embedding").get<std::string>();
      c.far_fraction = t.value("far_fraction", c.far_fraction);
    }

    Hyperparameters defaults;
    const json hyper_defaults = doc.value("defaults", json::object());
    detail::apply_hyper(hyper_defaults, defaults);
    const std::string default_perceptual = hyper_defaults.value("perceptual", std::string());

    std::set<std::string> names;
    for (const auto& v : doc.value("variants", json::array())) {
      VariantConfig vc;
      vc.name = v.at("name").get<std::string>();
      if (!names.insert(vc.name).second) throw ConfigError("duplicate variant name '" + vc.name + "'");
      vc.method = parse_method(v.value("method", std::string("privacygan")));
      vc.hyper = resolve_variant(vc.name, defaults);
      detail::apply_hyper(v, vc.hyper);
      const VariantName parsed = parse_variant_name(vc.name);
      if (v.contains("generator")) {
        vc.generator = v.at("generator").get<std::string>();
      } else if (vc.method == Method::privacygan) {
        vc.generator = parsed.method;
      }
      vc.embeddings = v.value("embeddings", c.plan.optimize_embeddings);
      vc.perceptual = v.value("perceptual", default_perceptual);
      vc.stages = v.value("stages", std::vector<std::string>{});
      if (vc.method == Method::composition && vc.stages.size() < 2) {
        throw ConfigError("composition variant '" + vc.name + "' needs at least two stages");
      }
      if (vc.method == Method::privacygan && vc.perceptual.empty()) {
        throw ConfigError("variant '" + vc.name + "' needs a perceptual backend");
      }
      validate(vc.hyper);
      c.variants.push_back(std::move(vc));
    }
    for (const auto& v : c.variants) {
      for (const auto& s : v.stages) {
        const VariantConfig& stage = c.variant(s);
        if (stage.method == Method::composition) {
          throw ConfigError("composition '" + v.name + "' cannot nest composition '" + s + "'");
        }
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> seed_override = std::nullopt) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config '" + path.string() + "': " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(std::move(doc), std::filesystem::absolute(path).parent_path(), seed_override);
}

}  // namespace privkit
