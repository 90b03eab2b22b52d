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

// Command-line driver: extract, targets, protect, evaluate, report (plus a
// synth helper that writes a toy image tree). Every command reads one JSON
// run config and writes under its output_dir:
//
//   dataset/manifest.json, dataset/images/*.png      extract
//   targets.jsonl                                    targets (or protect)
//   protect/<variant>/{images,traces,manifests}/     protect
//   evaluate/<variant>/report.{csv,md,json}, *.svg   evaluate
//   report/comparison.{md,csv}                       report
//   cache/<backend>/                                 embedding cache
//
// Exit codes: 0 success, 2 configuration or input error, 3 runtime failure
// (partial outputs may exist). Errors go to stderr as one JSON object.

#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privkit/dataset.hpp"
#include "privkit/embedding_cache.hpp"
#include "privkit/optimizer.hpp"
#include "privkit/png_io.hpp"
#include "privkit/report.hpp"
#include "privkit/run_config.hpp"
#include "privkit/synthetic.hpp"
#include "privkit/target_selection.hpp"
#include "privkit/transfer_eval.hpp"

namespace privkit::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct GlobalOptions {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool overwrite = false;
};

struct Context {
  RunConfig config;
  Registry registry;
  ArtifactStamp stamp;
  GlobalOptions options;
  std::ostream* log = &std::cerr;
};

inline Context make_context(const GlobalOptions& options) {
  if (options.config.empty()) throw ConfigError("--config is required");
  Context ctx;
  ctx.options = options;
  ctx.config = load_run_config(options.config, options.seed);
  ctx.registry = build_registry(ctx.config.backends);
  ctx.stamp = {config_hash(ctx.config.raw), ctx.config.seed};
  return ctx;
}

inline fs::path cache_root(const Context& ctx) {
  if (const char* env = std::getenv("PRIVKIT_CACHE_DIR"); env && *env) return fs::path(env);
  return ctx.config.output_dir / "cache";
}

/// Refuses to clobber an existing output unless --overwrite was given.
inline void claim_output(const fs::path& path, bool overwrite) {
  if (fs::exists(path)) {
    if (!overwrite) throw ConfigError("output '" + path.string() + "' already exists; pass --overwrite to replace it");
    fs::remove_all(path);
  }
}

inline std::map<std::string, std::string> png_text(const ArtifactStamp& s, const std::string& extra_key = {},
                                                   const std::string& extra_value = {}) {
  std::map<std::string, std::string> t{{"privkit:config_hash", s.config_hash},
                                       {"privkit:seed", std::to_string(s.seed)}};
  if (!extra_key.empty()) t[extra_key] = extra_value;
  return t;
}

inline json stamped(json j, const ArtifactStamp& s) {
  j["config_hash"] = s.config_hash;
  j["seed"] = s.seed;
  return j;
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
  return detail::keyed_rng(seed, key)();
}

// ---------------------------------------------------------------------------
// Dataset loading

struct LoadedDataset {
  DatasetManifest manifest;
  fs::path dir;
  std::vector<ImageRecord> originals;
  std::vector<ImageRecord> confounders;
  std::vector<ImageRecord> target_pool;
};

inline LoadedDataset load_dataset(const Context& ctx) {
  const fs::path path = ctx.config.dataset_manifest();
  if (!fs::exists(path)) throw ConfigError("dataset manifest '" + path.string() + "' not found; run extract first");
  LoadedDataset d;
  d.dir = path.parent_path();
  try {
    d.manifest = manifest_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse dataset manifest '" + path.string() + "': " + e.what());
  }
  for (const auto& r : d.manifest.records) {
    ImageRecord rec{r.image_id, r.identity, read_png(d.dir / r.path), r.role, r.source};
    validate(rec);
    switch (r.role) {
      case Role::original: d.originals.push_back(std::move(rec)); break;
      case Role::confounder: d.confounders.push_back(std::move(rec)); break;
      case Role::target_candidate: d.target_pool.push_back(std::move(rec)); break;
      case Role::modified: break;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// extract

namespace detail_extract {

struct Split {
  std::vector<std::string> primary;
  std::vector<std::string> targets;
};

/// Seeded split of qualified identities into primary and target-pool sets.
inline Split split_identities(std::vector<std::string> qualified, const ExtractConfig& x, std::uint64_t seed) {
  std::sort(qualified.begin(), qualified.end());
  auto rng = privkit::detail::keyed_rng(seed, "identity-split");
  std::shuffle(qualified.begin(), qualified.end(), rng);
  if (x.target_identities > qualified.size()) {
    throw ConfigError("target_identities=" + std::to_string(x.target_identities) + " but only " +
                      std::to_string(qualified.size()) + " identities qualify");
  }
  const std::size_t available = qualified.size() - x.target_identities;
  const std::size_t primary = x.max_primary_identities ? std::min(*x.max_primary_identities, available) : available;
  Split s;
  s.primary.assign(qualified.begin(), qualified.begin() + static_cast<std::ptrdiff_t>(primary));
  s.targets.assign(qualified.begin() + static_cast<std::ptrdiff_t>(primary),
                   qualified.begin() + static_cast<std::ptrdiff_t>(primary + x.target_identities));
  std::sort(s.primary.begin(), s.primary.end());
  std::sort(s.targets.begin(), s.targets.end());
  return s;
}

inline std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".png")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Image crop(const Image& frame, const CropBox& b) {
  Image out(Shape{b.h, b.w, frame.channels()}, 0.0);
  for (int y = 0; y < b.h; ++y)
    for (int x = 0; x < b.w; ++x)
      for (int c = 0; c < frame.channels(); ++c) out.at(y, x, c) = frame.at(b.y + y, b.x + x, c);
  return out;
}

inline int extract_images(Context& ctx, const ExtractConfig& x, const fs::path& out_dir, DatasetManifest& m) {
  std::vector<ImageRecord> all;
  std::set<std::string> ids;
  for (const auto& dir : sorted_entries(x.input_dir, true)) {
    const std::string identity = dir.filename().string();
    for (const auto& file : sorted_entries(dir, false)) {
      const std::string id = file.stem().string();
      if (!ids.insert(id).second) throw ConfigError("duplicate image id '" + id + "' under " + x.input_dir.string());
      all.push_back({id, identity, Image{}, Role::original, fs::relative(file, x.input_dir).generic_string()});
    }
  }
  if (all.empty()) throw ConfigError("no images found under '" + x.input_dir.string() + "'");

  std::map<std::string, std::size_t> counts;
  for (const auto& r : all) ++counts[r.identity];
  std::vector<std::string> qualified;
  for (const auto& [identity, n] : counts)
    if (n >= x.per_identity) qualified.push_back(identity);
  const Split split = split_identities(qualified, x, ctx.config.seed);
  const std::set<std::string> primary(split.primary.begin(), split.primary.end());
  const std::set<std::string> targets(split.targets.begin(), split.targets.end());

  auto subset = [&](const std::set<std::string>& who) {
    std::vector<ImageRecord> out;
    for (const auto& r : all)
      if (who.count(r.identity)) out.push_back(r);
    return out;
  };
  const auto primary_images = subset(primary);
  const auto target_images = subset(targets);
  DatasetManifest prim = subsample_identities(primary_images, x.per_identity, ctx.config.seed, ctx.config.name);
  DatasetManifest targ = subsample_identities(target_images, x.per_identity, ctx.config.seed, ctx.config.name);
  m.warnings = prim.warnings;
  m.records = prim.records;
  for (auto r : targ.records) {
    r.role = Role::target_candidate;
    m.records.push_back(std::move(r));
  }

  std::vector<ImageRecord> pool;
  for (const auto& r : all)
    if (!primary.count(r.identity) && !targets.count(r.identity)) pool.push_back(r);
  const auto confounders = select_confounders<ImageRecord>(pool, primary, prim.records.size(), x.confounders,
                                                           ctx.config.seed, [](const ImageRecord&) { return true; });
  for (const auto& c : confounders) m.records.push_back({c.id, c.identity, c.source, Role::confounder, "", std::nullopt});

  fs::create_directories(out_dir / "images");
  for (auto& r : m.records) {
    const Image img = read_png(x.input_dir / r.source);
    r.path = "images/" + r.image_id + ".png";
    write_png(out_dir / r.path, img, png_text(ctx.stamp));
  }
  return kExitOk;
}

struct Detection {
  std::string video_id;
  std::size_t frame_index = 0;
  CropBox box;
};

inline std::vector<Detection> read_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open detections file '" + path.string() + "'");
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Detection d;
      d.video_id = j.at("video_id").get<std::string>();
      d.frame_index = j.at("frame_index").get<std::size_t>();
      const json& b = j.at("box");
      if (b.is_array()) {
        d.box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      } else {
        d.box = {b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
      }
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ConfigError("bad detection at " + path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline int extract_frames(Context& ctx, const ExtractConfig& x, const fs::path& out_dir, DatasetManifest& m) {
  const auto videos = sorted_entries(x.input_dir, true);
  if (videos.empty()) throw ConfigError("no videos found under '" + x.input_dir.string() + "'");

  std::map<std::string, std::string> identity_of;
  if (x.identities) {
    try {
      identity_of = json::parse(read_file(*x.identities)).get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse identities file: " + std::string(e.what()));
    }
  }
  auto identity = [&](const std::string& video) {
    auto it = identity_of.find(video);
    return it == identity_of.end() ? video : it->second;
  };

  // frame files: <input_dir>/<video_id>/<frame_index>.png, any zero padding
  std::map<std::string, std::map<std::size_t, fs::path>> frames;
  for (const auto& v : videos) {
    for (const auto& f : sorted_entries(v, false)) {
      const std::string stem = f.stem().string();
      if (stem.empty() || stem.find_first_not_of("0123456789") != std::string::npos) continue;
      frames[v.filename().string()][std::stoull(stem)] = f;
    }
  }

  std::map<fs::path, std::pair<double, Shape>> frame_info;
  auto info = [&](const fs::path& p) {
    auto it = frame_info.find(p);
    if (it != frame_info.end()) return it->second;
    const Image img = read_png(p);
    return frame_info[p] = {compute_brightness(img), img.shape()};
  };

  std::map<std::string, std::vector<FrameCandidate>> by_video;
  for (const auto& d : read_detections(x.detections)) {
    auto vit = frames.find(d.video_id);
    if (vit == frames.end() || !vit->second.count(d.frame_index)) {
      m.warnings.push_back("detection for missing frame " + d.video_id + "/" + std::to_string(d.frame_index));
      continue;
    }
    const fs::path& p = vit->second.at(d.frame_index);
    const auto [brightness, shape] = info(p);
    by_video[d.video_id].push_back({d.video_id, identity(d.video_id), d.frame_index, d.box, shape.width,
                                    shape.height, brightness, fs::relative(p, x.input_dir).generic_string()});
  }

  std::map<std::string, std::vector<FrameCandidate>> selected;  // identity -> frames
  std::vector<FrameCandidate> all_candidates;
  for (auto& [video, cands] : by_video) {
    all_candidates.insert(all_candidates.end(), cands.begin(), cands.end());
    const std::string who = identity(video);
    FrameSelection s = select_frames(cands, x.rules, ctx.config.seed);
    if (!s.accepted) {
      m.warnings.push_back("video '" + video + "' (identity '" + who + "') rejected: " + s.reason);
      continue;
    }
    if (selected.count(who)) {
      m.warnings.push_back("identity '" + who + "' already has frames; video '" + video + "' ignored");
      continue;
    }
    selected[who] = std::move(s.frames);
  }
  std::vector<std::string> qualified;
  for (const auto& [who, _] : selected) qualified.push_back(who);
  const Split split = split_identities(qualified, x, ctx.config.seed);
  const std::set<std::string> primary(split.primary.begin(), split.primary.end());
  const std::set<std::string> targets(split.targets.begin(), split.targets.end());

  auto record = [](const FrameCandidate& f, Role role) {
    const std::string id = f.identity + "_" + std::to_string(f.frame_index);
    return ManifestRecord{id, f.identity, f.source, role, "images/" + id + ".png", f.frame_index};
  };
  std::map<std::string, CropBox> boxes;
  std::map<std::string, std::string> sources;
  for (const auto& who : split.primary) {
    for (const auto& f : selected.at(who)) {
      m.records.push_back(record(f, Role::original));
      boxes[m.records.back().image_id] = f.box;
    }
  }
  for (const auto& who : split.targets) {
    for (const auto& f : selected.at(who)) {
      m.records.push_back(record(f, Role::target_candidate));
      boxes[m.records.back().image_id] = f.box;
    }
  }
  std::vector<FrameCandidate> pool;
  for (const auto& c : all_candidates)
    if (!targets.count(c.identity)) pool.push_back(c);
  const std::size_t primary_records = m.records.size() - split.targets.size() * x.per_identity;
  const auto confounders = select_confounders<FrameCandidate>(
      pool, primary, primary_records, x.confounders, ctx.config.seed,
      [&](const FrameCandidate& f) { return frame_eligible(f, x.rules); });
  for (const auto& c : confounders) {
    m.records.push_back(record(c, Role::confounder));
    boxes[m.records.back().image_id] = c.box;
  }
  if (primary.empty()) m.warnings.push_back("no identity has enough qualifying frames");

  fs::create_directories(out_dir / "images");
  for (const auto& r : m.records) {
    const Image frame = read_png(x.input_dir / r.source);
    write_png(out_dir / r.path, crop(frame, boxes.at(r.image_id)), png_text(ctx.stamp));
  }
  return kExitOk;
}

}  // namespace detail_extract

inline int cmd_extract(Context& ctx) {
  if (!ctx.config.extract) throw ConfigError("config has no 'extract' section");
  const ExtractConfig& x = *ctx.config.extract;
  const fs::path manifest_path = ctx.config.dataset_manifest();
  const fs::path out_dir = manifest_path.parent_path();
  claim_output(out_dir, ctx.options.overwrite);

  DatasetManifest m;
  m.name = ctx.config.name;
  // Build into a staging directory so a failed run leaves no partial dataset.
  const fs::path staging = out_dir.string() + ".staging";
  fs::remove_all(staging);
  try {
    if (x.mode == ExtractMode::images) {
      detail_extract::extract_images(ctx, x, staging, m);
    } else {
      detail_extract::extract_frames(ctx, x, staging, m);
    }
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  m.recount();
  json doc = to_json(m);
  doc["mode"] = x.mode == ExtractMode::images ? "images" : "frames";
  fs::create_directories(staging);
  write_file_atomic(staging / manifest_path.filename(), stamped(doc, ctx.stamp).dump(2) + "\n");
  fs::create_directories(out_dir.parent_path());
  fs::rename(staging, out_dir);

  for (const auto& w : m.warnings) *ctx.log << "[extract] warning: " << w << "\n";
  *ctx.log << "[extract] " << m.with_role(Role::original).size() << " primary, "
           << m.with_role(Role::confounder).size() << " confounder, " << m.with_role(Role::target_candidate).size()
           << " target-candidate records -> " << manifest_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// targets

inline std::string target_embedding_name(const Context& ctx) {
  if (ctx.config.target_embedding) return *ctx.config.target_embedding;
  if (!ctx.config.plan.optimize_embeddings.empty()) return ctx.config.plan.optimize_embeddings.front();
  throw ConfigError("no target-selection embedding: set targets.embedding or plan.optimize_embeddings");
}

inline std::vector<TargetPair> compute_targets(const Context& ctx, const LoadedDataset& d) {
  if (d.originals.empty()) return {};
  if (d.target_pool.empty()) throw ConfigError("the dataset has no target-candidate images");
  auto embedding = ctx.registry.embedding(target_embedding_name(ctx));
  return select_targets_batch(d.originals, d.target_pool, *embedding, ctx.config.far_fraction, ctx.config.seed);
}

inline void write_targets(const Context& ctx, const std::vector<TargetPair>& pairs, const fs::path& path) {
  std::string body;
  for (const auto& p : pairs) body += stamped(json(p), ctx.stamp).dump() + "\n";
  fs::create_directories(path.parent_path());
  write_file_atomic(path, body);
}

inline std::vector<TargetPair> read_targets(const fs::path& path) {
  std::vector<TargetPair> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<TargetPair>());
    } catch (const json::exception& e) {
      throw ConfigError("bad target pairing in '" + path.string() + "': " + e.what());
    }
  }
  return out;
}

inline int cmd_targets(Context& ctx) {
  const fs::path path = ctx.config.output_dir / "targets.jsonl";
  claim_output(path, ctx.options.overwrite);
  const LoadedDataset d = load_dataset(ctx);
  const auto pairs = compute_targets(ctx, d);
  write_targets(ctx, pairs, path);
  *ctx.log << "[targets] " << pairs.size() << " pairings -> " << path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// protect

inline std::vector<ProtectionJob> build_chain(const Context& ctx, const VariantConfig& v, const ImageRecord& original,
                                              const ImageRecord& target) {
  std::vector<const VariantConfig*> stages;
  if (v.method == Method::composition) {
    for (const auto& s : v.stages) stages.push_back(&ctx.config.variant(s));
  } else {
    stages.push_back(&v);
  }
  std::vector<ProtectionJob> chain;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const VariantConfig& s = *stages[i];
    ProtectionJob job;
    job.original = original;
    job.target = target;
    job.method = s.method;
    job.generator = s.method == Method::privacygan ? s.generator : std::nullopt;
    job.embeddings = s.embeddings;
    job.perceptual = s.perceptual;
    job.hyper = s.hyper;
    job.hyper.seed = derive_seed(ctx.config.seed, original.id + "#" + std::to_string(i));
    chain.push_back(std::move(job));
  }
  return chain;
}

/// Fails fast on backends the variant names but the registry lacks.
inline void check_variant_backends(const Context& ctx, const VariantConfig& v) {
  std::vector<const VariantConfig*> stages;
  if (v.method == Method::composition) {
    for (const auto& s : v.stages) stages.push_back(&ctx.config.variant(s));
  } else {
    stages.push_back(&v);
  }
  for (const auto* s : stages) {
    if (s->method == Method::none) continue;
    for (const auto& e : s->embeddings) (void)ctx.registry.embedding(e);
    if (s->embeddings.empty()) throw ConfigError("variant '" + s->name + "' has no optimization embeddings");
    if (s->method == Method::privacygan) {
      if (!s->generator) throw ConfigError("variant '" + s->name + "' has no generator");
      (void)ctx.registry.generator(*s->generator);
      (void)ctx.registry.perceptual(s->perceptual);
    }
  }
}

inline std::vector<std::string> variant_embeddings(const Context& ctx, const VariantConfig& v) {
  std::vector<std::string> out;
  auto add = [&](const VariantConfig& s) {
    if (s.method == Method::none) return;
    for (const auto& e : s.embeddings)
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  };
  if (v.method == Method::composition) {
    for (const auto& s : v.stages) add(ctx.config.variant(s));
  } else {
    add(v);
  }
  return out;
}

inline json run_manifest(const Context& ctx, const VariantConfig& v, const std::vector<ProtectionJob>& chain,
                         const JobOutcome& outcome) {
  json stages = json::array();
  for (const auto& job : chain) {
    stages.push_back({{"method", std::string(to_string(job.method))},
                      {"generator", job.generator ? json(*job.generator) : json(nullptr)},
                      {"embeddings", job.embeddings},
                      {"perceptual", job.perceptual},
                      {"target_id", job.target.id},
                      {"hyperparameters", to_json(job.hyper)}});
  }
  json j{{"image_id", chain.front().original.id},
         {"identity", chain.front().original.identity},
         {"variant", v.name},
         {"method", std::string(to_string(v.method))},
         {"stages", stages},
         {"status", outcome.result ? "ok" : "failed"}};
  if (outcome.result) {
    const auto& r = *outcome.result;
    json steps = json::array();
    for (const auto& s : r.chain) {
      steps.push_back({{"method", std::string(to_string(s.method))}, {"target_id", s.target_id},
                       {"final_total", s.final_total}});
    }
    j["method_chain"] = steps;
    const TracePoint& last = r.loss_trace.back();
    j["final_loss"] = {{"total", last.total}, {"perceptual", last.perceptual}, {"embedding", last.embedding}};
    j["final_cloak_linf"] = r.final_cloak_linf ? json(*r.final_cloak_linf) : json(nullptr);
  } else {
    j["error"] = outcome.error;
  }
  return stamped(j, ctx.stamp);
}

inline int protect_variant(Context& ctx, const VariantConfig& v, const LoadedDataset& d,
                           const std::vector<TargetPair>& pairs) {
  check_variant_backends(ctx, v);
  const fs::path dir = ctx.config.output_dir / "protect" / v.name;
  claim_output(dir, ctx.options.overwrite);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "traces");
  fs::create_directories(dir / "manifests");

  std::map<std::string, const ImageRecord*> pool;
  for (const auto& r : d.target_pool) pool[r.id] = &r;
  std::map<std::string, const TargetPair*> target_of;
  for (const auto& p : pairs) target_of[p.original_id] = &p;

  std::vector<std::vector<ProtectionJob>> chains;
  for (const auto& o : d.originals) {
    auto t = target_of.find(o.id);
    if (t == target_of.end()) throw ConfigError("no target pairing for original '" + o.id + "'");
    auto img = pool.find(t->second->target_id);
    if (img == pool.end()) throw ConfigError("target '" + t->second->target_id + "' is not in the target pool");
    chains.push_back(build_chain(ctx, v, o, *img->second));
  }

  const std::size_t batch = chains.empty() ? 1 : chains.front().front().hyper.batch_size;
  const std::size_t batches = (chains.size() + batch - 1) / batch;
  auto outcomes = protect_batch(chains, ctx.registry, batch, ctx.options.workers,
                                [&](std::size_t b, std::size_t done, std::size_t failures) {
                                  *ctx.log << "[protect] variant=" << v.name << " batch " << b + 1 << "/" << batches
                                           << " done=" << done << "/" << chains.size()
                                           << " failures=" << failures << "\n";
                                });

  json summary{{"variant", v.name}, {"method", std::string(to_string(v.method))}, {"images", json::array()},
               {"failures", json::array()}};
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const std::string& id = chains[i].front().original.id;
    const JobOutcome& out = outcomes[i];
    const auto& trace = out.result ? out.result->loss_trace : out.partial_trace;
    write_file_atomic(dir / "traces" / (id + ".csv"), trace_csv(trace, ctx.stamp));
    write_file_atomic(dir / "manifests" / (id + ".json"), run_manifest(ctx, v, chains[i], out).dump(2) + "\n");
    if (out.result) {
      write_png(dir / "images" / (id + ".png"), out.result->output.pixels, png_text(ctx.stamp, "privkit:variant", v.name));
      summary["images"].push_back(id);
    } else {
      summary["failures"].push_back({{"image_id", id}, {"error", out.error}});
    }
  }
  write_file_atomic(dir / "summary.json", stamped(summary, ctx.stamp).dump(2) + "\n");
  const std::size_t failed = summary["failures"].size();
  *ctx.log << "[protect] variant=" << v.name << " " << chains.size() - failed << " protected, " << failed
           << " failed -> " << dir.string() << "\n";
  return failed ? kExitRuntime : kExitOk;
}

inline std::vector<const VariantConfig*> pick_variants(const Context& ctx, const std::vector<std::string>& names) {
  std::vector<const VariantConfig*> out;
  if (names.empty()) {
    for (const auto& v : ctx.config.variants) out.push_back(&v);
  } else {
    for (const auto& n : names) out.push_back(&ctx.config.variant(n));
  }
  if (out.empty()) throw ConfigError("the config defines no variants");
  return out;
}

inline int cmd_protect(Context& ctx, const std::vector<std::string>& variants) {
  const auto selected = pick_variants(ctx, variants);
  const LoadedDataset d = load_dataset(ctx);
  const fs::path targets_path = ctx.config.output_dir / "targets.jsonl";
  std::vector<TargetPair> pairs;
  if (fs::exists(targets_path)) {
    pairs = read_targets(targets_path);
  } else {
    pairs = compute_targets(ctx, d);
    write_targets(ctx, pairs, targets_path);
    *ctx.log << "[protect] selected " << pairs.size() << " targets -> " << targets_path.string() << "\n";
  }
  int code = kExitOk;
  for (const auto* v : selected) code = std::max(code, protect_variant(ctx, *v, d, pairs));
  return code;
}

// ---------------------------------------------------------------------------
// evaluate

inline int evaluate_variant(Context& ctx, const VariantConfig& v, const LoadedDataset& d) {
  const fs::path images = ctx.config.output_dir / "protect" / v.name / "images";
  std::vector<ImageRecord> modified;
  std::vector<std::string> missing;
  for (const auto& o : d.originals) {
    const fs::path p = images / (o.id + ".png");
    if (!fs::exists(p)) {
      missing.push_back(o.id);
      continue;
    }
    modified.push_back({o.id, o.identity, read_png(p), Role::modified, p.string()});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ConfigError("variant '" + v.name + "' is missing protected images for: " + list);
  }

  TransferPlan plan = ctx.config.plan;
  plan.optimize_embeddings = variant_embeddings(ctx, v);
  const TransferReport report = run_transfer_eval(plan, ctx.registry, {d.originals, modified, d.confounders},
                                                  cache_root(ctx), ctx.options.workers);

  const fs::path dir = ctx.config.output_dir / "evaluate" / v.name;
  claim_output(dir, ctx.options.overwrite);
  fs::create_directories(dir);
  write_file_atomic(dir / "report.csv", transfer_report_csv(report, ctx.stamp));
  write_file_atomic(dir / "report.md", transfer_report_markdown(v.name, report, ctx.stamp));
  json j = to_json(report, ctx.stamp);
  j["variant"] = v.name;
  write_file_atomic(dir / "report.json", j.dump(2) + "\n");
  for (const auto& name : report.evaluated) {
    write_file_atomic(dir / ("recall_" + name + ".svg"),
                      recall_curve_svg(report.per_embedding.at(name), v.name + " / " + name));
  }
  *ctx.log << "[evaluate] variant=" << v.name << " transfer_recall=" << transfer_recall_text(report.transfer_recall)
           << " -> " << dir.string() << "\n";
  return kExitOk;
}

inline int cmd_evaluate(Context& ctx, const std::vector<std::string>& variants) {
  const auto selected = pick_variants(ctx, variants);
  const LoadedDataset d = load_dataset(ctx);
  if (d.originals.empty()) throw ConfigError("the dataset has no original images to evaluate");
  for (const auto* v : selected) evaluate_variant(ctx, *v, d);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct VariantReport {
  std::string name;
  TransferReport report;
};

/// Side-by-side tables: one per evaluation backend, one column per variant.
inline std::string comparison_markdown(const std::vector<VariantReport>& variants, const ArtifactStamp& stamp,
                                       const std::string& title) {
  std::ostringstream out;
  out << "# " << title << "\n\n";
  for (const auto& backend : variants.front().report.evaluated) {
    std::vector<std::pair<std::string, const MetricReport*>> cols;
    for (const auto& v : variants) cols.emplace_back(v.name, &v.report.per_embedding.at(backend));
    out << "## " << backend << "\n\n" << metric_table_markdown(cols, cols.front().second->k_values) << "\n";
  }
  out << "Transfer recall:";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    out << (i ? ", " : " ") << variants[i].name << " " << transfer_recall_text(variants[i].report.transfer_recall);
  }
  out << "\n\nconfig_hash: " << stamp.config_hash << ", seed: " << stamp.seed << "\n";
  return out.str();
}

inline std::string comparison_csv(const std::vector<VariantReport>& variants, const ArtifactStamp& stamp) {
  std::ostringstream out;
  out << stamp_comment(stamp) << "backend,metric";
  for (const auto& v : variants) out << "," << v.name;
  out << "\n";
  for (const auto& backend : variants.front().report.evaluated) {
    const auto& ks = variants.front().report.per_embedding.at(backend).k_values;
    for (const auto& row : metric_rows(ks)) {
      out << backend << "," << row.label;
      for (const auto& v : variants) out << "," << fixed(row_value(v.report.per_embedding.at(backend), row), 6);
      out << "\n";
    }
  }
  out << "all,Transfer recall";
  for (const auto& v : variants) {
    out << "," << (v.report.transfer_recall ? fixed(*v.report.transfer_recall, 6) : "");
  }
  out << "\n";
  return out.str();
}

inline int cmd_report(Context& ctx) {
  std::vector<VariantReport> reports;
  for (const auto& v : ctx.config.variants) {
    const fs::path p = ctx.config.output_dir / "evaluate" / v.name / "report.json";
    if (!fs::exists(p)) continue;
    try {
      reports.push_back({v.name, transfer_report_from_json(json::parse(read_file(p)))});
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse '" + p.string() + "': " + e.what());
    }
  }
  if (reports.empty()) throw ConfigError("no evaluation reports found; run evaluate first");
  for (const auto& r : reports) {
    if (r.report.evaluated != reports.front().report.evaluated) {
      throw ConfigError("variant '" + r.name + "' was evaluated on a different embedding set");
    }
  }
  const fs::path dir = ctx.config.output_dir / "report";
  claim_output(dir, ctx.options.overwrite);
  fs::create_directories(dir);
  write_file_atomic(dir / "comparison.md", comparison_markdown(reports, ctx.stamp, ctx.config.name));
  write_file_atomic(dir / "comparison.csv", comparison_csv(reports, ctx.stamp));
  *ctx.log << "[report] " << reports.size() << " variants -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  fs::path out;
  std::size_t identities = 12;
  std::size_t per_identity = 6;
  int size = 16;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

/// Writes <out>/<identity>/<id>.png for a toy identity-clustered collection.
inline int cmd_synth(const SynthOptions& o, bool overwrite) {
  if (o.out.empty()) throw ConfigError("synth needs --out");
  claim_output(o.out, overwrite);
  const auto images = synthetic_faces(o.identities, o.per_identity, Shape{o.size, o.size, 3}, o.noise, o.seed);
  for (const auto& r : images) {
    fs::create_directories(o.out / r.identity);
    write_png(o.out / r.identity / (r.id + ".png"), r.pixels);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int error_exit(const std::string& command, const std::string& message, int code, std::ostream& err) {
  err << json{{"command", command}, {"error", message}, {"exit_code", code}}.dump() << "\n";
  return code;
}

/// Entry point shared by the privkit binary and the CLI tests.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"privkit: privacy-protected face images and retrieval-privacy evaluation"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON run config");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", g.workers, "parallel workers")->check(CLI::PositiveNumber);
  app.add_flag("--overwrite", g.overwrite, "replace existing outputs");

  auto* extract = app.add_subcommand("extract", "build the evaluation dataset");
  auto* targets = app.add_subcommand("targets", "pair each original with a distant target");
  auto* protect = app.add_subcommand("protect", "run protection variants");
  auto* evaluate = app.add_subcommand("evaluate", "score protected images");
  auto* report = app.add_subcommand("report", "side-by-side comparison tables");
  auto* synth = app.add_subcommand("synth", "write a synthetic identity-clustered image tree");
  std::vector<std::string> protect_variants, evaluate_variants;
  protect->add_option("--variant", protect_variants, "variant name (repeatable; default all)");
  evaluate->add_option("--variant", evaluate_variants, "variant name (repeatable; default all)");
  SynthOptions so;
  synth->add_option("--out", so.out)->required();
  synth->add_option("--identities", so.identities);
  synth->add_option("--per-identity", so.per_identity);
  synth->add_option("--size", so.size);
  synth->add_option("--noise", so.noise);
  for (auto* sub : {extract, targets, protect, evaluate, report, synth}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return error_exit("", e.what(), kExitConfig, err);
  }
  if (*seed_opt) g.seed = seed;

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "synth") {
      so.seed = g.seed.value_or(0);
      return cmd_synth(so, g.overwrite);
    }
    Context ctx = make_context(g);
    ctx.log = &err;
    if (command == "extract") return cmd_extract(ctx);
    if (command == "targets") return cmd_targets(ctx);
    if (command == "protect") return cmd_protect(ctx, protect_variants);
    if (command == "evaluate") return cmd_evaluate(ctx, evaluate_variants);
    return cmd_report(ctx);
  } catch (const ConfigError& e) {
    return error_exit(command, e.what(), kExitConfig, err);
  } catch (const ContractViolation& e) {
    return error_exit(command, e.what(), kExitConfig, err);
  } catch (const SelectionError& e) {
    return error_exit(command, e.what(), kExitConfig, err);
  } catch (const RegistrationError& e) {
    return error_exit(command, e.what(), kExitConfig, err);
  } catch (const std::exception& e) {
    return error_exit(command, e.what(), kExitRuntime, err);
  }
}

}  // namespace privkit::cli
