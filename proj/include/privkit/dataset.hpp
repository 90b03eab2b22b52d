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

// Evaluation-set construction: per-identity subsampling of still-image
// collections, face-crop frame selection from videos, and confounders.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "privkit/error.hpp"
#include "privkit/image.hpp"
#include "privkit/png_io.hpp"
#include "privkit/target_selection.hpp"

namespace privkit {

struct CropBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const CropBox&) const = default;
  auto operator<=>(const CropBox&) const = default;
};

struct FrameCandidate {
  std::string video_id;
  std::string identity;
  std::size_t frame_index = 0;
  CropBox box;
  int frame_width = 0;
  int frame_height = 0;
  double brightness = 0.0;  // mean luma of the full frame, 0..255
  std::string source;

  bool operator==(const FrameCandidate&) const = default;
};

struct FrameRules {
  std::size_t min_gap = 10;     // selected frame indices differ by more than this
  double brightness_min = 70.0;
  std::size_t count = 5;
  int crop_min = 456;           // minimum crop width and height
  int margin = 100;             // free pixels required around the crop
};

/// Crop at least crop_min on both sides and expandable by `margin` on every
/// side without leaving the frame.
inline bool crop_feasible(const FrameCandidate& c, const FrameRules& rules) {
  const CropBox& b = c.box;
  return b.w >= rules.crop_min && b.h >= rules.crop_min && b.x - rules.margin >= 0 && b.y - rules.margin >= 0 &&
         b.x + b.w + rules.margin <= c.frame_width && b.y + b.h + rules.margin <= c.frame_height;
}

inline bool frame_eligible(const FrameCandidate& c, const FrameRules& rules) {
  return crop_feasible(c, rules) && c.brightness >= rules.brightness_min;
}

/// 255 * mean of 0.299 R + 0.587 G + 0.114 B over the whole frame. A single
/// channel is taken as luma directly.
inline double compute_brightness(const Image& frame) {
  PRIVKIT_REQUIRE(!frame.empty(), "cannot compute the brightness of an empty frame");
  PRIVKIT_REQUIRE(frame.channels() == 1 || frame.channels() >= 3,
                  "brightness needs 1 or at least 3 channels, got " + to_string(frame.shape()));
  double sum = 0.0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      sum += frame.channels() == 1
                 ? frame.at(y, x, 0)
                 : 0.299 * frame.at(y, x, 0) + 0.587 * frame.at(y, x, 1) + 0.114 * frame.at(y, x, 2);
    }
  }
  return 255.0 * sum / (static_cast<double>(frame.height()) * frame.width());
}

struct FrameSelection {
  bool accepted = false;
  std::vector<FrameCandidate> frames;  // ascending frame_index
  std::string reason;                  // set when rejected
};

/// Chooses `rules.count` eligible frames with pairwise index gaps above
/// `rules.min_gap`. Picks proceed in index order; each pick is uniform among
/// the candidates after the previous pick that still admit a full
/// completion. Output depends on the candidate set and seed, not its order.
inline FrameSelection select_frames(std::span<const FrameCandidate> candidates, const FrameRules& rules,
                                    std::uint64_t seed) {
  PRIVKIT_REQUIRE(rules.count >= 1, "frame count must be at least 1");
  std::vector<FrameCandidate> eligible;
  for (const auto& c : candidates)
    if (frame_eligible(c, rules)) eligible.push_back(c);

  // One candidate per frame index: the largest box, then the smallest box
  // tuple, so duplicates resolve independently of input order.
  std::sort(eligible.begin(), eligible.end(), [](const FrameCandidate& a, const FrameCandidate& b) {
    const long long aa = 1LL * a.box.w * a.box.h, ab = 1LL * b.box.w * b.box.h;
    return std::tie(a.frame_index, ab, a.box, a.video_id) < std::tie(b.frame_index, aa, b.box, b.video_id);
  });
  eligible.erase(std::unique(eligible.begin(), eligible.end(),
                             [](const FrameCandidate& a, const FrameCandidate& b) {
                               return a.frame_index == b.frame_index;
                             }),
                 eligible.end());

  FrameSelection out;
  if (eligible.size() < rules.count) {
    out.reason = "only " + std::to_string(eligible.size()) + " eligible frames, need " + std::to_string(rules.count);
    return out;
  }

  // reach[i]: most frames selectable starting at eligible[i].
  const std::size_t n = eligible.size();
  std::vector<std::size_t> next(n, n), reach(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + 1;
    while (j < n && eligible[j].frame_index <= eligible[i].frame_index + rules.min_gap) ++j;
    next[i] = j;
  }
  for (std::size_t i = n; i-- > 0;) reach[i] = next[i] < n ? 1 + reach[next[i]] : 1;
  if (*std::max_element(reach.begin(), reach.end()) < rules.count) {
    out.reason = "no " + std::to_string(rules.count) + " eligible frames are pairwise more than " +
                 std::to_string(rules.min_gap) + " frames apart";
    return out;
  }

  auto rng = detail::keyed_rng(seed, eligible.front().identity + "/" + eligible.front().video_id);
  std::size_t start = 0;
  for (std::size_t picked = 0; picked < rules.count; ++picked) {
    const std::size_t needed = rules.count - picked;
    std::vector<std::size_t> options;
    for (std::size_t j = start; j < n; ++j)
      if (reach[j] >= needed) options.push_back(j);
    const std::size_t pick = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    out.frames.push_back(eligible[pick]);
    start = next[pick];
  }
  out.accepted = true;
  return out;
}

struct ManifestRecord {
  std::string image_id;
  std::string identity;
  std::string source;
  Role role = Role::original;
  std::string path;                          // PNG path relative to the manifest
  std::optional<std::size_t> frame_index;    // video-derived records only

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<ManifestRecord> records;
  std::map<std::string, std::size_t> per_identity_count;  // original-role records
  std::vector<std::string> warnings;

  std::vector<const ManifestRecord*> with_role(Role role) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
      if (r.role == role) out.push_back(&r);
    return out;
  }

  void recount() {
    per_identity_count.clear();
    for (const auto& r : records)
      if (r.role == Role::original) ++per_identity_count[r.identity];
  }
};

inline void to_json(nlohmann::json& j, const ManifestRecord& r) {
  j = nlohmann::json{{"image_id", r.image_id}, {"identity", r.identity}, {"source", r.source},
                     {"role", std::string(to_string(r.role))}, {"path", r.path}};
  if (r.frame_index) j["frame_index"] = *r.frame_index;
}

inline void from_json(const nlohmann::json& j, ManifestRecord& r) {
  j.at("image_id").get_to(r.image_id);
  j.at("identity").get_to(r.identity);
  j.at("source").get_to(r.source);
  r.role = parse_role(j.at("role").get<std::string>());
  j.at("path").get_to(r.path);
  if (j.contains("frame_index")) r.frame_index = j.at("frame_index").get<std::size_t>();
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  return {{"name", m.name},
          {"records", m.records},
          {"per_identity_count", m.per_identity_count},
          {"warnings", m.warnings}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  j.at("name").get_to(m.name);
  j.at("records").get_to(m.records);
  if (j.contains("warnings")) j.at("warnings").get_to(m.warnings);
  m.recount();
  return m;
}

/// Keeps exactly `per_identity` seeded-uniform images of every identity that
/// has at least that many; drops the rest. Records come out ordered by
/// (identity, id). An empty result adds a warning rather than failing.
inline DatasetManifest subsample_identities(std::span<const ImageRecord> images, std::size_t per_identity,
                                            std::uint64_t seed, std::string name = "subsample") {
  PRIVKIT_REQUIRE(per_identity >= 1, "per_identity must be at least 1");
  std::map<std::string, std::vector<const ImageRecord*>> by_identity;
  for (const auto& r : images) by_identity[r.identity].push_back(&r);

  DatasetManifest m;
  m.name = std::move(name);
  for (auto& [identity, recs] : by_identity) {
    if (recs.size() < per_identity) continue;
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });
    auto rng = detail::keyed_rng(seed, identity);
    std::shuffle(recs.begin(), recs.end(), rng);
    recs.resize(per_identity);
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto* r : recs) m.records.push_back({r->id, identity, r->source, Role::original, "", std::nullopt});
  }
  if (m.records.empty()) {
    m.warnings.push_back("no identity has at least " + std::to_string(per_identity) + " images");
  }
  m.recount();
  return m;
}

/// Draws `count` confounders, one per distinct identity, from pool entries
/// that pass `eligible` and whose identity is not in `primary_identities`.
/// `count` may not exceed one fifth of `primary_records`.
template <class Candidate, class Eligible>
std::vector<Candidate> select_confounders(std::span<const Candidate> pool,
                                          const std::set<std::string>& primary_identities,
                                          std::size_t primary_records, std::size_t count, std::uint64_t seed,
                                          Eligible&& eligible) {
  if (count * 5 > primary_records) {
    throw ConfigError("confounder count " + std::to_string(count) + " exceeds one fifth of " +
                      std::to_string(primary_records) + " primary records");
  }
  std::map<std::string, std::vector<const Candidate*>> by_identity;
  for (const auto& c : pool) {
    if (primary_identities.count(c.identity) || !eligible(c)) continue;
    by_identity[c.identity].push_back(&c);
  }
  if (by_identity.size() < count) {
    throw SelectionError("insufficient confounder pool: need " + std::to_string(count) +
                         " distinct identities, found " + std::to_string(by_identity.size()) + " (short by " +
                         std::to_string(count - by_identity.size()) + ")");
  }
  std::vector<std::string> identities;
  for (const auto& [identity, _] : by_identity) identities.push_back(identity);
  auto rng = detail::keyed_rng(seed, "confounders");
  std::shuffle(identities.begin(), identities.end(), rng);
  identities.resize(count);
  std::sort(identities.begin(), identities.end());

  std::vector<Candidate> out;
  for (const auto& identity : identities) {
    const auto& options = by_identity[identity];
    auto pick_rng = detail::keyed_rng(seed, "confounder/" + identity);
    out.push_back(*options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(pick_rng)]);
  }
  return out;
}

/// Re-checks a manifest against its files on disk. Returns one message per
/// violated invariant; empty means valid.
inline std::vector<std::string> validate_manifest(const DatasetManifest& m, const std::filesystem::path& base_dir,
                                                  std::size_t per_identity = 5,
                                                  std::optional<std::size_t> min_gap = std::nullopt) {
  std::vector<std::string> problems;
  std::set<std::string> ids, primary, others;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::vector<std::size_t>> frames;
  for (const auto& r : m.records) {
    if (!ids.insert(r.image_id).second) problems.push_back("duplicate image id '" + r.image_id + "'");
    if (r.identity.empty()) problems.push_back("record '" + r.image_id + "' has no identity");
    if (r.role == Role::original) {
      primary.insert(r.identity);
      ++counts[r.identity];
      if (r.frame_index) frames[r.identity].push_back(*r.frame_index);
    } else {
      others.insert(r.identity);
    }
    const auto path = base_dir / r.path;
    if (r.path.empty() || !std::filesystem::exists(path)) {
      problems.push_back("record '" + r.image_id + "' has no image file");
      continue;
    }
    try {
      if (!pixels_valid(read_png(path))) problems.push_back("image '" + r.image_id + "' has invalid pixels");
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  for (const auto& [identity, n] : counts) {
    if (n != per_identity) {
      problems.push_back("identity '" + identity + "' has " + std::to_string(n) + " primary records, expected " +
                         std::to_string(per_identity));
    }
  }
  for (const auto& identity : others) {
    if (primary.count(identity)) problems.push_back("identity '" + identity + "' is both primary and non-primary");
  }
  if (min_gap) {
    for (auto& [identity, idx] : frames) {
      std::sort(idx.begin(), idx.end());
      for (std::size_t i = 1; i < idx.size(); ++i) {
        if (idx[i] - idx[i - 1] <= *min_gap) {
          problems.push_back("identity '" + identity + "' has frames " + std::to_string(idx[i - 1]) + " and " +
                             std::to_string(idx[i]) + " within the minimum gap");
        }
      }
    }
  }
  return problems;
}

}  // namespace privkit
