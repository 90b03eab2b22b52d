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
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "privkit/image.hpp"

namespace privkit {

/// Identity-clustered toy images: each identity has a random prototype in
/// [0.2, 0.8] and each image adds clipped Gaussian noise to it. Ids are
/// "<prefix><ii>_<kkkk>", identities "<prefix><ii>".
inline std::vector<ImageRecord> synthetic_faces(std::size_t identities, std::size_t per_identity, Shape shape,
                                                double noise, std::uint64_t seed, const std::string& prefix = "id") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> proto_dist(0.2, 0.8);
  std::normal_distribution<double> jitter(0.0, noise);
  std::vector<ImageRecord> out;
  out.reserve(identities * per_identity);
  for (std::size_t i = 0; i < identities; ++i) {
    char who[32];
    std::snprintf(who, sizeof(who), "%s%02zu", prefix.c_str(), i);
    Image proto(shape, 0.0);
    for (double& v : proto.pixels()) v = proto_dist(rng);
    for (std::size_t k = 0; k < per_identity; ++k) {
      Image img = proto;
      for (double& v : img.pixels()) v = std::clamp(v + jitter(rng), 0.0, 1.0);
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04zu", who, k);
      out.push_back({id, who, std::move(img), Role::original, std::string("synthetic:") + id});
    }
  }
  return out;
}

}  // namespace privkit
