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

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "privkit/backends.hpp"
#include "privkit/error.hpp"

namespace privkit {

enum class BackendKind { embedding, generator, perceptual };

inline std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::embedding: return "embedding";
    case BackendKind::generator: return "generator";
    case BackendKind::perceptual: return "perceptual";
  }
  return "embedding";
}

struct BackendHandle {
  BackendKind kind;
  std::string name;
  bool thread_safe;

  bool operator==(const BackendHandle&) const = default;
};

/// Name -> backend lookup. Names are unique across all three kinds.
/// Registration is not synchronized; populate the registry before sharing it.
class Registry {
 public:
  BackendHandle add(std::shared_ptr<const EmbeddingBackend> backend) {
    return insert(embeddings_, BackendKind::embedding, std::move(backend));
  }
  BackendHandle add(std::shared_ptr<const GeneratorBackend> backend) {
    return insert(generators_, BackendKind::generator, std::move(backend));
  }
  BackendHandle add(std::shared_ptr<const PerceptualDistance> backend) {
    return insert(perceptuals_, BackendKind::perceptual, std::move(backend));
  }

  std::shared_ptr<const EmbeddingBackend> embedding(const std::string& name) const {
    return find(embeddings_, BackendKind::embedding, name);
  }
  std::shared_ptr<const GeneratorBackend> generator(const std::string& name) const {
    return find(generators_, BackendKind::generator, name);
  }
  std::shared_ptr<const PerceptualDistance> perceptual(const std::string& name) const {
    return find(perceptuals_, BackendKind::perceptual, name);
  }

  bool contains(const std::string& name) const { return handles_.count(name) != 0; }

  /// All registered backends, ordered by name.
  std::vector<BackendHandle> list() const {
    std::vector<BackendHandle> out;
    out.reserve(handles_.size());
    for (const auto& [name, handle] : handles_) out.push_back(handle);
    return out;
  }

 private:
  template <class T>
  BackendHandle insert(std::map<std::string, std::shared_ptr<const T>>& table, BackendKind kind,
                       std::shared_ptr<const T> backend) {
    if (!backend) throw RegistrationError("cannot register a null backend");
    const std::string name = backend->name();
    if (name.empty()) throw RegistrationError("backend name must not be empty");
    if (contains(name)) throw RegistrationError("backend '" + name + "' is already registered");
    BackendHandle handle{kind, name, backend->thread_safe()};
    table.emplace(name, std::move(backend));
    handles_.emplace(name, handle);
    return handle;
  }

  template <class T>
  static std::shared_ptr<const T> find(const std::map<std::string, std::shared_ptr<const T>>& table,
                                       BackendKind kind, const std::string& name) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw ConfigError("no " + std::string(to_string(kind)) + " backend named '" + name + "'");
    }
    return it->second;
  }

  std::map<std::string, std::shared_ptr<const EmbeddingBackend>> embeddings_;
  std::map<std::string, std::shared_ptr<const GeneratorBackend>> generators_;
  std::map<std::string, std::shared_ptr<const PerceptualDistance>> perceptuals_;
  std::map<std::string, BackendHandle> handles_;
};

}  // namespace privkit
