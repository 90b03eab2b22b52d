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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privkit/backends.hpp"
#include "privkit/error.hpp"
#include "privkit/hyperparameters.hpp"
#include "privkit/image.hpp"
#include "privkit/parallel.hpp"
#include "privkit/privacy_loss.hpp"
#include "privkit/registry.hpp"

namespace privkit {

/// `none` is the identity stage: it copies the original. It exists for
/// unprotected baselines and as a neutral first stage of a composition.
enum class Method { privacygan, pixel_cloak, composition, none };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::privacygan: return "privacygan";
    case Method::pixel_cloak: return "pixel_cloak";
    case Method::composition: return "composition";
    case Method::none: return "none";
  }
  return "none";
}

inline Method parse_method(std::string_view s) {
  if (s == "privacygan") return Method::privacygan;
  if (s == "pixel_cloak") return Method::pixel_cloak;
  if (s == "composition") return Method::composition;
  if (s == "none") return Method::none;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct ProtectionJob {
  ImageRecord original;
  ImageRecord target;
  std::optional<std::string> generator;
  std::vector<std::string> embeddings;
  std::string perceptual;
  Hyperparameters hyper;
  Method method = Method::privacygan;
};

struct TracePoint {
  std::size_t iteration = 0;
  double total = 0.0;
  double perceptual = 0.0;
  double embedding = 0.0;

  bool operator==(const TracePoint&) const = default;
};

/// One executed stage of a (possibly composed) protection.
struct ChainStep {
  Method method = Method::none;
  std::string target_id;
  double final_total = 0.0;
};

struct ProtectionResult {
  ProtectionJob job;
  ImageRecord output;
  std::vector<TracePoint> loss_trace;
  std::vector<double> final_latent;         // privacygan only
  std::optional<double> final_cloak_linf;   // pixel_cloak only
  std::vector<ChainStep> chain;
};

/// Thrown when the loss turns non-finite mid-run; carries the trace so far.
class OptimizationAborted : public NumericError {
 public:
  OptimizationAborted(const std::string& what, std::vector<TracePoint> trace)
      : NumericError(what), partial_trace(std::move(trace)) {}
  std::vector<TracePoint> partial_trace;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    PRIVKIT_REQUIRE(params.size() == m_.size() && grad.size() == m_.size(),
                    "Adam parameter/gradient size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

namespace detail {

inline std::vector<std::shared_ptr<const EmbeddingBackend>> resolve_embeddings(const ProtectionJob& job,
                                                                               const Registry& registry) {
  if (job.embeddings.empty()) throw ConfigError("protection job needs at least one embedding backend");
  std::vector<std::shared_ptr<const EmbeddingBackend>> out;
  for (const auto& name : job.embeddings) {
    auto e = registry.embedding(name);
    if (!e->supports_gradient()) {
      throw ConfigError("embedding backend '" + name + "' does not support gradients");
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline ImageRecord modified_record(const ProtectionJob& job, Image pixels, std::string_view method) {
  return {job.original.id, job.original.identity, std::move(pixels), Role::modified,
          std::string(method) + ":" + job.original.id};
}

inline void check_trace_point(std::vector<TracePoint>& trace, std::size_t it, const LossTerms& t) {
  if (!std::isfinite(t.total)) {
    throw OptimizationAborted("loss became non-finite at iteration " + std::to_string(it), trace);
  }
  trace.push_back({it, t.total, t.perceptual, t.embedding});
}

template <class Fn>
LossTerms guarded(std::vector<TracePoint>& trace, std::size_t it, Fn&& fn) {
  try {
    return fn();
  } catch (const OptimizationAborted&) {
    throw;
  } catch (const NumericError& e) {
    throw OptimizationAborted(std::string(e.what()) + " (iteration " + std::to_string(it) + ")", trace);
  }
}

}  // namespace detail

/// Loss and latent gradient of the generative objective at z.
inline LossTerms privacygan_loss_and_gradient(const GeneratorBackend& generator,
                                              const PrivacyObjective& objective, std::span<const double> z,
                                              std::vector<double>& latent_gradient) {
  const Image candidate = generator.generate(z);
  Image pixel_gradient;
  const LossTerms terms = objective.evaluate(candidate, pixel_gradient);
  latent_gradient = generator.backpropagate(z, pixel_gradient);
  return terms;
}

/// Latent optimization: z <- sample_latent(seed), then num_iterations Adam
/// steps on perceptual(G(z), OI) + K * sum_e ||e(G(z)) - e(TI)||.
inline ProtectionResult privacygan_protect(const ProtectionJob& job, const Registry& registry) {
  if (job.method != Method::privacygan) throw ContractViolation("privacygan_protect needs method privacygan");
  validate(job.hyper);
  if (!job.generator) throw ConfigError("privacygan job has no generator");
  auto generator = registry.generator(*job.generator);
  if (!generator->supports_gradient()) {
    throw ConfigError("generator backend '" + *job.generator + "' does not support gradients");
  }
  auto perceptual = registry.perceptual(job.perceptual);
  if (!perceptual->supports_gradient()) {
    throw ConfigError("perceptual distance '" + job.perceptual + "' does not support gradients");
  }
  auto embeddings = detail::resolve_embeddings(job, registry);
  validate(job.original);
  validate(job.target);
  PRIVKIT_REQUIRE(generator->output_shape() == job.original.pixels.shape(),
                  "generator '" + generator->name() + "' produces " + to_string(generator->output_shape()) +
                      " but the original is " + to_string(job.original.pixels.shape()));

  const PrivacyObjective objective(job.original.pixels, job.target.pixels, std::move(embeddings),
                                   std::move(perceptual), job.hyper.K, job.hyper.embedding_term);
  std::vector<double> z = generator->sample_latent(job.hyper.seed);
  Adam adam(z.size(), job.hyper.learning_rate, job.hyper.beta1, job.hyper.beta2, job.hyper.adam_epsilon);

  ProtectionResult result;
  result.job = job;
  result.loss_trace.reserve(job.hyper.num_iterations + 1);
  std::vector<double> grad;
  for (std::size_t it = 0;; ++it) {
    const LossTerms t = detail::guarded(result.loss_trace, it, [&] {
      return privacygan_loss_and_gradient(*generator, objective, z, grad);
    });
    detail::check_trace_point(result.loss_trace, it, t);
    if (it == job.hyper.num_iterations) break;
    adam.step(z, grad);
  }
  result.output = detail::modified_record(job, generator->generate(z), "privacygan");
  result.final_latent = std::move(z);
  result.chain.push_back({Method::privacygan, job.target.id, result.loss_trace.back().total});
  return result;
}

/// Pixel-space cloak: CI starts at zero and follows projected Adam steps on
/// sum_e ||e(TI) - e(clip01(OI + CI))|| with CI kept inside [-rho, rho].
inline ProtectionResult pixel_cloak_protect(const ProtectionJob& job, const Registry& registry) {
  if (job.method != Method::pixel_cloak) throw ContractViolation("pixel_cloak_protect needs method pixel_cloak");
  validate(job.hyper);
  auto embeddings = detail::resolve_embeddings(job, registry);
  validate(job.original);
  validate(job.target);

  const Image& oi = job.original.pixels;
  const double rho = job.hyper.rho;
  const PrivacyObjective objective(oi, job.target.pixels, std::move(embeddings), nullptr, 1.0,
                                   job.hyper.embedding_term);

  auto compose = [&](const std::vector<double>& cloak) {
    Image out = oi;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.pixels()[i] = std::clamp(oi.pixels()[i] + std::clamp(cloak[i], -rho, rho), 0.0, 1.0);
    }
    return out;
  };

  std::vector<double> cloak(oi.size(), 0.0);
  Adam adam(cloak.size(), job.hyper.learning_rate, job.hyper.beta1, job.hyper.beta2, job.hyper.adam_epsilon);

  ProtectionResult result;
  result.job = job;
  result.loss_trace.reserve(job.hyper.num_iterations + 1);
  Image pixel_gradient;
  std::vector<double> grad(cloak.size());
  for (std::size_t it = 0;; ++it) {
    const Image candidate = compose(cloak);
    const LossTerms t = detail::guarded(result.loss_trace, it, [&] {
      return objective.evaluate(candidate, pixel_gradient);
    });
    detail::check_trace_point(result.loss_trace, it, t);
    if (it == job.hyper.num_iterations) break;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double raw = oi.pixels()[i] + cloak[i];
      grad[i] = (raw >= 0.0 && raw <= 1.0) ? pixel_gradient.pixels()[i] : 0.0;
    }
    adam.step(cloak, grad);
    for (double& c : cloak) c = std::clamp(c, -rho, rho);
  }

  Image out = compose(cloak);
  double linf = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) linf = std::max(linf, std::abs(out.pixels()[i] - oi.pixels()[i]));
  result.output = detail::modified_record(job, std::move(out), "pixel_cloak");
  result.final_cloak_linf = linf;
  result.chain.push_back({Method::pixel_cloak, job.target.id, result.loss_trace.back().total});
  return result;
}

/// Identity stage: output equals the original.
inline ProtectionResult identity_protect(const ProtectionJob& job) {
  validate(job.original);
  ProtectionResult result;
  result.job = job;
  result.job.method = Method::none;
  result.output = detail::modified_record(job, job.original.pixels, "none");
  result.loss_trace.push_back({0, 0.0, 0.0, 0.0});
  result.chain.push_back({Method::none, job.target.id, 0.0});
  return result;
}

inline ProtectionResult protect(const ProtectionJob& job, const Registry& registry);

/// Runs `second` on the output of `first`. The second stage's target is used
/// as given (reuse or re-selection is up to the caller); each stage's target
/// id is recorded in the chain.
inline ProtectionResult compose_protect(const ProtectionResult& first, const ProtectionJob& second,
                                        const Registry& registry) {
  PRIVKIT_REQUIRE(second.method != Method::composition, "a composition stage must be a single method");
  if (!second.original.pixels.empty()) {
    PRIVKIT_REQUIRE(second.original.pixels.shape() == first.output.pixels.shape(),
                    "composition stages disagree on image shape: " + to_string(first.output.pixels.shape()) +
                        " vs " + to_string(second.original.pixels.shape()));
  }
  ProtectionJob stage = second;
  stage.original = first.job.original;
  stage.original.pixels = first.output.pixels;
  ProtectionResult next = protect(stage, registry);

  ProtectionResult result;
  result.job = second;
  result.job.original = first.job.original;
  result.job.method = Method::composition;
  result.output = next.output;
  result.output.source = "composition:" + first.job.original.id;
  result.loss_trace = std::move(next.loss_trace);
  result.final_latent = std::move(next.final_latent);
  result.final_cloak_linf = next.final_cloak_linf;
  result.chain = first.chain;
  result.chain.insert(result.chain.end(), next.chain.begin(), next.chain.end());
  return result;
}

inline ProtectionResult protect(const ProtectionJob& job, const Registry& registry) {
  switch (job.method) {
    case Method::privacygan: return privacygan_protect(job, registry);
    case Method::pixel_cloak: return pixel_cloak_protect(job, registry);
    case Method::none: return identity_protect(job);
    case Method::composition:
      throw ContractViolation("composition jobs run through compose_protect or run_chain");
  }
  throw ContractViolation("unknown method");
}

/// Runs single-method stages in order, feeding each output into the next.
inline ProtectionResult run_chain(std::span<const ProtectionJob> stages, const Registry& registry) {
  PRIVKIT_REQUIRE(!stages.empty(), "a protection chain needs at least one stage");
  ProtectionResult result = protect(stages.front(), registry);
  for (std::size_t i = 1; i < stages.size(); ++i) result = compose_protect(result, stages[i], registry);
  return result;
}

struct JobOutcome {
  std::optional<ProtectionResult> result;
  std::string error;
  std::vector<TracePoint> partial_trace;
};

/// Runs independent chains `batch_size` at a time, up to `workers` chains in
/// parallel within a batch. Failures are captured per job. `on_batch` is
/// called after each batch with (batch index, jobs done, failures so far).
inline std::vector<JobOutcome> protect_batch(
    const std::vector<std::vector<ProtectionJob>>& chains, const Registry& registry, std::size_t batch_size,
    std::size_t workers,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& on_batch = {}) {
  PRIVKIT_REQUIRE(batch_size > 0, "batch_size must be positive");
  for (const auto& handle : registry.list()) {
    if (!handle.thread_safe) workers = 1;
  }
  std::vector<JobOutcome> outcomes(chains.size());
  std::size_t failures = 0;
  for (std::size_t begin = 0, batch = 0; begin < chains.size(); begin += batch_size, ++batch) {
    const std::size_t end = std::min(chains.size(), begin + batch_size);
    parallel_for(end - begin, workers, [&](std::size_t k) {
      JobOutcome& out = outcomes[begin + k];
      try {
        out.result = run_chain(chains[begin + k], registry);
      } catch (const OptimizationAborted& e) {
        out.error = e.what();
        out.partial_trace = e.partial_trace;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    });
    for (std::size_t i = begin; i < end; ++i) failures += outcomes[i].result ? 0 : 1;
    if (on_batch) on_batch(batch, end, failures);
  }
  return outcomes;
}

}  // namespace privkit
