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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>

#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace privkit {
namespace {

using testing::oracle_percentage;
using testing::oracle_recall;
using testing::random_gallery;
using testing::record;
using testing::run_cli;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Instance {
  Gallery L, M;
};

/// The shared pool of random metric instances: |L| in [1, 20], |M| in
/// [5, 50], dim in [1, 8], half of them quantized so ties occur.
std::vector<Instance> metric_instances() {
  std::mt19937_64 rng(2026);
  std::vector<Instance> out;
  for (int i = 0; i < 200; ++i) {
    const std::size_t nl = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const std::size_t nm = std::uniform_int_distribution<std::size_t>(5, 50)(rng);
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const std::size_t ids = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    const bool quantized = i % 2 == 1;
    Gallery L = random_gallery("e", "q", nl, dim, ids, rng, quantized);
    Gallery M = random_gallery("e", "g", nm, dim, ids, rng, quantized);
    out.push_back({std::move(L), std::move(M)});
  }
  return out;
}

Outcome metric_oracle() {
  const auto instances = metric_instances();
  const auto start = Clock::now();
  std::size_t mismatches = 0;
  for (const auto& [L, M] : instances) {
    for (std::size_t k : {1, 3, 5}) mismatches += recall_at_k(L, M, k) != oracle_recall(L, M, k) ? 1 : 0;
    std::size_t excluded = 0;
    const double expected = oracle_percentage(L, M, &excluded);
    const PercentageResult got = percentage_metric(L, M);
    mismatches += (got.value != expected || got.n_excluded != excluded) ? 1 : 0;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          std::to_string(instances.size()) + " instances, " + std::to_string(mismatches) + " mismatches, " +
              fmt("%.2f s", secs)};
}

Outcome metric_analytic() {
  std::mt19937_64 rng(3);
  const Shape shape{3, 3, 1};
  Registry reg;
  reg.add(testing::identity_embedding("id", shape));
  std::vector<ImageRecord> originals, modified;
  for (int i = 0; i < 10; ++i) {
    const std::string who = "p" + std::to_string(i / 2);
    originals.push_back(record("img" + std::to_string(i), who, testing::random_image(shape, rng)));
    ImageRecord m = originals.back();
    m.role = Role::modified;
    modified.push_back(std::move(m));
  }
  TransferPlan plan;
  plan.evaluate_embeddings = {"id"};
  const TransferReport t = run_transfer_eval(plan, reg, {originals, modified, {}});
  const MetricReport& r = t.per_embedding.at("id");

  std::vector<GalleryEntry> m;
  for (int i = 0; i < 9; ++i) m.push_back({"g" + std::to_string(i), "X" + std::to_string(i), {double(i + 1)}});
  m.push_back({"match", "A", {100.0}});
  const Gallery M("e", m);
  const Gallery L("e", {{"q", "A", {0.0}}});
  const double pct = percentage_metric(L, M).value;

  const bool ok = r.recall_mi.at(1) == 100.0 && r.recall_oi.at(1) == 100.0 && pct == 90.0;
  return {ok, fmt("Recall@1 m.i. %.3f, o.i. %.3f, farthest-match Percentage %.3f", r.recall_mi.at(1),
                  r.recall_oi.at(1), pct)};
}

Outcome recall_monotone() {
  std::size_t violations = 0, full_checked = 0;
  for (const auto& [L, M] : metric_instances()) {
    double prev = -1.0;
    for (std::size_t k = 1; k <= M.size(); ++k) {
      const double r = recall_at_k(L, M, k);
      violations += r < prev ? 1 : 0;
      prev = r;
    }
    std::set<std::string> gallery_ids;
    for (const auto& g : M.records()) gallery_ids.insert(g.identity);
    bool all_present = true;
    for (const auto& q : L.records()) all_present = all_present && gallery_ids.count(q.identity);
    if (all_present) {
      ++full_checked;
      violations += recall_at_k(L, M, M.size()) != 100.0 ? 1 : 0;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations; Recall@|M| checked on " +
                               std::to_string(full_checked) + " instances with every identity present"};
}

/// Identity generator, identity embedding, summed squared pixel distance,
/// squared embedding term and K = 1: the loss is ||x - OI||^2 + ||x - TI||^2,
/// minimized at the midpoint with value ||OI - TI||^2 / 2.
Outcome optimizer_convergence() {
  const Shape shape{1, 2, 1};
  Registry reg;
  LinearGenerator::Options g;
  g.shape = shape;
  reg.add(std::make_shared<const LinearGenerator>("gen", g));
  reg.add(testing::identity_embedding("id", shape));
  reg.add(std::make_shared<const SquaredPixelDistance>("sse", SquaredPixelDistance::Reduction::sum));

  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t max_iters = 0;
  const int cases = 10;
  for (int c = 0; c < cases; ++c) {
    const Image oi(shape, std::vector<double>{u(rng), u(rng)});
    const Image ti(shape, std::vector<double>{u(rng), u(rng)});
    ProtectionJob job;
    job.original = record("o", "A", oi);
    job.target = record("t", "B", ti, Role::target_candidate);
    job.generator = "gen";
    job.embeddings = {"id"};
    job.perceptual = "sse";
    job.hyper.K = 1.0;
    job.hyper.num_iterations = 500;
    job.hyper.embedding_term = EmbeddingTerm::squared_l2;
    job.hyper.seed = static_cast<std::uint64_t>(c);
    const ProtectionResult r = privacygan_protect(job, reg);
    double d2 = 0.0;
    for (int i = 0; i < 2; ++i) d2 += (oi.pixels()[i] - ti.pixels()[i]) * (oi.pixels()[i] - ti.pixels()[i]);
    worst = std::max(worst, std::abs(r.loss_trace.back().total - d2 / 2.0));
    max_iters = std::max(max_iters, r.loss_trace.size() - 1);
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && max_iters <= 500 && secs < 5.0,
          std::to_string(cases) + " cases, worst gap " + fmt("%.3g", worst) + " after " + std::to_string(max_iters) +
              " iterations, " + fmt("%.2f s", secs)};
}

/// Random latent points for a gaussian generator whose pixels all stay
/// strictly inside (0, 1), so the clamp is locally inactive.
Outcome gradient_correctness() {
  const Shape shape{4, 4, 3};
  LinearGenerator::Options go;
  go.shape = shape;
  go.latent_dim = 6;
  go.projection = Projection::gaussian;
  go.bias = 0.5;
  go.seed = 8;
  const LinearGenerator gen("gen", go);
  std::vector<std::shared_ptr<const EmbeddingBackend>> embs{
      testing::gaussian_embedding("plain", shape, 5, 1),
      testing::gaussian_embedding("squash", Shape{2, 2, 3}, 4, 2, Activation::tanh)};
  auto mse = std::make_shared<const SquaredPixelDistance>("mse");

  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> zdist(-0.3, 0.3);
  std::uniform_real_distribution<double> kdist(0.01, 2.0);
  double worst = 0.0;
  int points = 0, draws = 0;
  while (points < 20 && draws < 10000) {
    ++draws;
    std::vector<double> z(go.latent_dim);
    for (double& v : z) v = zdist(rng);
    const Image g = gen.generate(z);
    if (*std::min_element(g.pixels().begin(), g.pixels().end()) < 0.02 ||
        *std::max_element(g.pixels().begin(), g.pixels().end()) > 0.98) {
      continue;
    }
    const Image oi = testing::random_image(shape, rng), ti = testing::random_image(shape, rng);
    const EmbeddingTerm term = points % 2 == 0 ? EmbeddingTerm::l2 : EmbeddingTerm::squared_l2;
    const PrivacyObjective objective(oi, ti, embs, mse, kdist(rng), term);
    auto loss = [&](std::span<const double> x) {
      std::vector<double> grad;
      const LossTerms t = privacygan_loss_and_gradient(gen, objective, x, grad);
      return std::pair<double, std::vector<double>>{t.total, grad};
    };
    worst = std::max(worst, gradient_check(loss, z, 1e-5));

    // Same objective directly in pixel space.
    const Image x0 = testing::random_image(shape, rng, 0.05, 0.95);
    auto pixel_loss = [&](std::span<const double> x) {
      Image img(shape, std::vector<double>(x.begin(), x.end()));
      Image grad;
      const LossTerms t = objective.evaluate(img, grad);
      return std::pair<double, std::vector<double>>{t.total, {grad.pixels().begin(), grad.pixels().end()}};
    };
    worst = std::max(worst, gradient_check(pixel_loss, x0.pixels(), 1e-5));
    ++points;
  }
  return {points == 20 && worst < 1e-3,
          std::to_string(points) + " latent and " + std::to_string(points) + " pixel points, max relative error " +
              fmt("%.3g", worst)};
}

Outcome pixel_cloak_cap() {
  const Shape shape{4, 4, 3};
  Registry reg;
  reg.add(testing::gaussian_embedding("e1", shape, 8, 3));
  reg.add(testing::gaussian_embedding("e2", Shape{2, 2, 3}, 6, 4, Activation::tanh));
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> rho_dist(0.0, 0.2);
  std::uniform_int_distribution<std::size_t> iters(1, 40);
  double worst_excess = -INFINITY;
  std::size_t zero_jobs = 0, zero_equal = 0;
  for (int j = 0; j < 110; ++j) {
    ProtectionJob job;
    job.original = record("o", "A", testing::random_image(shape, rng));
    job.target = record("t", "B", testing::random_image(shape, rng), Role::target_candidate);
    job.embeddings = j % 3 == 0 ? std::vector<std::string>{"e1", "e2"} : std::vector<std::string>{"e1"};
    // The last ten jobs pin rho to zero.
    job.hyper.rho = j < 100 ? rho_dist(rng) : 0.0;
    job.hyper.num_iterations = iters(rng);
    job.hyper.learning_rate = 0.05;
    job.method = Method::pixel_cloak;
    const ProtectionResult r = pixel_cloak_protect(job, reg);
    const auto& a = r.output.pixels.pixels();
    const auto& b = job.original.pixels.pixels();
    double excess = -INFINITY;
    for (std::size_t i = 0; i < a.size(); ++i) excess = std::max(excess, std::abs(a[i] - b[i]) - job.hyper.rho);
    worst_excess = std::max(worst_excess, excess);
    if (job.hyper.rho == 0.0) {
      ++zero_jobs;
      zero_equal += std::equal(a.begin(), a.end(), b.begin(), b.end()) ? 1 : 0;
    }
  }
  return {worst_excess <= 1e-6 && zero_jobs > 0 && zero_equal == zero_jobs,
          "110 jobs, worst |output - original| - rho = " + fmt("%.3g", worst_excess) + ", rho=0 bitwise equal " +
              std::to_string(zero_equal) + "/" + std::to_string(zero_jobs)};
}

Outcome privacy_movement() {
  const auto start = Clock::now();
  int moved = 0;
  std::string failures;
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir("accept-move");
    testing::write_synthetic_tree(dir / "input", 16, 6, 8, 300 + trial);
    json cfg = testing::toy_config(dir / "input", dir / "out", 1000 + trial);
    cfg["variants"] = json::array({{{"name", "Original"}, {"method", "none"}}, {{"name", "StyleGAN_0.03_60"}}});
    const fs::path config = testing::write_config(dir / "config.json", cfg);
    std::string err;
    for (const char* cmd : {"extract", "targets", "protect", "evaluate"}) {
      const int code = run_cli({"--config", config.string(), cmd}, &err);
      if (code != 0) throw std::runtime_error(std::string(cmd) + " failed: " + err);
    }
    const json base = json::parse(slurp(dir / "out/evaluate/Original/report.json"))["per_embedding"]["emb_a"];
    const json prot = json::parse(slurp(dir / "out/evaluate/StyleGAN_0.03_60/report.json"))["per_embedding"]["emb_a"];
    const bool lower = prot["recall_mi"]["1"].get<double>() < base["recall_mi"]["1"].get<double>();
    const bool higher = prot["percentage"].get<double>() > base["percentage"].get<double>();
    if (lower && higher) {
      ++moved;
    } else {
      failures += " " + std::to_string(trial);
    }
  }
  const double secs = seconds_since(start);
  return {moved >= 18 && secs < 60.0, std::to_string(moved) + "/20 trials moved" +
                                          (failures.empty() ? "" : " (not:" + failures + ")") + ", " +
                                          fmt("%.2f s", secs)};
}

/// Reads one channel of a 1x3x1 image.
class ChannelEmbedding final : public EmbeddingBackend {
 public:
  ChannelEmbedding(std::string name, int column) : name_(std::move(name)), column_(column) {}
  const std::string& name() const override { return name_; }
  std::size_t dim() const override { return 1; }
  bool supports_gradient() const override { return false; }
  std::vector<double> embed(const Image& image) const override { return {image.at(0, column_, 0)}; }

 private:
  std::string name_;
  int column_;
};

/// Twenty single-image identities spaced 0.01 apart. In column c, the first
/// kept[c] modified images keep their value and the rest take the value of
/// the image ten places away, which puts the true identity at rank 11.
Outcome transfer_aggregation() {
  const Shape shape{1, 3, 1};
  const int n = 20;
  const int kept[3] = {0, 8, 12};
  auto value = [](int i) { return 0.5 + i / 100.0; };
  std::vector<ImageRecord> originals, modified, confounders;
  for (int i = 0; i < n; ++i) {
    const std::string id = "img" + std::to_string(i);
    originals.push_back(record(id, "p" + std::to_string(i), Image(shape, value(i))));
    std::vector<double> px(3);
    for (int c = 0; c < 3; ++c) px[c] = i < kept[c] ? value(i) : value((i + 10) % n);
    modified.push_back(record(id, "p" + std::to_string(i), Image(shape, std::move(px)), Role::modified));
  }
  confounders.push_back(record("cf0", "q0", Image(shape, 0.0), Role::confounder));
  confounders.push_back(record("cf1", "q1", Image(shape, 0.05), Role::confounder));

  Registry reg;
  reg.add(std::make_shared<const ChannelEmbedding>("optimized", 0));
  reg.add(std::make_shared<const ChannelEmbedding>("b1", 1));
  reg.add(std::make_shared<const ChannelEmbedding>("b2", 2));
  TransferPlan plan;
  plan.optimize_embeddings = {"optimized"};
  plan.evaluate_embeddings = {"optimized", "b1", "b2"};
  const TransferReport t = run_transfer_eval(plan, reg, {originals, modified, confounders});
  const double r0 = t.per_embedding.at("optimized").recall_mi.at(10);
  const double r1 = t.per_embedding.at("b1").recall_mi.at(10);
  const double r2 = t.per_embedding.at("b2").recall_mi.at(10);
  const double expected = (40.0 + 60.0) / 2.0;
  const bool ok = r0 == 0.0 && r1 == 40.0 && r2 == 60.0 && t.transfer_recall && *t.transfer_recall == expected;
  return {ok, fmt("Recall@10 m.i. optimized %.3f, b1 %.3f, b2 %.3f", r0, r1, r2) +
                  ", transfer_recall " + (t.transfer_recall ? fmt("%.6f", *t.transfer_recall) : "none") +
                  ", expected " + fmt("%.1f", expected)};
}

FrameCandidate frame(std::size_t index, double brightness = 120.0, CropBox box = {100, 100, 456, 456}) {
  return {"vid", "alice", index, box, 700, 700, brightness, "vid/" + std::to_string(index) + ".png"};
}

std::vector<ImageRecord> images_for(const std::string& who, std::size_t n) {
  std::vector<ImageRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04zu", who.c_str(), i);
    out.push_back(record(id, who, Image(Shape{1, 1, 1}, 0.5)));
  }
  return out;
}

struct PoolItem {
  std::string id;
  std::string identity;
};

Outcome dataset_rules() {
  std::vector<std::string> problems;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) problems.push_back(what);
  };
  const FrameRules rules;

  std::vector<FrameCandidate> spaced;
  for (std::size_t i : {0, 11, 22, 33, 44}) spaced.push_back(frame(i));
  expect(select_frames(spaced, rules, 1).accepted, "gap 11 rejected");
  std::vector<FrameCandidate> tight;
  for (std::size_t i : {0, 10, 20, 30, 40}) tight.push_back(frame(i));
  expect(!select_frames(tight, rules, 1).accepted, "gap 10 accepted");
  expect(!frame_eligible(frame(0, 69.9), rules), "brightness 69.9 eligible");
  expect(frame_eligible(frame(0, 70.0), rules), "brightness 70 ineligible");
  expect(!frame_eligible(frame(0, 120, {100, 100, 455, 456}), rules), "455-wide crop eligible");
  expect(!frame_eligible(frame(0, 120, {99, 100, 456, 456}), rules), "99-pixel margin eligible");
  expect(!frame_eligible(frame(0, 120, {145, 100, 456, 456}), rules), "right margin 99 eligible");
  expect(frame_eligible(frame(0, 120, {144, 144, 456, 456}), rules), "exact margins ineligible");

  // Random pools: every accepted selection obeys each rule.
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> index(0, 120);
  std::bernoulli_distribution dark(0.1), narrow(0.1);
  int accepted = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::size_t> used;
    std::vector<FrameCandidate> pool;
    while (pool.size() < 14) {
      const std::size_t i = index(rng);
      if (!used.insert(i).second) continue;
      const CropBox box = narrow(rng) ? CropBox{100, 100, 400, 456} : CropBox{120, 110, 460, 470};
      pool.push_back(frame(i, dark(rng) ? 60.0 : 100.0, box));
    }
    const FrameSelection s = select_frames(pool, rules, static_cast<std::uint64_t>(trial));
    if (!s.accepted) continue;
    ++accepted;
    expect(s.frames.size() == rules.count, "selection size");
    for (std::size_t a = 0; a < s.frames.size(); ++a) {
      expect(frame_eligible(s.frames[a], rules) && s.frames[a].brightness >= 70.0, "ineligible frame picked");
      const CropBox& b = s.frames[a].box;
      expect(b.w >= 456 && b.h >= 456 && b.x >= 100 && b.y >= 100 && b.x + b.w + 100 <= s.frames[a].frame_width &&
                 b.y + b.h + 100 <= s.frames[a].frame_height,
             "crop/margin violated");
      for (std::size_t c = 0; c < a; ++c) {
        const auto i = s.frames[a].frame_index, j = s.frames[c].frame_index;
        expect((i > j ? i - j : j - i) > 10, "gap <= 10");
      }
    }
  }
  expect(accepted > 0, "no random pool accepted");

  // Five per identity.
  expect(subsample_identities(images_for("few", 4), 5, 0).records.empty(), "4-image identity kept");
  auto imgs = images_for("big", 530);
  const auto five = images_for("five", 5);
  const auto few = images_for("few", 4);
  imgs.insert(imgs.end(), five.begin(), five.end());
  imgs.insert(imgs.end(), few.begin(), few.end());
  const DatasetManifest m = subsample_identities(imgs, 5, 7);
  expect(m.per_identity_count.size() == 2 && m.per_identity_count.at("big") == 5 &&
             m.per_identity_count.at("five") == 5 && !m.per_identity_count.count("few"),
         "per-identity counts");

  // Confounders never share an identity with the primary set.
  std::vector<PoolItem> pool;
  for (int i = 0; i < 40; ++i) pool.push_back({"c" + std::to_string(i), "who" + std::to_string(i % 13)});
  const std::set<std::string> primary{"who0", "who3", "who7"};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto out = select_confounders<PoolItem>(pool, primary, 40, 8, seed, [](const PoolItem&) { return true; });
    std::set<std::string> seen;
    for (const auto& c : out) {
      expect(!primary.count(c.identity), "confounder shares a primary identity");
      expect(seen.insert(c.identity).second, "confounder identity repeated");
    }
    expect(out.size() == 8, "confounder count");
  }
  bool capped = false;
  try {
    select_confounders<PoolItem>(pool, primary, 39, 8, 0, [](const PoolItem&) { return true; });
  } catch (const ConfigError&) {
    capped = true;
  }
  expect(capped, "confounder cap not enforced");

  return {problems.empty(), problems.empty() ? std::to_string(accepted) + "/200 random pools accepted, all rules held"
                                             : problems.front() + " (+" + std::to_string(problems.size() - 1) +
                                                   " more)"};
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

/// Shared pipeline directory for the determinism and report checks.
struct Pipeline {
  TempDir dir{"accept-pipeline"};
  fs::path config;

  Pipeline() {
    testing::write_synthetic_tree(dir / "input", 16, 6, 8, 77);
    config = testing::write_config(dir / "config.json", testing::toy_config(dir / "input", dir / "out", 12));
  }

  void run(std::initializer_list<const char*> commands) const {
    for (const char* cmd : commands) {
      std::string err;
      const int code = run_cli({"--config", config.string(), cmd}, &err);
      if (code != 0) throw std::runtime_error(std::string(cmd) + " exited " + std::to_string(code) + ": " + err);
    }
  }
};

Outcome determinism(const Pipeline& p) {
  p.run({"extract", "targets", "protect", "evaluate"});
  fs::rename(p.dir / "out", p.dir / "first");
  p.run({"extract", "targets", "protect", "evaluate"});
  const auto a = tree_contents(p.dir / "first");
  const auto b = tree_contents(p.dir / "out");
  std::size_t differing = 0, manifests = 0, traces = 0, csvs = 0;
  std::string example;
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      if (example.empty()) example = path;
    }
    manifests += path.find("manifest") != std::string::npos ? 1 : 0;
    traces += path.find("traces/") != std::string::npos ? 1 : 0;
    csvs += path.ends_with(".csv") ? 1 : 0;
  }
  for (const auto& [path, _] : b) differing += a.count(path) ? 0 : 1;
  const bool ok = differing == 0 && manifests > 0 && traces > 0 && csvs > 0;
  return {ok, std::to_string(a.size()) + " files (" + std::to_string(manifests) + " manifests, " +
                  std::to_string(traces) + " traces, " + std::to_string(csvs) + " csv), " + std::to_string(differing) +
                  " differ" + (example.empty() ? "" : ", e.g. " + example)};
}

Outcome report_fidelity(const Pipeline& p) {
  if (!fs::exists(p.dir / "out/evaluate")) p.run({"extract", "targets", "protect", "evaluate"});
  p.run({"report"});
  const std::string md = slurp(p.dir / "out/report/comparison.md");
  std::vector<std::string> expected{"Percentage"};
  for (int k : {1, 3, 5, 10, 50, 100}) {
    expected.push_back("Recall@" + std::to_string(k) + ": m.i.");
    expected.push_back("Recall@" + std::to_string(k) + ": o.i.");
  }
  // Row labels of every table; the header and separator rows are skipped.
  std::vector<std::vector<std::string>> tables(1);
  std::istringstream in(md);
  std::string line;
  bool in_table = false;
  while (std::getline(in, line)) {
    if (line.rfind("| ", 0) != 0 && line.rfind("|---", 0) != 0) {
      if (in_table) tables.emplace_back();
      in_table = false;
      continue;
    }
    if (!in_table) {
      in_table = true;  // header
      continue;
    }
    if (line.rfind("|---", 0) == 0) continue;
    const auto end = line.find(" |", 2);
    tables.back().push_back(line.substr(2, end - 2));
  }
  std::size_t checked = 0, wrong = 0;
  for (const auto& t : tables) {
    if (t.empty()) continue;
    ++checked;
    wrong += t == expected ? 0 : 1;
  }
  return {checked > 0 && wrong == 0,
          std::to_string(checked) + " tables checked, " + std::to_string(wrong) + " with mismatched row labels"};
}

}  // namespace
}  // namespace privkit

int main() {
  using privkit::Outcome;
  std::unique_ptr<privkit::Pipeline> pipeline;
  auto shared = [&]() -> const privkit::Pipeline& {
    if (!pipeline) pipeline = std::make_unique<privkit::Pipeline>();
    return *pipeline;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 metric oracle equivalence", privkit::metric_oracle},
      {"AC2 metric analytic cases", privkit::metric_analytic},
      {"AC3 recall monotonicity", privkit::recall_monotone},
      {"AC4 optimizer convergence", privkit::optimizer_convergence},
      {"AC5 gradient correctness", privkit::gradient_correctness},
      {"AC6 pixel-cloak cap", privkit::pixel_cloak_cap},
      {"AC7 end-to-end privacy movement", privkit::privacy_movement},
      {"AC8 transfer aggregation", privkit::transfer_aggregation},
      {"AC9 dataset rules", privkit::dataset_rules},
      {"AC10 determinism", [&] { return privkit::determinism(shared()); }},
      {"AC11 report fidelity", [&] { return privkit::report_fidelity(shared()); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
