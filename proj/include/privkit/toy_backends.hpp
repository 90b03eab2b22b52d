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

// Small closed-form backends. They stand in for pretrained generators,
// recognizers and LPIPS so every algorithm can run and be checked without
// model weights.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "privkit/backends.hpp"

namespace privkit {

enum class Projection { identity, gaussian };
enum class Activation { none, tanh };

/// Center crop -> flatten -> fixed projection (-> optional tanh).
class ProjectionEmbedding final : public EmbeddingBackend {
 public:
  struct Options {
    Shape crop;
    std::size_t dim = 0;  // ignored for Projection::identity
    Projection projection = Projection::gaussian;
    Activation activation = Activation::none;
    std::uint64_t seed = 0;
  };

  ProjectionEmbedding(std::string name, Options options)
      : name_(std::move(name)), options_(options) {
    const std::size_t in = options_.crop.size();
    PRIVKIT_REQUIRE(in > 0, "projection embedding '" + name_ + "' needs a positive crop shape");
    if (options_.projection == Projection::identity) {
      options_.dim = in;
    } else {
      PRIVKIT_REQUIRE(options_.dim > 0, "projection embedding '" + name_ + "' needs dim > 0");
      std::mt19937_64 rng(options_.seed);
      std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      weights_.resize(options_.dim * in);
      for (double& w : weights_) w = normal(rng);
    }
  }

  const std::string& name() const override { return name_; }
  std::size_t dim() const override { return options_.dim; }
  bool supports_gradient() const override { return true; }
  const Options& options() const { return options_; }

  std::vector<double> embed(const Image& image) const override {
    const std::vector<double> x = crop(image);
    std::vector<double> y = project(x);
    if (options_.activation == Activation::tanh) {
      for (double& v : y) v = std::tanh(v);
    }
    return y;
  }

  Image backpropagate(const Image& image, std::span<const double> upstream) const override {
    PRIVKIT_REQUIRE(upstream.size() == options_.dim,
                    "upstream gradient size does not match embedding dim of '" + name_ + "'");
    std::vector<double> g(upstream.begin(), upstream.end());
    if (options_.activation == Activation::tanh) {
      const std::vector<double> pre = project(crop(image));
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = std::tanh(pre[i]);
        g[i] *= 1.0 - t * t;
      }
    }
    std::vector<double> gx;
    if (options_.projection == Projection::identity) {
      gx = std::move(g);
    } else {
      const std::size_t in = options_.crop.size();
      gx.assign(in, 0.0);
      for (std::size_t r = 0; r < options_.dim; ++r) {
        const double* row = &weights_[r * in];
        for (std::size_t c = 0; c < in; ++c) gx[c] += row[c] * g[r];
      }
    }
    Image grad(image.shape(), 0.0);
    const auto [y0, x0] = origin(image);
    std::size_t k = 0;
    for (int y = 0; y < options_.crop.height; ++y)
      for (int x = 0; x < options_.crop.width; ++x)
        for (int c = 0; c < options_.crop.channels; ++c) grad.at(y0 + y, x0 + x, c) = gx[k++];
    return grad;
  }

 private:
  std::pair<int, int> origin(const Image& image) const {
    const Shape& cs = options_.crop;
    PRIVKIT_REQUIRE(image.channels() == cs.channels && image.height() >= cs.height &&
                        image.width() >= cs.width,
                    "image " + to_string(image.shape()) + " cannot be cropped to " + to_string(cs) +
                        " by '" + name_ + "'");
    return {(image.height() - cs.height) / 2, (image.width() - cs.width) / 2};
  }

  std::vector<double> crop(const Image& image) const {
    const auto [y0, x0] = origin(image);
    std::vector<double> out;
    out.reserve(options_.crop.size());
    for (int y = 0; y < options_.crop.height; ++y)
      for (int x = 0; x < options_.crop.width; ++x)
        for (int c = 0; c < options_.crop.channels; ++c) out.push_back(image.at(y0 + y, x0 + x, c));
    return out;
  }

  std::vector<double> project(const std::vector<double>& x) const {
    if (options_.projection == Projection::identity) return x;
    const std::size_t in = x.size();
    std::vector<double> y(options_.dim, 0.0);
    for (std::size_t r = 0; r < options_.dim; ++r) {
      const double* row = &weights_[r * in];
      double acc = 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
      y[r] = acc;
    }
    return y;
  }

  std::string name_;
  Options options_;
  std::vector<double> weights_;  // dim x crop.size(), row-major
};

/// G(z) = clip(A z + b, 0, 1).
class LinearGenerator final : public GeneratorBackend {
 public:
  struct Options {
    Shape shape;
    std::size_t latent_dim = 0;  // ignored for Projection::identity
    Projection projection = Projection::identity;
    double bias = 0.0;
    double latent_mean = 0.5;
    double latent_stddev = 0.1;
    std::uint64_t seed = 0;
  };

  LinearGenerator(std::string name, Options options) : name_(std::move(name)), options_(options) {
    const std::size_t out = options_.shape.size();
    PRIVKIT_REQUIRE(out > 0, "linear generator '" + name_ + "' needs a positive output shape");
    if (options_.projection == Projection::identity) {
      options_.latent_dim = out;
    } else {
      PRIVKIT_REQUIRE(options_.latent_dim > 0, "linear generator '" + name_ + "' needs latent_dim > 0");
      std::mt19937_64 rng(options_.seed);
      std::normal_distribution<double> normal(
          0.0, 1.0 / std::sqrt(static_cast<double>(options_.latent_dim)));
      weights_.resize(out * options_.latent_dim);
      for (double& w : weights_) w = normal(rng);
    }
  }

  const std::string& name() const override { return name_; }
  std::size_t latent_dim() const override { return options_.latent_dim; }
  Shape output_shape() const override { return options_.shape; }
  bool supports_gradient() const override { return true; }

  Image generate(std::span<const double> latent) const override {
    std::vector<double> pre = affine(latent);
    for (double& v : pre) v = std::clamp(v, 0.0, 1.0);
    return Image(options_.shape, std::move(pre));
  }

  std::vector<double> sample_latent(std::uint64_t seed) const override {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(options_.latent_mean, options_.latent_stddev);
    std::vector<double> z(options_.latent_dim);
    for (double& v : z) v = normal(rng);
    return z;
  }

  std::vector<double> backpropagate(std::span<const double> latent, const Image& upstream) const override {
    PRIVKIT_REQUIRE(upstream.shape() == options_.shape,
                    "upstream gradient shape does not match generator '" + name_ + "'");
    const std::vector<double> pre = affine(latent);
    std::vector<double> g(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
      g[i] = (pre[i] >= 0.0 && pre[i] <= 1.0) ? upstream.pixels()[i] : 0.0;
    }
    if (options_.projection == Projection::identity) return g;
    std::vector<double> gz(options_.latent_dim, 0.0);
    for (std::size_t r = 0; r < g.size(); ++r) {
      const double* row = &weights_[r * options_.latent_dim];
      for (std::size_t c = 0; c < options_.latent_dim; ++c) gz[c] += row[c] * g[r];
    }
    return gz;
  }

 private:
  std::vector<double> affine(std::span<const double> z) const {
    PRIVKIT_REQUIRE(z.size() == options_.latent_dim,
                    "latent size " + std::to_string(z.size()) + " does not match generator '" + name_ +
                        "' (" + std::to_string(options_.latent_dim) + ")");
    const std::size_t out = options_.shape.size();
    std::vector<double> y(out);
    if (options_.projection == Projection::identity) {
      for (std::size_t i = 0; i < out; ++i) y[i] = z[i] + options_.bias;
      return y;
    }
    for (std::size_t r = 0; r < out; ++r) {
      const double* row = &weights_[r * options_.latent_dim];
      double acc = options_.bias;
      for (std::size_t c = 0; c < options_.latent_dim; ++c) acc += row[c] * z[c];
      y[r] = acc;
    }
    return y;
  }

  std::string name_;
  Options options_;
  std::vector<double> weights_;  // shape.size() x latent_dim, row-major
};

/// Squared pixel distance, either averaged over all values or summed.
class SquaredPixelDistance final : public PerceptualDistance {
 public:
  enum class Reduction { mean, sum };

  explicit SquaredPixelDistance(std::string name, Reduction reduction = Reduction::mean)
      : name_(std::move(name)), reduction_(reduction) {}

  const std::string& name() const override { return name_; }
  bool supports_gradient() const override { return true; }
  Reduction reduction() const { return reduction_; }

  double distance(const Image& a, const Image& b) const override {
    check(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a.pixels()[i] - b.pixels()[i];
      sum += d * d;
    }
    return reduction_ == Reduction::mean ? sum / static_cast<double>(a.size()) : sum;
  }

  Image gradient(const Image& a, const Image& b) const override {
    check(a, b);
    const double scale = reduction_ == Reduction::mean ? 2.0 / static_cast<double>(a.size()) : 2.0;
    Image g(a.shape(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) g.pixels()[i] = scale * (a.pixels()[i] - b.pixels()[i]);
    return g;
  }

 private:
  void check(const Image& a, const Image& b) const {
    PRIVKIT_REQUIRE(a.shape() == b.shape(), "perceptual distance '" + name_ + "' got shapes " +
                                                to_string(a.shape()) + " and " + to_string(b.shape()));
  }

  std::string name_;
  Reduction reduction_;
};

}  // namespace privkit
