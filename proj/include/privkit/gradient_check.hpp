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
#include <concepts>
#include <span>
#include <utility>
#include <vector>

#include "privkit/error.hpp"

namespace privkit {

/// A callable returning (value, gradient) at a parameter vector.
template <class F>
concept DifferentiableScalar = requires(F f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<std::pair<double, std::vector<double>>>;
};

/// Components whose analytic and numeric magnitudes both fall below this are
/// compared by absolute rather than relative error.
inline constexpr double kGradientCheckFloor = 1e-6;

/// Compares the analytic gradient at `point` against central differences.
/// Returns the largest per-component error: relative |a - n| / max(|a|, |n|),
/// or absolute |a - n| when both magnitudes are below kGradientCheckFloor.
template <DifferentiableScalar F>
double gradient_check(F&& loss, std::span<const double> point, double epsilon = 1e-4) {
  PRIVKIT_REQUIRE(epsilon > 0.0, "gradient_check epsilon must be positive");
  const std::vector<double> analytic = loss(point).second;
  PRIVKIT_REQUIRE(analytic.size() == point.size(), "gradient size does not match parameter size");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double up = loss(std::span<const double>(x)).first;
    x[i] = saved - epsilon;
    const double down = loss(std::span<const double>(x)).first;
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
    const double diff = std::abs(analytic[i] - numeric);
    worst = std::max(worst, scale < kGradientCheckFloor ? diff : diff / scale);
  }
  return worst;
}

}  // namespace privkit
