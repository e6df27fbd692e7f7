#pragma once

// Nelder-Mead downhill simplex for small unconstrained problems.

#include <algorithm>
#include <array>
#include <functional>
#include <numeric>

namespace sonoguide::detail {

template <std::size_t N>
struct SimplexResult {
  std::array<double, N> x{};
  double value = 0.0;
  int evaluations = 0;
};

template <std::size_t N, typename F>
SimplexResult<N> nelder_mead(F&& f, const std::array<double, N>& start,
                             const std::array<double, N>& initial_step, int max_evaluations,
                             double f_tolerance = 1e-9) {
  using Point = std::array<double, N>;
  std::array<Point, N + 1> pts;
  std::array<double, N + 1> vals;
  int evals = 0;
  auto eval = [&](const Point& p) {
    ++evals;
    return f(p);
  };

  pts[0] = start;
  vals[0] = eval(start);
  for (std::size_t i = 0; i < N; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += initial_step[i];
    vals[i + 1] = eval(pts[i + 1]);
  }

  std::array<std::size_t, N + 1> order;
  while (evals < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order[0], worst = order[N], second = order[N - 1];
    if (vals[worst] - vals[best] <= f_tolerance) {
      break;
    }

    Point centroid{};
    for (std::size_t k = 0; k < N; ++k) {
      const Point& p = pts[order[k]];
      for (std::size_t i = 0; i < N; ++i) centroid[i] += p[i] / static_cast<double>(N);
    }
    auto along = [&](double t) {
      Point p;
      for (std::size_t i = 0; i < N; ++i) p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
      return p;
    };

    const Point reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      const Point expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Point contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    // shrink towards the best vertex
    for (std::size_t k = 1; k <= N; ++k) {
      const std::size_t idx = order[k];
      for (std::size_t i = 0; i < N; ++i) {
        pts[idx][i] = pts[best][i] + 0.5 * (pts[idx][i] - pts[best][i]);
      }
      vals[idx] = eval(pts[idx]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  const auto bi = static_cast<std::size_t>(it - vals.begin());
  return {pts[bi], vals[bi], evals};
}

}  // namespace sonoguide::detail
