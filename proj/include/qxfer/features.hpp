// Copyright 2026 The qxfer Authors. All Rights Reserved.
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
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "qxfer/graph.hpp"

namespace qxfer {

inline constexpr int kNumNodeFeatures = 6;

/// Per node: degree, clustering, core number, normalized betweenness,
/// PageRank, triangle count.
using NodeFeatureRow = std::array<double, kNumNodeFeatures>;
using NodeFeatureMatrix = std::vector<NodeFeatureRow>;

inline std::vector<int> triangle_counts(const Graph& g) {
  const auto adj = g.adjacency();
  std::vector<int> t(static_cast<std::size_t>(g.n), 0);
  for (auto [u, v] : g.edges) {
    // common neighbours w > v close triangle (u, v, w) exactly once
    for (int w : adj[u])
      if (w > v && std::binary_search(adj[v].begin(), adj[v].end(), w)) {
        ++t[u];
        ++t[v];
        ++t[w];
      }
  }
  return t;
}

inline std::vector<int> core_numbers(const Graph& g) {
  const auto adj = g.adjacency();
  std::vector<int> deg = g.degrees();
  std::vector<int> core(static_cast<std::size_t>(g.n), 0);
  std::vector<bool> removed(static_cast<std::size_t>(g.n), false);
  int k = 0;
  for (int step = 0; step < g.n; ++step) {
    int best = -1;
    for (int v = 0; v < g.n; ++v)
      if (!removed[v] && (best < 0 || deg[v] < deg[best])) best = v;
    k = std::max(k, deg[best]);
    core[best] = k;
    removed[best] = true;
    for (int w : adj[best])
      if (!removed[w]) --deg[w];
  }
  return core;
}

/// Brandes betweenness, scaled by 2 / ((n-1)(n-2)).
inline std::vector<double> betweenness(const Graph& g) {
  const int n = g.n;
  const auto adj = g.adjacency();
  std::vector<double> cb(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    std::vector<int> order;
    std::vector<std::vector<int>> pred(static_cast<std::size_t>(n));
    std::vector<double> sigma(static_cast<std::size_t>(n), 0.0);
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      order.push_back(v);
      for (int w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    std::vector<double> delta(static_cast<std::size_t>(n), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int w = *it;
      for (int v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  // each unordered pair counted twice above
  const double scale = n > 2 ? 1.0 / ((n - 1.0) * (n - 2.0)) : 0.0;
  for (double& x : cb) x *= scale;
  return cb;
}

/// Power iteration with damping; dangling mass spread uniformly.
inline std::vector<double> pagerank(const Graph& g, double damping = 0.85,
                                    double tol = 1e-10, int max_iter = 10000) {
  const int n = g.n;
  const auto adj = g.adjacency();
  std::vector<double> x(static_cast<std::size_t>(n), 1.0 / n);
  std::vector<double> next(static_cast<std::size_t>(n));
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (int v = 0; v < n; ++v)
      if (adj[v].empty()) dangling += x[v];
    std::fill(next.begin(), next.end(),
              (1.0 - damping) / n + damping * dangling / n);
    for (int v = 0; v < n; ++v)
      for (int w : adj[v])
        next[w] += damping * x[v] / static_cast<double>(adj[v].size());
    double err = 0.0;
    for (int v = 0; v < n; ++v) err += std::abs(next[v] - x[v]);
    x.swap(next);
    if (err < n * tol) break;
  }
  double s = 0.0;
  for (double v : x) s += v;
  for (double& v : x) v /= s;
  return x;
}

inline NodeFeatureMatrix compute_node_features(const Graph& g) {
  const auto deg = g.degrees();
  const auto tri = triangle_counts(g);
  const auto core = core_numbers(g);
  const auto bc = betweenness(g);
  const auto pr = pagerank(g);
  NodeFeatureMatrix out(static_cast<std::size_t>(g.n));
  for (int v = 0; v < g.n; ++v) {
    const double d = deg[v];
    const double clustering = d > 1 ? 2.0 * tri[v] / (d * (d - 1.0)) : 0.0;
    out[v] = {d, clustering, static_cast<double>(core[v]), bc[v], pr[v],
              static_cast<double>(tri[v])};
  }
  return out;
}

}  // namespace qxfer
