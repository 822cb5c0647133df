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
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qxfer/common.hpp"

namespace qxfer {

enum class Family { ER, RR, WS, BA, Custom };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::ER: return "ER";
    case Family::RR: return "RR";
    case Family::WS: return "WS";
    case Family::BA: return "BA";
    case Family::Custom: return "CUSTOM";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "ER") return Family::ER;
  if (s == "RR") return Family::RR;
  if (s == "WS") return Family::WS;
  if (s == "BA") return Family::BA;
  if (s == "CUSTOM") return Family::Custom;
  throw FormatError("unknown graph family '" + s + "'");
}

struct ErParams {
  double p = 0.5;
};
struct RrParams {
  int degree = 3;
};
/// Ring lattice with floor(k/2) neighbours per side, then rewiring.
struct WsParams {
  int k = 3;
  double p_rewire = 0.1;
};
struct BaParams {
  int m = 2;
};

using FamilyParams =
    std::variant<std::monostate, ErParams, RrParams, WsParams, BaParams>;

using Edge = std::pair<int, int>;

/// Undirected, unweighted simple graph. Edges are stored as sorted (u < v)
/// pairs in lexicographic order.
struct Graph {
  std::string id;
  int n = 0;
  std::vector<Edge> edges;
  Family family = Family::Custom;
  FamilyParams params{};
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [u, v] : edges) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
  }

  /// Neighbour bitmask per vertex; requires n <= 64.
  [[nodiscard]] std::vector<std::uint64_t> neighbor_masks() const {
    if (n > 64) throw CapacityError("neighbor_masks: n > 64");
    std::vector<std::uint64_t> m(static_cast<std::size_t>(n), 0);
    for (auto [u, v] : edges) {
      m[u] |= std::uint64_t{1} << v;
      m[v] |= std::uint64_t{1} << u;
    }
    return m;
  }

  [[nodiscard]] std::vector<int> degrees() const {
    std::vector<int> d(static_cast<std::size_t>(n), 0);
    for (auto [u, v] : edges) {
      ++d[u];
      ++d[v];
    }
    return d;
  }

  bool operator==(const Graph& o) const {
    return id == o.id && n == o.n && edges == o.edges && family == o.family &&
           seed == o.seed && params_string() == o.params_string();
  }

  [[nodiscard]] std::string params_string() const;
};

/// Validates and canonicalizes an edge list (sorted pairs, no loops/dupes).
inline Graph make_graph(std::string id, int n, std::vector<Edge> edges) {
  if (n < 1) throw ParameterError("graph needs n >= 1");
  std::set<Edge> uniq;
  for (auto [u, v] : edges) {
    if (u == v) throw ParameterError("self-loop in edge list");
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw ParameterError("edge endpoint out of range");
    if (u > v) std::swap(u, v);
    if (!uniq.insert({u, v}).second)
      throw ParameterError("duplicate edge in edge list");
  }
  Graph g;
  g.id = std::move(id);
  g.n = n;
  g.edges.assign(uniq.begin(), uniq.end());
  return g;
}

inline Graph complete_graph(int n, std::string id = "K") {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
  return make_graph(std::move(id), n, std::move(e));
}

inline Graph cycle_graph(int n, std::string id = "C") {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u) e.emplace_back(u, (u + 1) % n);
  return make_graph(std::move(id), n, std::move(e));
}

inline Graph path_graph(int n, std::string id = "P") {
  std::vector<Edge> e;
  for (int u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
  return make_graph(std::move(id), n, std::move(e));
}

inline Graph star_graph(int n, std::string id = "S") {
  std::vector<Edge> e;
  for (int u = 1; u < n; ++u) e.emplace_back(0, u);
  return make_graph(std::move(id), n, std::move(e));
}

/// Relabels vertex v as perm[v].
inline Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  std::vector<Edge> e;
  e.reserve(g.edges.size());
  for (auto [u, v] : g.edges) e.emplace_back(perm[u], perm[v]);
  Graph out = make_graph(g.id, g.n, std::move(e));
  out.family = g.family;
  out.params = g.params;
  out.seed = g.seed;
  return out;
}

namespace detail {

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<Edge> gen_er(int n, double p, Rng& rng) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) e.emplace_back(u, v);
  return e;
}

// Stub pairing with retry of leftover stubs; restarts when no suitable pair
// remains.
inline bool try_regular(int n, int d, Rng& rng, std::set<Edge>& edges) {
  edges.clear();
  std::vector<int> stubs;
  for (int i = 0; i < d; ++i)
    for (int v = 0; v < n; ++v) stubs.push_back(v);
  while (!stubs.empty()) {
    std::vector<int> potential(static_cast<std::size_t>(n), 0);
    std::shuffle(stubs.begin(), stubs.end(), rng);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      int a = std::min(stubs[i], stubs[i + 1]);
      int b = std::max(stubs[i], stubs[i + 1]);
      if (a != b && !edges.count({a, b})) {
        edges.insert({a, b});
      } else {
        ++potential[a];
        ++potential[b];
      }
    }
    std::vector<int> left;
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < potential[v]; ++c) left.push_back(v);
    if (left.empty()) return true;
    bool suitable = false;
    for (int a = 0; a < n && !suitable; ++a)
      for (int b = a + 1; b < n && !suitable; ++b)
        if (potential[a] && potential[b] && !edges.count({a, b}))
          suitable = true;
    if (!suitable) return false;
    stubs = std::move(left);
  }
  return true;
}

inline std::vector<Edge> gen_rr(int n, int d, Rng& rng) {
  // Dense regular graphs are built as complements of sparse ones.
  const bool complement = 2 * d > n - 1;
  const int dd = complement ? n - 1 - d : d;
  std::set<Edge> edges;
  if (dd > 0) {
    while (!try_regular(n, dd, rng, edges)) {
    }
  }
  if (!complement) return {edges.begin(), edges.end()};
  std::vector<Edge> out;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (!edges.count({u, v})) out.emplace_back(u, v);
  return out;
}

inline std::vector<Edge> gen_ws(int n, int k, double p, Rng& rng) {
  if (k == n) {
    std::vector<Edge> e;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
    return e;
  }
  auto key = [](int a, int b) { return Edge{std::min(a, b), std::max(a, b)}; };
  std::set<Edge> edges;
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < n; ++u)
      if (edges.insert(key(u, (u + j) % n)).second) {
        ++deg[u];
        ++deg[(u + j) % n];
      }
  for (int j = 1; j <= k / 2; ++j) {
    for (int u = 0; u < n; ++u) {
      const int v = (u + j) % n;
      if (uniform01(rng) >= p) continue;
      int w = uniform_int(rng, 0, n - 1);
      bool saturated = false;
      while (w == u || edges.count(key(u, w))) {
        if (deg[u] >= n - 1) {
          saturated = true;
          break;
        }
        w = uniform_int(rng, 0, n - 1);
      }
      if (saturated || !edges.count(key(u, v))) continue;
      edges.erase(key(u, v));
      --deg[v];
      edges.insert(key(u, w));
      ++deg[w];
    }
  }
  return {edges.begin(), edges.end()};
}

// m isolated seed nodes; each newcomer picks m distinct targets with weight
// (degree + 1).
inline std::vector<Edge> gen_ba(int n, int m, Rng& rng) {
  std::vector<Edge> e;
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  for (int v = m; v < n; ++v) {
    std::vector<int> pool(static_cast<std::size_t>(v));
    for (int u = 0; u < v; ++u) pool[u] = u;
    for (int t = 0; t < m; ++t) {
      double total = 0.0;
      for (int u : pool) total += deg[u] + 1.0;
      double r = uniform01(rng) * total;
      std::size_t pick = pool.size() - 1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        r -= deg[pool[i]] + 1.0;
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      e.emplace_back(pool[pick], v);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    for (std::size_t i = e.size() - static_cast<std::size_t>(m); i < e.size();
         ++i) {
      ++deg[e[i].first];
      ++deg[e[i].second];
    }
  }
  return e;
}

}  // namespace detail

inline Family family_of(const FamilyParams& p) {
  return std::visit(
      [](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ErParams>) return Family::ER;
        if constexpr (std::is_same_v<T, RrParams>) return Family::RR;
        if constexpr (std::is_same_v<T, WsParams>) return Family::WS;
        if constexpr (std::is_same_v<T, BaParams>) return Family::BA;
        return Family::Custom;
      },
      p);
}

inline void validate_family_params(const FamilyParams& params, int n) {
  if (n < 2) throw ParameterError("generate_graph: n must be >= 2");
  std::visit(
      [n](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ErParams>) {
          if (!(x.p > 0.0 && x.p <= 1.0))
            throw ParameterError("ER: edge probability must be in (0, 1]");
        } else if constexpr (std::is_same_v<T, RrParams>) {
          if (x.degree < 1 || x.degree >= n)
            throw ParameterError("RR: degree must satisfy 1 <= d < n");
          if ((n * x.degree) % 2 != 0)
            throw ParameterError("RR: n * d must be even");
        } else if constexpr (std::is_same_v<T, WsParams>) {
          if (x.k < 2 || x.k > n)
            throw ParameterError("WS: neighbour count must satisfy 2 <= k <= n");
          if (!(x.p_rewire >= 0.0 && x.p_rewire <= 1.0))
            throw ParameterError("WS: rewiring probability must be in [0, 1]");
        } else if constexpr (std::is_same_v<T, BaParams>) {
          if (x.m < 1 || x.m >= n)
            throw ParameterError("BA: attachment count must satisfy 1 <= m < n");
        } else {
          throw ParameterError("generate_graph: no family parameters given");
        }
      },
      params);
}

/// Deterministic random graph for (params, n, seed). An edgeless draw is
/// discarded and regenerated with seed + 1; the seed actually used is stored.
inline Graph generate_graph(const FamilyParams& params, int n,
                            std::uint64_t seed, std::string id = "") {
  validate_family_params(params, n);
  for (std::uint64_t s = seed;; ++s) {
    Rng rng(s);
    std::vector<Edge> edges = std::visit(
        [&](const auto& x) -> std::vector<Edge> {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, ErParams>)
            return detail::gen_er(n, x.p, rng);
          else if constexpr (std::is_same_v<T, RrParams>)
            return detail::gen_rr(n, x.degree, rng);
          else if constexpr (std::is_same_v<T, WsParams>)
            return detail::gen_ws(n, x.k, x.p_rewire, rng);
          else if constexpr (std::is_same_v<T, BaParams>)
            return detail::gen_ba(n, x.m, rng);
          else
            return {};
        },
        params);
    if (edges.empty()) continue;
    Graph g = make_graph(std::move(id), n, std::move(edges));
    g.family = family_of(params);
    g.params = params;
    g.seed = s;
    return g;
  }
}

// ---------------------------------------------------------------------------
// Graph bank text format, one graph per line, tab separated:
//   id  family  params  n  seed  edges
// params is "key=value" joined by ';' (or "-"), doubles printed with 17
// significant digits; edges is "u-v" joined by ' ' (or "-").

namespace detail {
inline std::string fmt_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}
}  // namespace detail

inline std::string Graph::params_string() const {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ErParams>)
          return "p=" + detail::fmt_double(x.p);
        else if constexpr (std::is_same_v<T, RrParams>)
          return "d=" + std::to_string(x.degree);
        else if constexpr (std::is_same_v<T, WsParams>)
          return "k=" + std::to_string(x.k) +
                 ";p_rewire=" + detail::fmt_double(x.p_rewire);
        else if constexpr (std::is_same_v<T, BaParams>)
          return "m=" + std::to_string(x.m);
        else
          return "-";
      },
      params);
}

inline std::string to_bank_line(const Graph& g) {
  std::ostringstream os;
  os << g.id << '\t' << to_string(g.family) << '\t' << g.params_string()
     << '\t' << g.n << '\t' << g.seed << '\t';
  if (g.edges.empty()) os << '-';
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (i) os << ' ';
    os << g.edges[i].first << '-' << g.edges[i].second;
  }
  return os.str();
}

inline Graph from_bank_line(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, '\t')) f.push_back(tok);
  if (f.size() != 6) throw FormatError("graph bank: expected 6 fields");

  auto kv = [&](const std::string& key) -> std::string {
    std::stringstream ps(f[2]);
    std::string item;
    while (std::getline(ps, item, ';')) {
      auto eq = item.find('=');
      if (eq != std::string::npos && item.substr(0, eq) == key)
        return item.substr(eq + 1);
    }
    throw FormatError("graph bank: missing parameter '" + key + "'");
  };

  Family fam = family_from_string(f[1]);
  FamilyParams params;
  switch (fam) {
    case Family::ER: params = ErParams{std::stod(kv("p"))}; break;
    case Family::RR: params = RrParams{std::stoi(kv("d"))}; break;
    case Family::WS:
      params = WsParams{std::stoi(kv("k")), std::stod(kv("p_rewire"))};
      break;
    case Family::BA: params = BaParams{std::stoi(kv("m"))}; break;
    case Family::Custom: break;
  }
  std::vector<Edge> edges;
  if (f[5] != "-") {
    std::stringstream es(f[5]);
    while (es >> tok) {
      auto dash = tok.find('-');
      if (dash == std::string::npos) throw FormatError("graph bank: bad edge");
      edges.emplace_back(std::stoi(tok.substr(0, dash)),
                         std::stoi(tok.substr(dash + 1)));
    }
  }
  Graph g = make_graph(f[0], std::stoi(f[3]), std::move(edges));
  g.family = fam;
  g.params = params;
  g.seed = std::stoull(f[4]);
  return g;
}

inline void write_graph_bank(std::ostream& os, const std::vector<Graph>& gs) {
  for (const auto& g : gs) os << to_bank_line(g) << '\n';
}

inline std::vector<Graph> read_graph_bank(std::istream& is) {
  std::vector<Graph> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(from_bank_line(line));
  }
  return out;
}

}  // namespace qxfer
