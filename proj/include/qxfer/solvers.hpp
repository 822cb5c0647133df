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

#include <bit>
#include <cstdint>
#include <vector>

#include "qxfer/graph.hpp"

namespace qxfer {

enum class Problem { MaxCut, MIS };

inline std::string to_string(Problem p) {
  return p == Problem::MaxCut ? "MaxCut" : "MIS";
}

/// Bitstrings use bit i for vertex i.
struct SolverResult {
  Problem problem = Problem::MIS;
  double optimum = 0.0;
  std::vector<std::uint32_t> optimal_configs;
};

inline constexpr int kMaxExactNodes = 26;

inline int cut_value(const Graph& g, std::uint64_t bits) {
  int c = 0;
  for (auto [u, v] : g.edges) c += static_cast<int>(((bits >> u) ^ (bits >> v)) & 1U);
  return c;
}

inline bool is_independent_set(const std::vector<std::uint64_t>& nbr,
                               std::uint64_t bits) {
  for (std::uint64_t rest = bits; rest; rest &= rest - 1) {
    const int v = std::countr_zero(rest);
    if (nbr[v] & bits) return false;
  }
  return true;
}

inline bool is_independent_set(const Graph& g, std::uint64_t bits) {
  return is_independent_set(g.neighbor_masks(), bits);
}

namespace detail {
inline void check_exact_capacity(const Graph& g) {
  if (g.n > kMaxExactNodes)
    throw CapacityError("exact solver limited to n <= " +
                        std::to_string(kMaxExactNodes) + ", got " +
                        std::to_string(g.n));
}
}  // namespace detail

/// Enumerates every independent set; returns the size and all maximum sets.
inline SolverResult solve_mis_exact(const Graph& g) {
  detail::check_exact_capacity(g);
  const auto nbr = g.neighbor_masks();
  SolverResult r{Problem::MIS, 0.0, {}};
  int best = -1;
  // Depth-first extension keeps only feasible sets, far fewer than 2^n.
  struct Frame {
    std::uint32_t set;
    int next;
  };
  std::vector<Frame> stack{{0U, 0}};
  while (!stack.empty()) {
    auto [set, next] = stack.back();
    stack.pop_back();
    const int size = std::popcount(set);
    if (size > best) {
      best = size;
      r.optimal_configs.clear();
    }
    if (size == best) r.optimal_configs.push_back(set);
    for (int v = g.n - 1; v >= next; --v)
      if (!(nbr[v] & set)) stack.push_back({set | (1U << v), v + 1});
  }
  std::sort(r.optimal_configs.begin(), r.optimal_configs.end());
  r.optimum = best;
  return r;
}

/// Brute force over all 2^n bipartitions; both polarity twins are listed.
inline SolverResult solve_maxcut_exact(const Graph& g) {
  detail::check_exact_capacity(g);
  SolverResult r{Problem::MaxCut, 0.0, {}};
  int best = -1;
  const std::uint32_t total = 1U << g.n;
  for (std::uint32_t b = 0; b < total; ++b) {
    const int c = cut_value(g, b);
    if (c > best) {
      best = c;
      r.optimal_configs.clear();
    }
    if (c == best) r.optimal_configs.push_back(b);
  }
  r.optimum = best;
  return r;
}

inline SolverResult solve_exact(const Graph& g, Problem p) {
  return p == Problem::MIS ? solve_mis_exact(g) : solve_maxcut_exact(g);
}

}  // namespace qxfer
