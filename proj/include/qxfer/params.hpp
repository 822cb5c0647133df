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

#include <cmath>
#include <vector>

#include "qxfer/common.hpp"

namespace qxfer {

/// Per-layer (gamma, beta) angles of a depth-p circuit, in radians.
struct ParamSet {
  std::vector<double> gammas;
  std::vector<double> betas;

  ParamSet() = default;
  ParamSet(std::vector<double> g, std::vector<double> b)
      : gammas(std::move(g)), betas(std::move(b)) {
    if (gammas.size() != betas.size())
      throw ParameterError("ParamSet: gamma/beta length mismatch");
  }

  static ParamSet zeros(int p) {
    return {std::vector<double>(static_cast<std::size_t>(p), 0.0),
            std::vector<double>(static_cast<std::size_t>(p), 0.0)};
  }

  [[nodiscard]] int depth() const { return static_cast<int>(gammas.size()); }

  /// Flattened as [gamma_1..gamma_p, beta_1..beta_p].
  [[nodiscard]] std::vector<double> flat() const {
    std::vector<double> v(gammas);
    v.insert(v.end(), betas.begin(), betas.end());
    return v;
  }

  static ParamSet from_flat(const std::vector<double>& v) {
    if (v.size() % 2 != 0) throw ParameterError("ParamSet: odd flat length");
    const auto p = static_cast<std::ptrdiff_t>(v.size() / 2);
    return {std::vector<double>(v.begin(), v.begin() + p),
            std::vector<double>(v.begin() + p, v.end())};
  }

  [[nodiscard]] bool finite() const {
    for (double x : gammas)
      if (!std::isfinite(x)) return false;
    for (double x : betas)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const ParamSet&) const = default;
};

}  // namespace qxfer
