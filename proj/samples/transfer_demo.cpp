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

// Optimizes MaxCut QAOA on one donor graph and reuses the angles on the MIS
// circuit of a different acceptor graph.

#include <iostream>

#include "qxfer/qaoa.hpp"
#include "qxfer/solvers.hpp"

int main() {
  using namespace qxfer;
  const Graph donor = generate_graph(ErParams{0.6}, 8, 1, "donor");
  const Graph acceptor = generate_graph(BaParams{2}, 10, 2, "acceptor");

  OptConfig cfg;
  cfg.seed = 3;
  const CircuitSpec maxcut(Problem::MaxCut, donor, 1);
  const auto traces = multistart(maxcut, 4, cfg);
  const auto best = std::max_element(traces.begin(), traces.end(), [](auto& a, auto& b) {
    return a.final_objective < b.final_objective;
  });
  const double cut_opt = solve_maxcut_exact(donor).optimum;
  std::cout << "donor MaxCut ratio     " << best->final_objective / cut_opt << '\n';

  const CircuitSpec mis(Problem::MIS, acceptor, 1);
  const double mis_opt = solve_mis_exact(acceptor).optimum;
  std::cout << "transferred MIS ratio  " << objective(mis, best->final_params) / mis_opt << '\n';

  const auto refined = warm_start(mis, best->final_params, 10);
  std::cout << "after 10 warm steps    " << refined.final_objective / mis_opt << '\n';
}
