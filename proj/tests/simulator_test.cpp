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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dense_oracle.hpp"
#include "qxfer/graph.hpp"
#include "qxfer/qaoa.hpp"
#include "qxfer/simulator.hpp"

namespace qxfer {
namespace {

double max_error(const StateVector& s, const oracle::CVec& ref) {
  double e = 0.0;
  for (std::size_t b = 0; b < s.size(); ++b)
    e = std::max(e, std::abs(s[b] - ref(static_cast<long>(b))));
  return e;
}

ParamSet random_params(int p, Rng& rng) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  ParamSet ps = ParamSet::zeros(p);
  for (int l = 0; l < p; ++l) {
    ps.gammas[l] = u(rng);
    ps.betas[l] = u(rng);
  }
  return ps;
}

TEST(PrepareInitial, MaxCutUniformAndMisZero) {
  auto s = prepare_initial(CircuitSpec(Problem::MaxCut, complete_graph(2), 1));
  for (const auto& a : s.amplitudes()) EXPECT_DOUBLE_EQ(a.real(), 0.5);

  auto m = prepare_initial(CircuitSpec(Problem::MIS, path_graph(3), 1));
  EXPECT_EQ(m[0], Complex(1.0, 0.0));
  for (std::size_t b = 1; b < m.size(); ++b) EXPECT_EQ(m[b], Complex(0.0, 0.0));

  auto big = prepare_initial(CircuitSpec(Problem::MaxCut, cycle_graph(12), 1));
  ASSERT_EQ(big.size(), 4096u);
  for (const auto& a : big.amplitudes()) EXPECT_DOUBLE_EQ(a.real(), 1.0 / 64.0);
}

TEST(PhaseSeparator, ZeroAngleIsIdentity) {
  CircuitSpec spec(Problem::MaxCut, cycle_graph(4), 1);
  auto s = prepare_initial(spec);
  auto before = s.amplitudes();
  apply_phase_separator(s, spec, 0.0);
  EXPECT_EQ(s.amplitudes(), before);
}

TEST(PhaseSeparator, MisGroundStateGetsGlobalPhaseOnly) {
  CircuitSpec spec(Problem::MIS, cycle_graph(5), 1);
  auto s = prepare_initial(spec);
  apply_phase_separator(s, spec, 1.234);
  EXPECT_NEAR(std::norm(s[0]), 1.0, 1e-15);
  for (std::size_t b = 1; b < s.size(); ++b) EXPECT_EQ(std::norm(s[b]), 0.0);
}

TEST(PhaseSeparator, MaxCutK2MatchesDenseOracle) {
  Graph k2 = complete_graph(2);
  CircuitSpec spec(Problem::MaxCut, k2, 1);
  auto s = prepare_initial(spec);
  apply_phase_separator(s, spec, std::numbers::pi / 2);
  oracle::CVec ref = oracle::phase_unitary(k2, Problem::MaxCut,
                                           std::numbers::pi / 2) *
                     oracle::initial_state(k2, Problem::MaxCut);
  EXPECT_LT(max_error(s, ref), 1e-10);
}

TEST(Mixer, ZeroAngleIsIdentity) {
  for (auto prob : {Problem::MaxCut, Problem::MIS}) {
    CircuitSpec spec(prob, cycle_graph(4), 1);
    auto s = run_circuit(spec, ParamSet({0.3}, {0.7}));
    auto before = s.amplitudes();
    apply_mixer(s, spec, 0.0);
    EXPECT_EQ(s.amplitudes(), before);
  }
}

TEST(Mixer, IsolatedVertexIsPlainXRotation) {
  CircuitSpec spec(Problem::MIS, make_graph("v", 1, {}), 1);
  auto s = prepare_initial(spec);
  const double beta = 0.42;
  apply_mixer(s, spec, beta);
  EXPECT_NEAR(std::abs(s[0] - Complex(std::cos(beta), 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s[1] - Complex(0, -std::sin(beta))), 0.0, 1e-15);
}

TEST(Mixer, MisK2MatchesDenseOracle) {
  Graph k2 = complete_graph(2);
  CircuitSpec spec(Problem::MIS, k2, 1);
  auto s = prepare_initial(spec);
  apply_mixer(s, spec, std::numbers::pi / 4);
  oracle::CVec ref =
      oracle::mixer_unitary(k2, Problem::MIS, std::numbers::pi / 4) *
      oracle::initial_state(k2, Problem::MIS);
  EXPECT_LT(max_error(s, ref), 1e-10);
}

TEST(RunCircuit, ZeroParamsLeaveInitialState) {
  Graph g = cycle_graph(5);
  for (auto prob : {Problem::MaxCut, Problem::MIS}) {
    CircuitSpec spec(prob, g, 2);
    auto s = run_circuit(spec, ParamSet::zeros(2));
    EXPECT_LT(max_error(s, oracle::initial_state(g, prob)), 1e-15);
  }
}

TEST(RunCircuit, K2MaxCutMatchesDenseOracle) {
  Graph k2 = complete_graph(2);
  ParamSet p({0.7}, {0.3});
  auto s = run_circuit(CircuitSpec(Problem::MaxCut, k2, 1), p);
  EXPECT_LT(max_error(s, oracle::run(k2, Problem::MaxCut, p)), 1e-10);
}

TEST(RunCircuit, LengthMismatchThrows) {
  CircuitSpec spec(Problem::MaxCut, complete_graph(3), 2);
  EXPECT_THROW(run_circuit(spec, ParamSet::zeros(1)), ParameterError);
}

TEST(RunCircuit, AllSmallConnectedGraphsMatchDenseOracle) {
  Rng rng(2024);
  int graphs = 0;
  for (int n = 2; n <= 4; ++n)
    for (const auto& g : oracle::connected_graphs(n)) {
      ++graphs;
      for (auto prob : {Problem::MaxCut, Problem::MIS}) {
        const int p = 1 + graphs % 2;
        CircuitSpec spec(prob, g, p);
        for (int k = 0; k < 10; ++k) {
          ParamSet ps = random_params(p, rng);
          EXPECT_LT(max_error(run_circuit(spec, ps), oracle::run(g, prob, ps)),
                    1e-8)
              << g.id << ' ' << to_string(prob);
        }
      }
    }
  EXPECT_EQ(graphs, 1 + 4 + 38);
}

TEST(RunCircuit, MisMixerOrderMatters) {
  // Partial mixers on a path do not commute; reversing the order changes the
  // state, so the ascending order is observable.
  Graph g = path_graph(3);
  CircuitSpec spec(Problem::MIS, g, 1);
  auto s = run_circuit(spec, ParamSet({0.0}, {0.9}));
  const long dim = 8;
  oracle::CMat rev = oracle::CMat::Identity(dim, dim);
  for (int i = g.n - 1; i >= 0; --i)
    rev = (oracle::expm(oracle::partial_mixer_hamiltonian(g, i), 0.9) * rev)
              .eval();
  oracle::CVec other = rev * oracle::initial_state(g, Problem::MIS);
  EXPECT_GT(max_error(s, other), 1e-3);
}

TEST(Invariants, NormFeasibilityAndSymmetry) {
  Rng rng(7);
  for (int i = 0; i < 12; ++i) {
    Graph g = generate_graph(ErParams{0.45}, 6 + i % 5, 100 + i);
    const auto nbr = g.neighbor_masks();
    CircuitSpec mis(Problem::MIS, g, 2);
    CircuitSpec mc(Problem::MaxCut, g, 2);
    for (int k = 0; k < 5; ++k) {
      ParamSet ps = random_params(2, rng);
      auto s = run_circuit(mis, ps);
      EXPECT_LT(std::abs(s.norm() - 1.0), 1e-10);
      for (std::size_t b = 0; b < s.size(); ++b) {
        if (std::norm(s[b]) > 1e-12) {
          EXPECT_TRUE(is_independent_set(nbr, b));
        }
      }

      auto t = run_circuit(mc, ps);
      EXPECT_LT(std::abs(t.norm() - 1.0), 1e-10);
      StateVector flipped = t;
      const std::size_t full = t.size() - 1;
      for (std::size_t b = 0; b < t.size(); ++b) flipped[b] = t[b ^ full];
      EXPECT_NEAR(expectation(flipped, mc), expectation(t, mc), 1e-10);
    }
  }
}

TEST(Expectation, ClosedForms) {
  Graph g = generate_graph(ErParams{0.5}, 9, 3);
  EXPECT_NEAR(
      expectation(prepare_initial(CircuitSpec(Problem::MaxCut, g, 1)),
                  CircuitSpec(Problem::MaxCut, g, 1)),
      g.edges.size() / 2.0, 1e-9);
  CircuitSpec mis(Problem::MIS, g, 1);
  EXPECT_EQ(expectation(prepare_initial(mis), mis), 0.0);

  auto best = solve_mis_exact(g);
  StateVector basis(g.n);
  basis[0] = 0.0;
  basis[best.optimal_configs.front()] = 1.0;
  EXPECT_DOUBLE_EQ(expectation(basis, mis), best.optimum);
}

TEST(Sample, BasisStateIsDeterministicOutcome) {
  StateVector s(3);
  s[0] = 0.0;
  s[5] = 1.0;
  auto m = sample(s, 100, 1);
  ASSERT_EQ(m.counts.size(), 1u);
  EXPECT_EQ(m.counts.at(5), 100);
  EXPECT_EQ(m.shots, 100);
}

TEST(Sample, UniformTwoQubitsWithinBinomialBand) {
  auto s = prepare_initial(CircuitSpec(Problem::MaxCut, complete_graph(2), 1));
  auto m = sample(s, 1000, 99);
  int total = 0;
  for (std::uint64_t b = 0; b < 4; ++b) {
    EXPECT_GE(m.counts[b], 200);
    EXPECT_LE(m.counts[b], 300);
    total += m.counts[b];
  }
  EXPECT_EQ(total, 1000);
  EXPECT_EQ(sample(s, 1000, 99), m);
  EXPECT_THROW(sample(s, 0, 1), ParameterError);
}

TEST(DebugDump, OneLinePerAmplitude) {
  std::ostringstream os;
  prepare_initial(CircuitSpec(Problem::MIS, complete_graph(2), 1)).dump(os);
  EXPECT_EQ(os.str(), "0 1 0\n1 0 0\n2 0 0\n3 0 0\n");
}

}  // namespace
}  // namespace qxfer
