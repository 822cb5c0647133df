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
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <vector>

#include "qxfer/graph.hpp"
#include "qxfer/params.hpp"
#include "qxfer/solvers.hpp"

namespace qxfer {

using Complex = std::complex<double>;

inline constexpr int kMaxSimQubits = 24;

/// Dense statevector. Basis index b holds qubit i in bit i (little-endian).
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n_qubits)
      : n_(n_qubits), amp_(std::size_t{1} << n_qubits, Complex{0.0, 0.0}) {
    if (n_qubits < 1 || n_qubits > kMaxSimQubits)
      throw CapacityError("StateVector: unsupported qubit count");
    amp_[0] = 1.0;
  }

  [[nodiscard]] int n_qubits() const { return n_; }
  [[nodiscard]] std::size_t size() const { return amp_.size(); }
  std::vector<Complex>& amplitudes() { return amp_; }
  [[nodiscard]] const std::vector<Complex>& amplitudes() const { return amp_; }
  Complex& operator[](std::size_t i) { return amp_[i]; }
  const Complex& operator[](std::size_t i) const { return amp_[i]; }

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return std::sqrt(s);
  }

  [[nodiscard]] std::vector<double> probabilities() const {
    std::vector<double> p(amp_.size());
    for (std::size_t i = 0; i < amp_.size(); ++i) p[i] = std::norm(amp_[i]);
    return p;
  }

  /// Text dump "index re im" per line, for diffing against external oracles.
  void dump(std::ostream& os) const {
    const auto old = os.precision(17);
    for (std::size_t i = 0; i < amp_.size(); ++i)
      os << i << ' ' << amp_[i].real() << ' ' << amp_[i].imag() << '\n';
    os.precision(old);
  }

 private:
  int n_ = 0;
  std::vector<Complex> amp_;
};

/// Problem + graph + depth, with the per-basis-state tables the gates need.
class CircuitSpec {
 public:
  CircuitSpec(Problem problem, Graph graph, int depth)
      : problem_(problem), graph_(std::move(graph)), depth_(depth) {
    if (depth_ < 1) throw ParameterError("CircuitSpec: depth must be >= 1");
    if (graph_.n > kMaxSimQubits)
      throw CapacityError("CircuitSpec: graph too large to simulate");
    nbr_ = graph_.neighbor_masks();
    const std::size_t dim = std::size_t{1} << graph_.n;
    objective_.resize(dim);
    eigen_.resize(dim);
    for (std::size_t b = 0; b < dim; ++b) {
      if (problem_ == Problem::MaxCut) {
        const int cut = cut_value(graph_, b);
        objective_[b] = cut;
        // sum over edges of (Z_i Z_j - I) / 2
        eigen_[b] = -static_cast<double>(cut);
      } else {
        const int ones = std::popcount(b);
        objective_[b] = ones;
        // sum_i Z_i
        eigen_[b] = static_cast<double>(graph_.n - 2 * ones);
      }
    }
  }

  [[nodiscard]] Problem problem() const { return problem_; }
  [[nodiscard]] const Graph& graph() const { return graph_; }
  [[nodiscard]] int depth() const { return depth_; }
  [[nodiscard]] int n_qubits() const { return graph_.n; }
  [[nodiscard]] const std::vector<std::uint64_t>& neighbor_masks() const {
    return nbr_;
  }
  /// Classical objective per basis state: cut count or set size.
  [[nodiscard]] const std::vector<double>& objective_table() const {
    return objective_;
  }
  /// Cost-Hamiltonian eigenvalue per basis state.
  [[nodiscard]] const std::vector<double>& cost_eigenvalues() const {
    return eigen_;
  }

 private:
  Problem problem_;
  Graph graph_;
  int depth_;
  std::vector<std::uint64_t> nbr_;
  std::vector<double> objective_;
  std::vector<double> eigen_;
};

/// MaxCut starts in |+>^n, MIS in |0...0>.
inline StateVector prepare_initial(const CircuitSpec& spec) {
  StateVector s(spec.n_qubits());
  if (spec.problem() == Problem::MaxCut) {
    const double a = 1.0 / std::sqrt(static_cast<double>(s.size()));
    for (auto& x : s.amplitudes()) x = a;
  }
  return s;
}

inline void apply_phase_separator(StateVector& state, const CircuitSpec& spec,
                                  double gamma) {
  const auto& c = spec.cost_eigenvalues();
  auto& amp = state.amplitudes();
  for (std::size_t b = 0; b < amp.size(); ++b)
    amp[b] *= std::polar(1.0, -gamma * c[b]);
}

namespace detail {
// exp(-i beta X) on the pair (b, b | bit), optionally only where every
// neighbour bit is clear.
inline void rotate_x(std::vector<Complex>& amp, int qubit, double beta,
                     std::uint64_t control_zero_mask) {
  const double c = std::cos(beta);
  const Complex ms{0.0, -std::sin(beta)};
  const std::size_t bit = std::size_t{1} << qubit;
  for (std::size_t b = 0; b < amp.size(); ++b) {
    if ((b & bit) || (b & control_zero_mask)) continue;
    const Complex a0 = amp[b];
    const Complex a1 = amp[b | bit];
    amp[b] = c * a0 + ms * a1;
    amp[b | bit] = ms * a0 + c * a1;
  }
}
}  // namespace detail

/// MaxCut: X rotation on every qubit. MIS: partial mixers in ascending vertex
/// order, each an X rotation controlled on all neighbours being |0>.
inline void apply_mixer(StateVector& state, const CircuitSpec& spec,
                        double beta) {
  auto& amp = state.amplitudes();
  const auto& nbr = spec.neighbor_masks();
  for (int q = 0; q < spec.n_qubits(); ++q)
    detail::rotate_x(amp, q, beta,
                     spec.problem() == Problem::MIS ? nbr[q] : 0U);
}

inline StateVector run_circuit(const CircuitSpec& spec,
                               const ParamSet& params) {
  if (params.gammas.size() != static_cast<std::size_t>(spec.depth()) ||
      params.betas.size() != static_cast<std::size_t>(spec.depth()))
    throw ParameterError("run_circuit: parameter count does not match depth");
  StateVector s = prepare_initial(spec);
  for (int layer = 0; layer < spec.depth(); ++layer) {
    apply_phase_separator(s, spec, params.gammas[layer]);
    apply_mixer(s, spec, params.betas[layer]);
  }
  return s;
}

/// Sum over basis states of probability times classical objective.
inline double expectation(const StateVector& state, const CircuitSpec& spec) {
  const auto& obj = spec.objective_table();
  const auto& amp = state.amplitudes();
  double e = 0.0;
  for (std::size_t b = 0; b < amp.size(); ++b) e += std::norm(amp[b]) * obj[b];
  return e;
}

struct MeasurementDistribution {
  std::map<std::uint64_t, int> counts;
  int shots = 0;

  bool operator==(const MeasurementDistribution&) const = default;
};

inline MeasurementDistribution sample(const StateVector& state, int shots,
                                      std::uint64_t seed) {
  if (shots < 1) throw ParameterError("sample: shots must be >= 1");
  const auto probs = state.probabilities();
  std::discrete_distribution<std::uint64_t> dist(probs.begin(), probs.end());
  Rng rng(seed);
  MeasurementDistribution m;
  m.shots = shots;
  for (int s = 0; s < shots; ++s) ++m.counts[dist(rng)];
  return m;
}

}  // namespace qxfer
