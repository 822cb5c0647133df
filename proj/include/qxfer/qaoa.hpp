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
#include <numbers>
#include <vector>

#include "qxfer/params.hpp"
#include "qxfer/simulator.hpp"

namespace qxfer {

struct OptConfig {
  int max_steps = 200;
  double tol = 1e-6;
  /// When false the optimizer always runs max_steps steps.
  bool use_tol = true;
  double step_size = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double fd_step = 1e-3;
  std::uint64_t seed = 0;
};

struct OptTrace {
  /// Objective at the initial point followed by one entry per step.
  std::vector<double> objective_per_step;
  ParamSet final_params;
  double final_objective = 0.0;
  int steps_taken = 0;
  bool converged = false;
};

struct OptimizationError : NumericalError {
  OptimizationError(const std::string& what, OptTrace t)
      : NumericalError(what), trace(std::move(t)) {}
  OptTrace trace;
};

/// Exact statevector expectation of the classical objective.
inline double objective(const CircuitSpec& spec, const ParamSet& params) {
  return expectation(run_circuit(spec, params), spec);
}

/// Central differences, ordered [gamma_1..gamma_p, beta_1..beta_p].
inline std::vector<double> gradient(const CircuitSpec& spec,
                                    const ParamSet& params, double h) {
  if (!(h > 0.0)) throw ParameterError("gradient: step must be positive");
  std::vector<double> x = params.flat();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = objective(spec, ParamSet::from_flat(x));
    x[i] = xi - h;
    const double fm = objective(spec, ParamSet::from_flat(x));
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Adam ascent on the objective (descent on its negation).
inline OptTrace optimize(const CircuitSpec& spec, const ParamSet& init,
                         const OptConfig& cfg) {
  if (cfg.max_steps < 1) throw ParameterError("optimize: max_steps must be >= 1");
  if (cfg.use_tol && !(cfg.tol > 0.0))
    throw ParameterError("optimize: tol must be positive");
  if (init.depth() != spec.depth())
    throw ParameterError("optimize: initial parameters do not match depth");

  OptTrace trace;
  std::vector<double> x = init.flat();
  std::vector<double> m(x.size(), 0.0);
  std::vector<double> v(x.size(), 0.0);

  auto record = [&](double f) {
    trace.objective_per_step.push_back(f);
    trace.final_objective = f;
    trace.final_params = ParamSet::from_flat(x);
    if (!std::isfinite(f))
      throw OptimizationError("optimize: non-finite objective", trace);
  };
  record(objective(spec, init));

  double b1t = 1.0;
  double b2t = 1.0;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    const auto g = gradient(spec, ParamSet::from_flat(x), cfg.fd_step);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = -g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mh = m[i] / (1.0 - b1t);
      const double vh = v[i] / (1.0 - b2t);
      x[i] -= cfg.step_size * mh / (std::sqrt(vh) + cfg.eps);
    }
    const double prev = trace.final_objective;
    trace.steps_taken = step;
    record(objective(spec, ParamSet::from_flat(x)));
    if (cfg.use_tol && std::abs(trace.final_objective - prev) < cfg.tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

/// gamma ~ U(-pi, pi), beta ~ U(-pi/2, pi/2) per layer.
inline ParamSet random_init(int depth, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ug(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> ub(-std::numbers::pi / 2,
                                            std::numbers::pi / 2);
  ParamSet p = ParamSet::zeros(depth);
  for (int l = 0; l < depth; ++l) {
    p.gammas[l] = ug(rng);
    p.betas[l] = ub(rng);
  }
  return p;
}

/// Start i is initialized from random_init(depth, cfg.seed + i).
inline std::vector<OptTrace> multistart(const CircuitSpec& spec, int n_starts,
                                        const OptConfig& cfg) {
  if (n_starts < 1) throw ParameterError("multistart: n_starts must be >= 1");
  std::vector<OptTrace> out;
  out.reserve(static_cast<std::size_t>(n_starts));
  for (int i = 0; i < n_starts; ++i)
    out.push_back(optimize(
        spec, random_init(spec.depth(), cfg.seed + static_cast<std::uint64_t>(i)),
        cfg));
  return out;
}

/// Fixed-length refinement: tolerance disabled, all steps run.
inline OptTrace warm_start(const CircuitSpec& spec, const ParamSet& init,
                           int steps, OptConfig cfg = {}) {
  if (steps < 1) throw ParameterError("warm_start: steps must be >= 1");
  cfg.max_steps = steps;
  cfg.use_tol = false;
  return optimize(spec, init, cfg);
}

}  // namespace qxfer
