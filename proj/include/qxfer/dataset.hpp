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
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qxfer/graph.hpp"
#include "qxfer/qaoa.hpp"
#include "qxfer/solvers.hpp"

namespace qxfer {

/// Generation rule for one graph family inside a dataset. `real_lo/hi` is the
/// ER edge probability or WS rewiring probability; `int_lo/hi` is the RR
/// degree or BA attachment count.
struct FamilySpec {
  Family family = Family::ER;
  int count = 0;
  double real_lo = 0.0;
  double real_hi = 0.0;
  int int_lo = 0;
  int int_hi = 0;
  int ws_k = 3;
  // acceptor split sizes (ignored for donors)
  int train = 0;
  int val = 0;
  int test = 0;
};

struct DatasetConfig {
  std::vector<FamilySpec> donors;
  std::vector<FamilySpec> acceptors;
  int n_min = 8;
  int n_max = 12;
  int starts = 16;  // N
  int depth = 1;    // p
  OptConfig opt;
  std::uint64_t seed = 0;

  /// Full-size configuration: 1000 donors, 500 acceptors, N = 16.
  static DatasetConfig paper(int depth = 1) {
    DatasetConfig c;
    c.donors = {
        {Family::ER, 250, 0.4, 0.75, 0, 0, 3},
        {Family::RR, 250, 0, 0, 3, 7, 3},
        {Family::WS, 250, 0.4, 0.75, 0, 0, 3},
        {Family::BA, 250, 0, 0, 2, 4, 3},
    };
    c.acceptors = {
        {Family::ER, 200, 0.1, 0.5, 0, 0, 3, 100, 50, 50},
        {Family::RR, 150, 0, 0, 2, 5, 3, 50, 50, 50},
        {Family::WS, 50, 0.01, 0.1, 0, 0, 3, 20, 10, 20},
        {Family::BA, 100, 0, 0, 2, 4, 3, 40, 20, 40},
    };
    c.starts = 16;
    c.depth = depth;
    return c;
  }

  /// Desk-sized: 60 donors, 30 acceptors, N = 4, same parameter ranges.
  static DatasetConfig desk(int depth = 1) {
    DatasetConfig c = paper(depth);
    for (auto& f : c.donors) f.count = 15;
    const int acc[4][4] = {{12, 6, 3, 3}, {9, 3, 3, 3}, {3, 1, 1, 1}, {6, 2, 1, 3}};
    for (int i = 0; i < 4; ++i) {
      c.acceptors[i].count = acc[i][0];
      c.acceptors[i].train = acc[i][1];
      c.acceptors[i].val = acc[i][2];
      c.acceptors[i].test = acc[i][3];
    }
    c.starts = 4;
    return c;
  }
};

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct TransferTriple {
  std::string acceptor_id;
  std::string donor_id;
  double y = 0.0;
};

struct DonorBankEntry {
  std::string donor_id;
  double maxcut_opt = 0.0;
  std::vector<ParamSet> params;
  std::vector<double> final_objectives;
  std::vector<double> ratios;
  std::vector<int> steps;
  /// Non-empty when optimization failed for this donor.
  std::string error;
};

using DonorBank = std::vector<DonorBankEntry>;

struct Dataset {
  std::vector<TransferTriple> triples;
  SplitSpec split;
};

// ---------------------------------------------------------------------------
// graph generation

namespace detail {

inline Graph sample_family_graph(const FamilySpec& f, int n_min, int n_max,
                                 std::uint64_t seed, std::string id) {
  Rng rng(seed);
  const int n = std::uniform_int_distribution<int>(n_min, n_max)(rng);
  std::uniform_real_distribution<double> ur(f.real_lo, f.real_hi);
  FamilyParams params;
  switch (f.family) {
    case Family::ER: params = ErParams{ur(rng)}; break;
    case Family::WS: params = WsParams{f.ws_k, ur(rng)}; break;
    case Family::BA:
      params = BaParams{std::uniform_int_distribution<int>(f.int_lo, f.int_hi)(rng)};
      break;
    case Family::RR: {
      std::vector<int> ok;
      for (int d = f.int_lo; d <= f.int_hi; ++d)
        if (d < n && (n * d) % 2 == 0) ok.push_back(d);
      if (ok.empty())
        throw ParameterError("RR: no feasible degree for n = " + std::to_string(n));
      params = RrParams{ok[std::uniform_int_distribution<std::size_t>(
          0, ok.size() - 1)(rng)]};
      break;
    }
    case Family::Custom: throw ParameterError("cannot sample a custom family");
  }
  return generate_graph(params, n, rng(), std::move(id));
}

inline std::vector<Graph> generate_set(const std::vector<FamilySpec>& specs,
                                       const DatasetConfig& cfg,
                                       const std::string& prefix) {
  if (cfg.n_min < 2 || cfg.n_min > cfg.n_max)
    throw ParameterError("dataset: invalid node range");
  std::vector<Graph> out;
  for (const auto& f : specs) {
    for (int i = 0; i < f.count; ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s-%s-%04d", prefix.c_str(),
                    to_string(f.family).c_str(), i);
      out.push_back(sample_family_graph(
          f, cfg.n_min, cfg.n_max,
          derive_seed(cfg.seed, buf), buf));
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Graph> generate_donors(const DatasetConfig& cfg) {
  return detail::generate_set(cfg.donors, cfg, "D");
}

inline std::vector<Graph> generate_acceptors(const DatasetConfig& cfg) {
  return detail::generate_set(cfg.acceptors, cfg, "A");
}

/// Acceptors of each family are assigned in generation order: the first
/// `train` to train, the next `val` to validation, the rest to test.
inline SplitSpec make_split(const std::vector<Graph>& acceptors,
                            const DatasetConfig& cfg) {
  SplitSpec s;
  for (const auto& f : cfg.acceptors) {
    if (f.train + f.val + f.test != f.count)
      throw ValidationError("split sizes for " + to_string(f.family) +
                            " do not add up to the family count");
    int k = 0;
    for (const auto& g : acceptors) {
      if (g.family != f.family) continue;
      auto& dst = k < f.train ? s.train : k < f.train + f.val ? s.val : s.test;
      dst.push_back(g.id);
      ++k;
    }
  }
  return s;
}

struct TripleCounts {
  long long train = 0;
  long long val = 0;
  long long test_acceptors = 0;
  long long total = 0;
};

inline TripleCounts expected_counts(const DatasetConfig& cfg) {
  long long donors = 0;
  TripleCounts c;
  for (const auto& f : cfg.donors) donors += f.count;
  long long acceptors = 0;
  for (const auto& f : cfg.acceptors) {
    acceptors += f.count;
    c.train += static_cast<long long>(f.train) * donors;
    c.val += static_cast<long long>(f.val) * donors;
    c.test_acceptors += f.test;
  }
  c.total = acceptors * donors;
  return c;
}

// ---------------------------------------------------------------------------
// donor bank and scores

inline DonorBankEntry optimize_donor(const Graph& donor, const DatasetConfig& cfg) {
  DonorBankEntry e;
  e.donor_id = donor.id;
  e.maxcut_opt = solve_maxcut_exact(donor).optimum;
  CircuitSpec spec(Problem::MaxCut, donor, cfg.depth);
  OptConfig oc = cfg.opt;
  oc.seed = derive_seed(cfg.seed, "donor-opt:" + donor.id);
  try {
    for (auto& t : multistart(spec, cfg.starts, oc)) {
      e.params.push_back(t.final_params);
      e.final_objectives.push_back(t.final_objective);
      e.ratios.push_back(t.final_objective / e.maxcut_opt);
      e.steps.push_back(t.steps_taken);
    }
  } catch (const NumericalError& err) {
    e.params.clear();
    e.final_objectives.clear();
    e.ratios.clear();
    e.steps.clear();
    e.error = err.what();
  }
  return e;
}

inline DonorBank build_donor_bank(const std::vector<Graph>& donors,
                                  const DatasetConfig& cfg) {
  if (donors.empty()) throw ValidationError("build_donor_bank: no donors");
  DonorBank bank;
  bank.reserve(donors.size());
  for (const auto& d : donors) bank.push_back(optimize_donor(d, cfg));
  return bank;
}

/// Mean MIS approximation ratio of the donor's parameter sets on the acceptor.
inline double transfer_score(const CircuitSpec& acceptor_mis, double mis_opt,
                             const DonorBankEntry& donor) {
  if (donor.params.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : donor.params) s += objective(acceptor_mis, p) / mis_opt;
  return s / static_cast<double>(donor.params.size());
}

inline double transfer_score(const Graph& acceptor, const DonorBankEntry& donor,
                             int depth) {
  return transfer_score(CircuitSpec(Problem::MIS, acceptor, depth),
                        solve_mis_exact(acceptor).optimum, donor);
}

namespace detail {
inline void check_unique_ids(const std::vector<std::string>& ids,
                             const char* what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second)
      throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
}
}  // namespace detail

inline void validate_split(const SplitSpec& split,
                           const std::vector<Graph>& acceptors) {
  std::set<std::string> all;
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (const auto& id : *part)
      if (!all.insert(id).second)
        throw ValidationError("split: acceptor '" + id + "' in two splits");
  std::set<std::string> acc;
  for (const auto& g : acceptors) acc.insert(g.id);
  if (acc != all) throw ValidationError("split does not cover the acceptors");
}

/// All acceptor x donor triples, acceptor-major in input order.
inline Dataset build_dataset(const std::vector<Graph>& acceptors,
                             const DonorBank& bank, const SplitSpec& split,
                             int depth) {
  std::vector<std::string> aid, did;
  for (const auto& g : acceptors) aid.push_back(g.id);
  for (const auto& e : bank) did.push_back(e.donor_id);
  detail::check_unique_ids(aid, "acceptor");
  detail::check_unique_ids(did, "donor");
  validate_split(split, acceptors);

  Dataset ds;
  ds.split = split;
  ds.triples.reserve(acceptors.size() * bank.size());
  for (const auto& a : acceptors) {
    CircuitSpec spec(Problem::MIS, a, depth);
    const double opt = solve_mis_exact(a).optimum;
    for (const auto& d : bank)
      ds.triples.push_back({a.id, d.donor_id, transfer_score(spec, opt, d)});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// file formats

namespace detail {
inline std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, '\t')) f.push_back(tok);
  return f;
}
}  // namespace detail

/// One line per (donor, start); self-contained so files can be appended to.
/// Failed donors get a single line with start index -1 and the error text.
inline void write_donor_bank(std::ostream& os, const DonorBank& bank) {
  os << "# donor_id\tstart\tmaxcut_opt\tfinal_objective\tratio\tsteps\tgammas\tbetas\n";
  os << std::setprecision(17);
  for (const auto& e : bank) {
    if (!e.error.empty()) {
      os << e.donor_id << "\t-1\t" << e.maxcut_opt << "\t" << e.error << '\n';
      continue;
    }
    for (std::size_t t = 0; t < e.params.size(); ++t)
      os << e.donor_id << '\t' << t << '\t' << e.maxcut_opt << '\t'
         << e.final_objectives[t] << '\t' << e.ratios[t] << '\t' << e.steps[t]
         << '\t' << detail::join_doubles(e.params[t].gammas) << '\t'
         << detail::join_doubles(e.params[t].betas) << '\n';
  }
}

inline DonorBank read_donor_bank(std::istream& is) {
  DonorBank bank;
  std::map<std::string, std::size_t> index;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_tabs(line);
    if (f.size() < 4) throw FormatError("donor bank: short line");
    auto [it, fresh] = index.emplace(f[0], bank.size());
    if (fresh) {
      bank.emplace_back();
      bank.back().donor_id = f[0];
    }
    auto& e = bank[it->second];
    e.maxcut_opt = std::stod(f[2]);
    if (f[1] == "-1") {
      e.error = f[3];
      continue;
    }
    if (f.size() != 8) throw FormatError("donor bank: expected 8 fields");
    e.final_objectives.push_back(std::stod(f[3]));
    e.ratios.push_back(std::stod(f[4]));
    e.steps.push_back(std::stoi(f[5]));
    e.params.emplace_back(detail::split_doubles(f[6]), detail::split_doubles(f[7]));
  }
  return bank;
}

inline void write_triples(std::ostream& os,
                          const std::vector<TransferTriple>& triples) {
  os << "acceptor_id,donor_id,y\n";
  char buf[64];
  for (const auto& t : triples) {
    std::snprintf(buf, sizeof buf, "%.9f", t.y);
    os << t.acceptor_id << ',' << t.donor_id << ',' << buf << '\n';
  }
}

inline std::vector<TransferTriple> read_triples(std::istream& is) {
  std::vector<TransferTriple> out;
  std::string line;
  if (!std::getline(is, line) || line != "acceptor_id,donor_id,y")
    throw FormatError("triples: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos)
      throw FormatError("triples: bad row");
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1),
                   std::stod(line.substr(b + 1))});
  }
  return out;
}

inline void write_split(std::ostream& os, const SplitSpec& s) {
  auto row = [&](const char* name, const std::vector<std::string>& ids) {
    os << name;
    for (const auto& id : ids) os << ' ' << id;
    os << '\n';
  };
  row("train", s.train);
  row("val", s.val);
  row("test", s.test);
}

inline SplitSpec read_split(std::istream& is) {
  SplitSpec s;
  std::string line;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string name, id;
    ss >> name;
    std::vector<std::string>* dst = name == "train" ? &s.train
                                    : name == "val" ? &s.val
                                    : name == "test" ? &s.test
                                                     : nullptr;
    if (!dst) {
      if (name.empty()) continue;
      throw FormatError("split: unknown section '" + name + "'");
    }
    while (ss >> id) dst->push_back(id);
  }
  return s;
}

/// "id  problem  optimum  config,config,..." per line.
inline void write_solutions(std::ostream& os,
                            const std::map<std::string, SolverResult>& sols) {
  for (const auto& [id, r] : sols) {
    os << id << '\t' << to_string(r.problem) << '\t' << r.optimum << '\t';
    for (std::size_t i = 0; i < r.optimal_configs.size(); ++i)
      os << (i ? "," : "") << r.optimal_configs[i];
    os << '\n';
  }
}

inline std::map<std::string, SolverResult> read_solutions(std::istream& is) {
  std::map<std::string, SolverResult> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 4) throw FormatError("solutions: expected 4 fields");
    SolverResult r;
    r.problem = f[1] == "MaxCut" ? Problem::MaxCut : Problem::MIS;
    r.optimum = std::stod(f[2]);
    std::stringstream ss(f[3]);
    std::string tok;
    while (std::getline(ss, tok, ','))
      r.optimal_configs.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
    out[f[0]] = std::move(r);
  }
  return out;
}

}  // namespace qxfer
