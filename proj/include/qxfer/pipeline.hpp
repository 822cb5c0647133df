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

// End-to-end experiment: every stage reads its inputs from and writes its
// outputs to files in one output directory, so stages can run separately
// (CLI subcommands) or in sequence (run_experiment) with identical results.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qxfer/dataset.hpp"
#include "qxfer/embeddings.hpp"
#include "qxfer/model.hpp"

namespace qxfer {

enum class Method { GCN, GraphConv, ChebConv, G2V, Closeness, RandomDonor };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::GCN,      Method::GraphConv,
                                     Method::ChebConv, Method::G2V,
                                     Method::Closeness, Method::RandomDonor};
  return m;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::GCN: return "GCN";
    case Method::GraphConv: return "GraphConv";
    case Method::ChebConv: return "ChebConv";
    case Method::G2V: return "G2V";
    case Method::Closeness: return "Closeness";
    case Method::RandomDonor: return "RandomDonor";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw ParameterError("unknown method '" + s + "'");
}

/// Methods that rank donors with a trained score model.
inline bool is_learned(Method m) {
  return m == Method::GCN || m == Method::GraphConv || m == Method::ChebConv ||
         m == Method::G2V;
}

inline EncoderVariant encoder_of(Method m) {
  if (!is_learned(m)) throw ParameterError(to_string(m) + " has no encoder");
  return encoder_from_string(to_string(m));
}

// ---------------------------------------------------------------------------
// configuration

struct ExperimentConfig {
  std::string preset = "desk";
  DatasetConfig dataset = DatasetConfig::desk();
  G2VConfig g2v;
  ModelConfig model;
  TrainConfig train;
  std::vector<Method> methods = all_methods();
  Method primary = Method::GCN;  // learned method used for warm starts
  int k = 5;
  int shots = 1000;
  int warm_steps = 10;
  double warm_threshold = 0.8;
  std::string out_dir = "qxfer_out";
  std::uint64_t seed = 0;

  static ExperimentConfig for_preset(const std::string& name) {
    ExperimentConfig c;
    c.preset = name;
    if (name == "paper") {
      c.dataset = DatasetConfig::paper();
    } else if (name == "desk") {
      // Desk data gives only a few hundred training triples; smaller batches
      // and a larger step keep the number of updates meaningful.
      c.train.batch_size = 32;
      c.train.lr = 1e-3;
    } else {
      throw ParameterError("unknown preset '" + name + "' (expected desk or paper)");
    }
    return c;
  }

  void validate() const {
    if (k < 1) throw ParameterError("config: k must be >= 1");
    if (shots < 1) throw ParameterError("config: shots must be >= 1");
    if (warm_steps < 1) throw ParameterError("config: warm_steps must be >= 1");
    if (dataset.depth < 1) throw ParameterError("config: depth must be >= 1");
    if (dataset.starts < 1) throw ParameterError("config: starts must be >= 1");
    if (dataset.n_min < 2 || dataset.n_max < dataset.n_min)
      throw ParameterError("config: invalid node-count range");
    if (dataset.n_max > kMaxSimQubits)
      throw CapacityError("config: n_max exceeds the simulator limit");
    if (methods.empty()) throw ParameterError("config: no methods");
    if (!is_learned(primary)) throw ParameterError("config: primary must be a learned method");
  }
};

inline void to_json(nlohmann::ordered_json& j, const FamilySpec& f) {
  j = {{"family", to_string(f.family)}, {"count", f.count},
       {"real_lo", f.real_lo},          {"real_hi", f.real_hi},
       {"int_lo", f.int_lo},            {"int_hi", f.int_hi},
       {"ws_k", f.ws_k},                {"train", f.train},
       {"val", f.val},                  {"test", f.test}};
}

inline FamilySpec family_spec_from_json(const nlohmann::ordered_json& j) {
  FamilySpec f;
  f.family = family_from_string(j.at("family").get<std::string>());
  f.count = j.value("count", 0);
  f.real_lo = j.value("real_lo", 0.0);
  f.real_hi = j.value("real_hi", 0.0);
  f.int_lo = j.value("int_lo", 0);
  f.int_hi = j.value("int_hi", 0);
  f.ws_k = j.value("ws_k", 3);
  f.train = j.value("train", 0);
  f.val = j.value("val", 0);
  f.test = j.value("test", 0);
  return f;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  using J = nlohmann::ordered_json;
  J methods = J::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  const auto& d = c.dataset;
  return J{
      {"preset", c.preset},
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"k", c.k},
      {"shots", c.shots},
      {"warm_steps", c.warm_steps},
      {"warm_threshold", c.warm_threshold},
      {"primary", to_string(c.primary)},
      {"methods", methods},
      {"dataset",
       {{"n_min", d.n_min},
        {"n_max", d.n_max},
        {"starts", d.starts},
        {"depth", d.depth},
        {"donors", d.donors},
        {"acceptors", d.acceptors},
        {"optimizer",
         {{"max_steps", d.opt.max_steps},
          {"tol", d.opt.tol},
          {"step_size", d.opt.step_size},
          {"fd_step", d.opt.fd_step}}}}},
      {"g2v",
       {{"epochs", c.g2v.epochs},
        {"learning_rate", c.g2v.learning_rate},
        {"min_learning_rate", c.g2v.min_learning_rate},
        {"wl_iters", c.g2v.wl_iters},
        {"downsample", c.g2v.downsample},
        {"dim", c.g2v.dim},
        {"negatives", c.g2v.negatives},
        {"min_count", c.g2v.min_count}}},
      {"model",
       {{"hidden", c.model.hidden},
        {"d_graph", c.model.d_graph},
        {"d_cop", c.model.d_cop},
        {"fcn_width", c.model.fcn_width},
        {"gnn_blocks", c.model.gnn_blocks},
        {"fcn_blocks", c.model.fcn_blocks}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"plateau_factor", c.train.plateau_factor},
        {"plateau_patience", c.train.plateau_patience},
        {"weight_decay", c.train.weight_decay},
        {"dropout", c.train.dropout}}},
  };
}

/// Starts from the preset named in the file (or `fallback_preset`) and
/// applies every key present.
inline ExperimentConfig config_from_json(const nlohmann::ordered_json& j,
                                         const std::string& fallback_preset = "desk") {
  ExperimentConfig c = ExperimentConfig::for_preset(j.value("preset", fallback_preset));
  auto get = [](const nlohmann::ordered_json& o, const char* key, auto& dst) {
    if (o.contains(key)) dst = o.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get(j, "seed", c.seed);
  get(j, "out_dir", c.out_dir);
  get(j, "k", c.k);
  get(j, "shots", c.shots);
  get(j, "warm_steps", c.warm_steps);
  get(j, "warm_threshold", c.warm_threshold);
  if (j.contains("primary")) c.primary = method_from_string(j.at("primary"));
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m));
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    get(d, "n_min", c.dataset.n_min);
    get(d, "n_max", c.dataset.n_max);
    get(d, "starts", c.dataset.starts);
    get(d, "depth", c.dataset.depth);
    if (d.contains("donors")) {
      c.dataset.donors.clear();
      for (const auto& f : d.at("donors")) c.dataset.donors.push_back(family_spec_from_json(f));
    }
    if (d.contains("acceptors")) {
      c.dataset.acceptors.clear();
      for (const auto& f : d.at("acceptors"))
        c.dataset.acceptors.push_back(family_spec_from_json(f));
    }
    if (d.contains("optimizer")) {
      const auto& o = d.at("optimizer");
      get(o, "max_steps", c.dataset.opt.max_steps);
      get(o, "tol", c.dataset.opt.tol);
      get(o, "step_size", c.dataset.opt.step_size);
      get(o, "fd_step", c.dataset.opt.fd_step);
    }
  }
  if (j.contains("g2v")) {
    const auto& g = j.at("g2v");
    get(g, "epochs", c.g2v.epochs);
    get(g, "learning_rate", c.g2v.learning_rate);
    get(g, "min_learning_rate", c.g2v.min_learning_rate);
    get(g, "wl_iters", c.g2v.wl_iters);
    get(g, "downsample", c.g2v.downsample);
    get(g, "dim", c.g2v.dim);
    get(g, "negatives", c.g2v.negatives);
    get(g, "min_count", c.g2v.min_count);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get(m, "hidden", c.model.hidden);
    get(m, "d_graph", c.model.d_graph);
    get(m, "d_cop", c.model.d_cop);
    get(m, "fcn_width", c.model.fcn_width);
    get(m, "gnn_blocks", c.model.gnn_blocks);
    get(m, "fcn_blocks", c.model.fcn_blocks);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get(t, "epochs", c.train.epochs);
    get(t, "batch_size", c.train.batch_size);
    get(t, "lr", c.train.lr);
    get(t, "plateau_factor", c.train.plateau_factor);
    get(t, "plateau_patience", c.train.plateau_patience);
    get(t, "weight_decay", c.train.weight_decay);
    get(t, "dropout", c.train.dropout);
  }
  return c;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
  return fnv1a64(config_to_json(c).dump());
}

// Seeds used by each stage, all derived from the master seed.
struct StageSeeds {
  std::uint64_t dataset, g2v, sampling, random_donor, random_init;
  std::map<std::string, std::uint64_t> train;

  explicit StageSeeds(const ExperimentConfig& c)
      : dataset(c.seed),
        g2v(derive_seed(c.seed, "g2v")),
        sampling(derive_seed(c.seed, "sampling")),
        random_donor(derive_seed(c.seed, "random-donor")),
        random_init(derive_seed(c.seed, "random-init")) {
    for (Method m : c.methods)
      if (is_learned(m)) train[to_string(m)] = derive_seed(c.seed, "train:" + to_string(m));
  }
};

// ---------------------------------------------------------------------------
// retrieval and evaluation

/// Ids of the k highest scores, descending; ties by id.
inline std::vector<std::string> retrieve_topk(const std::vector<double>& scores,
                                              const std::vector<std::string>& donor_ids,
                                              int k) {
  if (scores.size() != donor_ids.size())
    throw ValidationError("retrieve_topk: scores and ids differ in length");
  if (k < 1) throw ParameterError("retrieve_topk: k must be >= 1");
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : donor_ids[a] < donor_ids[b];
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(k); ++i)
    out.push_back(donor_ids[idx[i]]);
  return out;
}

struct Candidate {
  std::string donor_id;
  int param_index = 0;
  ParamSet params;
};

/// Sampled and exact quality of one parameter set on an MIS acceptor.
struct SampledMetrics {
  double r = 0.0;         // mean sampled set size / optimum
  double prob_opt = 0.0;  // fraction of shots that are maximum independent sets
  double exact_r = 0.0;   // statevector expectation / optimum
};

inline SampledMetrics sample_metrics(const CircuitSpec& spec, double mis_opt,
                                     const ParamSet& params, int shots,
                                     std::uint64_t seed) {
  const StateVector s = run_circuit(spec, params);
  const auto dist = sample(s, shots, seed);
  const auto& nbr = spec.neighbor_masks();
  double size_sum = 0.0;
  long long hits = 0;
  for (const auto& [bits, count] : dist.counts) {
    const int size = std::popcount(bits);
    size_sum += static_cast<double>(size) * count;
    if (size == static_cast<int>(mis_opt) && is_independent_set(nbr, bits)) hits += count;
  }
  SampledMetrics m;
  m.r = size_sum / shots / mis_opt;
  m.prob_opt = static_cast<double>(hits) / shots;
  m.exact_r = expectation(s, spec) / mis_opt;
  return m;
}

/// Shot seed of one (acceptor, donor, parameter index) combination; identical
/// whichever method retrieved the donor.
inline std::uint64_t candidate_seed(std::uint64_t base, const std::string& acceptor_id,
                                    const std::string& donor_id, int param_index) {
  return derive_seed(base, acceptor_id + "|" + donor_id,
                     static_cast<std::uint64_t>(param_index));
}

struct EvalRecord {
  std::string acceptor_id;
  Method method = Method::GCN;
  double best_r = 0.0;
  double best_prob_opt = 0.0;
  std::string best_donor_id;
  int best_param_index = -1;
  std::string best_prob_donor_id;
  int best_prob_param_index = -1;
  double best_exact_r = 0.0;  // exact r of the best-r parameter set
  int shots = 0;
};

/// Runs every candidate on the acceptor's MIS circuit and keeps the best set
/// per metric (first in candidate order on ties).
inline EvalRecord evaluate_transfer(const Graph& acceptor, double mis_opt,
                                    const std::vector<Candidate>& candidates, int depth,
                                    int shots, std::uint64_t seed,
                                    Method method = Method::GCN) {
  if (candidates.empty()) throw ValidationError("evaluate_transfer: no candidates");
  const CircuitSpec spec(Problem::MIS, acceptor, depth);
  EvalRecord rec;
  rec.acceptor_id = acceptor.id;
  rec.method = method;
  rec.shots = shots;
  rec.best_r = -1.0;
  rec.best_prob_opt = -1.0;
  for (const auto& c : candidates) {
    const auto m = sample_metrics(spec, mis_opt, c.params, shots,
                                  candidate_seed(seed, acceptor.id, c.donor_id, c.param_index));
    if (m.r > rec.best_r) {
      rec.best_r = m.r;
      rec.best_donor_id = c.donor_id;
      rec.best_param_index = c.param_index;
      rec.best_exact_r = m.exact_r;
    }
    if (m.prob_opt > rec.best_prob_opt) {
      rec.best_prob_opt = m.prob_opt;
      rec.best_prob_donor_id = c.donor_id;
      rec.best_prob_param_index = c.param_index;
    }
  }
  return rec;
}

inline EvalRecord evaluate_transfer(const Graph& acceptor,
                                    const std::vector<Candidate>& candidates, int depth,
                                    int shots, std::uint64_t seed,
                                    Method method = Method::GCN) {
  return evaluate_transfer(acceptor, solve_mis_exact(acceptor).optimum, candidates, depth,
                           shots, seed, method);
}

struct WarmStartResult {
  SampledMetrics before;
  SampledMetrics after;
  OptTrace trace;
};

/// Refines `init` for `steps` optimizer steps on the MIS objective; before and
/// after are sampled with the same shot seed.
inline WarmStartResult warm_start_eval(const Graph& acceptor, double mis_opt,
                                       const ParamSet& init, int steps, int shots,
                                       std::uint64_t seed, const OptConfig& opt = {}) {
  const CircuitSpec spec(Problem::MIS, acceptor, init.depth());
  WarmStartResult w;
  w.trace = warm_start(spec, init, steps, opt);
  w.before = sample_metrics(spec, mis_opt, init, shots, seed);
  w.after = sample_metrics(spec, mis_opt, w.trace.final_params, shots, seed);
  return w;
}

// ---------------------------------------------------------------------------
// file formats of pipeline stages

inline std::string fmt9(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) f.push_back(tok);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline void expect_header(std::istream& is, const std::string& header, const char* what) {
  std::string line;
  if (!std::getline(is, line) || line != header)
    throw FormatError(std::string(what) + ": missing or wrong header");
}
}  // namespace detail

struct RetrievalRow {
  Method method;
  std::string acceptor_id;
  int rank;
  std::string donor_id;
  double score;  // predicted y, negative distance, or 0 for RandomDonor
};

inline constexpr const char* kRetrievalHeader = "method,acceptor_id,rank,donor_id,score";

inline void write_retrieval(std::ostream& os, const std::vector<RetrievalRow>& rows) {
  os << kRetrievalHeader << '\n';
  for (const auto& r : rows)
    os << to_string(r.method) << ',' << r.acceptor_id << ',' << r.rank << ','
       << r.donor_id << ',' << fmt9(r.score) << '\n';
}

inline std::vector<RetrievalRow> read_retrieval(std::istream& is) {
  detail::expect_header(is, kRetrievalHeader, "retrieval");
  std::vector<RetrievalRow> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 5) throw FormatError("retrieval: expected 5 fields");
    out.push_back({method_from_string(f[0]), f[1], std::stoi(f[2]), f[3], std::stod(f[4])});
  }
  return out;
}

inline constexpr const char* kEvalHeader =
    "method,acceptor_id,best_r,best_prob_opt,best_donor_id,best_param_index,"
    "best_prob_donor_id,best_prob_param_index,best_exact_r,shots";

inline void write_eval_records(std::ostream& os, const std::vector<EvalRecord>& recs) {
  os << kEvalHeader << '\n';
  for (const auto& r : recs)
    os << to_string(r.method) << ',' << r.acceptor_id << ',' << fmt9(r.best_r) << ','
       << fmt9(r.best_prob_opt) << ',' << r.best_donor_id << ',' << r.best_param_index << ','
       << r.best_prob_donor_id << ',' << r.best_prob_param_index << ','
       << fmt9(r.best_exact_r) << ',' << r.shots << '\n';
}

inline std::vector<EvalRecord> read_eval_records(std::istream& is) {
  detail::expect_header(is, kEvalHeader, "eval records");
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 10) throw FormatError("eval records: expected 10 fields");
    EvalRecord r;
    r.method = method_from_string(f[0]);
    r.acceptor_id = f[1];
    r.best_r = std::stod(f[2]);
    r.best_prob_opt = std::stod(f[3]);
    r.best_donor_id = f[4];
    r.best_param_index = std::stoi(f[5]);
    r.best_prob_donor_id = f[6];
    r.best_prob_param_index = std::stoi(f[7]);
    r.best_exact_r = std::stod(f[8]);
    r.shots = std::stoi(f[9]);
    out.push_back(std::move(r));
  }
  return out;
}

/// Four-way warm-start comparison for one test acceptor.
struct WarmRow {
  std::string acceptor_id;
  bool above_threshold = false;  // exact r of the transferred set >= threshold
  SampledMetrics direct, direct_warm, random, random_warm;
};

inline constexpr const char* kWarmHeader =
    "acceptor_id,above_threshold,direct_r,direct_exact_r,direct_warm_r,"
    "direct_warm_exact_r,random_r,random_exact_r,random_warm_r,random_warm_exact_r";

inline void write_warm_rows(std::ostream& os, const std::vector<WarmRow>& rows) {
  os << kWarmHeader << '\n';
  for (const auto& w : rows) {
    os << w.acceptor_id << ',' << (w.above_threshold ? 1 : 0);
    for (const auto* m : {&w.direct, &w.direct_warm, &w.random, &w.random_warm})
      os << ',' << fmt9(m->r) << ',' << fmt9(m->exact_r);
    os << '\n';
  }
}

inline std::vector<WarmRow> read_warm_rows(std::istream& is) {
  detail::expect_header(is, kWarmHeader, "warm start");
  std::vector<WarmRow> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 10) throw FormatError("warm start: expected 10 fields");
    WarmRow w;
    w.acceptor_id = f[0];
    w.above_threshold = f[1] == "1";
    int i = 2;
    for (auto* m : {&w.direct, &w.direct_warm, &w.random, &w.random_warm}) {
      m->r = std::stod(f[i++]);
      m->exact_r = std::stod(f[i++]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

struct TrainingLog {
  double initial_val_mse = 0.0;
  std::vector<double> lr, train_loss, val_mse;
  int best_epoch = -1;  // 1-based epoch of the kept checkpoint
};

inline constexpr const char* kTrainLogHeader = "epoch,lr,train_loss,val_mse,best";

/// Row 0 is the untrained model; rows 1..E follow each epoch.
inline void write_training_log(std::ostream& os, const TrainResult& r) {
  char buf[48];
  os << kTrainLogHeader << '\n';
  std::snprintf(buf, sizeof buf, "%.9g", r.initial_val_mse);
  os << "0,,," << buf << ",0\n";
  for (std::size_t e = 0; e < r.val_mse.size(); ++e) {
    os << e + 1;
    for (double x : {r.lr[e], r.train_loss[e], r.val_mse[e]}) {
      std::snprintf(buf, sizeof buf, ",%.9g", x);
      os << buf;
    }
    os << ',' << (static_cast<int>(e) == r.best_epoch ? 1 : 0) << '\n';
  }
}

inline TrainingLog read_training_log(std::istream& is) {
  detail::expect_header(is, kTrainLogHeader, "training log");
  TrainingLog log;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 5) throw FormatError("training log: expected 5 fields");
    if (f[0] == "0") {
      log.initial_val_mse = std::stod(f[3]);
      continue;
    }
    log.lr.push_back(std::stod(f[1]));
    log.train_loss.push_back(std::stod(f[2]));
    log.val_mse.push_back(std::stod(f[3]));
    if (f[4] == "1") log.best_epoch = std::stoi(f[0]);
  }
  return log;
}

// ---------------------------------------------------------------------------
// stages

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage " + stage + " failed: " + what), stage_name(stage) {}
  std::string stage_name;
};

namespace files {
inline constexpr const char* kDonors = "donors.tsv";
inline constexpr const char* kAcceptors = "acceptors.tsv";
inline constexpr const char* kSplit = "split.txt";
inline constexpr const char* kSolutions = "solutions.tsv";
inline constexpr const char* kDonorBank = "donor_bank.tsv";
inline constexpr const char* kTriples = "triples.csv";
inline constexpr const char* kEmbeddings = "g2v_embeddings.txt";
inline constexpr const char* kRetrieval = "retrieval.csv";
inline constexpr const char* kEval = "eval_records.csv";
inline constexpr const char* kWarm = "warmstart.csv";
inline constexpr const char* kSummary = "table1_summary.csv";
inline constexpr const char* kBreakdown = "breakdown_long.csv";
inline constexpr const char* kWarmComparison = "warmstart_comparison.csv";
inline constexpr const char* kManifest = "manifest.json";
inline std::string checkpoint(Method m) { return "model_" + to_string(m) + ".ckpt"; }
inline std::string training_log(Method m) { return "training_" + to_string(m) + ".csv"; }
}  // namespace files

/// Output directory holding all stage files.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
  [[nodiscard]] std::filesystem::path path(const std::string& name) const {
    return dir_ / name;
  }
  [[nodiscard]] bool has(const std::string& name) const {
    return std::filesystem::exists(path(name));
  }

  /// Writes through a temporary file so a failed stage never leaves a
  /// truncated output behind.
  template <class F>
  void write(const std::string& name, F&& writer) const {
    const auto tmp = path(name + ".tmp");
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw ValidationError("cannot write " + tmp.string());
      writer(os);
      if (!os) throw ValidationError("error writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path(name));
  }

  template <class F>
  auto read(const std::string& name, F&& reader) const {
    std::ifstream is(path(name), std::ios::binary);
    if (!is)
      throw ValidationError("missing stage file " + path(name).string() +
                            " (run the producing stage first)");
    return reader(is);
  }

 private:
  std::filesystem::path dir_;
};

namespace detail {

inline DatasetConfig seeded_dataset(const ExperimentConfig& c) {
  DatasetConfig d = c.dataset;
  d.seed = StageSeeds(c).dataset;
  return d;
}

inline std::vector<Graph> load_graphs(const Workspace& ws, const char* name) {
  return ws.read(name, [](std::istream& is) { return read_graph_bank(is); });
}

inline std::map<std::string, Graph> by_id(const std::vector<Graph>& gs) {
  std::map<std::string, Graph> m;
  for (const auto& g : gs) m.emplace(g.id, g);
  return m;
}

inline bool contains(const std::vector<Method>& ms, Method m) {
  return std::find(ms.begin(), ms.end(), m) != ms.end();
}

}  // namespace detail

inline void stage_gen_graphs(const ExperimentConfig& c, const Workspace& ws) {
  const auto d = detail::seeded_dataset(c);
  const auto donors = generate_donors(d);
  const auto acceptors = generate_acceptors(d);
  const auto split = make_split(acceptors, d);
  validate_split(split, acceptors);
  ws.write(files::kDonors, [&](std::ostream& os) { write_graph_bank(os, donors); });
  ws.write(files::kAcceptors, [&](std::ostream& os) { write_graph_bank(os, acceptors); });
  ws.write(files::kSplit, [&](std::ostream& os) { write_split(os, split); });
}

inline void stage_solve_exact(const ExperimentConfig&, const Workspace& ws) {
  std::map<std::string, SolverResult> sols;
  for (const auto& g : detail::load_graphs(ws, files::kDonors))
    sols[g.id] = solve_maxcut_exact(g);
  for (const auto& g : detail::load_graphs(ws, files::kAcceptors))
    sols[g.id] = solve_mis_exact(g);
  ws.write(files::kSolutions, [&](std::ostream& os) { write_solutions(os, sols); });
}

inline void stage_donor_bank(const ExperimentConfig& c, const Workspace& ws) {
  const auto bank = build_donor_bank(detail::load_graphs(ws, files::kDonors),
                                     detail::seeded_dataset(c));
  ws.write(files::kDonorBank, [&](std::ostream& os) { write_donor_bank(os, bank); });
}

inline void stage_dataset(const ExperimentConfig& c, const Workspace& ws) {
  const auto acceptors = detail::load_graphs(ws, files::kAcceptors);
  const auto bank = ws.read(files::kDonorBank, [](std::istream& is) { return read_donor_bank(is); });
  const auto split = ws.read(files::kSplit, [](std::istream& is) { return read_split(is); });
  const auto ds = build_dataset(acceptors, bank, split, c.dataset.depth);
  ws.write(files::kTriples, [&](std::ostream& os) { write_triples(os, ds.triples); });
}

inline void stage_embed_g2v(const ExperimentConfig& c, const Workspace& ws) {
  auto graphs = detail::load_graphs(ws, files::kDonors);
  for (auto& g : detail::load_graphs(ws, files::kAcceptors)) graphs.push_back(std::move(g));
  G2VConfig g2v = c.g2v;
  g2v.seed = StageSeeds(c).g2v;
  const auto emb = embed_graphs(graphs, g2v);
  ws.write(files::kEmbeddings, [&](std::ostream& os) { write_embeddings(os, emb); });
}

/// Trains one learned method on the train/val triples and stores its best
/// checkpoint and per-epoch log.
inline TrainResult stage_train_one(const ExperimentConfig& c, const Workspace& ws,
                                   Method m) {
  TrainingData data;
  for (auto* name : {files::kDonors, files::kAcceptors})
    for (auto& g : detail::load_graphs(ws, name)) data.graphs.emplace(g.id, std::move(g));
  const auto split = ws.read(files::kSplit, [](std::istream& is) { return read_split(is); });
  const std::set<std::string> train(split.train.begin(), split.train.end());
  const std::set<std::string> val(split.val.begin(), split.val.end());
  for (auto& t : ws.read(files::kTriples, [](std::istream& is) { return read_triples(is); })) {
    if (train.count(t.acceptor_id)) data.train.push_back(t);
    else if (val.count(t.acceptor_id)) data.val.push_back(t);
  }
  if (m == Method::G2V)
    data.embeddings =
        ws.read(files::kEmbeddings, [](std::istream& is) { return read_embeddings(is); });

  ModelConfig mc = c.model;
  mc.variant = encoder_of(m);
  if (m == Method::G2V && !data.embeddings.empty())
    mc.d_graph = static_cast<int>(data.embeddings.begin()->second.size());
  TrainConfig tc = c.train;
  tc.seed = StageSeeds(c).train.at(to_string(m));
  auto res = train_model(data, mc, tc);
  ws.write(files::checkpoint(m), [&](std::ostream& os) { save_checkpoint(os, res.best, tc); });
  ws.write(files::training_log(m), [&](std::ostream& os) { write_training_log(os, res); });
  return res;
}

inline void stage_train(const ExperimentConfig& c, const Workspace& ws) {
  for (Method m : c.methods)
    if (is_learned(m)) stage_train_one(c, ws, m);
}

inline void stage_retrieve(const ExperimentConfig& c, const Workspace& ws) {
  const auto acceptors = detail::by_id(detail::load_graphs(ws, files::kAcceptors));
  const auto donors_all = detail::load_graphs(ws, files::kDonors);
  const auto bank = ws.read(files::kDonorBank, [](std::istream& is) { return read_donor_bank(is); });
  const auto split = ws.read(files::kSplit, [](std::istream& is) { return read_split(is); });
  const StageSeeds seeds(c);

  // Donors whose optimization failed have no parameters to transfer.
  std::set<std::string> usable;
  for (const auto& e : bank)
    if (!e.params.empty()) usable.insert(e.donor_id);
  std::vector<Graph> donors;
  std::vector<std::string> donor_ids;
  for (const auto& g : donors_all)
    if (usable.count(g.id)) {
      donors.push_back(g);
      donor_ids.push_back(g.id);
    }
  if (donors.empty()) throw ValidationError("retrieve: no donor has usable parameters");

  EmbeddingMap emb;
  if (detail::contains(c.methods, Method::Closeness))
    emb = ws.read(files::kEmbeddings, [](std::istream& is) { return read_embeddings(is); });

  std::vector<RetrievalRow> rows;
  for (Method m : c.methods) {
    std::optional<TransferModel> model;
    if (is_learned(m))
      model = ws.read(files::checkpoint(m),
                      [](std::istream& is) { return load_checkpoint(is).model; });
    std::vector<std::pair<std::string, EmbeddingVector>> donor_emb;
    if (m == Method::Closeness)
      for (const auto& id : donor_ids) donor_emb.emplace_back(id, emb.at(id));

    for (const auto& aid : split.test) {
      const Graph& acc = acceptors.at(aid);
      std::vector<std::string> top;
      std::map<std::string, double> score;
      if (model) {
        const auto s = predict_scores(*model, acc, donors);
        for (std::size_t i = 0; i < s.size(); ++i) score[donor_ids[i]] = s[i];
        top = retrieve_topk(s, donor_ids, c.k);
      } else if (m == Method::Closeness) {
        top = closeness_topk(emb.at(aid), donor_emb, c.k);
        for (const auto& id : top) score[id] = -euclidean_distance(emb.at(aid), emb.at(id));
      } else {
        std::vector<std::string> ids = donor_ids;
        Rng rng(derive_seed(seeds.random_donor, aid));
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(c.k)));
        top = ids;
        for (const auto& id : top) score[id] = 0.0;
      }
      for (std::size_t r = 0; r < top.size(); ++r)
        rows.push_back({m, aid, static_cast<int>(r) + 1, top[r], score.at(top[r])});
    }
  }
  ws.write(files::kRetrieval, [&](std::ostream& os) { write_retrieval(os, rows); });
}

inline void stage_evaluate(const ExperimentConfig& c, const Workspace& ws) {
  const auto acceptors = detail::by_id(detail::load_graphs(ws, files::kAcceptors));
  const auto sols = ws.read(files::kSolutions, [](std::istream& is) { return read_solutions(is); });
  std::map<std::string, const DonorBankEntry*> bank_by_id;
  const auto bank = ws.read(files::kDonorBank, [](std::istream& is) { return read_donor_bank(is); });
  for (const auto& e : bank) bank_by_id[e.donor_id] = &e;
  const auto rows = ws.read(files::kRetrieval, [](std::istream& is) { return read_retrieval(is); });

  // Group retrieved donors by (method, acceptor), keeping rank order.
  std::vector<std::pair<std::pair<Method, std::string>, std::vector<std::string>>> groups;
  for (const auto& r : rows) {
    if (groups.empty() || groups.back().first != std::make_pair(r.method, r.acceptor_id))
      groups.push_back({{r.method, r.acceptor_id}, {}});
    groups.back().second.push_back(r.donor_id);
  }
  const std::uint64_t seed = StageSeeds(c).sampling;
  std::vector<EvalRecord> recs;
  for (const auto& [key, donor_ids] : groups) {
    std::vector<Candidate> cands;
    for (const auto& did : donor_ids) {
      const auto* e = bank_by_id.at(did);
      for (std::size_t i = 0; i < e->params.size(); ++i)
        cands.push_back({did, static_cast<int>(i), e->params[i]});
    }
    const Graph& acc = acceptors.at(key.second);
    recs.push_back(evaluate_transfer(acc, sols.at(acc.id).optimum, cands, c.dataset.depth,
                                     c.shots, seed, key.first));
  }
  ws.write(files::kEval, [&](std::ostream& os) { write_eval_records(os, recs); });
}

inline void stage_warmstart(const ExperimentConfig& c, const Workspace& ws) {
  const auto acceptors = detail::by_id(detail::load_graphs(ws, files::kAcceptors));
  const auto sols = ws.read(files::kSolutions, [](std::istream& is) { return read_solutions(is); });
  std::map<std::string, const DonorBankEntry*> bank_by_id;
  const auto bank = ws.read(files::kDonorBank, [](std::istream& is) { return read_donor_bank(is); });
  for (const auto& e : bank) bank_by_id[e.donor_id] = &e;
  const auto recs = ws.read(files::kEval, [](std::istream& is) { return read_eval_records(is); });
  const StageSeeds seeds(c);
  OptConfig opt = c.dataset.opt;

  std::vector<WarmRow> rows;
  for (const auto& rec : recs) {
    if (rec.method != c.primary) continue;
    const Graph& acc = acceptors.at(rec.acceptor_id);
    const double opt_val = sols.at(acc.id).optimum;
    const std::uint64_t shot_seed = derive_seed(seeds.sampling, "warm:" + acc.id);
    const ParamSet& transferred =
        bank_by_id.at(rec.best_donor_id)->params.at(static_cast<std::size_t>(rec.best_param_index));
    const auto direct = warm_start_eval(acc, opt_val, transferred, c.warm_steps, c.shots,
                                        shot_seed, opt);
    const ParamSet rnd = random_init(c.dataset.depth, derive_seed(seeds.random_init, acc.id));
    const auto random = warm_start_eval(acc, opt_val, rnd, c.warm_steps, c.shots, shot_seed, opt);
    WarmRow w;
    w.acceptor_id = acc.id;
    w.above_threshold = direct.before.exact_r >= c.warm_threshold;
    w.direct = direct.before;
    w.direct_warm = direct.after;
    w.random = random.before;
    w.random_warm = random.after;
    rows.push_back(w);
  }
  ws.write(files::kWarm, [&](std::ostream& os) { write_warm_rows(os, rows); });
}

namespace detail {

struct MeanAcc {
  double sum = 0.0;
  int n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  [[nodiscard]] double mean() const { return n ? sum / n : 0.0; }
};

inline std::string hex64(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::uint64_t file_hash(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a64(ss.str());
}

}  // namespace detail

inline void stage_report(const ExperimentConfig& c, const Workspace& ws) {
  const auto acceptors = detail::by_id(detail::load_graphs(ws, files::kAcceptors));
  const auto recs = ws.read(files::kEval, [](std::istream& is) { return read_eval_records(is); });
  const auto warm = ws.read(files::kWarm, [](std::istream& is) { return read_warm_rows(is); });

  // (a) Table-I style summary
  std::map<Method, std::pair<detail::MeanAcc, detail::MeanAcc>> by_method;
  for (const auto& r : recs) {
    by_method[r.method].first.add(r.best_r);
    by_method[r.method].second.add(r.best_prob_opt);
  }
  ws.write(files::kSummary, [&](std::ostream& os) {
    os << "method,depth,mean_best_r,mean_best_prob_opt,acceptors\n";
    for (Method m : c.methods) {
      auto it = by_method.find(m);
      if (it == by_method.end()) continue;
      os << to_string(m) << ',' << c.dataset.depth << ',' << fmt9(it->second.first.mean())
         << ',' << fmt9(it->second.second.mean()) << ',' << it->second.first.n << '\n';
    }
  });

  // (b) long-format breakdown by family and node count
  ws.write(files::kBreakdown, [&](std::ostream& os) {
    os << "method,family,n,metric,value\n";
    for (Method m : c.methods) {
      std::map<std::pair<std::string, std::string>, std::pair<detail::MeanAcc, detail::MeanAcc>>
          cells;
      for (const auto& r : recs) {
        if (r.method != m) continue;
        const Graph& g = acceptors.at(r.acceptor_id);
        const std::string fam = to_string(g.family);
        const std::string n = std::to_string(g.n);
        for (const auto& key : {std::make_pair(fam, n), std::make_pair(fam, std::string("all")),
                                std::make_pair(std::string("all"), n)}) {
          cells[key].first.add(r.best_r);
          cells[key].second.add(r.best_prob_opt);
        }
      }
      for (const auto& [key, acc] : cells) {
        const std::string prefix = to_string(m) + ',' + key.first + ',' + key.second + ',';
        os << prefix << "mean_best_r," << fmt9(acc.first.mean()) << '\n';
        os << prefix << "mean_best_prob_opt," << fmt9(acc.second.mean()) << '\n';
        os << prefix << "acceptors," << acc.first.n << '\n';
      }
    }
  });

  // (c) warm-start comparison over both populations
  ws.write(files::kWarmComparison, [&](std::ostream& os) {
    os << "population,condition,mean_r,mean_exact_r,acceptors\n";
    for (const bool thresholded : {false, true}) {
      const std::string pop =
          thresholded ? "transfer_r_ge_" + fmt9(c.warm_threshold).substr(0, 4) : "all_test";
      std::array<std::pair<detail::MeanAcc, detail::MeanAcc>, 4> acc;
      for (const auto& w : warm) {
        if (thresholded && !w.above_threshold) continue;
        const SampledMetrics* ms[4] = {&w.direct, &w.direct_warm, &w.random, &w.random_warm};
        for (int i = 0; i < 4; ++i) {
          acc[i].first.add(ms[i]->r);
          acc[i].second.add(ms[i]->exact_r);
        }
      }
      const char* names[4] = {"direct_transfer", "transfer_plus_steps", "random_init",
                              "random_init_plus_steps"};
      for (int i = 0; i < 4; ++i)
        os << pop << ',' << names[i] << ',' << fmt9(acc[i].first.mean()) << ','
           << fmt9(acc[i].second.mean()) << ',' << acc[i].first.n << '\n';
    }
  });

  // (d) manifest: config, seeds, and content hashes of every stage file
  const StageSeeds seeds(c);
  nlohmann::ordered_json m;
  m["config"] = config_to_json(c);
  m["config_hash"] = detail::hex64(config_hash(c));
  m["seeds"] = {{"master", c.seed},
                {"dataset", seeds.dataset},
                {"g2v", seeds.g2v},
                {"sampling", seeds.sampling},
                {"random_donor", seeds.random_donor},
                {"random_init", seeds.random_init},
                {"train", seeds.train}};
  nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
  std::vector<std::string> names{files::kDonors,    files::kAcceptors, files::kSplit,
                                 files::kSolutions, files::kDonorBank, files::kTriples,
                                 files::kEmbeddings};
  for (Method meth : c.methods)
    if (is_learned(meth)) {
      names.push_back(files::checkpoint(meth));
      names.push_back(files::training_log(meth));
    }
  for (const char* n : {files::kRetrieval, files::kEval, files::kWarm, files::kSummary,
                        files::kBreakdown, files::kWarmComparison})
    names.emplace_back(n);
  for (const auto& n : names)
    if (ws.has(n)) hashes[n] = detail::hex64(detail::file_hash(ws.path(n)));
  m["files"] = hashes;
  ws.write(files::kManifest, [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

struct Stage {
  const char* name;
  void (*run)(const ExperimentConfig&, const Workspace&);
};

inline const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> s{
      {"gen-graphs", stage_gen_graphs},   {"solve-exact", stage_solve_exact},
      {"build-donor-bank", stage_donor_bank}, {"build-dataset", stage_dataset},
      {"embed-g2v", stage_embed_g2v},     {"train-model", stage_train},
      {"retrieve", stage_retrieve},       {"evaluate", stage_evaluate},
      {"warmstart", stage_warmstart},     {"report", stage_report},
  };
  return s;
}

/// Runs one named stage; failures are rethrown as StageError carrying the
/// stage name. Files from earlier stages are kept.
inline void run_stage(const std::string& name, const ExperimentConfig& c) {
  c.validate();
  const Workspace ws(c.out_dir);
  for (const auto& s : pipeline_stages())
    if (name == s.name) {
      try {
        s.run(c, ws);
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, e.what());
      }
      return;
    }
  throw ParameterError("unknown stage '" + name + "'");
}

/// All stages in order.
inline void run_experiment(const ExperimentConfig& c) {
  for (const auto& s : pipeline_stages()) run_stage(s.name, c);
}

}  // namespace qxfer
