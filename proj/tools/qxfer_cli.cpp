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

// qxfer command-line driver: one subcommand per pipeline stage plus run-all.

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "qxfer/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string preset;
};

qxfer::ExperimentConfig resolve_config(const GlobalOptions& g) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!g.config_file.empty()) {
    std::ifstream is(g.config_file);
    if (!is) throw qxfer::ParameterError("cannot open config file " + g.config_file);
    j = nlohmann::ordered_json::parse(is);
  }
  if (!g.preset.empty()) j["preset"] = g.preset;
  auto c = qxfer::config_from_json(j);
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  c.validate();
  return c;
}

void print_file(const qxfer::Workspace& ws, const char* name) {
  std::ifstream is(ws.path(name));
  std::cout << "== " << name << '\n' << is.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-problem QAOA parameter transfer: MaxCut donors to MIS acceptors"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_file, "JSON experiment config");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out-dir", g.out_dir, "directory for stage files and reports");
  app.add_option("--preset", g.preset, "base configuration")
      ->check(CLI::IsMember({"desk", "paper"}));

  const std::vector<std::pair<std::string, std::string>> stages{
      {"gen-graphs", "generate donor and acceptor graphs and the acceptor split"},
      {"solve-exact", "exact MaxCut (donors) and MIS (acceptors) optima"},
      {"build-donor-bank", "multistart MaxCut QAOA optimization of every donor"},
      {"build-dataset", "transfer scores for every acceptor/donor pair"},
      {"embed-g2v", "Graph2Vec embeddings of all graphs"},
      {"retrieve", "top-k donors per test acceptor for every method"},
      {"evaluate", "sampled approximation ratio and probability of optimum"},
      {"warmstart", "direct vs refined transfer and random-init comparison"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);

  std::string method;
  auto* train = app.add_subcommand("train-model", "train the score model(s)");
  train->add_option("--method", method, "train only this learned method")
      ->check(CLI::IsMember({"GCN", "GraphConv", "ChebConv", "G2V"}));
  auto* report = app.add_subcommand("report", "write summary tables and the run manifest");
  auto* run_all = app.add_subcommand("run-all", "run every stage in order");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(g);
    const qxfer::Workspace ws(cfg.out_dir);
    auto* sub = app.get_subcommands().front();
    if (sub == run_all) {
      for (const auto& s : qxfer::pipeline_stages()) {
        std::cerr << "[qxfer] " << s.name << '\n';
        qxfer::run_stage(s.name, cfg);
      }
      print_file(ws, qxfer::files::kSummary);
      print_file(ws, qxfer::files::kWarmComparison);
    } else if (sub == train && !method.empty()) {
      try {
        qxfer::stage_train_one(cfg, ws, qxfer::method_from_string(method));
      } catch (const std::exception& e) {
        throw qxfer::StageError("train-model", e.what());
      }
    } else {
      qxfer::run_stage(sub->get_name(), cfg);
      if (sub == report) {
        print_file(ws, qxfer::files::kSummary);
        print_file(ws, qxfer::files::kWarmComparison);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "qxfer: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
