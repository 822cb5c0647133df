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
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "qxfer/graph.hpp"

namespace qxfer {

/// Weisfeiler-Lehman subtree tokens of one graph: one token per node per
/// iteration (iteration 0 included), namespaced as "<iter>:<label>".
struct WlTokenBag {
  std::string graph_id;
  std::vector<std::string> tokens;
};

using EmbeddingVector = std::vector<double>;
using EmbeddingMap = std::map<std::string, EmbeddingVector>;

inline WlTokenBag wl_tokens(const Graph& g, int iters) {
  if (iters < 0) throw ParameterError("wl_tokens: iters must be >= 0");
  const auto adj = g.adjacency();
  WlTokenBag bag{g.id, {}};
  bag.tokens.reserve(static_cast<std::size_t>(g.n) * (iters + 1));

  std::vector<std::string> labels(static_cast<std::size_t>(g.n));
  for (int v = 0; v < g.n; ++v) labels[v] = std::to_string(adj[v].size());
  for (int it = 0;; ++it) {
    for (const auto& l : labels) bag.tokens.push_back(std::to_string(it) + ":" + l);
    if (it == iters) break;
    std::vector<std::string> next(labels.size());
    for (int v = 0; v < g.n; ++v) {
      std::vector<std::string> nb;
      for (int w : adj[v]) nb.push_back(labels[w]);
      std::sort(nb.begin(), nb.end());
      std::string key = labels[v] + "|";
      for (const auto& s : nb) key += s + ",";
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx",
                    static_cast<unsigned long long>(fnv1a64(key)));
      next[v] = buf;
    }
    labels.swap(next);
  }
  return bag;
}

struct G2VConfig {
  int epochs = 10;
  double learning_rate = 0.025;
  double min_learning_rate = 0.0001;
  int wl_iters = 2;
  double downsample = 1e-4;
  int dim = 128;
  int negatives = 5;
  int min_count = 1;
  std::uint64_t seed = 42;
};

/// Distributed bag of words (PV-DBOW) with negative sampling: each graph
/// vector is trained to predict its own WL tokens against sampled noise
/// tokens. Single-threaded with a fixed visiting order, so results depend
/// only on the corpus and the seed.
inline EmbeddingMap train_graph2vec(const std::vector<WlTokenBag>& corpus,
                                    const G2VConfig& cfg) {
  if (corpus.empty()) throw ValidationError("train_graph2vec: empty corpus");
  if (cfg.dim < 1 || cfg.negatives < 1 || cfg.epochs < 0 ||
      !(cfg.learning_rate > 0.0))
    throw ParameterError("train_graph2vec: invalid configuration");

  // vocabulary, most frequent first (ties by token text)
  std::unordered_map<std::string, long long> freq;
  for (const auto& bag : corpus)
    for (const auto& t : bag.tokens) ++freq[t];
  std::vector<std::pair<std::string, long long>> vocab;
  for (auto& [t, c] : freq)
    if (c >= cfg.min_count) vocab.emplace_back(t, c);
  if (vocab.empty()) throw ValidationError("train_graph2vec: empty vocabulary");
  std::sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::unordered_map<std::string, int> word_index;
  long long total_words = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    word_index[vocab[i].first] = static_cast<int>(i);
    total_words += vocab[i].second;
  }

  // frequent-token downsampling: keep probability per word
  std::vector<double> keep(vocab.size(), 1.0);
  if (cfg.downsample > 0.0) {
    const double threshold = cfg.downsample * static_cast<double>(total_words);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const double f = static_cast<double>(vocab[i].second);
      keep[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
    }
  }

  // noise distribution ~ count^0.75
  std::vector<double> noise_cdf(vocab.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    acc += std::pow(static_cast<double>(vocab[i].second), 0.75);
    noise_cdf[i] = acc;
  }
  for (double& x : noise_cdf) x /= acc;

  const auto dim = static_cast<std::size_t>(cfg.dim);
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::vector<double>> docs(corpus.size(), std::vector<double>(dim));
  for (auto& d : docs)
    for (double& x : d) x = (u01(rng) - 0.5) / static_cast<double>(cfg.dim);
  std::vector<std::vector<double>> out_vecs(vocab.size(),
                                            std::vector<double>(dim, 0.0));

  std::vector<std::vector<int>> doc_words(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (const auto& t : corpus[d].tokens)
      if (auto it = word_index.find(t); it != word_index.end())
        doc_words[d].push_back(it->second);

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double work = static_cast<double>(cfg.epochs) * total_words;
  long long done = 0;
  std::vector<double> grad(dim);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      auto& dv = docs[d];
      for (int w : doc_words[d]) {
        const double alpha = std::max(
            cfg.min_learning_rate,
            cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) *
                                    static_cast<double>(done) / work);
        ++done;
        if (keep[w] < 1.0 && u01(rng) > keep[w]) continue;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int k = 0; k <= cfg.negatives; ++k) {
          int target = w;
          double label = 1.0;
          if (k > 0) {
            const double r = u01(rng);
            target = static_cast<int>(
                std::lower_bound(noise_cdf.begin(), noise_cdf.end(), r) -
                noise_cdf.begin());
            target = std::min(target, static_cast<int>(vocab.size()) - 1);
            if (target == w) continue;
            label = 0.0;
          }
          auto& ov = out_vecs[target];
          double dot = 0.0;
          for (std::size_t c = 0; c < dim; ++c) dot += dv[c] * ov[c];
          const double g = (label - sigmoid(dot)) * alpha;
          for (std::size_t c = 0; c < dim; ++c) {
            grad[c] += g * ov[c];
            ov[c] += g * dv[c];
          }
        }
        for (std::size_t c = 0; c < dim; ++c) dv[c] += grad[c];
      }
    }
  }

  EmbeddingMap out;
  for (std::size_t d = 0; d < corpus.size(); ++d)
    out[corpus[d].graph_id] = std::move(docs[d]);
  return out;
}

inline EmbeddingMap embed_graphs(const std::vector<Graph>& graphs,
                                 const G2VConfig& cfg) {
  std::vector<WlTokenBag> corpus;
  corpus.reserve(graphs.size());
  for (const auto& g : graphs) corpus.push_back(wl_tokens(g, cfg.wl_iters));
  return train_graph2vec(corpus, cfg);
}

inline double euclidean_distance(const EmbeddingVector& a,
                                 const EmbeddingVector& b) {
  if (a.size() != b.size())
    throw ValidationError("euclidean_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// k donors nearest to the acceptor, nearest first; ties by donor id.
/// k larger than the donor count returns every donor.
inline std::vector<std::string> closeness_topk(
    const EmbeddingVector& acceptor,
    const std::vector<std::pair<std::string, EmbeddingVector>>& donors, int k) {
  if (k < 1) throw ParameterError("closeness_topk: k must be >= 1");
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(donors.size());
  for (const auto& [id, v] : donors)
    ranked.emplace_back(euclidean_distance(acceptor, v), id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
    out.push_back(ranked[i].second);
  return out;
}

// "graph_id, v1 v2 ... vd" with 9 significant digits.
inline void write_embeddings(std::ostream& os, const EmbeddingMap& emb) {
  char buf[32];
  for (const auto& [id, v] : emb) {
    os << id << ',';
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.9g", x);
      os << buf;
    }
    os << '\n';
  }
}

inline EmbeddingMap read_embeddings(std::istream& is) {
  EmbeddingMap out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("embeddings: missing ','");
    std::stringstream ss(line.substr(comma + 1));
    EmbeddingVector v;
    double x;
    while (ss >> x) v.push_back(x);
    out[line.substr(0, comma)] = std::move(v);
  }
  return out;
}

}  // namespace qxfer
