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

#include <algorithm>
#include <numeric>
#include <sstream>

#include "qxfer/dataset.hpp"
#include "qxfer/embeddings.hpp"

namespace qxfer {
namespace {

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<Graph> corpus_graphs(int count) {
  DatasetConfig c = DatasetConfig::paper();
  for (auto& f : c.donors) f.count = count / 4;
  c.seed = 5;
  return generate_donors(c);
}

TEST(WlTokens, CountsAndNamespaces) {
  auto bag = wl_tokens(path_graph(3), 2);
  EXPECT_EQ(bag.tokens.size(), 9u);
  EXPECT_EQ(bag.tokens[0], "0:1");
  EXPECT_EQ(bag.tokens[1], "0:2");
  EXPECT_EQ(bag.tokens[3].substr(0, 2), "1:");
  EXPECT_EQ(bag.tokens[0 + 3], bag.tokens[2 + 3]);  // endpoints agree
  EXPECT_NE(bag.tokens[0 + 3], bag.tokens[1 + 3]);
  EXPECT_THROW(wl_tokens(path_graph(3), -1), ParameterError);
}

TEST(WlTokens, VertexTransitiveGraphHasOneTokenPerIteration) {
  auto bag = wl_tokens(complete_graph(3), 3);
  for (int it = 0; it <= 3; ++it) {
    EXPECT_EQ(bag.tokens[3 * it], bag.tokens[3 * it + 1]);
    EXPECT_EQ(bag.tokens[3 * it], bag.tokens[3 * it + 2]);
  }
}

TEST(WlTokens, IsomorphismInvariant) {
  int k = 0;
  for (const auto& g : corpus_graphs(20)) {
    std::vector<int> perm(g.n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(100 + k++);
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_EQ(sorted(wl_tokens(g, 2).tokens),
              sorted(wl_tokens(permute_graph(g, perm), 2).tokens));
  }
}

TEST(Graph2Vec, DimensionAndDeterminism) {
  auto graphs = corpus_graphs(12);
  G2VConfig cfg;
  auto a = embed_graphs(graphs, cfg);
  ASSERT_EQ(a.size(), graphs.size());
  for (const auto& [id, v] : a) {
    EXPECT_EQ(v.size(), 128u);
    for (double x : v) EXPECT_TRUE(std::isfinite(x));
  }
  EXPECT_EQ(embed_graphs(graphs, cfg), a);
}

TEST(Graph2Vec, ZeroEpochsReturnsSeededInitialization) {
  auto graphs = corpus_graphs(8);
  G2VConfig cfg;
  cfg.epochs = 0;
  cfg.dim = 4;
  auto a = embed_graphs(graphs, cfg);
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Initialization order follows the corpus order.
  for (const auto& g : graphs)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(a.at(g.id)[c], (u01(rng) - 0.5) / 4);
}

TEST(Graph2Vec, DuplicateGraphsEmbedCloserThanAverage) {
  auto graphs = corpus_graphs(40);
  std::vector<WlTokenBag> corpus;
  for (const auto& g : graphs) corpus.push_back(wl_tokens(g, 2));
  WlTokenBag dup = corpus[7];
  dup.graph_id = "duplicate";
  corpus.push_back(dup);
  auto emb = train_graph2vec(corpus, G2VConfig{});

  double sum = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (std::size_t j = i + 1; j < corpus.size(); ++j) {
      sum += cosine(emb[corpus[i].graph_id], emb[corpus[j].graph_id]);
      ++pairs;
    }
  const double mean = sum / pairs;
  EXPECT_GT(cosine(emb[graphs[7].id], emb["duplicate"]), mean);
}

TEST(Graph2Vec, EmptyVocabularyIsRejected) {
  std::vector<WlTokenBag> corpus{{"a", {}}, {"b", {}}};
  EXPECT_THROW(train_graph2vec(corpus, G2VConfig{}), ValidationError);
  EXPECT_THROW(train_graph2vec({}, G2VConfig{}), ValidationError);
}

TEST(Closeness, OrderingAndTies) {
  EmbeddingVector acc{0.0, 0.0};
  std::vector<std::pair<std::string, EmbeddingVector>> donors{
      {"A", {2.0, 0.0}}, {"B", {0.0, 1.0}}, {"C", {3.0, 0.0}}};
  EXPECT_EQ(closeness_topk(acc, donors, 2), (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(closeness_topk(acc, donors, 10).size(), 3u);

  donors.push_back({"Z", {0.0, 0.0}});
  donors.push_back({"Y", {0.0, 0.0}});
  auto top = closeness_topk(acc, donors, 5);
  EXPECT_EQ(top, (std::vector<std::string>{"Y", "Z", "B", "A", "C"}));
  EXPECT_THROW(closeness_topk(acc, donors, 0), ParameterError);
}

TEST(Closeness, FullRankingIsConsistentWithDistances) {
  auto emb = embed_graphs(corpus_graphs(16), G2VConfig{});
  std::vector<std::pair<std::string, EmbeddingVector>> donors(emb.begin(), emb.end());
  const auto& acc = donors.front().second;
  auto ranked = closeness_topk(acc, donors, static_cast<int>(donors.size()));
  EXPECT_EQ(ranked.front(), donors.front().first);
  for (std::size_t i = 1; i < ranked.size(); ++i)
    EXPECT_LE(euclidean_distance(acc, emb[ranked[i - 1]]),
              euclidean_distance(acc, emb[ranked[i]]));
}

TEST(EmbeddingFile, NineSignificantDigits) {
  EmbeddingMap m{{"g1", {1.0 / 3.0, -2.5e-7}}, {"g2", {0.0, 12345.678901}}};
  std::stringstream ss;
  write_embeddings(ss, m);
  EXPECT_EQ(ss.str(), "g1, 0.333333333 -2.5e-07\ng2, 0 12345.6789\n");
  auto back = read_embeddings(ss);
  EXPECT_NEAR(back["g1"][0], 1.0 / 3.0, 1e-9);
  EXPECT_EQ(back["g2"].size(), 2u);
}

}  // namespace
}  // namespace qxfer
