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

#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/embeddings.hpp"
#include "qxfer/features.hpp"
#include "qxfer/nn.hpp"

namespace qxfer {

enum class EncoderVariant { GCN, GraphConv, ChebConv, G2V };

inline std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::GCN: return "GCN";
    case EncoderVariant::GraphConv: return "GraphConv";
    case EncoderVariant::ChebConv: return "ChebConv";
    case EncoderVariant::G2V: return "G2V";
  }
  return "?";
}

inline EncoderVariant encoder_from_string(const std::string& s) {
  if (s == "GCN") return EncoderVariant::GCN;
  if (s == "GraphConv") return EncoderVariant::GraphConv;
  if (s == "ChebConv") return EncoderVariant::ChebConv;
  if (s == "G2V") return EncoderVariant::G2V;
  throw FormatError("unknown encoder variant '" + s + "'");
}

inline constexpr int kMaxCutContextRow = 0;
inline constexpr int kMisContextRow = 1;

struct ModelConfig {
  EncoderVariant variant = EncoderVariant::GCN;
  int hidden = 64;
  int d_graph = 128;
  int d_cop = 16;
  int fcn_width = 256;
  int gnn_blocks = 5;
  int fcn_blocks = 4;
  double dropout = 0.2;
  double bn_momentum = 0.1;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 256;
  double lr = 1e-4;
  double plateau_factor = 0.05;
  int plateau_patience = 2;
  double weight_decay = 0.01;
  double dropout = 0.2;
  std::uint64_t seed = 0;
};

using SpMat = Eigen::SparseMatrix<double>;
using nn::Mat;

/// z-score statistics of the six node features.
struct FeatureScaler {
  std::array<double, kNumNodeFeatures> mean{};
  std::array<double, kNumNodeFeatures> stddev{1, 1, 1, 1, 1, 1};

  static FeatureScaler fit(const std::vector<const Graph*>& graphs) {
    FeatureScaler s;
    std::array<double, kNumNodeFeatures> sum{}, sq{};
    double count = 0;
    for (const Graph* g : graphs)
      for (const auto& row : compute_node_features(*g)) {
        for (int c = 0; c < kNumNodeFeatures; ++c) {
          sum[c] += row[c];
          sq[c] += row[c] * row[c];
        }
        ++count;
      }
    if (count == 0) return s;
    for (int c = 0; c < kNumNodeFeatures; ++c) {
      s.mean[c] = sum[c] / count;
      const double var = std::max(0.0, sq[c] / count - s.mean[c] * s.mean[c]);
      s.stddev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  [[nodiscard]] Mat transform(const NodeFeatureMatrix& f) const {
    Mat m(static_cast<Eigen::Index>(f.size()), kNumNodeFeatures);
    for (std::size_t v = 0; v < f.size(); ++v)
      for (int c = 0; c < kNumNodeFeatures; ++c)
        m(static_cast<Eigen::Index>(v), c) = (f[v][c] - mean[c]) / stddev[c];
    return m;
  }
};

/// Per-graph encoder input: scaled features plus the propagation operator of
/// the chosen layer type.
struct GraphInput {
  std::string id;
  int n = 0;
  Mat features;
  std::vector<Eigen::Triplet<double>> op;  // local (row, col, value)
};

/// GCN: D^-1/2 (A + I) D^-1/2. GraphConv: A. ChebConv (K = 2, lambda_max = 2):
/// the scaled Laplacian 2L/lambda_max - I = -D^-1/2 A D^-1/2.
inline std::vector<Eigen::Triplet<double>> propagation_operator(const Graph& g,
                                                                EncoderVariant v) {
  std::vector<Eigen::Triplet<double>> t;
  const auto deg = g.degrees();
  switch (v) {
    case EncoderVariant::GCN: {
      std::vector<double> d(deg.begin(), deg.end());
      for (double& x : d) x = 1.0 / std::sqrt(x + 1.0);
      for (int u = 0; u < g.n; ++u) t.emplace_back(u, u, d[u] * d[u]);
      for (auto [a, b] : g.edges) {
        t.emplace_back(a, b, d[a] * d[b]);
        t.emplace_back(b, a, d[a] * d[b]);
      }
      break;
    }
    case EncoderVariant::GraphConv:
      for (auto [a, b] : g.edges) {
        t.emplace_back(a, b, 1.0);
        t.emplace_back(b, a, 1.0);
      }
      break;
    case EncoderVariant::ChebConv: {
      for (auto [a, b] : g.edges) {
        const double w = -1.0 / std::sqrt(static_cast<double>(deg[a]) * deg[b]);
        t.emplace_back(a, b, w);
        t.emplace_back(b, a, w);
      }
      break;
    }
    case EncoderVariant::G2V: break;
  }
  return t;
}

inline GraphInput make_graph_input(const Graph& g, EncoderVariant v,
                                   const FeatureScaler& scaler) {
  return {g.id, g.n, scaler.transform(compute_node_features(g)),
          propagation_operator(g, v)};
}

/// Several graphs stacked as one disconnected graph.
struct GraphBatch {
  Mat x;
  SpMat op;
  SpMat pool;  // (graphs x nodes), mean pooling

  static GraphBatch assemble(const std::vector<const GraphInput*>& graphs) {
    int total = 0;
    for (const auto* g : graphs) total += g->n;
    GraphBatch b;
    b.x.resize(total, kNumNodeFeatures);
    std::vector<Eigen::Triplet<double>> ops, pool;
    int off = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
      const auto* g = graphs[gi];
      b.x.middleRows(off, g->n) = g->features;
      for (const auto& t : g->op)
        ops.emplace_back(t.row() + off, t.col() + off, t.value());
      for (int v = 0; v < g->n; ++v)
        pool.emplace_back(static_cast<int>(gi), off + v, 1.0 / g->n);
      off += g->n;
    }
    b.op.resize(total, total);
    b.op.setFromTriplets(ops.begin(), ops.end());
    b.pool.resize(static_cast<Eigen::Index>(graphs.size()), total);
    b.pool.setFromTriplets(pool.begin(), pool.end());
    return b;
  }
};

/// One message-passing layer: z = [h W_root] + (S h) W_prop + b, where the
/// root term exists for GraphConv and ChebConv.
struct GnnLayer {
  bool has_root = false;
  nn::Param root;
  nn::Linear prop;

  GnnLayer() = default;
  GnnLayer(const std::string& name, int in, int out, bool with_root, Rng& rng)
      : has_root(with_root), prop(name + ".prop", in, out, rng) {
    if (has_root)
      root = nn::Param(name + ".root",
                       nn::uniform_init(in, out, 1.0 / std::sqrt(double(in)), rng));
  }

  [[nodiscard]] Mat forward(const Mat& h, const Mat& sh) const {
    Mat z = prop.forward(sh);
    if (has_root) z.noalias() += h * root.value;
    return z;
  }

  /// Returns dL/dh.
  Mat backward(const Mat& h, const Mat& sh, const SpMat& op, const Mat& dz) {
    Mat dsh = prop.backward(sh, dz);
    Mat dh = op.transpose() * dsh;
    if (has_root) {
      root.grad.noalias() += h.transpose() * dz;
      dh.noalias() += dz * root.value.transpose();
    }
    return dh;
  }

  void collect(std::vector<nn::Param*>& out) {
    if (has_root) out.push_back(&root);
    prop.collect(out);
  }
};

/// Five blocks of [graph conv -> batch norm -> ReLU -> dropout], mean pooling
/// and a projection to the graph embedding width.
struct Encoder {
  std::vector<GnnLayer> layers;
  std::vector<nn::BatchNorm> norms;
  nn::Linear proj;
  double dropout = 0.2;

  struct Tape {
    std::vector<Mat> h_in, sh, y;
    std::vector<nn::BatchNorm::Cache> bn;
    std::vector<Mat> drop;
    Mat pooled;
  };

  Encoder() = default;
  Encoder(const ModelConfig& cfg, Rng& rng) : dropout(cfg.dropout) {
    const bool root = cfg.variant != EncoderVariant::GCN;
    for (int l = 0; l < cfg.gnn_blocks; ++l) {
      const std::string name = "enc.block" + std::to_string(l);
      layers.emplace_back(name + ".conv", l == 0 ? kNumNodeFeatures : cfg.hidden,
                          cfg.hidden, root, rng);
      norms.emplace_back(name + ".bn", cfg.hidden, cfg.bn_momentum);
    }
    proj = nn::Linear("enc.proj", cfg.hidden, cfg.d_graph, rng);
  }

  /// Train mode uses batch statistics and dropout (drawn from `rng`) and
  /// records a tape for backward.
  Mat forward_train(const GraphBatch& b, Rng& rng, Tape& tape) {
    tape = Tape{};
    Mat h = b.x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Mat sh = b.op * h;
      Mat z = layers[l].forward(h, sh);
      nn::BatchNorm::Cache cache;
      Mat y = norms[l].forward(z, nn::Mode::Train, &cache);
      Mat mask = nn::dropout_mask(y.rows(), y.cols(), dropout, rng);
      tape.h_in.push_back(std::move(h));
      tape.sh.push_back(std::move(sh));
      tape.bn.push_back(std::move(cache));
      h = nn::relu(y).cwiseProduct(mask);
      tape.y.push_back(std::move(y));
      tape.drop.push_back(std::move(mask));
    }
    tape.pooled = b.pool * h;
    return proj.forward(tape.pooled);
  }

  [[nodiscard]] Mat forward_eval(const GraphBatch& b) const {
    Mat h = b.x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Mat sh = b.op * h;
      h = nn::relu(norms[l].eval_forward(layers[l].forward(h, sh)));
    }
    return proj.forward(b.pool * h);
  }

  void backward(const GraphBatch& b, const Tape& tape, const Mat& d_emb) {
    Mat dh = b.pool.transpose() * proj.backward(tape.pooled, d_emb);
    for (std::size_t l = layers.size(); l-- > 0;) {
      Mat dy = nn::relu_backward(tape.y[l], dh.cwiseProduct(tape.drop[l]));
      Mat dz = norms[l].backward(tape.bn[l], dy);
      dh = layers[l].backward(tape.h_in[l], tape.sh[l], b.op, dz);
    }
  }

  void collect(std::vector<nn::Param*>& out) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].collect(out);
      norms[l].collect(out);
    }
    proj.collect(out);
  }
};

/// Score head: affine projection, residual blocks x + ReLU(LN(x W + b)),
/// then an affine map to a scalar.
struct Head {
  nn::Linear input;
  std::vector<nn::Linear> blocks;
  std::vector<nn::LayerNorm> norms;
  nn::Linear out;

  struct Tape {
    Mat x;
    std::vector<Mat> a;  // block inputs, then the final activation
    std::vector<nn::LayerNorm::Cache> ln;
    std::vector<Mat> v;  // pre-ReLU
  };

  Head() = default;
  Head(const ModelConfig& cfg, Rng& rng) {
    const int in = 2 * (cfg.d_graph + cfg.d_cop);
    input = nn::Linear("head.input", in, cfg.fcn_width, rng);
    for (int j = 0; j < cfg.fcn_blocks; ++j) {
      blocks.emplace_back("head.block" + std::to_string(j) + ".fc", cfg.fcn_width,
                          cfg.fcn_width, rng);
      norms.emplace_back("head.block" + std::to_string(j) + ".ln", cfg.fcn_width);
    }
    out = nn::Linear("head.out", cfg.fcn_width, 1, rng);
  }

  Eigen::VectorXd forward(const Mat& x, Tape* tape) const {
    Mat a = input.forward(x);
    if (tape) {
      tape->x = x;
      tape->a.clear();
      tape->ln.clear();
      tape->v.clear();
    }
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      nn::LayerNorm::Cache c;
      Mat v = norms[j].forward(blocks[j].forward(a), tape ? &c : nullptr);
      Mat next = a + nn::relu(v);
      if (tape) {
        tape->a.push_back(std::move(a));
        tape->ln.push_back(std::move(c));
        tape->v.push_back(std::move(v));
      }
      a = std::move(next);
    }
    Eigen::VectorXd y = out.forward(a).col(0);
    if (tape) tape->a.push_back(std::move(a));
    return y;
  }

  /// Returns dL/dx.
  Mat backward(const Tape& t, const Eigen::VectorXd& dy) {
    Mat da = out.backward(t.a.back(), Mat(dy));
    for (std::size_t j = blocks.size(); j-- > 0;) {
      Mat du = norms[j].backward(t.ln[j], nn::relu_backward(t.v[j], da));
      da += blocks[j].backward(t.a[j], du);
    }
    return input.backward(t.x, da);
  }

  void collect(std::vector<nn::Param*>& o) {
    input.collect(o);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      blocks[j].collect(o);
      norms[j].collect(o);
    }
    out.collect(o);
  }
};

/// Acceptor/donor pair by index into a list of distinct graphs.
struct PairIndex {
  int acceptor;
  int donor;
};

/// Predicts the transfer score of a (MIS acceptor, MaxCut donor) pair from
/// graph embeddings concatenated with a learned per-problem context row.
class TransferModel {
 public:
  ModelConfig cfg;
  Encoder encoder;       // unused for G2V
  nn::Param context;     // rows: MaxCut, MIS
  Head head;
  FeatureScaler scaler;
  EmbeddingMap fixed;    // G2V embeddings

  TransferModel() = default;
  TransferModel(const ModelConfig& c, std::uint64_t seed) : cfg(c) {
    Rng rng(seed);
    if (cfg.variant != EncoderVariant::G2V) encoder = Encoder(cfg, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat w(2, cfg.d_cop);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    context = nn::Param("context", w);
    head = Head(cfg, rng);
  }

  [[nodiscard]] bool uses_gnn() const { return cfg.variant != EncoderVariant::G2V; }

  std::vector<nn::Param*> parameters() {
    std::vector<nn::Param*> out;
    if (uses_gnn()) encoder.collect(out);
    out.push_back(&context);
    head.collect(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  [[nodiscard]] GraphInput input_for(const Graph& g) const {
    return make_graph_input(g, cfg.variant, scaler);
  }

  /// Fixed embeddings stacked in the order of `ids`.
  [[nodiscard]] Mat fixed_embeddings(const std::vector<std::string>& ids) const {
    Mat e(static_cast<Eigen::Index>(ids.size()), cfg.d_graph);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = fixed.find(ids[i]);
      if (it == fixed.end())
        throw ValidationError("no Graph2Vec embedding for graph '" + ids[i] + "'");
      if (static_cast<int>(it->second.size()) != cfg.d_graph)
        throw ValidationError("Graph2Vec embedding has wrong dimension");
      for (int c = 0; c < cfg.d_graph; ++c)
        e(static_cast<Eigen::Index>(i), c) = it->second[c];
    }
    return e;
  }

  /// [X_acc | ctx_MIS | X_don | ctx_MaxCut] per pair.
  [[nodiscard]] Mat pair_inputs(const Mat& emb, const std::vector<PairIndex>& pairs) const {
    const int zd = cfg.d_graph + cfg.d_cop;
    Mat x(static_cast<Eigen::Index>(pairs.size()), 2 * zd);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      x.row(r).segment(0, cfg.d_graph) = emb.row(pairs[i].acceptor);
      x.row(r).segment(cfg.d_graph, cfg.d_cop) = context.value.row(kMisContextRow);
      x.row(r).segment(zd, cfg.d_graph) = emb.row(pairs[i].donor);
      x.row(r).segment(zd + cfg.d_graph, cfg.d_cop) =
          context.value.row(kMaxCutContextRow);
    }
    return x;
  }

  /// Eval-mode embeddings of the given graphs.
  [[nodiscard]] Mat embed_eval(const std::vector<const GraphInput*>& graphs) const {
    if (!uses_gnn()) {
      std::vector<std::string> ids;
      for (const auto* g : graphs) ids.push_back(g->id);
      return fixed_embeddings(ids);
    }
    return encoder.forward_eval(GraphBatch::assemble(graphs));
  }

  [[nodiscard]] Eigen::VectorXd predict_pairs(const std::vector<const GraphInput*>& graphs,
                                              const std::vector<PairIndex>& pairs) const {
    return head.forward(pair_inputs(embed_eval(graphs), pairs), nullptr);
  }

  /// Train-mode forward + backward on one minibatch; accumulates gradients and
  /// returns the batch MSE.
  double train_step(const std::vector<const GraphInput*>& graphs,
                    const std::vector<PairIndex>& pairs,
                    const Eigen::VectorXd& targets, Rng& dropout_rng) {
    GraphBatch batch;
    Encoder::Tape etape;
    Mat emb;
    if (uses_gnn()) {
      batch = GraphBatch::assemble(graphs);
      emb = encoder.forward_train(batch, dropout_rng, etape);
    } else {
      emb = embed_eval(graphs);
    }
    Head::Tape htape;
    const Eigen::VectorXd pred = head.forward(pair_inputs(emb, pairs), &htape);
    const double loss = nn::mse_loss(pred, targets);
    const Mat dx = head.backward(htape, nn::mse_grad(pred, targets));

    const int zd = cfg.d_graph + cfg.d_cop;
    Mat demb = Mat::Zero(emb.rows(), emb.cols());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      demb.row(pairs[i].acceptor) += dx.row(r).segment(0, cfg.d_graph);
      context.grad.row(kMisContextRow) += dx.row(r).segment(cfg.d_graph, cfg.d_cop);
      demb.row(pairs[i].donor) += dx.row(r).segment(zd, cfg.d_graph);
      context.grad.row(kMaxCutContextRow) +=
          dx.row(r).segment(zd + cfg.d_graph, cfg.d_cop);
    }
    if (uses_gnn()) encoder.backward(batch, etape, demb);
    return loss;
  }
};

// ---------------------------------------------------------------------------
// training

struct TrainingData {
  std::map<std::string, Graph> graphs;
  std::vector<TransferTriple> train;
  std::vector<TransferTriple> val;
  EmbeddingMap embeddings;  // required for G2V
};

struct TrainResult {
  TransferModel best;
  double initial_val_mse = 0.0;
  std::vector<double> val_mse;     // one per epoch
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> lr;          // learning rate used in each epoch
  int best_epoch = -1;
};

namespace detail {

struct IndexedTriples {
  std::vector<const GraphInput*> graphs;
  std::vector<PairIndex> pairs;
  Eigen::VectorXd targets;
};

// Distinct graphs in order of first appearance.
inline IndexedTriples index_triples(const std::vector<const TransferTriple*>& ts,
                                    const std::map<std::string, GraphInput>& inputs) {
  IndexedTriples out;
  std::map<std::string, int> slot;
  auto get = [&](const std::string& id) {
    auto [it, fresh] = slot.emplace(id, static_cast<int>(out.graphs.size()));
    if (fresh) {
      auto g = inputs.find(id);
      if (g == inputs.end())
        throw ValidationError("triple references unknown graph '" + id + "'");
      out.graphs.push_back(&g->second);
    }
    return it->second;
  };
  out.targets.resize(static_cast<Eigen::Index>(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int a = get(ts[i]->acceptor_id);
    const int d = get(ts[i]->donor_id);
    out.pairs.push_back({a, d});
    out.targets(static_cast<Eigen::Index>(i)) = ts[i]->y;
  }
  return out;
}

inline std::vector<const TransferTriple*> pointers(const std::vector<TransferTriple>& v) {
  std::vector<const TransferTriple*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

}  // namespace detail

inline double evaluate_mse(const TransferModel& model,
                           const std::vector<TransferTriple>& triples,
                           const std::map<std::string, GraphInput>& inputs) {
  auto idx = detail::index_triples(detail::pointers(triples), inputs);
  return nn::mse_loss(model.predict_pairs(idx.graphs, idx.pairs), idx.targets);
}

/// Inputs for every graph, with features scaled by the model's scaler.
inline std::map<std::string, GraphInput> build_inputs(
    const TransferModel& model, const std::map<std::string, Graph>& graphs) {
  std::map<std::string, GraphInput> out;
  for (const auto& [id, g] : graphs) out.emplace(id, model.input_for(g));
  return out;
}

/// Minibatch AdamW on shuffled training triples with per-epoch validation,
/// plateau learning-rate decay, and the minimum-validation checkpoint kept.
inline TrainResult train_model(const TrainingData& data, ModelConfig mcfg,
                               const TrainConfig& tcfg) {
  if (data.train.empty() || data.val.empty())
    throw ValidationError("train_model: empty train or validation split");
  if (tcfg.epochs < 0 || tcfg.batch_size < 1 || !(tcfg.lr > 0.0) ||
      tcfg.dropout < 0.0 || tcfg.dropout >= 1.0)
    throw ParameterError("train_model: invalid training configuration");
  mcfg.dropout = tcfg.dropout;

  TransferModel model(mcfg, derive_seed(tcfg.seed, "init"));
  if (!model.uses_gnn()) model.fixed = data.embeddings;

  // Feature statistics from graphs seen in training triples.
  std::map<std::string, const Graph*> seen;
  for (const auto& t : data.train)
    for (const auto* id : {&t.acceptor_id, &t.donor_id}) {
      auto it = data.graphs.find(*id);
      if (it == data.graphs.end())
        throw ValidationError("train_model: unknown graph '" + *id + "'");
      seen.emplace(*id, &it->second);
    }
  std::vector<const Graph*> fit_graphs;
  for (const auto& [id, g] : seen) fit_graphs.push_back(g);
  model.scaler = FeatureScaler::fit(fit_graphs);
  const auto inputs = build_inputs(model, data.graphs);

  TrainResult res;
  res.initial_val_mse = evaluate_mse(model, data.val, inputs);
  res.best = model;
  double best_val = std::numeric_limits<double>::infinity();

  nn::AdamWConfig opt{tcfg.lr, 0.9, 0.999, 1e-8, tcfg.weight_decay};
  nn::AdamWState state;
  nn::PlateauScheduler sched{tcfg.plateau_factor, tcfg.plateau_patience};
  Rng dropout_rng(derive_seed(tcfg.seed, "dropout"));
  auto params = model.parameters();

  std::vector<std::size_t> order(data.train.size());
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(tcfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    res.lr.push_back(opt.lr);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      std::vector<const TransferTriple*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data.train[order[i]]);
      auto idx = detail::index_triples(batch, inputs);
      model.zero_grad();
      const double loss = model.train_step(idx.graphs, idx.pairs, idx.targets, dropout_rng);
      if (!std::isfinite(loss))
        throw NumericalError("train_model: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batches));
      nn::adamw_step(params, state, opt);
      loss_sum += loss;
      ++batches;
    }
    res.train_loss.push_back(loss_sum / std::max(1, batches));

    const double val = evaluate_mse(model, data.val, inputs);
    if (!std::isfinite(val))
      throw NumericalError("train_model: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    res.val_mse.push_back(val);
    if (val < best_val) {
      best_val = val;
      res.best = model;
      res.best_epoch = epoch;
    }
    opt.lr = sched.step(val, opt.lr);
  }
  return res;
}

/// Eval-mode scores of each donor for one acceptor.
inline std::vector<double> predict_scores(const TransferModel& model, const Graph& acceptor,
                                          const std::vector<Graph>& donors) {
  std::vector<GraphInput> inputs;
  inputs.reserve(donors.size() + 1);
  inputs.push_back(model.input_for(acceptor));
  for (const auto& d : donors) inputs.push_back(model.input_for(d));
  std::vector<const GraphInput*> ptrs;
  for (const auto& in : inputs) ptrs.push_back(&in);
  std::vector<PairIndex> pairs;
  for (std::size_t j = 0; j < donors.size(); ++j)
    pairs.push_back({0, static_cast<int>(j) + 1});
  if (pairs.empty()) return {};
  const Eigen::VectorXd s = model.predict_pairs(ptrs, pairs);
  return {s.data(), s.data() + s.size()};
}

// ---------------------------------------------------------------------------
// checkpoint format
//
//   qxfer-checkpoint 1
//   variant <name>
//   model <key> <value>          (ModelConfig)
//   train <key> <value>          (TrainConfig)
//   scaler_mean v1 .. v6
//   scaler_std  v1 .. v6
//   array <name> <rows> <cols>
//   <rows*cols values, row-major, 17 significant digits>
//   end

namespace detail {

inline void write_array(std::ostream& os, const std::string& name, const Mat& m) {
  os << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      os << buf << ((c + 1 == m.cols()) ? '\n' : ' ');
    }
}

inline std::vector<std::pair<std::string, Mat*>> named_state(TransferModel& m) {
  std::vector<std::pair<std::string, Mat*>> out;
  for (auto* p : m.parameters()) out.emplace_back(p->name, &p->value);
  return out;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const TransferModel& model_in,
                            const TrainConfig& tcfg) {
  TransferModel model = model_in;
  const auto& mc = model.cfg;
  os << "qxfer-checkpoint 1\n";
  os << "variant " << to_string(mc.variant) << '\n';
  os << "model hidden " << mc.hidden << "\nmodel d_graph " << mc.d_graph
     << "\nmodel d_cop " << mc.d_cop << "\nmodel fcn_width " << mc.fcn_width
     << "\nmodel gnn_blocks " << mc.gnn_blocks << "\nmodel fcn_blocks " << mc.fcn_blocks
     << "\nmodel dropout " << mc.dropout << "\nmodel bn_momentum " << mc.bn_momentum << '\n';
  os << "train epochs " << tcfg.epochs << "\ntrain batch_size " << tcfg.batch_size
     << "\ntrain lr " << tcfg.lr << "\ntrain plateau_factor " << tcfg.plateau_factor
     << "\ntrain plateau_patience " << tcfg.plateau_patience << "\ntrain weight_decay "
     << tcfg.weight_decay << "\ntrain dropout " << tcfg.dropout << "\ntrain seed "
     << tcfg.seed << '\n';
  char buf[40];
  os << "scaler_mean";
  for (double x : model.scaler.mean) {
    std::snprintf(buf, sizeof buf, " %.17g", x);
    os << buf;
  }
  os << "\nscaler_std";
  for (double x : model.scaler.stddev) {
    std::snprintf(buf, sizeof buf, " %.17g", x);
    os << buf;
  }
  os << '\n';
  for (auto& [name, m] : detail::named_state(model)) detail::write_array(os, name, *m);
  if (model.uses_gnn()) {
    for (std::size_t l = 0; l < model.encoder.norms.size(); ++l) {
      const auto& bn = model.encoder.norms[l];
      const std::string base = "enc.block" + std::to_string(l) + ".bn";
      detail::write_array(os, base + ".running_mean", bn.running_mean);
      detail::write_array(os, base + ".running_var", bn.running_var);
    }
  }
  for (const auto& [id, v] : model.fixed)
    detail::write_array(os, "g2v:" + id,
                        Eigen::Map<const Mat>(v.data(), 1, static_cast<Eigen::Index>(v.size())));
  os << "end\n";
}

struct LoadedCheckpoint {
  TransferModel model;
  TrainConfig train;
};

inline LoadedCheckpoint load_checkpoint(std::istream& is) {
  std::string line, word;
  if (!std::getline(is, line) || line != "qxfer-checkpoint 1")
    throw FormatError("checkpoint: bad header");
  ModelConfig mc;
  TrainConfig tc;
  FeatureScaler scaler;
  std::map<std::string, Mat> arrays;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    ss >> word;
    if (word == "end") break;
    if (word == "variant") {
      ss >> word;
      mc.variant = encoder_from_string(word);
    } else if (word == "model") {
      std::string k;
      double v;
      ss >> k >> v;
      if (k == "hidden") mc.hidden = static_cast<int>(v);
      else if (k == "d_graph") mc.d_graph = static_cast<int>(v);
      else if (k == "d_cop") mc.d_cop = static_cast<int>(v);
      else if (k == "fcn_width") mc.fcn_width = static_cast<int>(v);
      else if (k == "gnn_blocks") mc.gnn_blocks = static_cast<int>(v);
      else if (k == "fcn_blocks") mc.fcn_blocks = static_cast<int>(v);
      else if (k == "dropout") mc.dropout = v;
      else if (k == "bn_momentum") mc.bn_momentum = v;
    } else if (word == "train") {
      std::string k, v;
      ss >> k >> v;
      if (k == "epochs") tc.epochs = std::stoi(v);
      else if (k == "batch_size") tc.batch_size = std::stoi(v);
      else if (k == "lr") tc.lr = std::stod(v);
      else if (k == "plateau_factor") tc.plateau_factor = std::stod(v);
      else if (k == "plateau_patience") tc.plateau_patience = std::stoi(v);
      else if (k == "weight_decay") tc.weight_decay = std::stod(v);
      else if (k == "dropout") tc.dropout = std::stod(v);
      else if (k == "seed") tc.seed = std::stoull(v);
    } else if (word == "scaler_mean") {
      for (double& x : scaler.mean) ss >> x;
    } else if (word == "scaler_std") {
      for (double& x : scaler.stddev) ss >> x;
    } else if (word == "array") {
      std::string name;
      Eigen::Index r, c;
      ss >> name >> r >> c;
      Mat m(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        if (!std::getline(is, line)) throw FormatError("checkpoint: truncated array");
        std::stringstream row(line);
        for (Eigen::Index j = 0; j < c; ++j)
          if (!(row >> m(i, j))) throw FormatError("checkpoint: short array row");
      }
      arrays[name] = std::move(m);
    } else {
      throw FormatError("checkpoint: unknown record '" + word + "'");
    }
  }

  LoadedCheckpoint out{TransferModel(mc, 0), tc};
  out.model.scaler = scaler;
  for (auto& [name, m] : detail::named_state(out.model)) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("checkpoint: missing array " + name);
    if (it->second.rows() != m->rows() || it->second.cols() != m->cols())
      throw FormatError("checkpoint: shape mismatch for " + name);
    *m = it->second;
  }
  if (out.model.uses_gnn()) {
    for (std::size_t l = 0; l < out.model.encoder.norms.size(); ++l) {
      auto& bn = out.model.encoder.norms[l];
      const std::string base = "enc.block" + std::to_string(l) + ".bn";
      bn.running_mean = arrays.at(base + ".running_mean");
      bn.running_var = arrays.at(base + ".running_var");
    }
  }
  for (const auto& [name, m] : arrays)
    if (name.rfind("g2v:", 0) == 0)
      out.model.fixed[name.substr(4)] = EmbeddingVector(m.data(), m.data() + m.size());
  for (auto* p : out.model.parameters()) p->grad.setZero(p->value.rows(), p->value.cols());
  return out;
}

}  // namespace qxfer
