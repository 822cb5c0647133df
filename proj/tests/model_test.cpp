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

#include <numeric>
#include <sstream>

#include "qxfer/dataset.hpp"
#include "qxfer/model.hpp"

namespace qxfer {
namespace {

using nn::Mat;

ModelConfig small_config(EncoderVariant v) {
  ModelConfig c;
  c.variant = v;
  c.hidden = 5;
  c.d_graph = 4;
  c.d_cop = 3;
  c.fcn_width = 6;
  c.gnn_blocks = 2;
  c.fcn_blocks = 2;
  c.dropout = 0.0;
  return c;
}

std::vector<Graph> some_graphs() {
  return {generate_graph(ErParams{0.5}, 6, 1, "g0"), cycle_graph(5, "g1"),
          star_graph(4, "g2"), generate_graph(BaParams{2}, 7, 2, "g3")};
}

double close_rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

TEST(Model, OutputShapesAtDefaultWidths) {
  for (auto v : {EncoderVariant::GCN, EncoderVariant::GraphConv, EncoderVariant::ChebConv}) {
    ModelConfig cfg;
    cfg.variant = v;
    TransferModel m(cfg, 3);
    auto gs = some_graphs();
    std::vector<GraphInput> in;
    for (const auto& g : gs) in.push_back(m.input_for(g));
    std::vector<const GraphInput*> ptrs;
    for (const auto& x : in) ptrs.push_back(&x);
    Mat emb = m.embed_eval(ptrs);
    EXPECT_EQ(emb.rows(), 4);
    EXPECT_EQ(emb.cols(), 128);
    EXPECT_EQ(m.context.value.rows(), 2);
    EXPECT_EQ(m.context.value.cols(), 16);
    Mat x = m.pair_inputs(emb, {{0, 1}, {2, 3}, {1, 1}});
    EXPECT_EQ(x.cols(), 288);
    EXPECT_EQ(m.head.forward(x, nullptr).size(), 3);
    // layout: acceptor, MIS context, donor, MaxCut context
    EXPECT_EQ(Mat(x.row(1).segment(0, 128)), Mat(emb.row(2)));
    EXPECT_EQ(Mat(x.row(1).segment(128, 16)), Mat(m.context.value.row(1)));
    EXPECT_EQ(Mat(x.row(1).segment(144, 128)), Mat(emb.row(3)));
    EXPECT_EQ(Mat(x.row(1).segment(272, 16)), Mat(m.context.value.row(0)));
  }
}

TEST(Model, EmbeddingIsPermutationInvariant) {
  for (auto v : {EncoderVariant::GCN, EncoderVariant::GraphConv, EncoderVariant::ChebConv}) {
    ModelConfig cfg;
    cfg.variant = v;
    TransferModel m(cfg, 5);
    Graph g = generate_graph(ErParams{0.5}, 9, 4, "g");
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(8);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto a = m.input_for(g);
    auto b = m.input_for(permute_graph(g, perm));
    Mat ea = m.embed_eval({&a});
    Mat eb = m.embed_eval({&b});
    EXPECT_LT((ea - eb).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Model, SingleNodeGraphConvByHand) {
  ModelConfig cfg = small_config(EncoderVariant::GraphConv);
  cfg.gnn_blocks = 1;
  TransferModel m(cfg, 1);
  Graph g = make_graph("one", 1, {});
  GraphInput in = m.input_for(g);
  in.features << 1, 2, 3, 4, 5, 6;
  // no neighbours: z = x W_root + b; eval BN with default stats is ~identity
  const auto& l = m.encoder.layers[0];
  Mat z = in.features * l.root.value + l.prop.b.value;
  Mat h = (z / std::sqrt(1.0 + 1e-5)).cwiseMax(0.0);
  Mat expected = h * m.encoder.proj.w.value + m.encoder.proj.b.value;
  EXPECT_LT((m.embed_eval({&in}) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Model, PropagationOperators) {
  Graph p = path_graph(3);
  auto dense = [&](EncoderVariant v) {
    Mat m = Mat::Zero(3, 3);
    for (const auto& t : propagation_operator(p, v)) m(t.row(), t.col()) += t.value();
    return m;
  };
  Mat gcn = dense(EncoderVariant::GCN);
  EXPECT_NEAR(gcn(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(gcn(1, 1), 1.0 / 3, 1e-15);
  EXPECT_NEAR(gcn(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  Mat cheb = dense(EncoderVariant::ChebConv);
  EXPECT_NEAR(cheb(0, 1), -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(cheb(0, 0), 0.0);
  Mat gc = dense(EncoderVariant::GraphConv);
  EXPECT_EQ(gc.sum(), 4.0);
}

TEST(Head, ZeroOutputLayerPredictsZero) {
  ModelConfig cfg;
  Rng rng(2);
  Head h(cfg, rng);
  h.out.w.value.setZero();
  h.out.b.value.setZero();
  Mat x = nn::uniform_init(5, 288, 3.0, rng);
  EXPECT_EQ(h.forward(x, nullptr), Eigen::VectorXd::Zero(5));
}

// Independent loop implementation of the residual head.
double loop_head(const Head& h, const std::vector<double>& x) {
  auto affine = [](const nn::Linear& l, const std::vector<double>& in) {
    std::vector<double> out(static_cast<std::size_t>(l.w.value.cols()));
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = l.b.value(0, static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < in.size(); ++i)
        s += in[i] * l.w.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
      out[o] = s;
    }
    return out;
  };
  auto a = affine(h.input, x);
  for (std::size_t j = 0; j < h.blocks.size(); ++j) {
    auto u = affine(h.blocks[j], a);
    double mean = 0, var = 0;
    for (double v : u) mean += v;
    mean /= u.size();
    for (double v : u) var += (v - mean) * (v - mean);
    var /= u.size();
    for (std::size_t c = 0; c < u.size(); ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      double ln = (u[c] - mean) / std::sqrt(var + 1e-5) * h.norms[j].gamma.value(0, cc) +
                  h.norms[j].beta.value(0, cc);
      a[c] += std::max(0.0, ln);
    }
  }
  return affine(h.out, a)[0];
}

TEST(Head, MatchesLoopOracle) {
  ModelConfig cfg;
  Rng rng(4);
  Head h(cfg, rng);
  for (auto& n : h.norms) {
    n.gamma.value = nn::uniform_init(1, 256, 1.0, rng).array() + 1.0;
    n.beta.value = nn::uniform_init(1, 256, 0.5, rng);
  }
  Mat x = nn::uniform_init(3, 288, 1.0, rng);
  auto y = h.forward(x, nullptr);
  for (int r = 0; r < 3; ++r) {
    std::vector<double> row(288);
    for (int c = 0; c < 288; ++c) row[c] = x(r, c);
    EXPECT_NEAR(y(r), loop_head(h, row), 1e-10);
  }
}

TEST(Loss, MseExamplesAndGradient) {
  Eigen::VectorXd p(3), t(3);
  p << 1, 2, 3;
  t << 1, 2, 5;
  EXPECT_DOUBLE_EQ(nn::mse_loss(p, t), 4.0 / 3);
  EXPECT_DOUBLE_EQ(nn::mse_loss(t, t), 0.0);
  auto g = nn::mse_grad(p, t);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd q = p;
    q(i) += 1e-6;
    Eigen::VectorXd r = p;
    r(i) -= 1e-6;
    EXPECT_NEAR(g(i), (nn::mse_loss(q, t) - nn::mse_loss(r, t)) / 2e-6, 1e-6);
  }
  EXPECT_THROW(nn::mse_loss(Eigen::VectorXd(0), Eigen::VectorXd(0)), ValidationError);
  EXPECT_THROW(nn::mse_loss(p, Eigen::VectorXd(2)), ValidationError);
}

TEST(Optimizer, AdamWFirstStepAndDecay) {
  nn::Param p("p", Mat::Constant(1, 2, 1.0));
  p.grad << 0.5, -2.0;
  nn::AdamWState st;
  nn::AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.01};
  nn::adamw_step({&p}, st, cfg);
  // decay 1 -> 0.999, then the bias-corrected first step moves by lr * sign(g)
  EXPECT_NEAR(p.value(0, 0), 0.999 - 0.1, 1e-7);
  EXPECT_NEAR(p.value(0, 1), 0.999 + 0.1, 1e-7);

  nn::Param q("q", Mat::Constant(1, 1, 2.0));
  nn::AdamWState s2;
  nn::adamw_step({&q}, s2, cfg);  // zero gradient: decay only
  EXPECT_NEAR(q.value(0, 0), 2.0 * (1 - 0.1 * 0.01), 1e-15);
}

TEST(Scheduler, PlateauReducesAfterPatience) {
  nn::PlateauScheduler s{0.05, 2, 1e-4};
  double lr = 1.0;
  lr = s.step(1.0, lr);
  EXPECT_EQ(lr, 1.0);
  lr = s.step(1.0, lr);
  lr = s.step(0.99995, lr);  // within threshold: still bad
  EXPECT_EQ(lr, 1.0);
  lr = s.step(1.0, lr);
  EXPECT_DOUBLE_EQ(lr, 0.05);
  lr = s.step(0.5, lr);
  EXPECT_DOUBLE_EQ(lr, 0.05);
}

TEST(Layers, DropoutFractionAndScaling) {
  Rng rng(9);
  Mat m = nn::dropout_mask(200, 100, 0.2, rng);
  const double zeros = (m.array() == 0.0).count() / 20000.0;
  EXPECT_GE(zeros, 0.17);
  EXPECT_LE(zeros, 0.23);
  EXPECT_EQ(m.maxCoeff(), 1.25);
  EXPECT_EQ(nn::dropout_mask(3, 3, 0.0, rng), Mat::Ones(3, 3));
}

TEST(Layers, BatchNormEvalIsDeterministicAndTrainUpdatesStats) {
  Rng rng(1);
  nn::BatchNorm bn("bn", 3, 0.1);
  Mat x = nn::uniform_init(10, 3, 2.0, rng);
  Mat a = bn.eval_forward(x);
  EXPECT_EQ(a, bn.eval_forward(x));
  EXPECT_EQ(a, bn.forward(x, nn::Mode::Eval, nullptr));
  Mat y = bn.forward(x, nn::Mode::Train, nullptr);
  EXPECT_LT(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(bn.running_mean(0), 0.1 * x.col(0).mean(), 1e-15);
}

// Finite differences of the full train-mode loss (dropout off) against the
// analytic gradient, on sampled entries of every parameter tensor.
TEST(Model, EndToEndGradientCheck) {
  for (auto v : {EncoderVariant::GCN, EncoderVariant::GraphConv, EncoderVariant::ChebConv,
                 EncoderVariant::G2V}) {
    SCOPED_TRACE(to_string(v));
    TransferModel model(small_config(v), 17);
    auto gs = some_graphs();
    Rng erng(3);
    for (const auto& g : gs) {
      auto e = nn::uniform_init(1, 4, 1.0, erng);
      model.fixed[g.id] = EmbeddingVector(e.data(), e.data() + 4);
    }
    std::vector<GraphInput> in;
    for (const auto& g : gs) in.push_back(model.input_for(g));
    std::vector<const GraphInput*> ptrs;
    for (const auto& x : in) ptrs.push_back(&x);
    std::vector<PairIndex> pairs{{0, 1}, {2, 3}, {1, 0}, {3, 3}, {2, 1}};
    Eigen::VectorXd y(5);
    y << 0.3, 0.7, 0.1, 0.9, 0.5;

    auto loss_of = [&](const TransferModel& m) {
      TransferModel c = m;
      Rng r(0);
      return c.train_step(ptrs, pairs, y, r);
    };
    TransferModel grad_model = model;
    grad_model.zero_grad();
    Rng r(0);
    grad_model.train_step(ptrs, pairs, y, r);

    auto params = model.parameters();
    auto grads = grad_model.parameters();
    Rng pick(5);
    int checked = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto size = params[i]->value.size();
      std::uniform_int_distribution<Eigen::Index> idx(0, size - 1);
      for (int s = 0; s < 3; ++s) {
        const Eigen::Index k = idx(pick);
        TransferModel plus = model, minus = model;
        plus.parameters()[i]->value.data()[k] += 1e-5;
        minus.parameters()[i]->value.data()[k] -= 1e-5;
        const double fd = (loss_of(plus) - loss_of(minus)) / 2e-5;
        const double an = grads[i]->grad.data()[k];
        if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
        EXPECT_LT(close_rel(an, fd), 1e-4) << params[i]->name << "[" << k << "] "
                                           << an << " vs " << fd;
        ++checked;
      }
    }
    EXPECT_GT(checked, 10);
  }
}

TrainingData synthetic_data(int count, std::uint64_t seed) {
  // Target is a smooth function of both graphs' edge densities.
  TrainingData d;
  Rng rng(seed);
  std::uniform_real_distribution<double> p(0.2, 0.8);
  std::vector<std::string> acc, don;
  for (int i = 0; i < count; ++i) {
    Graph a = generate_graph(ErParams{p(rng)}, 8, seed * 100 + i, "A" + std::to_string(i));
    Graph b = generate_graph(ErParams{p(rng)}, 8, seed * 100 + 50 + i, "D" + std::to_string(i));
    acc.push_back(a.id);
    don.push_back(b.id);
    d.graphs.emplace(a.id, a);
    d.graphs.emplace(b.id, b);
  }
  auto density = [&](const std::string& id) {
    const auto& g = d.graphs.at(id);
    return 2.0 * g.edges.size() / (g.n * (g.n - 1.0));
  };
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < count; ++j) {
      TransferTriple t{acc[i], don[j], 0.25 + 0.3 * density(acc[i]) + 0.2 * density(don[j])};
      (i < count * 3 / 4 ? d.train : d.val).push_back(t);
    }
  return d;
}

TEST(Training, LearnsSyntheticTargetAndIsDeterministic) {
  auto data = synthetic_data(24, 3);
  ModelConfig mc;
  mc.hidden = 16;
  mc.d_graph = 16;
  mc.fcn_width = 32;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.lr = 1e-3;
  tc.dropout = 0.0;
  tc.seed = 7;
  auto res = train_model(data, mc, tc);
  ASSERT_EQ(res.val_mse.size(), 20u);
  ASSERT_EQ(res.lr.size(), 20u);
  const double best = *std::min_element(res.val_mse.begin(), res.val_mse.end());
  EXPECT_LT(best, 1e-3);
  EXPECT_EQ(res.val_mse[res.best_epoch], best);
  EXPECT_LT(best, res.initial_val_mse);
  const auto inputs = build_inputs(res.best, data.graphs);
  EXPECT_DOUBLE_EQ(evaluate_mse(res.best, data.val, inputs), best);

  auto again = train_model(data, mc, tc);
  EXPECT_EQ(again.val_mse, res.val_mse);
}

TEST(Training, RejectsBadInput) {
  auto data = synthetic_data(4, 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 0;
  EXPECT_THROW(train_model(data, ModelConfig{}, tc), ParameterError);
  data.val.clear();
  tc.batch_size = 4;
  EXPECT_THROW(train_model(data, ModelConfig{}, tc), ValidationError);
}

TEST(Predict, ScoresAndCheckpointRoundTrip) {
  for (auto v : {EncoderVariant::ChebConv, EncoderVariant::G2V}) {
    auto data = synthetic_data(4, 2);
    for (const auto& [id, g] : data.graphs) data.embeddings[id] = EmbeddingVector(128, 0.01 * g.edges.size());
    ModelConfig mc;
    mc.variant = v;
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    auto res = train_model(data, mc, tc);
    const Graph& acc = data.graphs.at("A0");
    std::vector<Graph> donors{data.graphs.at("D0"), data.graphs.at("D1"), data.graphs.at("D2")};
    auto s = predict_scores(res.best, acc, donors);
    ASSERT_EQ(s.size(), 3u);
    for (double x : s) EXPECT_TRUE(std::isfinite(x));
    EXPECT_TRUE(predict_scores(res.best, acc, {}).empty());

    std::stringstream ss;
    save_checkpoint(ss, res.best, tc);
    auto loaded = load_checkpoint(ss);
    EXPECT_EQ(loaded.model.cfg.variant, v);
    EXPECT_EQ(loaded.train.batch_size, 4);
    EXPECT_EQ(predict_scores(loaded.model, acc, donors), s);

    std::stringstream bad("qxfer-checkpoint 9\n");
    EXPECT_THROW(load_checkpoint(bad), FormatError);
  }
}

}  // namespace
}  // namespace qxfer
