#include "musg/gradcheck_suite.hpp"

#include <memory>
#include <random>

#include "musg/musgconv.hpp"
#include "musg/tasks.hpp"

namespace musg {

using ad::Var;

namespace {

using D = double;

Tensor<D> uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<D> t(rows, cols);
  for (auto& x : t.data()) x = u(rng);
  return t;
}

// sum(y * w) for a fixed random w: every output coordinate reaches the loss.
Var<D> probe(const Var<D>& y, const Tensor<D>& w) { return ad::sum(ad::mul(y, Var<D>::constant(w))); }

// Every relation occurs, including a bipartite silence and a chord.
ScoreGraph suite_graph() {
  Score s;
  s.divisions_per_quarter = 4;
  const int rows[][4] = {{0, 4, 60, 0}, {0, 2, 64, 1}, {2, 2, 67, 1}, {4, 4, 62, 0}, {4, 1, 55, 2},
                         {8, 4, 72, 0}, {8, 4, 52, 2}, {13, 2, 48, 1}, {13, 3, 76, 0}};
  for (const auto& r : rows)
    s.notes.push_back({r[0], r[1], r[2], r[3], static_cast<int>(s.notes.size())});
  normalize(s);
  return build_graph(s);
}

MusGConvConfig suite_config(Variant v, EdgeOp op) {
  MusGConvConfig cfg;
  cfg.hidden_dim = 4;
  cfg.pc_embed_dim = 3;
  cfg.variant = v;
  cfg.edge_op = op;
  return cfg;
}

std::string config_name(Variant v, EdgeOp op) {
  return std::string(v == Variant::Plain ? "plain" : "edge_forwarding") + "/" +
         (op == EdgeOp::Concat ? "concat" : "multiply");
}

}  // namespace

std::vector<GradCheckItem> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opt) {
  std::vector<GradCheckItem> items;
  std::mt19937_64 rng(seed);
  const ScoreGraph graph = suite_graph();

  {
    nn::ParameterStore<D> store;
    nn::Linear<D> lin(store, "linear", 5, 3, true, rng);
    Var<D> x = store.add("input", uniform(4, 5, rng));
    const Tensor<D> w = uniform(4, 3, rng);
    items.push_back({"linear", grad_check([&] { return probe(lin(x), w); }, store.params(), opt)});
  }
  {
    nn::ParameterStore<D> store;
    nn::LayerNorm<D> ln(store, "layer_norm", 5);
    store.params()[0].var.mutable_value() = uniform(1, 5, rng);
    store.params()[1].var.mutable_value() = uniform(1, 5, rng);
    Var<D> x = store.add("input", uniform(4, 5, rng));
    const Tensor<D> w = uniform(4, 5, rng);
    items.push_back({"layer_norm", grad_check([&] { return probe(ln(x), w); }, store.params(), opt)});
  }
  {
    nn::ParameterStore<D> store;
    Var<D> table = nn::make_embedding_table(store, "embedding", 12, 3, rng);
    const std::vector<int> idx = {0, 7, 7, 11, 4};
    const Tensor<D> w = uniform(5, 3, rng);
    items.push_back({"embedding", grad_check([&] { return probe(ad::embedding(table, idx), w); }, store.params(), opt)});
  }
  {
    nn::ParameterStore<D> store;
    Var<D> msgs = store.add("messages", uniform(6, 3, rng));
    const std::vector<int> dst = {3, 0, 0, 3, 1, 3};  // node 2 receives nothing
    const Tensor<D> w = uniform(4, 3, rng);
    items.push_back(
        {"scatter_sum", grad_check([&] { return probe(ad::scatter_sum(msgs, dst, 4), w); }, store.params(), opt)});
  }
  {
    nn::ParameterStore<D> store;
    nn::Mlp2<D> mlp(store, "edge_mlp", 4, 3, 3, rng);
    nn::LayerNorm<D> ln(store, "edge_norm", 3);
    Var<D> e = store.add("input", uniform(5, 4, rng));
    const Tensor<D> w = uniform(5, 3, rng);
    items.push_back({"edge_mlp", grad_check([&] { return probe(ln(mlp(e)), w); }, store.params(), opt)});
  }
  for (Variant v : {Variant::Plain, Variant::EdgeForwarding}) {
    for (EdgeOp op : {EdgeOp::Concat, EdgeOp::Multiply}) {
      const MusGConvConfig cfg = suite_config(v, op);
      const EdgeFeatureSet f = compute_edge_features(graph, cfg);
      {
        nn::ParameterStore<D> store;
        MusGConvConfig one = cfg;
        one.n_layers = 1;
        Encoder<D> enc(one, store, rng);
        const Tensor<D> w = uniform(graph.n_nodes, cfg.hidden_dim, rng);
        items.push_back({"hetero_layer " + config_name(v, op),
                         grad_check([&] { return probe(enc.forward(graph, f), w); }, store.params(), opt)});
      }
      nn::ParameterStore<D> store;
      Encoder<D> enc(cfg, store, rng);
      const Tensor<D> w = uniform(graph.n_nodes, cfg.hidden_dim, rng);
      items.push_back({"encoder " + config_name(v, op),
                       grad_check([&] { return probe(enc.forward(graph, f), w); }, store.params(), opt)});
    }
  }
  {
    const MusGConvConfig cfg = suite_config(Variant::EdgeForwarding, EdgeOp::Concat);
    VoiceSeparationModel<D> model(cfg, rng());
    const EdgeFeatureSet f = compute_edge_features(graph, cfg);
    const auto pairs = candidate_pairs(graph, std::nullopt);
    const auto links = ground_truth_links(graph);
    std::vector<D> y(pairs.size(), 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      for (const auto& l : links)
        if (l == pairs[i]) y[i] = 1.0;
    items.push_back({"link_head + encoder",
                     grad_check([&] { return ad::bce_with_logits(model.head(model.encoder.forward(graph, f), pairs), y); },
                                model.store.params(), opt)});
  }
  {
    const MusGConvConfig cfg = suite_config(Variant::Plain, EdgeOp::Concat);
    ComposerModel<D> model(cfg, 3, rng());
    const EdgeFeatureSet f = compute_edge_features(graph, cfg);
    const std::vector<std::pair<int, int>> ranges = {{0, 4}, {4, graph.n_nodes}};
    const std::vector<int> labels = {2, 0};
    items.push_back({"composer_head + encoder",
                     grad_check([&] { return ad::cross_entropy(model.head(model.encoder.forward(graph, f), ranges), labels); },
                                model.store.params(), opt)});
  }
  return items;
}

}  // namespace musg
