#pragma once

// Loop-by-loop re-implementation of the encoder that reads every weight by
// name from the parameter store. Shares no code with the library beyond the
// graph and feature containers.

#include <cmath>
#include <string>
#include <vector>

#include "musg/musgconv.hpp"

namespace musg::test {

using Mat = std::vector<std::vector<double>>;

inline const Tensor<double>& weight(const nn::ParameterStore<double>& store, const std::string& name) {
  const auto* p = store.find(name);
  if (!p) throw std::runtime_error("reference encoder: missing parameter " + name);
  return p->var.value();
}

// x W^T (+ b), one row at a time.
inline std::vector<double> affine(const std::vector<double>& x, const Tensor<double>& w, const Tensor<double>* b) {
  std::vector<double> y(w.rows(), 0.0);
  for (std::size_t o = 0; o < w.rows(); ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.cols(); ++i) acc += x.at(i) * w(o, i);
    y[o] = acc + (b ? (*b)(0, o) : 0.0);
  }
  return y;
}

inline std::vector<double> layer_norm_row(std::vector<double> x, const Tensor<double>& g, const Tensor<double>& b) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double s = std::sqrt(var + 1e-5);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = (x[k] - mean) / s * g(0, k) + b(0, k);
  return x;
}

inline Mat reference_forward(const ScoreGraph& g, const EdgeFeatureSet& f, const nn::ParameterStore<double>& store,
                             const MusGConvConfig& cfg, const std::string& prefix = "encoder") {
  const std::size_t n = static_cast<std::size_t>(g.n_nodes);
  Mat h(n);
  for (std::size_t v = 0; v < n; ++v) h[v].assign(g.node_features.row(v).begin(), g.node_features.row(v).end());

  std::array<Mat, kNumRelations> e;
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    for (std::size_t k = 0; k < g.edges[r].size(); ++k) {
      const auto [src, dst] = g.edges[r][k];
      std::vector<double> row;
      if (cfg.use_manual_edge_input) {
        for (int c = 0; c < 3; ++c) row.push_back(f.distances[r](k, c));
        if (cfg.use_pcint) {
          const auto& table = weight(store, prefix + ".pcint_embedding");
          for (std::size_t c = 0; c < table.cols(); ++c) row.push_back(table(f.pc_intervals[r][k], c));
        }
      } else {
        for (std::size_t c = 0; c < h[0].size(); ++c) row.push_back(std::abs(h[src][c] - h[dst][c]));
      }
      e[r].push_back(row);
    }
  }

  for (int l = 0; l < cfg.n_layers; ++l) {
    Mat total(n, std::vector<double>(cfg.hidden_dim, 0.0));
    std::array<Mat, kNumRelations> edge_hidden;
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      const std::string base =
          prefix + ".layer" + std::to_string(l) + "." + std::string(relation_name(kAllRelations[r])) + ".";
      const auto& w_src = weight(store, base + "w_src.weight");
      const auto& w_node = weight(store, base + "w_node.weight");
      Mat agg(n, std::vector<double>(cfg.message_dim(), 0.0));
      for (std::size_t k = 0; k < g.edges[r].size(); ++k) {
        const auto [src, dst] = g.edges[r][k];
        auto hidden = affine(e[r][k], weight(store, base + "edge_mlp.fc1.weight"), &weight(store, base + "edge_mlp.fc1.bias"));
        for (double& x : hidden) x = std::max(x, 0.0);
        hidden = affine(hidden, weight(store, base + "edge_mlp.fc2.weight"), &weight(store, base + "edge_mlp.fc2.bias"));
        hidden = layer_norm_row(hidden, weight(store, base + "edge_norm.gain"), weight(store, base + "edge_norm.bias"));
        edge_hidden[r].push_back(hidden);
        auto projected = affine(h[src], w_src, nullptr);
        std::vector<double> msg;
        if (cfg.edge_op == EdgeOp::Concat) {
          msg = projected;
          msg.insert(msg.end(), hidden.begin(), hidden.end());
        } else {
          for (std::size_t c = 0; c < projected.size(); ++c) msg.push_back(projected[c] * hidden[c]);
        }
        for (std::size_t c = 0; c < msg.size(); ++c) agg[dst][c] += msg[c];
      }
      for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> in = h[v];
        in.insert(in.end(), agg[v].begin(), agg[v].end());
        auto out = affine(in, w_node, nullptr);
        for (std::size_t c = 0; c < out.size(); ++c) total[v][c] += out[c];
      }
    }
    for (auto& row : total)
      for (double& x : row) x = std::max(x / static_cast<double>(kNumRelations), 0.0);
    h = total;
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      if (cfg.variant == Variant::EdgeForwarding) {
        e[r] = edge_hidden[r];
        continue;
      }
      for (std::size_t k = 0; k < g.edges[r].size(); ++k) {
        const auto [src, dst] = g.edges[r][k];
        e[r][k].assign(cfg.hidden_dim, 0.0);
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) e[r][k][c] = std::abs(h[src][c] - h[dst][c]);
      }
    }
  }
  return h;
}

}  // namespace musg::test
