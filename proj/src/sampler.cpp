#include "musg/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace musg {

std::vector<int> order_nodes(const ScoreGraph& graph) {
  std::vector<int> order(graph.n_nodes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& na = graph.notes[a];
    const auto& nb = graph.notes[b];
    return std::tie(na.onset, na.pitch) < std::tie(nb.onset, nb.pitch);
  });
  return order;
}

std::vector<int> sample_window(const ScoreGraph& graph, int k, std::mt19937_64& rng) {
  if (k < 1) throw std::invalid_argument("sample_window: k must be at least 1");
  std::vector<int> order = order_nodes(graph);
  if (graph.n_nodes <= k) return order;
  std::uniform_int_distribution<int> start_dist(0, graph.n_nodes - k);
  const int s = start_dist(rng);
  return std::vector<int>(order.begin() + s, order.begin() + s + k);
}

ScoreGraph induce_subgraph(const ScoreGraph& graph, std::span<const int> nodes) {
  std::vector<int> order = order_nodes(graph);
  std::vector<int> rank(graph.n_nodes);
  for (int i = 0; i < graph.n_nodes; ++i) rank[order[i]] = i;

  std::vector<int> kept(nodes.begin(), nodes.end());
  for (int v : kept)
    if (v < 0 || v >= graph.n_nodes) throw std::out_of_range("induce_subgraph: node id out of range");
  std::sort(kept.begin(), kept.end(), [&](int a, int b) { return rank[a] < rank[b]; });
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());

  std::vector<int> remap(graph.n_nodes, -1);
  for (std::size_t i = 0; i < kept.size(); ++i) remap[kept[i]] = static_cast<int>(i);

  ScoreGraph sub;
  sub.n_nodes = static_cast<int>(kept.size());
  sub.source_name = graph.source_name;
  sub.class_label = graph.class_label;
  sub.node_features = Tensor<double>(kept.size(), graph.node_features.cols());
  sub.notes.resize(kept.size());
  sub.bar_ticks.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const int old = kept[i];
    sub.notes[i] = graph.notes[old];
    sub.notes[i].id = static_cast<int>(i);
    sub.bar_ticks[i] = graph.bar_ticks[old];
    auto src = graph.node_features.row(old);
    std::copy(src.begin(), src.end(), sub.node_features.row(i).begin());
  }
  for (std::size_t r = 0; r < kNumRelations; ++r)
    for (const auto& e : graph.edges[r])
      if (remap[e.src] >= 0 && remap[e.dst] >= 0) sub.edges[r].push_back({remap[e.src], remap[e.dst]});
  return sub;
}

Batch assemble_batch(const std::vector<ScoreGraph>& subgraphs, const MusGConvConfig& cfg) {
  Batch batch;
  auto& g = batch.graph;
  std::size_t total = 0;
  for (const auto& s : subgraphs) total += s.n_nodes;
  g.n_nodes = static_cast<int>(total);
  g.node_features = Tensor<double>(total, kNodeFeatureDim);
  g.notes.reserve(total);
  g.bar_ticks.reserve(total);
  for (auto& d : batch.edge_features.distances) d = Tensor<double>(0, 3);

  // Per-relation row buffers for the merged distance matrices.
  std::array<std::vector<double>, kNumRelations> dist_rows;
  int offset = 0;
  for (const auto& s : subgraphs) {
    if (s.node_features.cols() != kNodeFeatureDim)
      throw std::invalid_argument("assemble_batch: unexpected node feature width");
    EdgeFeatureSet f = compute_edge_features(s, cfg);
    for (int i = 0; i < s.n_nodes; ++i) {
      NoteEvent n = s.notes[i];
      n.id = offset + i;
      g.notes.push_back(n);
      g.bar_ticks.push_back(s.bar_ticks[i]);
      auto src = s.node_features.row(i);
      std::copy(src.begin(), src.end(), g.node_features.row(offset + i).begin());
    }
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      for (const auto& e : s.edges[r]) g.edges[r].push_back({e.src + offset, e.dst + offset});
      auto data = f.distances[r].data();
      dist_rows[r].insert(dist_rows[r].end(), data.begin(), data.end());
      auto& pc = batch.edge_features.pc_intervals[r];
      pc.insert(pc.end(), f.pc_intervals[r].begin(), f.pc_intervals[r].end());
    }
    batch.ranges.emplace_back(offset, offset + s.n_nodes);
    batch.sources.push_back(s.source_name);
    batch.class_labels.push_back(s.class_label);
    offset += s.n_nodes;
  }
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    const std::size_t m = dist_rows[r].size() / 3;
    batch.edge_features.distances[r] = Tensor<double>(m, 3, std::move(dist_rows[r]));
  }
  return batch;
}

Batch make_batch(const std::vector<ScoreGraph>& pool, int k, int b, std::mt19937_64& rng,
                 const MusGConvConfig& cfg) {
  if (pool.empty()) throw std::invalid_argument("make_batch: empty training set");
  if (b < 1) throw std::invalid_argument("make_batch: b must be at least 1");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<ScoreGraph> subgraphs;
  subgraphs.reserve(b);
  for (int i = 0; i < b; ++i) {
    const ScoreGraph& piece = pool[pick(rng)];
    std::vector<int> window = sample_window(piece, k, rng);
    subgraphs.push_back(induce_subgraph(piece, window));
  }
  return assemble_batch(subgraphs, cfg);
}

int batches_per_epoch(const std::vector<ScoreGraph>& pool, int k, int b) {
  std::size_t total = 0;
  for (const auto& g : pool) total += g.n_nodes;
  const std::size_t per_batch = static_cast<std::size_t>(k) * static_cast<std::size_t>(b);
  return static_cast<int>(std::max<std::size_t>(1, (total + per_batch - 1) / per_batch));
}

}  // namespace musg
