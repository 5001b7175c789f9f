#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "musg/musgconv.hpp"
#include "musg/score_graph.hpp"

namespace musg {

// Node ids sorted by (onset, pitch, id). Position in this list is ind(node).
std::vector<int> order_nodes(const ScoreGraph& graph);

// All nodes when n_nodes <= k, otherwise k consecutive nodes in ind order
// starting at a uniform position in [0, n_nodes - k]. Returned in ind order.
std::vector<int> sample_window(const ScoreGraph& graph, int k, std::mt19937_64& rng);

// Keeps edges with both endpoints in `nodes` (in their original order) and
// relabels the kept nodes densely in ind order.
ScoreGraph induce_subgraph(const ScoreGraph& graph, std::span<const int> nodes);

struct Batch {
  ScoreGraph graph;  // disjoint union, node ids offset per subgraph
  std::vector<std::pair<int, int>> ranges;  // [begin, end) per subgraph
  std::vector<std::string> sources;
  std::vector<std::optional<int>> class_labels;
  EdgeFeatureSet edge_features;  // normalized per subgraph
};

// Disjoint union of already-induced subgraphs. Layer-0 edge features are
// computed and normalized on each subgraph before merging.
Batch assemble_batch(const std::vector<ScoreGraph>& subgraphs, const MusGConvConfig& cfg);

// Draws `b` pieces with replacement from `pool`, samples one window of size
// `k` from each and assembles them.
Batch make_batch(const std::vector<ScoreGraph>& pool, int k, int b, std::mt19937_64& rng,
                 const MusGConvConfig& cfg);

// ceil(total_nodes / (b * k)), at least 1 for a non-empty pool.
int batches_per_epoch(const std::vector<ScoreGraph>& pool, int k, int b);

}  // namespace musg
