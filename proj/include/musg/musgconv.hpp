#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "musg/nn.hpp"
#include "musg/score_graph.hpp"

namespace musg {

enum class Variant { Plain, EdgeForwarding };
enum class EdgeOp { Concat, Multiply };

struct MusGConvConfig {
  std::size_t in_dim = kNodeFeatureDim;
  std::size_t hidden_dim = 32;
  int n_layers = 2;
  Variant variant = Variant::Plain;
  EdgeOp edge_op = EdgeOp::Concat;
  bool use_pcint = true;
  // Off: layer 0 sees |x_v - x_u| of the raw node features instead of the
  // pitch/time distances.
  bool use_manual_edge_input = true;
  bool signed_distances = false;
  std::size_t pc_embed_dim = 16;

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::size_t layer0_edge_dim() const;
  std::size_t message_dim() const { return edge_op == EdgeOp::Concat ? 2 * hidden_dim : hidden_dim; }
};

inline constexpr int kNumPitchClassIntervals = 12;
inline constexpr double kNormGuard = 1e-12;

// |a - b| mod 12: ignores both octave and direction.
inline int pitch_class_interval(int pitch_a, int pitch_b) {
  const int d = pitch_a - pitch_b;
  return (d < 0 ? -d : d) % 12;
}

// Layer-0 edge inputs that do not depend on learned weights: per relation,
// the onset/duration/pitch distance columns (aligned with the relation's
// edge list) and the pitch-class interval of every edge.
struct EdgeFeatureSet {
  std::array<Tensor<double>, kNumRelations> distances;  // m_r x 3
  std::array<std::vector<int>, kNumRelations> pc_intervals;

  std::size_t edge_count(Relation r) const { return pc_intervals[static_cast<int>(r)].size(); }
};

// For each directed edge v -> u: on(u)-on(v), dur(u)-dur(v), pitch(u)-pitch(v)
// (absolute values unless signed), then every column divided by its l2 norm
// over all edges of all relations of `graph`.
EdgeFeatureSet compute_edge_features(const ScoreGraph& graph, const MusGConvConfig& cfg);
// Same, without the normalization step.
EdgeFeatureSet raw_edge_distances(const ScoreGraph& graph, const MusGConvConfig& cfg);
void l2_normalize_columns(EdgeFeatureSet& features);

// Weights of one relation in one layer.
template <typename T>
struct RelationParams {
  nn::Linear<T> node_proj;     // W1: [hidden, d + message_dim]
  nn::Linear<T> source_proj;   // W2: [hidden, d]
  nn::Mlp2<T> edge_mlp;        // g: F -> hidden -> hidden
  nn::LayerNorm<T> edge_norm;  // applied after edge_mlp

  ad::Var<T> edge_hidden(const ad::Var<T>& edge_features) const { return edge_norm(edge_mlp(edge_features)); }
};

// eta = cat(src_proj, edge_hidden) or src_proj * edge_hidden.
template <typename T>
ad::Var<T> combine_message(const ad::Var<T>& src_proj, const ad::Var<T>& edge_hidden, EdgeOp op);

// Messages for a batch of edges: `h_src` holds the source node rows, one per
// edge, and `edge_features` the matching edge rows.
template <typename T>
ad::Var<T> edge_message(const ad::Var<T>& h_src, const ad::Var<T>& edge_features, const RelationParams<T>& params,
                        EdgeOp op);

// W1 * cat(h_u, sum of incoming messages); no nonlinearity.
template <typename T>
ad::Var<T> node_update(const ad::Var<T>& h, const ad::Var<T>& messages, std::span<const int> dst,
                       const RelationParams<T>& params);

template <typename T>
struct LayerOutput {
  ad::Var<T> h;
  std::array<ad::Var<T>, kNumRelations> edge_features;  // inputs of the next layer
};

// One heterogeneous block: per-relation updates, uniform mean over all seven
// relations, ReLU, then next-layer edge features per variant.
template <typename T>
LayerOutput<T> hetero_layer(const ScoreGraph& graph, const ad::Var<T>& h,
                            const std::array<ad::Var<T>, kNumRelations>& edge_features,
                            const std::array<RelationParams<T>, kNumRelations>& params, const MusGConvConfig& cfg);

template <typename T>
class Encoder {
 public:
  Encoder(const MusGConvConfig& cfg, nn::ParameterStore<T>& store, std::mt19937_64& rng,
          const std::string& prefix = "encoder");

  // Node embeddings [n_nodes, hidden_dim]. `edges` must come from
  // compute_edge_features on the same graph (or a batch merge of them).
  ad::Var<T> forward(const ScoreGraph& graph, const EdgeFeatureSet& edges) const;
  std::array<ad::Var<T>, kNumRelations> layer0_edge_inputs(const ScoreGraph& graph,
                                                           const EdgeFeatureSet& edges) const;

  const MusGConvConfig& config() const { return cfg_; }
  const std::vector<std::array<RelationParams<T>, kNumRelations>>& layers() const { return layers_; }
  const ad::Var<T>& pc_embedding() const { return pc_table_; }

 private:
  MusGConvConfig cfg_;
  std::vector<std::array<RelationParams<T>, kNumRelations>> layers_;
  ad::Var<T> pc_table_;
};

}  // namespace musg
