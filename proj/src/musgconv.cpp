#include "musg/musgconv.hpp"

#include <cmath>

namespace musg {

using ad::Var;

void MusGConvConfig::validate() const {
  if (in_dim == 0) throw std::invalid_argument("in_dim must be positive");
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be positive");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be at least 1");
  if (use_manual_edge_input && use_pcint && pc_embed_dim == 0)
    throw std::invalid_argument("pc_embed_dim must be positive when use_pcint is on");
  if (signed_distances && !use_manual_edge_input)
    throw std::invalid_argument("signed_distances requires use_manual_edge_input");
}

std::size_t MusGConvConfig::layer0_edge_dim() const {
  if (!use_manual_edge_input) return in_dim;
  return 3 + (use_pcint ? pc_embed_dim : 0);
}

EdgeFeatureSet raw_edge_distances(const ScoreGraph& graph, const MusGConvConfig& cfg) {
  EdgeFeatureSet out;
  for (Relation r : kAllRelations) {
    const auto& edges = graph.of(r);
    const int ri = static_cast<int>(r);
    Tensor<double> d(edges.size(), 3);
    auto& pc = out.pc_intervals[ri];
    pc.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      // edge v -> u: v is the source, u the destination
      const NoteEvent& v = graph.notes[edges[e].src];
      const NoteEvent& u = graph.notes[edges[e].dst];
      double don = static_cast<double>(u.onset - v.onset);
      double ddur = static_cast<double>(u.duration - v.duration);
      double dpitch = static_cast<double>(u.pitch - v.pitch);
      if (!cfg.signed_distances) {
        don = std::abs(don);
        ddur = std::abs(ddur);
        dpitch = std::abs(dpitch);
      }
      d(e, 0) = don;
      d(e, 1) = ddur;
      d(e, 2) = dpitch;
      pc[e] = pitch_class_interval(u.pitch, v.pitch);
    }
    out.distances[ri] = std::move(d);
  }
  return out;
}

void l2_normalize_columns(EdgeFeatureSet& features) {
  double sq[3] = {0, 0, 0};
  for (const auto& d : features.distances)
    for (std::size_t e = 0; e < d.rows(); ++e)
      for (int c = 0; c < 3; ++c) sq[c] += d(e, c) * d(e, c);
  double norm[3];
  for (int c = 0; c < 3; ++c) norm[c] = std::max(std::sqrt(sq[c]), kNormGuard);
  for (auto& d : features.distances)
    for (std::size_t e = 0; e < d.rows(); ++e)
      for (int c = 0; c < 3; ++c) d(e, c) /= norm[c];
}

EdgeFeatureSet compute_edge_features(const ScoreGraph& graph, const MusGConvConfig& cfg) {
  EdgeFeatureSet f = raw_edge_distances(graph, cfg);
  l2_normalize_columns(f);
  return f;
}

template <typename T>
Var<T> combine_message(const Var<T>& src_proj, const Var<T>& edge_hidden, EdgeOp op) {
  if (src_proj.rows() != edge_hidden.rows() || (op == EdgeOp::Multiply && src_proj.cols() != edge_hidden.cols()))
    throw std::invalid_argument("edge message: source " + src_proj.value().shape_string() +
                                " incompatible with edge " + edge_hidden.value().shape_string());
  if (op == EdgeOp::Concat) return ad::concat<T>({src_proj, edge_hidden}, 1);
  return ad::mul(src_proj, edge_hidden);
}

template <typename T>
Var<T> edge_message(const Var<T>& h_src, const Var<T>& edge_features, const RelationParams<T>& params,
                    EdgeOp op) {
  return combine_message(params.source_proj(h_src), params.edge_hidden(edge_features), op);
}

template <typename T>
Var<T> node_update(const Var<T>& h, const Var<T>& messages, std::span<const int> dst,
                   const RelationParams<T>& params) {
  Var<T> aggregated = ad::scatter_sum(messages, dst, h.rows());
  return params.node_proj(ad::concat<T>({h, aggregated}, 1));
}

namespace {

void endpoints(const EdgeList& edges, std::vector<int>& src, std::vector<int>& dst) {
  src.resize(edges.size());
  dst.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    src[e] = edges[e].src;
    dst[e] = edges[e].dst;
  }
}

}  // namespace

template <typename T>
LayerOutput<T> hetero_layer(const ScoreGraph& graph, const Var<T>& h,
                            const std::array<Var<T>, kNumRelations>& edge_features,
                            const std::array<RelationParams<T>, kNumRelations>& params, const MusGConvConfig& cfg) {
  std::vector<Var<T>> per_relation;
  std::array<Var<T>, kNumRelations> edge_hidden;
  std::array<std::vector<int>, kNumRelations> srcs, dsts;
  per_relation.reserve(kNumRelations);
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    endpoints(graph.edges[r], srcs[r], dsts[r]);
    const auto& p = params[r];
    edge_hidden[r] = p.edge_hidden(edge_features[r]);
    Var<T> messages = combine_message(p.source_proj(ad::gather_rows(h, srcs[r])), edge_hidden[r], cfg.edge_op);
    per_relation.push_back(node_update(h, messages, dsts[r], p));
  }

  LayerOutput<T> out;
  out.h = ad::relu(ad::mean_over(per_relation));
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    if (cfg.variant == Variant::EdgeForwarding)
      out.edge_features[r] = edge_hidden[r];
    else
      out.edge_features[r] = ad::abs(ad::sub(ad::gather_rows(out.h, srcs[r]), ad::gather_rows(out.h, dsts[r])));
  }
  return out;
}

template <typename T>
Encoder<T>::Encoder(const MusGConvConfig& cfg, nn::ParameterStore<T>& store, std::mt19937_64& rng,
                    const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const std::size_t d = l == 0 ? cfg_.in_dim : cfg_.hidden_dim;
    const std::size_t f = l == 0 ? cfg_.layer0_edge_dim() : cfg_.hidden_dim;
    std::array<RelationParams<T>, kNumRelations> layer;
    for (Relation r : kAllRelations) {
      const std::string base = prefix + ".layer" + std::to_string(l) + "." + std::string(relation_name(r));
      auto& p = layer[static_cast<int>(r)];
      p.source_proj = nn::Linear<T>(store, base + ".w_src", d, cfg_.hidden_dim, false, rng);
      p.edge_mlp = nn::Mlp2<T>(store, base + ".edge_mlp", f, cfg_.hidden_dim, cfg_.hidden_dim, rng);
      p.edge_norm = nn::LayerNorm<T>(store, base + ".edge_norm", cfg_.hidden_dim);
      p.node_proj = nn::Linear<T>(store, base + ".w_node", d + cfg_.message_dim(), cfg_.hidden_dim, false, rng);
    }
    layers_.push_back(std::move(layer));
  }
  if (cfg_.use_manual_edge_input && cfg_.use_pcint)
    pc_table_ = nn::make_embedding_table(store, prefix + ".pcint_embedding", kNumPitchClassIntervals,
                                         cfg_.pc_embed_dim, rng);
}

template <typename T>
std::array<Var<T>, kNumRelations> Encoder<T>::layer0_edge_inputs(const ScoreGraph& graph,
                                                                 const EdgeFeatureSet& edges) const {
  std::array<Var<T>, kNumRelations> out;
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    const auto& list = graph.edges[r];
    if (!cfg_.use_manual_edge_input) {
      const auto& x = graph.node_features;
      Tensor<T> diff(list.size(), x.cols());
      for (std::size_t e = 0; e < list.size(); ++e)
        for (std::size_t k = 0; k < x.cols(); ++k)
          diff(e, k) = static_cast<T>(std::abs(x(list[e].src, k) - x(list[e].dst, k)));
      out[r] = Var<T>::constant(std::move(diff));
      continue;
    }
    if (edges.distances[r].rows() != list.size())
      throw std::invalid_argument("edge feature set does not match graph edges for relation " +
                                  std::string(relation_name(kAllRelations[r])));
    Var<T> dist = Var<T>::constant(edges.distances[r].template cast<T>());
    out[r] = cfg_.use_pcint ? ad::concat<T>({dist, ad::embedding(pc_table_, edges.pc_intervals[r])}, 1) : dist;
  }
  return out;
}

template <typename T>
Var<T> Encoder<T>::forward(const ScoreGraph& graph, const EdgeFeatureSet& edges) const {
  if (graph.node_features.cols() != cfg_.in_dim || graph.node_features.rows() != static_cast<std::size_t>(graph.n_nodes))
    throw std::invalid_argument("encoder: node features " + graph.node_features.shape_string() +
                                " do not match in_dim " + std::to_string(cfg_.in_dim));
  Var<T> h = Var<T>::constant(graph.node_features.template cast<T>());
  auto e = layer0_edge_inputs(graph, edges);
  for (const auto& layer : layers_) {
    auto out = hetero_layer(graph, h, e, layer, cfg_);
    h = std::move(out.h);
    e = std::move(out.edge_features);
  }
  return h;
}

#define MUSG_INSTANTIATE_CONV(T)                                                                               \
  template Var<T> combine_message(const Var<T>&, const Var<T>&, EdgeOp);                                      \
  template Var<T> edge_message(const Var<T>&, const Var<T>&, const RelationParams<T>&, EdgeOp);               \
  template Var<T> node_update(const Var<T>&, const Var<T>&, std::span<const int>, const RelationParams<T>&);  \
  template LayerOutput<T> hetero_layer(const ScoreGraph&, const Var<T>&,                                       \
                                       const std::array<Var<T>, kNumRelations>&,                               \
                                       const std::array<RelationParams<T>, kNumRelations>&,                    \
                                       const MusGConvConfig&);                                                 \
  template class Encoder<T>;

MUSG_INSTANTIATE_CONV(float)
MUSG_INSTANTIATE_CONV(double)

}  // namespace musg
