#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "musg/note_model.hpp"
#include "musg/tensor.hpp"

namespace musg {

enum class Relation : int { Onset, During, Follow, Silence, DuringInv, FollowInv, SilenceInv };

inline constexpr std::size_t kNumRelations = 7;
inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::Onset,     Relation::During,    Relation::Follow,    Relation::Silence,
    Relation::DuringInv, Relation::FollowInv, Relation::SilenceInv};

std::string_view relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

// 12 pitch-class + 7 octave one-hots + tanh(duration / bar).
inline constexpr std::size_t kNodeFeatureDim = 20;

struct Edge {
  int src = 0;
  int dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

struct ScoreGraph {
  int n_nodes = 0;
  std::array<EdgeList, kNumRelations> edges;
  Tensor<double> node_features;  // n_nodes x kNodeFeatureDim
  // Note attributes indexed by node id; `notes[i].id == i` always holds.
  std::vector<NoteEvent> notes;
  // Bar length at each note's onset, used as the default candidate gap.
  std::vector<Tick> bar_ticks;
  std::string source_name;
  std::optional<int> class_label;

  EdgeList& of(Relation r) { return edges[static_cast<int>(r)]; }
  const EdgeList& of(Relation r) const { return edges[static_cast<int>(r)]; }
  std::size_t edge_count() const;
};

// Onset-sorted sweep; O(n log n + |E|).
ScoreGraph build_graph(const Score& score);

Tensor<double> node_features(const Score& score);

// Text dump used by the CLI and golden tests. Edges are written sorted.
std::string dump_graph(const ScoreGraph& graph);

}  // namespace musg
