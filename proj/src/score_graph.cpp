#include "musg/score_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace musg {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Onset: return "onset";
    case Relation::During: return "during";
    case Relation::Follow: return "follow";
    case Relation::Silence: return "silence";
    case Relation::DuringInv: return "during_inv";
    case Relation::FollowInv: return "follow_inv";
    case Relation::SilenceInv: return "silence_inv";
  }
  return "?";
}

std::optional<Relation> relation_from_name(std::string_view name) {
  for (Relation r : kAllRelations)
    if (relation_name(r) == name) return r;
  return std::nullopt;
}

std::size_t ScoreGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

Tensor<double> node_features(const Score& score) {
  Tensor<double> x(score.notes.size(), kNodeFeatureDim);
  for (const auto& n : score.notes) {
    if (n.id < 0 || static_cast<std::size_t>(n.id) >= score.notes.size())
      throw std::invalid_argument("node_features: note ids must be dense");
    auto row = x.row(n.id);
    row[n.pitch % 12] = 1.0;
    const int octave = std::clamp(n.pitch / 12 - 1, 1, 7);
    row[12 + octave - 1] = 1.0;
    const double bar = static_cast<double>(bar_duration_at(score, n.onset));
    row[19] = std::tanh(static_cast<double>(n.duration) / bar);
  }
  return x;
}

ScoreGraph build_graph(const Score& score) {
  const int n = static_cast<int>(score.notes.size());
  ScoreGraph g;
  g.n_nodes = n;
  g.source_name = score.source_name;
  g.class_label = score.class_label;
  g.notes.resize(n);
  std::vector<bool> seen(n, false);
  for (const auto& note : score.notes) {
    if (note.id < 0 || note.id >= n || seen[note.id])
      throw std::invalid_argument("build_graph: note ids must be a dense 0..n-1 set");
    seen[note.id] = true;
    g.notes[note.id] = note;
  }
  g.node_features = node_features(score);
  g.bar_ticks.resize(n);
  for (int i = 0; i < n; ++i) g.bar_ticks[i] = bar_duration_at(score, g.notes[i].onset);

  // Nodes sorted by onset (ties by id), grouped into runs of equal onset.
  std::vector<int> by_onset(n);
  std::iota(by_onset.begin(), by_onset.end(), 0);
  std::sort(by_onset.begin(), by_onset.end(), [&](int a, int b) {
    return g.notes[a].onset != g.notes[b].onset ? g.notes[a].onset < g.notes[b].onset : a < b;
  });
  std::vector<Tick> group_onset;
  std::vector<int> group_begin;  // index into by_onset
  for (int i = 0; i < n; ++i) {
    const Tick on = g.notes[by_onset[i]].onset;
    if (group_onset.empty() || group_onset.back() != on) {
      group_onset.push_back(on);
      group_begin.push_back(i);
    }
  }
  group_begin.push_back(n);
  const int n_groups = static_cast<int>(group_onset.size());
  auto group_of = [&](Tick onset) -> int {
    auto it = std::lower_bound(group_onset.begin(), group_onset.end(), onset);
    return it != group_onset.end() && *it == onset ? static_cast<int>(it - group_onset.begin()) : -1;
  };

  auto& onset = g.of(Relation::Onset);
  auto& during = g.of(Relation::During);
  auto& follow = g.of(Relation::Follow);
  auto& silence = g.of(Relation::Silence);

  for (int k = 0; k < n_groups; ++k)
    for (int a = group_begin[k]; a < group_begin[k + 1]; ++a)
      for (int b = group_begin[k]; b < group_begin[k + 1]; ++b)
        if (a != b) onset.push_back({by_onset[a], by_onset[b]});

  for (int i = 0; i < n; ++i) {
    const int u = by_onset[i];
    const Tick off = g.notes[u].offset();
    // Groups with onset strictly inside (on(u), off(u)).
    auto first = std::upper_bound(group_onset.begin(), group_onset.end(), g.notes[u].onset);
    for (auto it = first; it != group_onset.end() && *it < off; ++it) {
      const int k = static_cast<int>(it - group_onset.begin());
      for (int b = group_begin[k]; b < group_begin[k + 1]; ++b) during.push_back({u, by_onset[b]});
    }
    if (int k = group_of(off); k >= 0)
      for (int b = group_begin[k]; b < group_begin[k + 1]; ++b) follow.push_back({u, by_onset[b]});
  }

  // Sweep the onset groups keeping the latest offset seen so far and the
  // notes that reach it. A gap opens when the next onset lies beyond it.
  Tick frontier = 0;
  std::vector<int> last_ending;
  for (int k = 0; k < n_groups; ++k) {
    if (k > 0 && frontier < group_onset[k])
      for (int u : last_ending)
        for (int b = group_begin[k]; b < group_begin[k + 1]; ++b) silence.push_back({u, by_onset[b]});
    for (int b = group_begin[k]; b < group_begin[k + 1]; ++b) {
      const int u = by_onset[b];
      const Tick off = g.notes[u].offset();
      if (last_ending.empty() || off > frontier) {
        frontier = off;
        last_ending.assign(1, u);
      } else if (off == frontier) {
        last_ending.push_back(u);
      }
    }
  }

  auto mirror = [](const EdgeList& in) {
    EdgeList out;
    out.reserve(in.size());
    for (const auto& e : in) out.push_back({e.dst, e.src});
    return out;
  };
  g.of(Relation::DuringInv) = mirror(during);
  g.of(Relation::FollowInv) = mirror(follow);
  g.of(Relation::SilenceInv) = mirror(silence);
  return g;
}

std::string dump_graph(const ScoreGraph& graph) {
  std::ostringstream out;
  out << "nodes=" << graph.n_nodes << '\n';
  for (Relation r : kAllRelations) {
    out << "rel=" << relation_name(r) << '\n';
    EdgeList sorted = graph.of(r);
    std::sort(sorted.begin(), sorted.end());
    for (const auto& e : sorted) out << e.src << ',' << e.dst << '\n';
  }
  out << "features\n";
  char buf[32];
  for (std::size_t i = 0; i < graph.node_features.rows(); ++i) {
    auto row = graph.node_features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.6f", row[k]);
      if (k) out << ',';
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace musg
