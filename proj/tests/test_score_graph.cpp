#include <catch_amalgamated.hpp>

#include <cmath>

#include "graph_oracle.hpp"
#include "musg/score_graph.hpp"
#include "test_support.hpp"

using namespace musg;

namespace {

std::vector<std::pair<int, int>> pairs(const ScoreGraph& g, Relation r) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.of(r)) out.emplace_back(e.src, e.dst);
  std::sort(out.begin(), out.end());
  return out;
}

using P = std::vector<std::pair<int, int>>;

}  // namespace

TEST_CASE("graph: simultaneous notes give onset edges both ways", "[graph]") {
  ScoreGraph g = build_graph(test::score_from_rows(4, {{0, 4, 60, 0}, {0, 4, 64, 1}}));
  CHECK(pairs(g, Relation::Onset) == P{{0, 1}, {1, 0}});
  CHECK(g.edge_count() == 2);
}

TEST_CASE("graph: back-to-back notes follow", "[graph]") {
  ScoreGraph g = build_graph(test::score_from_rows(4, {{0, 4, 60, 0}, {4, 4, 62, 0}}));
  CHECK(pairs(g, Relation::Follow) == P{{0, 1}});
  CHECK(pairs(g, Relation::FollowInv) == P{{1, 0}});
  CHECK(g.edge_count() == 2);
}

TEST_CASE("graph: during and silence", "[graph]") {
  ScoreGraph g = build_graph(test::score_from_rows(4, {{0, 4, 60, 0}, {2, 4, 64, 1}, {10, 2, 67, 0}}));
  CHECK(pairs(g, Relation::During) == P{{0, 1}});
  CHECK(pairs(g, Relation::DuringInv) == P{{1, 0}});
  CHECK(pairs(g, Relation::Silence) == P{{1, 2}});
  CHECK(pairs(g, Relation::SilenceInv) == P{{2, 1}});
  CHECK(g.of(Relation::Onset).empty());
  CHECK(g.of(Relation::Follow).empty());
}

TEST_CASE("graph: silence is bipartite across the gap", "[graph]") {
  // Two notes end together at 4, two start together at 8.
  ScoreGraph g = build_graph(
      test::score_from_rows(4, {{0, 4, 60, 0}, {2, 2, 64, 1}, {8, 4, 62, 0}, {8, 2, 67, 1}, {0, 2, 50, 2}}));
  CHECK(pairs(g, Relation::Silence) == P{{0, 2}, {0, 3}, {1, 2}, {1, 3}});
}

TEST_CASE("graph: empty and single-note scores have no edges", "[graph]") {
  ScoreGraph empty = build_graph(test::score_from_rows(4, {}));
  CHECK(empty.n_nodes == 0);
  CHECK(empty.edge_count() == 0);
  CHECK(empty.node_features.rows() == 0);
  ScoreGraph one = build_graph(test::score_from_rows(4, {{3, 2, 60, 0}}));
  CHECK(one.n_nodes == 1);
  CHECK(one.edge_count() == 0);
}

TEST_CASE("graph: sweep equals the pairwise predicates", "[graph][oracle]") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    Score s = test::random_score(rng, 40);
    ScoreGraph g = build_graph(s);
    auto want = test::brute_force_edges(s);
    auto got = test::edge_sets(g);
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      INFO("relation " << relation_name(kAllRelations[r]));
      CHECK(got[r] == want[r]);
      CHECK(got[r].size() == g.edges[r].size());  // no duplicates
    }
  }
}

TEST_CASE("graph: structural invariants", "[graph]") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    Score s = test::random_score(rng, 50);
    ScoreGraph g = build_graph(s);
    auto sets = test::edge_sets(g);
    for (std::size_t r = 0; r < kNumRelations; ++r)
      for (auto [a, b] : sets[r]) CHECK(a != b);
    for (auto [a, b] : sets[static_cast<int>(Relation::Onset)])
      CHECK(sets[static_cast<int>(Relation::Onset)].count({b, a}) == 1);
    for (auto [base, inv] : {std::pair{Relation::During, Relation::DuringInv},
                             std::pair{Relation::Follow, Relation::FollowInv},
                             std::pair{Relation::Silence, Relation::SilenceInv}}) {
      CHECK(sets[static_cast<int>(base)].size() == sets[static_cast<int>(inv)].size());
      for (auto [a, b] : sets[static_cast<int>(base)]) CHECK(sets[static_cast<int>(inv)].count({b, a}) == 1);
    }
    for (int v = 0; v < g.n_nodes; ++v) CHECK(g.notes[v].id == v);
  }
}

TEST_CASE("graph: edges ignore pitch and absolute time", "[graph]") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Score s = test::random_score(rng, 30);
    ScoreGraph g = build_graph(s);
    for (int k : {-12, -5, 7}) {
      Score t = s;
      for (auto& n : t.notes) n.pitch = std::clamp(n.pitch + k, 0, 127);
      CHECK(build_graph(t).edges == g.edges);
    }
    CHECK(build_graph(shift_time(s, 37)).edges == g.edges);
  }
}

TEST_CASE("node features", "[graph][features]") {
  Score s = test::score_from_rows(4, {{0, 4, 60, 0}, {0, 16, 21, 0}, {4, 2, 127, 0}});
  Tensor<double> x = node_features(s);
  REQUIRE(x.rows() == 3);
  REQUIRE(x.cols() == kNodeFeatureDim);
  // C4, quarter in 4/4
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 12 + 3) == 1.0);
  CHECK(x(0, 19) == Catch::Approx(0.244919).margin(1e-6));
  // A0 clamps to octave 1; whole note
  CHECK(x(1, 9) == 1.0);
  CHECK(x(1, 12) == 1.0);
  CHECK(x(1, 19) == Catch::Approx(0.761594).margin(1e-6));
  // G9 clamps to octave 7
  CHECK(x(2, 7) == 1.0);
  CHECK(x(2, 18) == 1.0);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    Score r = test::random_score(rng);
    Tensor<double> f = node_features(r);
    for (std::size_t v = 0; v < f.rows(); ++v) {
      double pc = 0, oct = 0;
      for (int k = 0; k < 12; ++k) pc += f(v, k);
      for (int k = 12; k < 19; ++k) oct += f(v, k);
      CHECK(pc == 1.0);
      CHECK(oct == 1.0);
      CHECK(f(v, 19) > 0.0);
      CHECK(f(v, 19) < 1.0);
    }
  }
}

TEST_CASE("graph dump of the three-note fixture matches its golden file", "[graph][golden]") {
  Score s = load_score_file(test::data_path("three_notes.notes"));
  CHECK(dump_graph(build_graph(s)) == test::read_file(test::data_path("three_notes.graph.golden")));
}

TEST_CASE("relation names round-trip", "[graph]") {
  for (Relation r : kAllRelations) CHECK(relation_from_name(relation_name(r)) == r);
  CHECK_FALSE(relation_from_name("nope").has_value());
}
