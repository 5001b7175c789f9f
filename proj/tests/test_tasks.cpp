#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <set>

#include "musg/optim.hpp"
#include "musg/tasks.hpp"
#include "test_support.hpp"

using namespace musg;
using ad::Var;
using Catch::Approx;

namespace {

std::set<std::pair<int, int>> as_set(const std::vector<Edge>& edges) {
  std::set<std::pair<int, int>> out;
  for (const auto& e : edges) out.insert({e.src, e.dst});
  return out;
}

std::vector<ScoreGraph> two_voice_pieces(int pieces, std::uint64_t seed, int notes_per_voice = 16) {
  SynthSpec spec;
  spec.pieces = pieces;
  spec.voices = 2;
  spec.notes_per_voice = notes_per_voice;
  spec.register_centers = {48, 72};
  spec.register_range = 5;
  spec.seed = seed;
  spec.styles = {StyleClass{{-2, -1, 1, 2}, {}, {2, 4, 8}, {}, 0.1}};
  std::vector<ScoreGraph> out;
  for (const auto& s : synth_dataset(spec)) out.push_back(build_graph(s));
  return out;
}

MusGConvConfig tiny_config() {
  MusGConvConfig cfg;
  cfg.hidden_dim = 8;
  cfg.pc_embed_dim = 4;
  cfg.variant = Variant::EdgeForwarding;
  return cfg;
}

}  // namespace

TEST_CASE("ground truth links", "[links]") {
  Score mono;
  mono.divisions_per_quarter = 4;
  for (int i = 0; i < 6; ++i) mono.notes.push_back({4 * i, 4, 60 + i, 0, i});
  normalize(mono);
  CHECK(ground_truth_links(build_graph(mono)).size() == 5);

  ScoreGraph two = build_graph(
      test::score_from_rows(4, {{0, 4, 60, 0}, {4, 4, 62, 0}, {8, 4, 64, 0}, {0, 8, 48, 1}, {8, 4, 50, 1}, {12, 4, 52, 1}}));
  CHECK(ground_truth_links(two).size() == 4);

  // A chord inside one voice is chained by pitch.
  ScoreGraph chord =
      build_graph(test::score_from_rows(4, {{0, 4, 64, 0}, {0, 4, 60, 0}, {4, 4, 67, 0}, {4, 4, 62, 0}}));
  CHECK(as_set(ground_truth_links(chord)) == std::set<std::pair<int, int>>{{1, 0}, {0, 3}, {3, 2}});
}

TEST_CASE("candidate pairs: examples", "[links]") {
  ScoreGraph whole = build_graph(test::score_from_rows(4, {{0, 16, 60, 0}, {0, 16, 64, 1}}));
  CHECK(as_set(candidate_pairs(whole, std::nullopt)) == std::set<std::pair<int, int>>{{0, 1}, {1, 0}});

  // Second note starts two bars after the first one ends.
  ScoreGraph far = build_graph(test::score_from_rows(4, {{0, 4, 60, 0}, {36, 4, 64, 0}}));
  CHECK(candidate_pairs(far, std::nullopt).empty());
  CHECK(candidate_pairs(far, Tick{32}).size() == 1);
  CHECK_THROWS_AS(candidate_pairs(far, Tick{-1}), std::invalid_argument);
}

TEST_CASE("candidate pairs equal the pairwise predicate", "[links][oracle]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreGraph g = build_graph(test::random_score(rng, 40));
    const std::optional<Tick> gap = trial % 2 ? std::optional<Tick>(static_cast<Tick>(rng() % 10)) : std::nullopt;
    std::set<std::pair<int, int>> want;
    for (int u = 0; u < g.n_nodes; ++u)
      for (int v = 0; v < g.n_nodes; ++v) {
        const auto& nu = g.notes[u];
        const auto& nv = g.notes[v];
        const Tick tau = gap ? *gap : g.bar_ticks[u];
        if (u != v && nv.onset >= nu.onset && nv.onset - nu.offset() <= tau) want.insert({u, v});
      }
    auto got = candidate_pairs(g, gap);
    CHECK(as_set(got) == want);
    CHECK(got.size() == want.size());
  }
}

TEST_CASE("candidates cover every link when voices pause for less than a bar", "[links]") {
  for (const auto& g : two_voice_pieces(10, 3, 40)) {
    auto cands = as_set(candidate_pairs(g, std::nullopt));
    for (const auto& e : ground_truth_links(g)) CHECK(cands.count({e.src, e.dst}) == 1);
  }
}

TEST_CASE("links and candidates stay inside their range", "[links]") {
  auto pieces = two_voice_pieces(3, 4, 10);
  MusGConvConfig cfg;
  Batch batch = assemble_batch(pieces, cfg);
  std::size_t links = 0;
  for (const auto& g : pieces) links += ground_truth_links(g).size();
  auto batch_links = ground_truth_links(batch.graph, batch.ranges);
  CHECK(batch_links.size() == links);
  auto owner = [&](int v) {
    for (std::size_t s = 0; s < batch.ranges.size(); ++s)
      if (v >= batch.ranges[s].first && v < batch.ranges[s].second) return static_cast<int>(s);
    return -1;
  };
  for (const auto& e : candidate_pairs(batch.graph, std::nullopt, batch.ranges)) CHECK(owner(e.src) == owner(e.dst));
  for (const auto& e : batch_links) CHECK(owner(e.src) == owner(e.dst));
}

TEST_CASE("binary counts", "[metrics]") {
  BinaryCounts c{3, 1, 2, 10};
  CHECK(c.precision() == Approx(0.75));
  CHECK(c.recall() == Approx(0.6));
  CHECK(c.f1() == Approx(2 * 0.75 * 0.6 / 1.35));
  CHECK(BinaryCounts{}.f1() == 0.0);
  CHECK(BinaryCounts{0, 0, 5, 0}.f1() == 0.0);
}

TEST_CASE("split_dataset", "[data]") {
  std::vector<ScoreGraph> pieces(50);
  for (int i = 0; i < 50; ++i) pieces[i].source_name = std::to_string(i);
  DatasetSplits a = split_dataset(pieces, 1);
  CHECK(a.train.size() == 35);
  CHECK(a.valid.size() == 5);
  CHECK(a.test.size() == 10);
  DatasetSplits b = split_dataset(pieces, 1);
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].source_name == b.test[i].source_name);
  std::set<std::string> names;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const auto& g : *part) names.insert(g.source_name);
  CHECK(names.size() == 50);
}

TEST_CASE("train config validation", "[config]") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.negative_ratio = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.k_nodes = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("heads: shapes and gradients", "[heads][grad]") {
  auto pieces = two_voice_pieces(2, 5, 6);
  MusGConvConfig cfg = tiny_config();
  cfg.hidden_dim = 3;
  cfg.pc_embed_dim = 2;

  VoiceSeparationModel<double> vs(cfg, 1);
  const ScoreGraph& g = pieces[0];
  EdgeFeatureSet f = compute_edge_features(g, cfg);
  auto cands = candidate_pairs(g, std::nullopt);
  std::vector<double> y(cands.size(), 0.0);
  auto links = as_set(ground_truth_links(g));
  for (std::size_t i = 0; i < cands.size(); ++i) y[i] = links.count({cands[i].src, cands[i].dst}) ? 1.0 : 0.0;
  auto link_loss = [&] { return ad::bce_with_logits(vs.head(vs.encoder.forward(g, f), cands), y); };
  CHECK(link_loss().value().rows() == 1);
  CHECK(vs.head(vs.encoder.forward(g, f), cands).rows() == cands.size());
  CHECK(grad_check(link_loss, vs.store.params()).max_rel_error < 1e-4);

  ComposerModel<double> cm(cfg, 3, 2);
  Batch batch = assemble_batch(pieces, cfg);
  std::vector<int> labels = {2, 0};
  auto class_loss = [&] {
    return ad::cross_entropy(cm.head(cm.encoder.forward(batch.graph, batch.edge_features), batch.ranges), labels);
  };
  CHECK(cm.head(cm.encoder.forward(batch.graph, batch.edge_features), batch.ranges).value().shape_string() == "[2,3]");
  CHECK(grad_check(class_loss, cm.store.params()).max_rel_error < 1e-4);
  CHECK_THROWS_AS(ComposerModel<double>(cfg, 1, 0), std::invalid_argument);
}

TEST_CASE("models with the same seed start identical", "[heads]") {
  MusGConvConfig cfg = tiny_config();
  VoiceSeparationModel<float> a(cfg, 9), b(cfg, 9), c(cfg, 10);
  CHECK(a.store.snapshot() == b.store.snapshot());
  CHECK_FALSE(a.store.snapshot() == c.store.snapshot());
}

TEST_CASE("evaluate_links: counts match a recount of the predictions", "[metrics]") {
  auto pieces = two_voice_pieces(4, 6, 12);
  // One piece with a link that no candidate covers.
  pieces.push_back(build_graph(test::score_from_rows(4, {{0, 4, 60, 0}, {40, 4, 62, 0}, {0, 4, 70, 1}})));
  MusGConvConfig cfg = tiny_config();
  VoiceSeparationModel<double> model(cfg, 3);
  std::vector<LinkPrediction> preds;
  LinkMetrics m = evaluate_links(model, pieces, {std::nullopt, 0.5, 0}, &preds);
  CHECK(m.candidates == preds.size());
  CHECK(m.uncovered_links == 1);
  BinaryCounts recount;
  double loss = 0;
  std::size_t links = 0;
  for (const auto& g : pieces) links += ground_truth_links(g).size();
  for (const auto& p : preds) {
    const bool pred = p.prob > 0.5;
    recount.tp += pred && p.label;
    recount.fp += pred && !p.label;
    recount.fn += !pred && p.label;
    recount.tn += !pred && !p.label;
    loss -= p.label ? std::log(p.prob) : std::log1p(-p.prob);
  }
  recount.fn += m.uncovered_links;
  CHECK(m.counts.tp == recount.tp);
  CHECK(m.counts.fp == recount.fp);
  CHECK(m.counts.fn == recount.fn);
  CHECK(m.counts.tn == recount.tn);
  CHECK(m.counts.tp + m.counts.fn == links);
  CHECK(m.loss == Approx(loss / static_cast<double>(preds.size())).epsilon(1e-9));
}

TEST_CASE("evaluate_links: windowed evaluation loses only boundary links", "[metrics]") {
  auto pieces = two_voice_pieces(2, 7, 30);
  MusGConvConfig cfg = tiny_config();
  VoiceSeparationModel<double> model(cfg, 4);
  LinkMetrics whole = evaluate_links(model, pieces, {std::nullopt, 0.5, 0});
  LinkMetrics windows = evaluate_links(model, pieces, {std::nullopt, 0.5, 16});
  CHECK(whole.counts.tp + whole.counts.fn == windows.counts.tp + windows.counts.fn);
  CHECK(windows.uncovered_links >= whole.uncovered_links);
  CHECK(windows.candidates < whole.candidates);
}

TEST_CASE("evaluate_classification", "[metrics]") {
  auto pieces = two_voice_pieces(5, 8, 6);
  const int labels[] = {0, 1, 1, 2, 1};
  for (int i = 0; i < 5; ++i) pieces[i].class_label = labels[i];
  MusGConvConfig cfg = tiny_config();
  ComposerModel<double> model(cfg, 3, 5);
  std::vector<int> predicted;
  ClassificationMetrics m = evaluate_classification(model, pieces, &predicted);
  REQUIRE(predicted.size() == 5);
  std::size_t correct = 0;
  for (int i = 0; i < 5; ++i) correct += predicted[i] == labels[i];
  CHECK(m.correct == correct);
  CHECK(m.total == 5);
  CHECK(m.majority_baseline == Approx(0.6));
  CHECK(std::isfinite(m.loss));
}

TEST_CASE("training: zero epochs leaves the model untouched", "[train]") {
  auto pieces = two_voice_pieces(4, 9, 8);
  DatasetSplits data{pieces, {}, {}};
  VoiceSeparationModel<float> model(tiny_config(), 1);
  auto before = model.store.snapshot();
  TrainConfig tc;
  tc.epochs = 0;
  TrainResult r = train_voice_separation(model, data, tc);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
  CHECK(model.store.snapshot() == before);
}

TEST_CASE("training: loss goes down and 64-bit runs repeat exactly", "[train]") {
  auto pieces = two_voice_pieces(12, 10, 12);
  DatasetSplits data = split_dataset(pieces, 0, 0.75, 0.25);
  TrainConfig tc;
  tc.epochs = 6;
  tc.lr = 5e-3;
  tc.k_nodes = 16;
  tc.batch_subgraphs = 2;
  tc.seed = 3;
  auto run = [&] {
    VoiceSeparationModel<double> model(tiny_config(), 2);
    TrainResult r = train_voice_separation(model, data, tc);
    return std::make_pair(r, model.store.snapshot());
  };
  auto [a, wa] = run();
  auto [b, wb] = run();
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].metric == b.log[i].metric);
    CHECK(a.log[i].split == b.log[i].split);
  }
  CHECK(wa == wb);
  std::vector<double> train_loss;
  for (const auto& rec : a.log)
    if (rec.split == "train") train_loss.push_back(rec.loss);
  REQUIRE(train_loss.size() >= 2);
  CHECK(train_loss.back() < train_loss.front());
  CHECK(a.best_epoch >= 1);
}

TEST_CASE("training: non-finite loss raises NumericError", "[train]") {
  auto pieces = two_voice_pieces(3, 11, 8);
  DatasetSplits data{pieces, {}, {}};
  VoiceSeparationModel<double> model(tiny_config(), 1);
  model.store.params().back().var.mutable_value()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train_voice_separation(model, data, tc), NumericError);
}

TEST_CASE("training composer requires labels", "[train]") {
  auto pieces = two_voice_pieces(3, 12, 8);
  pieces[1].class_label.reset();
  DatasetSplits data{pieces, {}, {}};
  ComposerModel<float> model(tiny_config(), 2, 1);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train_composer(model, data, tc), std::invalid_argument);
}

TEST_CASE("training composer keeps the best validation epoch", "[train]") {
  SynthSpec spec;
  spec.pieces = 12;
  spec.voices = 2;
  spec.notes_per_voice = 10;
  spec.register_centers = {50, 70};
  spec.seed = 13;
  spec.styles = {StyleClass{{-1, 1}, {}, {2}, {}, 0.0}, StyleClass{{-7, 7}, {}, {8}, {}, 0.0}};
  std::vector<ScoreGraph> pieces;
  for (const auto& s : synth_dataset(spec)) pieces.push_back(build_graph(s));
  DatasetSplits data = split_dataset(pieces, 1, 0.67, 0.33);
  ComposerModel<double> model(tiny_config(), 2, 1);
  TrainConfig tc;
  tc.epochs = 4;
  tc.lr = 1e-2;
  tc.k_nodes = 64;
  tc.batch_subgraphs = 4;
  std::vector<EpochRecord> seen;
  TrainResult r = train_composer(model, data, tc, [&](const EpochRecord& rec) { seen.push_back(rec); });
  CHECK(seen.size() == r.log.size());
  double best = -1;
  int best_epoch = 0;
  for (const auto& rec : r.log)
    if (rec.split == "valid" && rec.metric > best) {
      best = rec.metric;
      best_epoch = rec.epoch;
    }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best_valid_metric == best);
  CHECK(evaluate_classification(model, data.valid).accuracy() == best);
}
