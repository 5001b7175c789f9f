#include "musg/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>
#include <unordered_set>

#include "musg/optim.hpp"

namespace musg {

using ad::Var;

namespace {

std::vector<std::pair<int, int>> whole_graph(const ScoreGraph& g) { return {{0, g.n_nodes}}; }

std::uint64_t pair_key(const Edge& e) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.src)) << 32) |
         static_cast<std::uint32_t>(e.dst);
}

// Stream for window sampling, distinct from the initialization stream.
std::mt19937_64 sampling_rng(std::uint64_t seed) { return std::mt19937_64(seed ^ 0x5DEECE66DULL); }

template <typename T>
bool finite(const Var<T>& v) {
  return std::isfinite(static_cast<double>(v.value()[0]));
}

}  // namespace

std::vector<Edge> ground_truth_links(const ScoreGraph& graph, std::span<const std::pair<int, int>> ranges) {
  std::vector<Edge> links;
  for (auto [begin, end] : ranges) {
    std::map<int, std::vector<int>> voices;
    for (int i = begin; i < end; ++i) voices[graph.notes[i].voice].push_back(i);
    for (auto& [voice, ids] : voices) {
      std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const auto& na = graph.notes[a];
        const auto& nb = graph.notes[b];
        return std::tie(na.onset, na.pitch, a) < std::tie(nb.onset, nb.pitch, b);
      });
      for (std::size_t k = 1; k < ids.size(); ++k) links.push_back({ids[k - 1], ids[k]});
    }
  }
  return links;
}

std::vector<Edge> ground_truth_links(const ScoreGraph& graph) {
  auto all = whole_graph(graph);
  return ground_truth_links(graph, all);
}

std::vector<Edge> candidate_pairs(const ScoreGraph& graph, std::optional<Tick> gap_ticks,
                                  std::span<const std::pair<int, int>> ranges) {
  if (gap_ticks && *gap_ticks < 0) throw std::invalid_argument("candidate gap must be non-negative");
  std::vector<Edge> out;
  for (auto [begin, end] : ranges) {
    std::vector<int> by_onset(end - begin);
    std::iota(by_onset.begin(), by_onset.end(), begin);
    std::sort(by_onset.begin(), by_onset.end(), [&](int a, int b) {
      return std::tie(graph.notes[a].onset, a) < std::tie(graph.notes[b].onset, b);
    });
    std::vector<Tick> onsets(by_onset.size());
    for (std::size_t i = 0; i < by_onset.size(); ++i) onsets[i] = graph.notes[by_onset[i]].onset;
    const std::size_t first_out = out.size();
    for (int u = begin; u < end; ++u) {
      const auto& nu = graph.notes[u];
      const Tick gap = gap_ticks ? *gap_ticks : graph.bar_ticks[u];
      const Tick last = nu.offset() + gap;
      auto lo = std::lower_bound(onsets.begin(), onsets.end(), nu.onset);
      auto hi = std::upper_bound(onsets.begin(), onsets.end(), last);
      for (auto it = lo; it < hi; ++it) {
        const int v = by_onset[it - onsets.begin()];
        if (v != u) out.push_back({u, v});
      }
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first_out), out.end());
  }
  return out;
}

std::vector<Edge> candidate_pairs(const ScoreGraph& graph, std::optional<Tick> gap_ticks) {
  auto all = whole_graph(graph);
  return candidate_pairs(graph, gap_ticks, all);
}

// ---------------------------------------------------------------------------

template <typename T>
LinkHead<T>::LinkHead(nn::ParameterStore<T>& store, std::size_t hidden, std::mt19937_64& rng,
                      const std::string& name)
    : mlp_(store, name, 2 * hidden, hidden, 1, rng) {}

template <typename T>
Var<T> LinkHead<T>::operator()(const Var<T>& h, std::span<const Edge> pairs) const {
  std::vector<int> src(pairs.size()), dst(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  return mlp_(ad::concat<T>({ad::gather_rows(h, src), ad::gather_rows(h, dst)}, 1));
}

template <typename T>
ComposerHead<T>::ComposerHead(nn::ParameterStore<T>& store, std::size_t hidden, std::size_t n_classes,
                              std::mt19937_64& rng, const std::string& name)
    : mlp_(store, name, hidden, hidden, n_classes, rng), n_classes_(n_classes) {
  if (n_classes < 2) throw std::invalid_argument("composer head needs at least two classes");
}

template <typename T>
Var<T> ComposerHead<T>::operator()(const Var<T>& h, std::span<const std::pair<int, int>> ranges) const {
  return mlp_(ad::segment_mean(h, ranges));
}

template <typename T>
VoiceSeparationModel<T>::VoiceSeparationModel(const MusGConvConfig& cfg, std::uint64_t seed)
    : init_rng(seed), encoder(cfg, store, init_rng), head(store, cfg.hidden_dim, init_rng) {}

template <typename T>
ComposerModel<T>::ComposerModel(const MusGConvConfig& cfg, std::size_t n_classes, std::uint64_t seed)
    : init_rng(seed), encoder(cfg, store, init_rng), head(store, cfg.hidden_dim, n_classes, init_rng) {}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be non-negative");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (patience < 1) throw std::invalid_argument("patience must be positive");
  if (negative_ratio < 1) throw std::invalid_argument("negative_ratio must be positive");
  if (candidate_gap && *candidate_gap < 0) throw std::invalid_argument("candidate_gap must be non-negative");
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("threshold must be in (0,1)");
  if (k_nodes < 1) throw std::invalid_argument("k_nodes must be positive");
  if (batch_subgraphs < 1) throw std::invalid_argument("batch_subgraphs must be positive");
}

DatasetSplits split_dataset(std::vector<ScoreGraph> pieces, std::uint64_t seed, double train_fraction,
                            double valid_fraction) {
  std::vector<std::size_t> idx(pieces.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<double>(pieces.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
  const auto n_valid = std::min(pieces.size() - n_train, static_cast<std::size_t>(std::llround(n * valid_fraction)));
  DatasetSplits out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_valid ? out.valid : out.test);
    dst.push_back(std::move(pieces[idx[i]]));
  }
  return out;
}

namespace {

// Early stopping and best-weight bookkeeping shared by both tasks.
template <typename T>
class BestTracker {
 public:
  BestTracker(nn::ParameterStore<T>& store, int patience) : store_(store), patience_(patience) {
    best_ = store.snapshot();
  }
  // Returns false once `patience` epochs passed without improvement.
  bool update(int epoch, double metric) {
    if (metric > best_metric_) {
      best_metric_ = metric;
      best_epoch_ = epoch;
      best_ = store_.snapshot();
      stale_ = 0;
      return true;
    }
    return ++stale_ < patience_;
  }
  void finish(TrainResult& result) {
    store_.restore(best_);
    result.best_epoch = best_epoch_;
    result.best_valid_metric = best_epoch_ > 0 ? best_metric_ : 0.0;
  }

 private:
  nn::ParameterStore<T>& store_;
  int patience_;
  std::vector<Tensor<T>> best_;
  double best_metric_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int stale_ = 0;
};

template <typename T>
std::vector<T> labels_for(std::span<const Edge> pairs, const std::unordered_set<std::uint64_t>& positives) {
  std::vector<T> y(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) y[i] = positives.count(pair_key(pairs[i])) ? T(1) : T(0);
  return y;
}

void emit(TrainResult& result, const EpochCallback& cb, EpochRecord rec) {
  if (cb) cb(rec);
  result.log.push_back(std::move(rec));
}

}  // namespace

template <typename T>
TrainResult train_voice_separation(VoiceSeparationModel<T>& model, const DatasetSplits& data,
                                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");

  const MusGConvConfig& mcfg = model.encoder.config();
  std::mt19937_64 rng = sampling_rng(cfg.seed);
  AdamState<T> adam;
  const AdamOptions opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  BestTracker<T> best(model.store, cfg.patience);
  const LinkEvalOptions eval_opt{cfg.candidate_gap, cfg.threshold, 0};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const int steps = batches_per_epoch(data.train, cfg.k_nodes, cfg.batch_subgraphs);
    double loss_sum = 0.0;
    int loss_steps = 0;
    BinaryCounts counts;
    for (int step = 0; step < steps; ++step) {
      Batch batch = make_batch(data.train, cfg.k_nodes, cfg.batch_subgraphs, rng, mcfg);
      std::vector<Edge> positives = ground_truth_links(batch.graph, batch.ranges);
      std::vector<Edge> candidates = candidate_pairs(batch.graph, cfg.candidate_gap, batch.ranges);
      std::unordered_set<std::uint64_t> pos_keys;
      for (const auto& e : positives) pos_keys.insert(pair_key(e));
      std::vector<Edge> negatives;
      for (const auto& e : candidates)
        if (!pos_keys.count(pair_key(e))) negatives.push_back(e);
      // Partial Fisher-Yates: the first `want` entries become the sample.
      const std::size_t want =
          std::min(negatives.size(), positives.size() * static_cast<std::size_t>(cfg.negative_ratio));
      for (std::size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, negatives.size() - 1);
        std::swap(negatives[i], negatives[pick(rng)]);
      }
      std::vector<Edge> pairs = positives;
      pairs.insert(pairs.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(want));
      if (pairs.empty()) continue;
      std::vector<T> targets(pairs.size(), T(0));
      std::fill(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(positives.size()), T(1));

      Var<T> h = model.encoder.forward(batch.graph, batch.edge_features);
      Var<T> logits = model.head(h, pairs);
      Var<T> loss = ad::bce_with_logits(logits, std::span<const T>(targets));
      if (!finite(loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      model.store.zero_grad();
      loss.backward();
      adam_step(model.store.params(), adam, opt);

      loss_sum += static_cast<double>(loss.value()[0]);
      ++loss_steps;
      const auto& z = logits.value();
      const double logit_threshold = std::log(cfg.threshold / (1.0 - cfg.threshold));
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const bool pred = static_cast<double>(z[i]) > logit_threshold;
        const bool truth = targets[i] > T(0.5);
        if (pred && truth) ++counts.tp;
        else if (pred) ++counts.fp;
        else if (truth) ++counts.fn;
        else ++counts.tn;
      }
    }
    result.epochs_run = epoch;
    emit(result, on_epoch, {epoch, "train", loss_steps ? loss_sum / loss_steps : 0.0, counts.f1()});

    if (data.valid.empty()) {
      best.update(epoch, static_cast<double>(epoch));  // no validation: keep the latest weights
      continue;
    }
    LinkMetrics valid = evaluate_links(model, data.valid, eval_opt);
    emit(result, on_epoch, {epoch, "valid", valid.loss, valid.f1()});
    if (!best.update(epoch, valid.f1())) break;
  }
  best.finish(result);
  return result;
}

template <typename T>
TrainResult train_composer(ComposerModel<T>& model, const DatasetSplits& data, const TrainConfig& cfg,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  for (const auto& g : data.train)
    if (!g.class_label || *g.class_label < 0 || static_cast<std::size_t>(*g.class_label) >= model.head.n_classes())
      throw std::invalid_argument("train: piece '" + g.source_name + "' lacks a valid class label");

  const MusGConvConfig& mcfg = model.encoder.config();
  std::mt19937_64 rng = sampling_rng(cfg.seed);
  AdamState<T> adam;
  const AdamOptions opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  BestTracker<T> best(model.store, cfg.patience);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const int steps = batches_per_epoch(data.train, cfg.k_nodes, cfg.batch_subgraphs);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    int loss_steps = 0;
    for (int step = 0; step < steps; ++step) {
      Batch batch = make_batch(data.train, cfg.k_nodes, cfg.batch_subgraphs, rng, mcfg);
      std::vector<std::pair<int, int>> ranges;
      std::vector<int> labels;
      for (std::size_t s = 0; s < batch.ranges.size(); ++s) {
        if (batch.ranges[s].first == batch.ranges[s].second) continue;  // empty piece
        ranges.push_back(batch.ranges[s]);
        labels.push_back(*batch.class_labels[s]);
      }
      if (ranges.empty()) continue;
      Var<T> h = model.encoder.forward(batch.graph, batch.edge_features);
      Var<T> logits = model.head(h, ranges);
      Var<T> loss = ad::cross_entropy(logits, labels);
      if (!finite(loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      model.store.zero_grad();
      loss.backward();
      adam_step(model.store.params(), adam, opt);

      loss_sum += static_cast<double>(loss.value()[0]);
      ++loss_steps;
      const auto& z = logits.value();
      for (std::size_t s = 0; s < labels.size(); ++s) {
        auto row = z.row(s);
        const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
        correct += arg == labels[s];
        ++seen;
      }
    }
    result.epochs_run = epoch;
    emit(result, on_epoch,
         {epoch, "train", loss_steps ? loss_sum / loss_steps : 0.0,
          seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0});

    if (data.valid.empty()) {
      best.update(epoch, static_cast<double>(epoch));
      continue;
    }
    ClassificationMetrics valid = evaluate_classification(model, data.valid);
    emit(result, on_epoch, {epoch, "valid", valid.loss, valid.accuracy()});
    if (!best.update(epoch, valid.accuracy())) break;
  }
  best.finish(result);
  return result;
}

// ---------------------------------------------------------------------------

template <typename T>
LinkMetrics evaluate_links(const VoiceSeparationModel<T>& model, const std::vector<ScoreGraph>& pieces,
                           const LinkEvalOptions& opt, std::vector<LinkPrediction>* predictions) {
  LinkMetrics m;
  double loss_sum = 0.0;
  const MusGConvConfig& mcfg = model.encoder.config();
  for (const auto& piece : pieces) {
    const std::size_t total_links = ground_truth_links(piece).size();
    std::size_t covered_links = 0;

    std::vector<ScoreGraph> chunks;
    std::vector<std::vector<int>> chunk_nodes;  // chunk node -> piece node
    if (opt.max_nodes > 0 && piece.n_nodes > opt.max_nodes) {
      std::vector<int> order = order_nodes(piece);
      for (int s = 0; s < piece.n_nodes; s += opt.max_nodes) {
        std::vector<int> ids(order.begin() + s, order.begin() + std::min(piece.n_nodes, s + opt.max_nodes));
        chunks.push_back(induce_subgraph(piece, ids));
        chunk_nodes.push_back(std::move(ids));
      }
    } else {
      chunks.push_back(piece);
      std::vector<int> ids(piece.n_nodes);
      std::iota(ids.begin(), ids.end(), 0);
      chunk_nodes.push_back(std::move(ids));
    }

    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const ScoreGraph& g = chunks[c];
      std::vector<Edge> cands = candidate_pairs(g, opt.candidate_gap);
      std::vector<Edge> links = ground_truth_links(g);
      std::unordered_set<std::uint64_t> link_keys;
      for (const auto& e : links) link_keys.insert(pair_key(e));
      if (cands.empty()) {
        // nothing to score; every link here is uncovered
        continue;
      }
      Var<T> h = model.encoder.forward(g, compute_edge_features(g, mcfg));
      Var<T> logits = model.head(h, cands);
      std::vector<T> y = labels_for<T>(cands, link_keys);
      loss_sum += static_cast<double>(ad::bce_with_logits(logits, std::span<const T>(y)).value()[0]) *
                  static_cast<double>(cands.size());
      m.candidates += cands.size();
      const auto& z = logits.value();
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const double x = static_cast<double>(z[i]);
        const double prob = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        const bool pred = prob > opt.threshold;
        const bool truth = y[i] > T(0.5);
        covered_links += truth;
        if (pred && truth) ++m.counts.tp;
        else if (pred) ++m.counts.fp;
        else if (truth) ++m.counts.fn;
        else ++m.counts.tn;
        if (predictions)
          predictions->push_back(
              {piece.source_name, chunk_nodes[c][cands[i].src], chunk_nodes[c][cands[i].dst], prob, truth});
      }
    }
    const std::size_t uncovered = total_links - covered_links;
    m.uncovered_links += uncovered;
    m.counts.fn += uncovered;
  }
  m.loss = m.candidates ? loss_sum / static_cast<double>(m.candidates) : 0.0;
  return m;
}

template <typename T>
ClassificationMetrics evaluate_classification(const ComposerModel<T>& model, const std::vector<ScoreGraph>& pieces,
                                              std::vector<int>* predicted) {
  ClassificationMetrics m;
  const MusGConvConfig& mcfg = model.encoder.config();
  std::map<int, std::size_t> label_counts;
  double loss_sum = 0.0;
  for (const auto& piece : pieces) {
    if (piece.n_nodes == 0) throw std::invalid_argument("evaluate_classification: empty piece '" + piece.source_name + "'");
    Var<T> h = model.encoder.forward(piece, compute_edge_features(piece, mcfg));
    const std::pair<int, int> range{0, piece.n_nodes};
    Var<T> logits = model.head(h, std::span(&range, 1));
    auto row = logits.value().row(0);
    const int arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (predicted) predicted->push_back(arg);
    if (!piece.class_label) continue;
    const int label = *piece.class_label;
    ++label_counts[label];
    ++m.total;
    m.correct += arg == label;
    loss_sum += static_cast<double>(ad::cross_entropy(logits, std::span(&label, 1)).value()[0]);
  }
  if (m.total) {
    m.loss = loss_sum / static_cast<double>(m.total);
    std::size_t top = 0;
    for (const auto& [label, count] : label_counts) top = std::max(top, count);
    m.majority_baseline = static_cast<double>(top) / static_cast<double>(m.total);
  }
  return m;
}

#define MUSG_INSTANTIATE_TASKS(T)                                                                            \
  template class LinkHead<T>;                                                                                \
  template class ComposerHead<T>;                                                                            \
  template struct VoiceSeparationModel<T>;                                                                   \
  template struct ComposerModel<T>;                                                                          \
  template TrainResult train_voice_separation(VoiceSeparationModel<T>&, const DatasetSplits&,                 \
                                              const TrainConfig&, const EpochCallback&);                     \
  template TrainResult train_composer(ComposerModel<T>&, const DatasetSplits&, const TrainConfig&,           \
                                      const EpochCallback&);                                                 \
  template LinkMetrics evaluate_links(const VoiceSeparationModel<T>&, const std::vector<ScoreGraph>&,        \
                                      const LinkEvalOptions&, std::vector<LinkPrediction>*);                 \
  template ClassificationMetrics evaluate_classification(const ComposerModel<T>&,                            \
                                                         const std::vector<ScoreGraph>&, std::vector<int>*);

MUSG_INSTANTIATE_TASKS(float)
MUSG_INSTANTIATE_TASKS(double)

}  // namespace musg
