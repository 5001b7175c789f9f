#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "musg/musgconv.hpp"
#include "musg/nn.hpp"
#include "musg/sampler.hpp"
#include "musg/score_graph.hpp"

namespace musg {

// Raised when training produces a non-finite loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Link structure

// Per voice, notes sorted by (onset, pitch, id) and chained to their
// immediate successor.
std::vector<Edge> ground_truth_links(const ScoreGraph& graph);
std::vector<Edge> ground_truth_links(const ScoreGraph& graph, std::span<const std::pair<int, int>> ranges);

// Ordered pairs u != v with on(v) >= on(u) and on(v) - off(u) <= gap, where
// gap is `gap_ticks` or, when unset, the bar length at on(u). Only pairs
// inside the same range are produced; with no ranges the whole graph is one.
std::vector<Edge> candidate_pairs(const ScoreGraph& graph, std::optional<Tick> gap_ticks);
std::vector<Edge> candidate_pairs(const ScoreGraph& graph, std::optional<Tick> gap_ticks,
                                  std::span<const std::pair<int, int>> ranges);

// ---------------------------------------------------------------------------
// Heads

// Two-layer MLP on cat(h_src, h_dst) -> one logit per pair.
template <typename T>
class LinkHead {
 public:
  LinkHead() = default;
  LinkHead(nn::ParameterStore<T>& store, std::size_t hidden, std::mt19937_64& rng,
           const std::string& name = "link_head");
  ad::Var<T> operator()(const ad::Var<T>& h, std::span<const Edge> pairs) const;
  const nn::Mlp2<T>& mlp() const { return mlp_; }

 private:
  nn::Mlp2<T> mlp_;
};

// Mean pooling per node range followed by a two-layer MLP -> class logits.
template <typename T>
class ComposerHead {
 public:
  ComposerHead() = default;
  ComposerHead(nn::ParameterStore<T>& store, std::size_t hidden, std::size_t n_classes, std::mt19937_64& rng,
               const std::string& name = "composer_head");
  ad::Var<T> operator()(const ad::Var<T>& h, std::span<const std::pair<int, int>> ranges) const;
  std::size_t n_classes() const { return n_classes_; }

 private:
  nn::Mlp2<T> mlp_;
  std::size_t n_classes_ = 0;
};

template <typename T>
struct VoiceSeparationModel {
  VoiceSeparationModel(const MusGConvConfig& cfg, std::uint64_t seed);
  VoiceSeparationModel(const VoiceSeparationModel&) = delete;
  VoiceSeparationModel& operator=(const VoiceSeparationModel&) = delete;

  nn::ParameterStore<T> store;
  std::mt19937_64 init_rng;
  Encoder<T> encoder;
  LinkHead<T> head;
};

template <typename T>
struct ComposerModel {
  ComposerModel(const MusGConvConfig& cfg, std::size_t n_classes, std::uint64_t seed);
  ComposerModel(const ComposerModel&) = delete;
  ComposerModel& operator=(const ComposerModel&) = delete;

  nn::ParameterStore<T> store;
  std::mt19937_64 init_rng;
  Encoder<T> encoder;
  ComposerHead<T> head;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  int epochs = 50;
  int patience = 10;
  int negative_ratio = 5;
  std::optional<Tick> candidate_gap;  // unset: one bar at the source note
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int k_nodes = 512;
  int batch_subgraphs = 8;

  void validate() const;
};

struct DatasetSplits {
  std::vector<ScoreGraph> train, valid, test;
};

// Piece-level shuffle with `seed`, then 70/10/20.
DatasetSplits split_dataset(std::vector<ScoreGraph> pieces, std::uint64_t seed, double train_fraction = 0.7,
                            double valid_fraction = 0.1);

struct EpochRecord {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double metric = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 = initialization
  double best_valid_metric = 0.0;
  int epochs_run = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Keeps the best-validation weights in `model` on return.
template <typename T>
TrainResult train_voice_separation(VoiceSeparationModel<T>& model, const DatasetSplits& data,
                                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});
template <typename T>
TrainResult train_composer(ComposerModel<T>& model, const DatasetSplits& data, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Evaluation

struct BinaryCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct LinkPrediction {
  std::string piece;
  int src = 0, dst = 0;
  double prob = 0.0;
  bool label = false;
};

struct LinkMetrics {
  BinaryCounts counts;
  double loss = 0.0;  // mean BCE over all scored candidates
  std::size_t candidates = 0;
  // Ground-truth links absent from the candidate set; they count as false
  // negatives.
  std::size_t uncovered_links = 0;
  double precision() const { return counts.precision(); }
  double recall() const { return counts.recall(); }
  double f1() const { return counts.f1(); }
};

struct LinkEvalOptions {
  std::optional<Tick> candidate_gap;
  double threshold = 0.5;
  // Pieces larger than this are evaluated in consecutive windows of this
  // many nodes; links across window boundaries are lost. 0 = no limit.
  int max_nodes = 0;
};

template <typename T>
LinkMetrics evaluate_links(const VoiceSeparationModel<T>& model, const std::vector<ScoreGraph>& pieces,
                           const LinkEvalOptions& opt, std::vector<LinkPrediction>* predictions = nullptr);

struct ClassificationMetrics {
  std::size_t correct = 0, total = 0;
  double loss = 0.0;
  double majority_baseline = 0.0;  // accuracy of always predicting the most frequent label
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

template <typename T>
ClassificationMetrics evaluate_classification(const ComposerModel<T>& model, const std::vector<ScoreGraph>& pieces,
                                              std::vector<int>* predicted = nullptr);

}  // namespace musg
