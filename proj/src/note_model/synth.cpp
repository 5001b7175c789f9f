#include "musg/note_model.hpp"

#include <algorithm>
#include <random>

namespace musg {
namespace {

template <typename T>
std::discrete_distribution<std::size_t> weighted(const std::vector<T>& items, const std::vector<double>& weights) {
  if (weights.empty()) return std::discrete_distribution<std::size_t>(items.size(), 0.0, 1.0, [](double) { return 1.0; });
  if (weights.size() != items.size()) throw std::invalid_argument("weights must match alphabet size");
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

}  // namespace

std::vector<Score> synth_dataset(const SynthSpec& spec) {
  if (spec.pieces < 0 || spec.voices < 1 || spec.notes_per_voice < 0)
    throw std::invalid_argument("synth: pieces >= 0, voices >= 1, notes_per_voice >= 0 required");
  if (spec.register_centers.size() != static_cast<std::size_t>(spec.voices))
    throw std::invalid_argument("synth: one register center per voice required");
  if (spec.register_range < 0) throw std::invalid_argument("synth: register_range must be non-negative");
  for (int c : spec.register_centers)
    if (c - spec.register_range < 0 || c + spec.register_range > 127)
      throw std::invalid_argument("synth: register band outside [0,127]");

  std::vector<StyleClass> styles = spec.styles;
  if (styles.empty()) styles.push_back(StyleClass{{-2, -1, 1, 2}, {}, {spec.divisions_per_quarter}, {}, 0.0});
  for (const auto& s : styles) {
    if (s.steps.empty() || s.durations.empty()) throw std::invalid_argument("synth: empty step or duration alphabet");
    for (Tick d : s.durations)
      if (d <= 0) throw std::invalid_argument("synth: durations must be positive");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<Score> out;
  out.reserve(spec.pieces);
  for (int p = 0; p < spec.pieces; ++p) {
    const std::size_t cls = static_cast<std::size_t>(p) % styles.size();
    const StyleClass& style = styles[cls];
    auto step_dist = weighted(style.steps, style.step_weights);
    auto dur_dist = weighted(style.durations, style.duration_weights);
    std::bernoulli_distribution rest(style.rest_probability);

    Score score;
    score.divisions_per_quarter = spec.divisions_per_quarter;
    score.time_signatures.push_back({0, spec.time_numerator, spec.time_denominator});
    score.class_label = static_cast<int>(cls);
    score.source_name = "synth_" + std::to_string(p);

    for (int v = 0; v < spec.voices; ++v) {
      const int lo = spec.register_centers[v] - spec.register_range;
      const int hi = spec.register_centers[v] + spec.register_range;
      int pitch = spec.register_centers[v];
      Tick t = 0;
      for (int i = 0; i < spec.notes_per_voice; ++i) {
        if (i > 0) {
          if (rest(rng)) t += style.durations[dur_dist(rng)];
          int step = style.steps[step_dist(rng)];
          if (pitch + step < lo || pitch + step > hi) step = -step;
          pitch = std::clamp(pitch + step, lo, hi);
        }
        NoteEvent n;
        n.onset = t;
        n.duration = style.durations[dur_dist(rng)];
        n.pitch = pitch;
        n.voice = v;
        n.id = static_cast<int>(score.notes.size());
        score.notes.push_back(n);
        t += n.duration;
      }
    }
    normalize(score);
    // Renumber so that ids follow the (onset, pitch) order.
    for (std::size_t i = 0; i < score.notes.size(); ++i) score.notes[i].id = static_cast<int>(i);
    out.push_back(std::move(score));
  }
  return out;
}

SynthSpec synth_preset(std::string_view name) {
  SynthSpec spec;
  spec.voices = 2;
  spec.notes_per_voice = 24;
  spec.divisions_per_quarter = 4;
  if (name == "voices") {
    spec.pieces = 260;
    spec.register_centers = {48, 72};
    spec.register_range = 6;
    spec.styles = {StyleClass{{-3, -2, -1, 1, 2, 3}, {}, {2, 4, 8}, {1, 2, 1}, 0.05}};
    return spec;
  }
  if (name == "styles") {
    spec.pieces = 195;
    spec.register_centers = {52, 72};
    spec.register_range = 7;
    spec.styles = {
        StyleClass{{-2, -1, 1, 2}, {}, {2, 4}, {3, 1}, 0.0},
        StyleClass{{-7, -5, -2, 2, 5, 7}, {}, {2, 4, 8}, {1, 2, 1}, 0.0},
        StyleClass{{-4, -3, -1, 1, 3, 4}, {2, 2, 1, 1, 2, 2}, {2, 6}, {}, 0.2},
    };
    return spec;
  }
  throw std::invalid_argument("unknown synth preset '" + std::string(name) + "'");
}

const std::vector<std::string>& synth_preset_names() {
  static const std::vector<std::string> names = {"voices", "styles"};
  return names;
}

}  // namespace musg
