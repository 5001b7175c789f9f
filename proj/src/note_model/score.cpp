#include "musg/note_model.hpp"

#include <algorithm>
#include <tuple>

namespace musg {

void normalize(Score& score) {
  if (score.divisions_per_quarter <= 0)
    throw std::invalid_argument("divisions_per_quarter must be positive");

  std::vector<bool> seen(score.notes.size(), false);
  for (const auto& n : score.notes) {
    if (n.duration <= 0) throw std::invalid_argument("duration must be positive");
    if (n.pitch < 0 || n.pitch > 127) throw std::invalid_argument("pitch out of range [0,127]");
    if (n.onset < 0) throw std::invalid_argument("onset must be non-negative");
    if (n.voice < 0) throw std::invalid_argument("voice must be non-negative");
    if (n.id < 0 || static_cast<std::size_t>(n.id) >= seen.size() || seen[n.id])
      throw std::invalid_argument("note ids must be a dense 0..n-1 set");
    seen[n.id] = true;
  }
  std::sort(score.notes.begin(), score.notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    return std::tie(a.onset, a.pitch, a.id) < std::tie(b.onset, b.pitch, b.id);
  });

  auto& ts = score.time_signatures;
  for (const auto& t : ts) {
    if (t.numerator < 1 || t.denominator < 1 || (t.denominator & (t.denominator - 1)) != 0)
      throw std::invalid_argument("invalid time signature");
    if (t.start < 0) throw std::invalid_argument("time signature start must be non-negative");
  }
  // Later entries win on identical start ticks.
  std::stable_sort(ts.begin(), ts.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  std::vector<TimeSignatureEvent> unique;
  for (const auto& t : ts) {
    if (!unique.empty() && unique.back().start == t.start)
      unique.back() = t;
    else
      unique.push_back(t);
  }
  if (unique.empty() || unique.front().start != 0)
    unique.insert(unique.begin(), TimeSignatureEvent{0, 4, 4});
  ts = std::move(unique);
}

Tick bar_duration_at(const Score& score, Tick tick) {
  TimeSignatureEvent current{0, 4, 4};
  for (const auto& t : score.time_signatures) {
    if (t.start > tick) break;
    current = t;
  }
  // numerator * (4 / denominator) quarters, kept integral for denominators > 4
  return static_cast<Tick>(current.numerator) * 4 * score.divisions_per_quarter /
         current.denominator;
}

Score transpose(Score score, int semitones) {
  for (auto& n : score.notes) n.pitch += semitones;
  return score;
}

Score shift_time(Score score, Tick delta) {
  for (auto& n : score.notes) n.onset += delta;
  for (auto& t : score.time_signatures)
    if (t.start != 0) t.start += delta;
  return score;
}

}  // namespace musg
