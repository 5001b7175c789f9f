#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace musg {

using Tick = std::int64_t;

struct NoteEvent {
  Tick onset = 0;
  Tick duration = 1;
  int pitch = 60;
  int voice = 0;
  int id = 0;

  Tick offset() const { return onset + duration; }
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct TimeSignatureEvent {
  Tick start = 0;
  int numerator = 4;
  int denominator = 4;
  friend bool operator==(const TimeSignatureEvent&, const TimeSignatureEvent&) = default;
};

struct Score {
  int divisions_per_quarter = 480;
  std::vector<NoteEvent> notes;
  std::vector<TimeSignatureEvent> time_signatures;
  std::string source_name;
  std::optional<int> class_label;

  friend bool operator==(const Score&, const Score&) = default;
};

// Thrown by every ingestion routine. `position` is a byte offset for binary
// input and a 1-based line number for text input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Sorts notes by (onset, pitch, id), sorts time signatures, inserts the
// default 4/4 at tick 0 when missing and checks the note invariants.
// Throws std::invalid_argument when a note is out of range or ids are not a
// dense 0..n-1 set.
void normalize(Score& score);

// Bar length in ticks of the time signature in force at `tick`.
Tick bar_duration_at(const Score& score, Tick tick);

Score transpose(Score score, int semitones);
Score shift_time(Score score, Tick delta);

// ---------------------------------------------------------------------------
// Standard MIDI File

struct MidiDiagnostics {
  int unmatched_note_on = 0;   // closed at end of track
  int unmatched_note_off = 0;  // ignored
  int zero_length_notes = 0;   // clamped to one tick
};

// Formats 0 and 1 with tick-based division. Notes are matched FIFO per
// (track, channel, pitch); voices are dense ids of (track, channel) pairs in
// order of first note-on.
Score parse_midi(std::span<const std::uint8_t> bytes, MidiDiagnostics* diagnostics = nullptr);

// ---------------------------------------------------------------------------
// Note table text format

Score parse_note_table(std::string_view text);
std::string write_note_table(const Score& score);

Score load_score_file(const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic polyphonic data

struct StyleClass {
  std::vector<int> steps;               // melodic intervals in semitones
  std::vector<double> step_weights;
  std::vector<Tick> durations;          // duration alphabet in ticks
  std::vector<double> duration_weights;
  double rest_probability = 0.0;
};

struct SynthSpec {
  int pieces = 1;
  int voices = 1;
  int notes_per_voice = 8;
  std::vector<int> register_centers;    // one per voice
  int register_range = 6;
  int divisions_per_quarter = 4;
  int time_numerator = 4;
  int time_denominator = 4;
  std::uint64_t seed = 0;
  // Piece i uses styles[i % styles.size()] and gets class_label i % size.
  std::vector<StyleClass> styles;
};

std::vector<Score> synth_dataset(const SynthSpec& spec);

// Named recipes shared by the CLI and the acceptance suite:
//   "voices": two voices in disjoint registers, one style.
//   "styles": two voices, three styles that differ in interval and rhythm.
// Throws std::invalid_argument for an unknown name.
SynthSpec synth_preset(std::string_view name);
const std::vector<std::string>& synth_preset_names();

}  // namespace musg
