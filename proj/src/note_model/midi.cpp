#include "musg/note_model.hpp"

#include <deque>
#include <map>
#include <utility>

namespace musg {
namespace {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (at_end()) throw ParseError("unexpected end of data", pos_);
    return bytes_[pos_];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw ParseError("variable-length quantity longer than 4 bytes", pos_ - 1);
  }
  std::string tag() {
    need(4);
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { take(n); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ParseError("unexpected end of data", pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct OpenNote {
  Tick onset;
  std::size_t index;  // into the notes vector
};

struct TrackState {
  int track;
  std::vector<NoteEvent>& notes;
  std::vector<TimeSignatureEvent>& time_signatures;
  std::map<std::pair<int, int>, int>& voices;  // (track, channel) -> voice
  MidiDiagnostics& diag;
  // (channel, pitch) -> FIFO of sounding notes
  std::map<std::pair<int, int>, std::deque<OpenNote>> open;

  void note_on(Tick tick, int channel, int pitch) {
    auto key = std::make_pair(track, channel);
    auto it = voices.find(key);
    if (it == voices.end()) it = voices.emplace(key, static_cast<int>(voices.size())).first;
    NoteEvent n;
    n.onset = tick;
    n.pitch = pitch;
    n.voice = it->second;
    n.id = static_cast<int>(notes.size());
    open[{channel, pitch}].push_back({tick, notes.size()});
    notes.push_back(n);
  }

  void close(const OpenNote& o, Tick tick) {
    Tick d = tick - o.onset;
    if (d <= 0) {
      ++diag.zero_length_notes;
      d = 1;
    }
    notes[o.index].duration = d;
  }

  void note_off(Tick tick, int channel, int pitch) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) {
      ++diag.unmatched_note_off;
      return;
    }
    close(it->second.front(), tick);
    it->second.pop_front();
  }

  void end_of_track(Tick tick) {
    for (auto& [key, fifo] : open) {
      for (const auto& o : fifo) {
        ++diag.unmatched_note_on;
        close(o, tick);
      }
      fifo.clear();
    }
  }
};

int channel_data_length(std::uint8_t status) {
  switch (status & 0xF0) {
    case 0xC0:
    case 0xD0:
      return 1;
    default:
      return 2;
  }
}

void parse_track(ByteReader& in, std::size_t end, TrackState& st) {
  Tick tick = 0;
  std::uint8_t running = 0;
  while (in.offset() < end) {
    tick += in.vlq();
    std::size_t event_offset = in.offset();
    std::uint8_t status = in.peek();
    if (status & 0x80) {
      in.u8();
    } else {
      if (running == 0) throw ParseError("data byte without running status", event_offset);
      status = running;
    }

    if (status == 0xFF) {
      std::uint8_t type = in.u8();
      std::uint32_t len = in.vlq();
      auto data = in.take(len);
      if (type == 0x2F) {
        st.end_of_track(tick);
        in.skip(end - in.offset());
        return;
      }
      if (type == 0x58) {
        if (len < 2) throw ParseError("time signature meta event too short", event_offset);
        if (data[1] > 15) throw ParseError("time signature denominator exponent too large", event_offset);
        int num = data[0];
        if (num < 1) throw ParseError("time signature numerator must be positive", event_offset);
        st.time_signatures.push_back({tick, num, 1 << data[1]});
      }
      running = 0;
    } else if (status == 0xF0 || status == 0xF7) {
      in.skip(in.vlq());
      running = 0;
    } else if (status >= 0xF1) {
      throw ParseError("unexpected system message in track", event_offset);
    } else {
      running = status;
      int channel = status & 0x0F;
      std::uint8_t d1 = in.u8();
      std::uint8_t d2 = channel_data_length(status) == 2 ? in.u8() : 0;
      if ((d1 & 0x80) || (d2 & 0x80)) throw ParseError("status byte inside channel message", event_offset);
      switch (status & 0xF0) {
        case 0x90:
          if (d2 == 0)
            st.note_off(tick, channel, d1);
          else
            st.note_on(tick, channel, d1);
          break;
        case 0x80:
          st.note_off(tick, channel, d1);
          break;
        default:
          break;
      }
    }
    if (in.offset() > end) throw ParseError("event crosses chunk boundary", event_offset);
  }
  // Track without an end-of-track meta event.
  st.end_of_track(tick);
}

}  // namespace

Score parse_midi(std::span<const std::uint8_t> bytes, MidiDiagnostics* diagnostics) {
  ByteReader in(bytes);
  MidiDiagnostics diag;

  if (in.remaining() < 14 || in.tag() != "MThd") throw ParseError("missing MThd header", 0);
  std::uint32_t header_len = in.u32();
  if (header_len < 6) throw ParseError("malformed header length", 4);
  std::uint16_t format = in.u16();
  std::uint16_t ntracks = in.u16();
  std::uint16_t division = in.u16();
  if (format > 1) throw ParseError("unsupported format", 8);
  if (division & 0x8000) throw ParseError("SMPTE time division not supported", 12);
  if (division == 0) throw ParseError("zero ticks per quarter note", 12);
  in.skip(header_len - 6);

  Score score;
  score.divisions_per_quarter = division;
  std::map<std::pair<int, int>, int> voices;

  int track = 0;
  while (track < ntracks) {
    std::size_t chunk_offset = in.offset();
    if (in.remaining() < 8) throw ParseError("missing track chunk", chunk_offset);
    std::string tag = in.tag();
    std::uint32_t len = in.u32();
    if (len > in.remaining()) throw ParseError("chunk length exceeds file size", chunk_offset + 4);
    if (tag != "MTrk") {
      in.skip(len);
      continue;
    }
    TrackState st{track, score.notes, score.time_signatures, voices, diag, {}};
    parse_track(in, in.offset() + len, st);
    ++track;
  }

  normalize(score);
  if (diagnostics) *diagnostics = diag;
  return score;
}

}  // namespace musg
