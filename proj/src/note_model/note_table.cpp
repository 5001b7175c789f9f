#include "musg/note_model.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace musg {
namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::int64_t parse_int(std::string_view field, std::string_view name, std::size_t line) {
  field = trim(field);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line) + ": field '" + std::string(name) +
                         "' is not an integer",
                     line);
  return v;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Score parse_note_table(std::string_view text) {
  Score score;
  bool have_divisions = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (auto eq = line.find('='); eq != std::string_view::npos) {
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key == "divisions") {
        score.divisions_per_quarter = static_cast<int>(parse_int(value, "divisions", line_no));
        if (score.divisions_per_quarter <= 0)
          throw ParseError("line " + std::to_string(line_no) + ": divisions must be positive", line_no);
        have_divisions = true;
      } else if (key == "class") {
        score.class_label = static_cast<int>(parse_int(value, "class", line_no));
      } else if (key == "timesig") {
        auto colon = value.find(':');
        auto slash = value.find('/');
        if (colon == std::string_view::npos || slash == std::string_view::npos || slash < colon)
          throw ParseError("line " + std::to_string(line_no) + ": timesig must be <start>:<num>/<den>",
                           line_no);
        TimeSignatureEvent ts;
        ts.start = parse_int(value.substr(0, colon), "timesig start", line_no);
        ts.numerator = static_cast<int>(parse_int(value.substr(colon + 1, slash - colon - 1), "timesig numerator", line_no));
        ts.denominator = static_cast<int>(parse_int(value.substr(slash + 1), "timesig denominator", line_no));
        if (ts.numerator < 1 || ts.denominator < 1 || (ts.denominator & (ts.denominator - 1)) != 0 || ts.start < 0)
          throw ParseError("line " + std::to_string(line_no) + ": invalid time signature", line_no);
        score.time_signatures.push_back(ts);
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": unknown header key '" + std::string(key) + "'",
                         line_no);
      }
      continue;
    }

    static constexpr std::string_view names[] = {"onset", "duration", "pitch", "voice"};
    std::int64_t values[4];
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      auto comma = line.find(',', start);
      if (f < 3 && comma == std::string_view::npos)
        throw ParseError("line " + std::to_string(line_no) + ": missing field '" + std::string(names[f + 1]) + "'",
                         line_no);
      if (f == 3 && comma != std::string_view::npos)
        throw ParseError("line " + std::to_string(line_no) + ": too many fields", line_no);
      auto end = f < 3 ? comma : line.size();
      values[f] = parse_int(line.substr(start, end - start), names[f], line_no);
      start = end + 1;
    }
    auto fail = [&](const std::string& msg) {
      throw ParseError("line " + std::to_string(line_no) + ": " + msg, line_no);
    };
    if (values[0] < 0) fail("onset must be non-negative");
    if (values[1] <= 0) fail("duration must be positive");
    if (values[2] < 0 || values[2] > 127) fail("pitch must be in [0,127]");
    if (values[3] < 0) fail("voice must be non-negative");

    NoteEvent n;
    n.onset = values[0];
    n.duration = values[1];
    n.pitch = static_cast<int>(values[2]);
    n.voice = static_cast<int>(values[3]);
    n.id = static_cast<int>(score.notes.size());
    score.notes.push_back(n);
  }
  if (!have_divisions) throw ParseError("missing required header 'divisions'", 1);
  normalize(score);
  return score;
}

std::string write_note_table(const Score& score) {
  std::ostringstream out;
  if (!score.source_name.empty()) out << "# " << score.source_name << '\n';
  out << "divisions=" << score.divisions_per_quarter << '\n';
  if (score.class_label) out << "class=" << *score.class_label << '\n';
  for (const auto& t : score.time_signatures)
    out << "timesig=" << t.start << ':' << t.numerator << '/' << t.denominator << '\n';
  for (const auto& n : score.notes)
    out << n.onset << ',' << n.duration << ',' << n.pitch << ',' << n.voice << '\n';
  return out.str();
}

Score load_score_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Score score;
  if (ends_with(path, ".mid") || ends_with(path, ".midi") ||
      (raw.size() >= 4 && std::string_view(raw.data(), 4) == "MThd")) {
    score = parse_midi(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
  } else {
    score = parse_note_table(std::string_view(raw.data(), raw.size()));
  }
  auto slash = path.find_last_of('/');
  score.source_name = slash == std::string::npos ? path : path.substr(slash + 1);
  return score;
}

}  // namespace musg
