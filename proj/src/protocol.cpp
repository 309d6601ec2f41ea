#include "latlab/protocol.hpp"

#include <fstream>

#include "json.hpp"

namespace latlab {

const char* EventKindName(EventKind k) {
  switch (k) {
    case EventKind::kSegmentStart: return "segment_start";
    case EventKind::kStable: return "stable";
    case EventKind::kUpdate: return "update";
    case EventKind::kFlush: return "flush";
    case EventKind::kSegmentEnd: return "segment_end";
  }
  return "?";
}

namespace {

std::optional<EventKind> ParseKind(const std::string& s) {
  if (s == "segment_start") return EventKind::kSegmentStart;
  if (s == "stable") return EventKind::kStable;
  if (s == "update") return EventKind::kUpdate;
  if (s == "flush") return EventKind::kFlush;
  if (s == "segment_end") return EventKind::kSegmentEnd;
  return std::nullopt;
}

}  // namespace

std::string EncodeEvent(const EmissionEvent& ev) {
  nlohmann::json j;
  j["kind"] = EventKindName(ev.kind);
  j["segment"] = ev.segment_id;
  j["t_emit"] = RoundToMs(ev.emit_time);
  j["replace_from"] = ev.replace_from;
  nlohmann::json words = nlohmann::json::array();
  for (const auto& w : ev.words) {
    words.push_back({{"text", w.text},
                     {"start", RoundToMs(w.start)},
                     {"end", RoundToMs(w.end)}});
  }
  j["words"] = std::move(words);
  return j.dump();
}

EmissionEvent DecodeEvent(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DecodeError("malformed event line", 0);
  }
  EmissionEvent ev;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto k = ParseKind(kind);
    if (!k) throw DecodeError("unknown event kind: " + kind, line.find(kind));
    ev.kind = *k;
    ev.segment_id = j.at("segment").get<int>();
    ev.emit_time = j.at("t_emit").get<double>();
    ev.replace_from = j.at("replace_from").get<int>();
    for (const auto& w : j.at("words")) {
      TimedWord tw;
      tw.text = w.at("text").get<std::string>();
      tw.start = w.at("start").get<double>();
      tw.end = w.at("end").get<double>();
      ev.words.push_back(std::move(tw));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("event field error: ") + e.what(), 0);
  }
  return ev;
}

std::vector<EmissionEvent> LoadEventLog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open event log: " + path);
  std::vector<EmissionEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(DecodeEvent(line));
  }
  return out;
}

void SaveEventLog(const std::vector<EmissionEvent>& events,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event log: " + path);
  for (const auto& ev : events) out << EncodeEvent(ev) << "\n";
}

std::optional<std::pair<int, std::vector<TimedWord>>> DiffUpdate(
    const std::vector<TimedWord>& prev_emitted_tail,
    const std::vector<TimedWord>& current_best_tail) {
  size_t common = 0;
  while (common < prev_emitted_tail.size() &&
         common < current_best_tail.size() &&
         prev_emitted_tail[common].text == current_best_tail[common].text) {
    ++common;
  }
  if (common == prev_emitted_tail.size() && common == current_best_tail.size()) {
    return std::nullopt;
  }
  std::vector<TimedWord> words(current_best_tail.begin() + common,
                               current_best_tail.end());
  return std::make_pair(static_cast<int>(common), std::move(words));
}

void DisplayState::ApplyEvent(const EmissionEvent& ev) {
  SegmentDisplay& seg = segments_[ev.segment_id];
  if (seg.ended) {
    throw ProtocolError("event after segment_end for segment " +
                        std::to_string(ev.segment_id));
  }
  if (seg.saw_event && ev.emit_time < seg.last_emit_time) {
    throw ProtocolError("non-monotone emit time in segment " +
                        std::to_string(ev.segment_id));
  }
  if (!seg.saw_event && ev.kind != EventKind::kSegmentStart) {
    throw ProtocolError("segment event before segment_start");
  }
  seg.saw_event = true;
  seg.last_emit_time = ev.emit_time;

  switch (ev.kind) {
    case EventKind::kSegmentStart:
      break;
    case EventKind::kUpdate: {
      if (ev.replace_from > static_cast<int>(seg.revisable.size())) {
        throw ProtocolError("update replace_from beyond revisable region");
      }
      seg.revisable.resize(ev.replace_from);
      for (const auto& w : ev.words) {
        seg.revisable.push_back({w, ev.emit_time, ev.emit_time, false});
      }
      break;
    }
    case EventKind::kStable:
    case EventKind::kFlush: {
      // The matching revisable prefix moves to committed without touching
      // its update times; words never displayed before are appended fresh.
      size_t matched = 0;
      for (const auto& w : ev.words) {
        if (matched < seg.revisable.size()) {
          if (seg.revisable[matched].word.text != w.text) {
            throw ProtocolError("stable portion disagrees with displayed prefix: '" +
                                w.text + "' vs '" +
                                seg.revisable[matched].word.text + "'");
          }
          DisplayedWord dw = seg.revisable[matched];
          dw.word = w;  // stable times are authoritative
          dw.finalized = true;
          seg.committed.push_back(std::move(dw));
          ++matched;
        } else {
          seg.committed.push_back({w, ev.emit_time, ev.emit_time, true});
        }
      }
      seg.revisable.erase(seg.revisable.begin(),
                          seg.revisable.begin() + static_cast<long>(matched));
      break;
    }
    case EventKind::kSegmentEnd: {
      if (!seg.revisable.empty()) {
        throw ProtocolError("segment_end with uncommitted revisable words");
      }
      seg.ended = true;
      break;
    }
  }
}

std::string DisplayState::CommittedText(int segment_id) const {
  auto it = segments_.find(segment_id);
  if (it == segments_.end()) return "";
  std::string out;
  for (const auto& dw : it->second.committed) {
    if (!out.empty()) out += ' ';
    out += dw.word.text;
  }
  return out;
}

}  // namespace latlab
