#ifndef LATLAB_PROTOCOL_HPP
#define LATLAB_PROTOCOL_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latlab/ingest.hpp"
#include "latlab/model.hpp"

namespace latlab {

enum class EventKind { kSegmentStart, kStable, kUpdate, kFlush, kSegmentEnd };

const char* EventKindName(EventKind k);

// One recognizer -> display message.  Stable and Flush words extend the
// committed region; Update rewrites the revisable tail from replace_from.
struct EmissionEvent {
  EventKind kind = EventKind::kUpdate;
  int segment_id = 0;
  double emit_time = 0.0;
  std::vector<TimedWord> words;
  int replace_from = 0;

  bool operator==(const EmissionEvent& o) const {
    return kind == o.kind && segment_id == o.segment_id &&
           emit_time == o.emit_time && words == o.words &&
           replace_from == o.replace_from;
  }
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& msg, size_t offset)
      : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"),
        offset(offset) {}
  size_t offset;
};

// One JSON object per line; times are decimal seconds at millisecond
// precision.  encode(decode(line)) == line for lines produced here.
std::string EncodeEvent(const EmissionEvent& ev);
EmissionEvent DecodeEvent(const std::string& line);

std::vector<EmissionEvent> LoadEventLog(const std::string& path);
void SaveEventLog(const std::vector<EmissionEvent>& events, const std::string& path);

// Word-level diff of two hypothesis tails starting at the same committed
// cursor: replace_from is the longest common prefix by text (times may
// silently refresh); nothing is returned when the texts are identical.
std::optional<std::pair<int, std::vector<TimedWord>>> DiffUpdate(
    const std::vector<TimedWord>& prev_emitted_tail,
    const std::vector<TimedWord>& current_best_tail);

struct DisplayedWord {
  TimedWord word;
  double first_appearance_time = 0.0;
  double last_update_time = 0.0;
  bool finalized = false;
};

struct SegmentDisplay {
  std::vector<DisplayedWord> committed;
  std::vector<DisplayedWord> revisable;
  bool ended = false;
  double last_emit_time = 0.0;
  bool saw_event = false;
};

// Display-side reconstruction of the transcript from the event stream.
// The committed region only grows; SegmentEnd requires the revisable tail
// to have been committed.
class DisplayState {
 public:
  void ApplyEvent(const EmissionEvent& ev);

  const std::map<int, SegmentDisplay>& segments() const { return segments_; }
  // Committed text of one segment, space-joined.
  std::string CommittedText(int segment_id) const;

 private:
  std::map<int, SegmentDisplay> segments_;
};

}  // namespace latlab

#endif  // LATLAB_PROTOCOL_HPP
