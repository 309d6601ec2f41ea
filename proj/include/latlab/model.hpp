#ifndef LATLAB_MODEL_HPP
#define LATLAB_MODEL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace latlab {

// Time resolution is one millisecond; frame times are multiples of the
// 10 ms frame duration.
constexpr double kFrameDuration = 0.010;

inline double RoundToMs(double seconds) {
  return static_cast<double>(static_cast<std::int64_t>(seconds * 1000.0 + (seconds >= 0 ? 0.5 : -0.5))) / 1000.0;
}

// A hypothesized (or reference) word with its audio-aligned start/end times.
struct TimedWord {
  std::string text;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const TimedWord& o) const {
    return text == o.text && start == o.start && end == o.end;
  }
};

class OrderingViolation : public std::runtime_error {
 public:
  explicit OrderingViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// A time-aligned word sequence with its accumulated log score.  Words are
// strictly ordered by start time and non-overlapping.
struct Hypothesis {
  std::vector<TimedWord> words;
  double score = 0.0;
  int segment_id = 0;

  std::string Text() const;
};

// Reference truth for a stream; same ordering invariants as Hypothesis.
struct Transcript {
  std::vector<TimedWord> words;
};

struct WerBreakdown {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int reference_length = 0;
  double wer = 0.0;

  int Edits() const { return substitutions + deletions + insertions; }
};

// Validates the word-ordering invariant (start < end per word, words
// strictly ordered and non-overlapping).  Throws OrderingViolation.
void ValidateWordOrder(const std::vector<TimedWord>& words);

// Minimal-edit-distance word error rate with unit costs.  Ties in the DP
// are broken preferring substitution over insertion over deletion, which
// fixes the breakdown counts but not the total.  An empty reference with a
// non-empty hypothesis reports wer = insertions / 1.
WerBreakdown ComputeWer(const std::vector<std::string>& reference,
                        const std::vector<std::string>& hypothesis);

// Concatenates two hypotheses of the same segment.  The prefix must end at
// or before the suffix's first word; scores add.
Hypothesis ConcatHypothesis(const Hypothesis& prefix, const Hypothesis& suffix);

// Reads a reference transcript file: one `word<TAB>start<TAB>end` line per
// word, sorted by start time.
Transcript LoadTranscript(const std::string& path);
void SaveTranscript(const Transcript& t, const std::string& path);

}  // namespace latlab

#endif  // LATLAB_MODEL_HPP
