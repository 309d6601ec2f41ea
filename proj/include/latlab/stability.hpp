#ifndef LATLAB_STABILITY_HPP
#define LATLAB_STABILITY_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "latlab/decoder.hpp"
#include "latlab/model.hpp"

namespace latlab {

// The hypothesis prefix shared by every active search path.  Once emitted
// it is immortal: it is a prefix of every later stable portion and of the
// final hypothesis.
struct StablePortion {
  std::vector<TimedWord> words;
  std::int64_t through_frame = 0;
  int segment_id = 0;

  bool Empty() const { return words.empty(); }
};

struct FlushConfig {
  double threshold = std::numeric_limits<double>::infinity();
  bool enabled = false;
};

// Partial traceback: extracts the newly stabilized words (common ancestor
// path of all active tokens beyond the emitted-prefix cursor) and advances
// the cursor.
inline StablePortion StablePrefix(Decoder& dec) {
  StablePortion p;
  p.segment_id = dec.segment_id();
  const std::int32_t lca = dec.CommonAncestor();
  p.words = dec.AdvanceCursor(lca);
  p.through_frame =
      p.words.empty()
          ? 0
          : static_cast<std::int64_t>(std::llround(p.words.back().end / kFrameDuration));
  return p;
}

// Forced flush: when nothing has been committed for longer than the
// threshold, the completed words of the current best hypothesis are
// committed as if they were stable, and the search is constrained to them.
inline std::optional<std::vector<TimedWord>> MaybeFlush(Decoder& dec,
                                                        double now,
                                                        double last_emission,
                                                        const FlushConfig& cfg) {
  if (!cfg.enabled) return std::nullopt;
  if (!(now - last_emission > cfg.threshold)) return std::nullopt;
  const std::int32_t best = dec.BestTrace();
  if (best == dec.emitted_cursor()) return std::nullopt;
  dec.ConstrainToEntry(best);
  std::vector<TimedWord> words = dec.AdvanceCursor(best);
  if (words.empty()) return std::nullopt;
  return words;
}

}  // namespace latlab

#endif  // LATLAB_STABILITY_HPP
