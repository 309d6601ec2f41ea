#ifndef LATLAB_DECODER_HPP
#define LATLAB_DECODER_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "latlab/ingest.hpp"
#include "latlab/lm.hpp"
#include "latlab/model.hpp"
#include "latlab/pruning.hpp"

namespace latlab {

// Pseudo word id for the optional, LM-transparent silence entry; it leaves
// the LM history untouched and never appears in hypotheses.
constexpr WordId kSilenceWord = -2;

// Maps every vocabulary word onto a short sequence of acoustic state ids.
// By default each word gets three states whose ids are hashed from the word
// text and the position, so distinct words can share states.
class PronLexicon {
 public:
  // hash_range limits the ids words can map to (0 means the full
  // inventory); ids at and above it are reserved, e.g. for silence.
  static PronLexicon FromVocabulary(const std::vector<std::string>& words,
                                    int state_inventory,
                                    int states_per_word = 3,
                                    int hash_range = 0);
  // Optional `word<TAB>state_count` override file.
  static PronLexicon FromVocabularyWithFile(const std::vector<std::string>& words,
                                            int state_inventory,
                                            const std::string& path,
                                            int default_states = 3);

  int state_inventory() const { return state_inventory_; }
  size_t size() const { return states_.size(); }
  std::span<const int> States(WordId w) const {
    return w == kSilenceWord ? std::span<const int>(silence_states_)
                             : std::span<const int>(states_[w]);
  }

  // Registers the optional silence entry (usually a single reserved state).
  void SetSilence(std::vector<int> states) { silence_states_ = std::move(states); }
  bool has_silence() const { return !silence_states_.empty(); }

 private:
  int state_inventory_ = 0;
  std::vector<std::vector<int>> states_;
  std::vector<int> silence_states_;
};

// Pluggable per-frame acoustic scores.  The embedded scorer reads the score
// vector that travels with the frame (the synthetic stream files carry
// precomputed vectors).
class AcousticScorer {
 public:
  virtual ~AcousticScorer() = default;
  virtual std::span<const float> ScoreFrame(const Frame& frame) const = 0;
};

class EmbeddedScorer : public AcousticScorer {
 public:
  std::span<const float> ScoreFrame(const Frame& frame) const override {
    return frame.acoustic_scores;
  }
};

struct DecoderConfig {
  double beam = 12.0;      // natural-log width, may be narrowed per chunk
  int max_active = 2000;   // token cap after pruning
  CostModel cost;
};

constexpr int kMaxLmHistory = 3;

// Reference-counted traceback forest of completed words.  Entries that no
// live token can reach are reclaimed into a free list.
class TraceArena {
 public:
  static constexpr std::int32_t kRoot = -1;

  struct Entry {
    TimedWord word;
    std::int32_t parent = kRoot;
    std::int32_t refcount = 0;
    std::int32_t depth = 0;
  };

  std::int32_t New(TimedWord word, std::int32_t parent);
  void Ref(std::int32_t e);
  void Unref(std::int32_t e);
  const Entry& At(std::int32_t e) const { return entries_[e]; }
  std::int32_t Depth(std::int32_t e) const {
    return e == kRoot ? 0 : entries_[e].depth;
  }
  std::int32_t Parent(std::int32_t e) const {
    return e == kRoot ? kRoot : entries_[e].parent;
  }
  bool IsAncestor(std::int32_t ancestor, std::int32_t node) const;
  // Words strictly between `ancestor` (exclusive) and `node` (inclusive),
  // oldest first.
  std::vector<TimedWord> PathWords(std::int32_t ancestor, std::int32_t node) const;
  size_t LiveCount() const;
  // Debug audit: every live entry is reachable from the given references.
  bool AuditRefs(std::span<const std::int32_t> live_refs) const;

 private:
  std::vector<Entry> entries_;
  std::vector<std::int32_t> free_;
};

struct Token {
  WordId word = -1;     // -1: segment-initial root, not inside any word
  int state_idx = -1;   // position within the word's state sequence
  std::int64_t word_start_frame = 0;
  std::array<WordId, kMaxLmHistory> hist{};
  int hist_len = 0;
  double score = 0.0;
  std::int32_t trace = TraceArena::kRoot;
};

class SearchError : public std::runtime_error {
 public:
  explicit SearchError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ChunkResult {
  Hypothesis best;
  double work = 0.0;                  // virtual-seconds under the cost model
  std::int64_t token_frame_sum = 0;   // surviving tokens summed over frames
};

// Incremental time-synchronous token-passing search over one segment.
class Decoder {
 public:
  Decoder(const PronLexicon& lexicon, const NGramModel& lm, DecoderConfig cfg);

  void InitSearch(int segment_id);
  ChunkResult DecodeChunk(const Chunk& chunk, const AcousticScorer& am);
  // Must be called when the stream reports EndOfSegment, before finalizing.
  void NoteEndOfSegment();
  Hypothesis FinalizeSegment();

  void SetBeam(double beam) { beam_ = beam; }
  double beam() const { return beam_; }
  bool open() const { return open_; }
  int segment_id() const { return segment_id_; }
  std::int64_t frames_consumed() const { return frames_consumed_; }
  double LastFrameEndTime() const;

  const TraceArena& arena() const { return arena_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  std::int32_t emitted_cursor() const { return emitted_cursor_; }

  Hypothesis BestHypothesis() const;
  // Deepest trace entry shared by every active token.
  std::int32_t CommonAncestor() const;
  // Moves the emitted-prefix cursor forward to `entry` (must be a common
  // ancestor of all active tokens) and returns the newly covered words.
  std::vector<TimedWord> AdvanceCursor(std::int32_t entry);
  // Drops every token whose traceback does not pass through `entry`; used
  // when a forced flush commits material that is not yet stable.
  void ConstrainToEntry(std::int32_t entry);
  // Trace entry holding the last *completed* word of the current best token.
  std::int32_t BestTrace() const;

 private:
  // Cached LM row for one history: natural-log scores over the vocabulary
  // plus their maximum (used to prune whole histories before the word loop).
  struct LmRowData {
    std::vector<double> row;
    double max = 0.0;
  };

  void ProcessFrame(const Frame& frame, const AcousticScorer& am);
  const Token& BestToken() const;
  const LmRowData& LmRow(const std::array<WordId, kMaxLmHistory>& hist,
                         int hist_len);

  const PronLexicon& lexicon_;
  const NGramModel& lm_;
  DecoderConfig cfg_;
  int lm_history_len_;

  double beam_;
  bool open_ = false;
  bool ended_ = false;
  int segment_id_ = -1;
  std::int64_t frames_consumed_ = 0;
  std::int64_t last_frame_index_ = -1;
  std::int64_t expected_next_index_ = -1;
  std::int32_t emitted_cursor_ = TraceArena::kRoot;

  TraceArena arena_;
  std::vector<Token> tokens_;
  std::vector<int> first_state_;  // state 0 of every word, densely indexed
  std::unordered_map<std::uint64_t, LmRowData> lm_rows_;
};

// Deterministic synthetic acoustic scorer used by the benchmark generator:
// the aligned truth state scores near zero, competitors sit a margin below,
// and planted hard regions shrink that margin for a set of competitor
// states to keep ambiguity (and the search space) alive.
class SyntheticScorer : public AcousticScorer {
 public:
  struct HardRegion {
    std::int64_t begin_frame = 0;
    std::int64_t end_frame = 0;  // exclusive
  };

  struct Config {
    int state_count = 0;
    double margin = 4.0;
    double sigma = 0.5;
    double hard_margin = 1.5;
    int hard_competitors = 16;
    std::uint64_t seed = 0;
  };

  SyntheticScorer(Config cfg, std::vector<int> truth_state_per_frame,
                  std::vector<HardRegion> regions);

  std::vector<float> Scores(std::int64_t frame_index) const;
  std::span<const float> ScoreFrame(const Frame& frame) const override;

  std::int64_t frame_count() const {
    return static_cast<std::int64_t>(alignment_.size());
  }
  bool InHardRegion(std::int64_t frame_index) const;

 private:
  Config cfg_;
  std::vector<int> alignment_;
  std::vector<HardRegion> regions_;
  std::vector<std::vector<int>> region_competitors_;
  mutable std::vector<float> scratch_;
};

}  // namespace latlab

#endif  // LATLAB_DECODER_HPP
