#include "latlab/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "latlab/rng.hpp"

namespace latlab {

PronLexicon PronLexicon::FromVocabulary(const std::vector<std::string>& words,
                                        int state_inventory,
                                        int states_per_word,
                                        int hash_range) {
  if (state_inventory <= 0) throw std::invalid_argument("empty state inventory");
  if (hash_range <= 0 || hash_range > state_inventory) hash_range = state_inventory;
  PronLexicon lex;
  lex.state_inventory_ = state_inventory;
  lex.states_.reserve(words.size());
  for (const auto& w : words) {
    std::vector<int> seq;
    for (int p = 0; p < states_per_word; ++p) {
      seq.push_back(static_cast<int>(Mix64(Fnv1a(w, static_cast<std::uint64_t>(p))) %
                                     static_cast<std::uint64_t>(hash_range)));
    }
    lex.states_.push_back(std::move(seq));
  }
  return lex;
}

PronLexicon PronLexicon::FromVocabularyWithFile(
    const std::vector<std::string>& words, int state_inventory,
    const std::string& path, int default_states) {
  std::unordered_map<std::string, int> overrides;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    int n = 0;
    if (!std::getline(ls, word, '\t') || !(ls >> n) || n < 1) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed lexicon line");
    }
    overrides[word] = n;
  }
  PronLexicon lex;
  lex.state_inventory_ = state_inventory;
  for (const auto& w : words) {
    auto it = overrides.find(w);
    const int n = it == overrides.end() ? default_states : it->second;
    std::vector<int> seq;
    for (int p = 0; p < n; ++p) {
      seq.push_back(static_cast<int>(Mix64(Fnv1a(w, static_cast<std::uint64_t>(p))) %
                                     static_cast<std::uint64_t>(state_inventory)));
    }
    lex.states_.push_back(std::move(seq));
  }
  return lex;
}

std::int32_t TraceArena::New(TimedWord word, std::int32_t parent) {
  std::int32_t idx;
  if (!free_.empty()) {
    idx = free_.back();
    free_.pop_back();
    entries_[idx] = Entry{};
  } else {
    idx = static_cast<std::int32_t>(entries_.size());
    entries_.emplace_back();
  }
  Entry& e = entries_[idx];
  e.word = std::move(word);
  e.parent = parent;
  e.refcount = 0;
  e.depth = Depth(parent) + 1;
  Ref(parent);
  return idx;
}

void TraceArena::Ref(std::int32_t e) {
  if (e != kRoot) ++entries_[e].refcount;
}

void TraceArena::Unref(std::int32_t e) {
  while (e != kRoot) {
    Entry& entry = entries_[e];
    if (--entry.refcount > 0) return;
    free_.push_back(e);
    e = entry.parent;
  }
}

bool TraceArena::IsAncestor(std::int32_t ancestor, std::int32_t node) const {
  if (ancestor == kRoot) return true;
  while (node != kRoot && Depth(node) > Depth(ancestor)) node = Parent(node);
  return node == ancestor;
}

std::vector<TimedWord> TraceArena::PathWords(std::int32_t ancestor,
                                             std::int32_t node) const {
  std::vector<TimedWord> out;
  while (node != ancestor) {
    if (node == kRoot) throw SearchError("trace path does not reach ancestor");
    out.push_back(entries_[node].word);
    node = entries_[node].parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

size_t TraceArena::LiveCount() const { return entries_.size() - free_.size(); }

bool TraceArena::AuditRefs(std::span<const std::int32_t> live_refs) const {
  std::vector<std::int32_t> counts(entries_.size(), 0);
  for (std::int32_t r : live_refs) {
    if (r != kRoot) ++counts[r];
  }
  std::vector<bool> freed(entries_.size(), false);
  for (std::int32_t f : free_) freed[f] = true;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!freed[i] && entries_[i].parent != kRoot) ++counts[entries_[i].parent];
  }
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (freed[i]) continue;
    if (counts[i] != entries_[i].refcount) return false;
    if (counts[i] == 0) return false;  // live but unreachable
  }
  return true;
}

namespace {

struct RecombKey {
  WordId word;
  std::int32_t state;
  std::array<WordId, kMaxLmHistory> hist;
  std::int32_t hist_len;

  bool operator==(const RecombKey& o) const {
    return word == o.word && state == o.state && hist_len == o.hist_len &&
           hist == o.hist;
  }
};

struct RecombKeyHash {
  size_t operator()(const RecombKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.word)));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.state)));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.hist_len)));
    for (int i = 0; i < k.hist_len; ++i) {
      mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.hist[i])));
    }
    return static_cast<size_t>(h);
  }
};

struct HistKey {
  std::array<WordId, kMaxLmHistory> hist;
  std::int32_t hist_len;
  bool operator==(const HistKey& o) const {
    return hist_len == o.hist_len && hist == o.hist;
  }
};

struct HistKeyHash {
  size_t operator()(const HistKey& k) const {
    RecombKey rk{0, 0, k.hist, k.hist_len};
    return RecombKeyHash{}(rk);
  }
};

// Strict deterministic ordering used for the max-active cut and for
// locating the single best token.
bool TokenBetter(const Token& a, const Token& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.word != b.word) return a.word < b.word;
  if (a.word_start_frame != b.word_start_frame) {
    return a.word_start_frame < b.word_start_frame;
  }
  if (a.state_idx != b.state_idx) return a.state_idx < b.state_idx;
  if (a.hist_len != b.hist_len) return a.hist_len < b.hist_len;
  if (a.hist != b.hist) return a.hist < b.hist;
  return a.trace < b.trace;
}

}  // namespace

Decoder::Decoder(const PronLexicon& lexicon, const NGramModel& lm,
                 DecoderConfig cfg)
    : lexicon_(lexicon),
      lm_(lm),
      cfg_(cfg),
      lm_history_len_(std::min(lm.order() - 1, kMaxLmHistory)),
      beam_(cfg.beam) {
  if (lexicon.size() != lm.vocab_size()) {
    throw std::invalid_argument("lexicon/LM vocabulary size mismatch");
  }
  first_state_.reserve(lexicon.size());
  for (size_t w = 0; w < lexicon.size(); ++w) {
    first_state_.push_back(lexicon.States(static_cast<WordId>(w))[0]);
  }
}

void Decoder::InitSearch(int segment_id) {
  for (const Token& t : tokens_) arena_.Unref(t.trace);
  if (emitted_cursor_ != TraceArena::kRoot) arena_.Unref(emitted_cursor_);
  tokens_.clear();
  arena_ = TraceArena{};
  tokens_.push_back(Token{});
  segment_id_ = segment_id;
  open_ = true;
  ended_ = false;
  frames_consumed_ = 0;
  last_frame_index_ = -1;
  expected_next_index_ = -1;
  emitted_cursor_ = TraceArena::kRoot;
  beam_ = cfg_.beam;
}

double Decoder::LastFrameEndTime() const {
  return static_cast<double>(last_frame_index_ + 1) * kFrameDuration;
}

const Decoder::LmRowData& Decoder::LmRow(
    const std::array<WordId, kMaxLmHistory>& hist, int hist_len) {
  constexpr double kLn10 = 2.302585092994046;
  std::uint64_t key = 0;
  for (int i = 0; i < hist_len; ++i) {
    key |= static_cast<std::uint64_t>(hist[i] + 1) << (16 * i);
  }
  auto it = lm_rows_.find(key);
  if (it != lm_rows_.end()) return it->second;
  LmRowData data;
  data.row.resize(lm_.vocab_size());
  data.max = -std::numeric_limits<double>::infinity();
  for (size_t w = 0; w < data.row.size(); ++w) {
    data.row[w] = lm_.ScoreIds(hist.data(), static_cast<size_t>(hist_len),
                               static_cast<WordId>(w)) *
                  kLn10;
    data.max = std::max(data.max, data.row[w]);
  }
  return lm_rows_.emplace(key, std::move(data)).first->second;
}

void Decoder::ProcessFrame(const Frame& frame, const AcousticScorer& am) {
  const std::span<const float> scores = am.ScoreFrame(frame);
  if (scores.size() != static_cast<size_t>(lexicon_.state_inventory())) {
    throw SearchError("acoustic score vector size mismatch");
  }
  const std::int64_t f = frame.index;
  float max_frame_score = scores[0];
  for (float s : scores) max_frame_score = std::max(max_frame_score, s);

  // Word-end recombination: for every history that can start a new word at
  // this frame, only the best-scoring source matters (the LM increment is
  // the same for all sources sharing a history).
  struct ExpandSrc {
    double score;
    size_t token_index;
  };
  std::unordered_map<HistKey, ExpandSrc, HistKeyHash> expand;
  expand.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    const Token& t = tokens_[i];
    const bool at_root = t.word == -1;
    const bool at_final =
        !at_root &&
        t.state_idx + 1 == static_cast<int>(lexicon_.States(t.word).size());
    if (!at_root && !at_final) continue;
    HistKey hk{t.hist, t.hist_len};
    if (t.word >= 0) {
      // Append the completed word, keep the most recent lm_history_len_.
      if (hk.hist_len < lm_history_len_) {
        hk.hist[hk.hist_len++] = t.word;
      } else if (lm_history_len_ > 0) {
        for (int j = 0; j + 1 < lm_history_len_; ++j) hk.hist[j] = hk.hist[j + 1];
        hk.hist[lm_history_len_ - 1] = t.word;
      }
    }
    auto [it, inserted] = expand.try_emplace(hk, ExpandSrc{t.score, i});
    if (!inserted) {
      const Token& cur = tokens_[it->second.token_index];
      if (t.score > it->second.score ||
          (t.score == it->second.score && TokenBetter(t, cur))) {
        it->second = ExpandSrc{t.score, i};
      }
    }
  }

  std::vector<Token> cands;
  cands.reserve(tokens_.size() * 2 + 64);
  // Only within-word continuations enter the recombination map; word-start
  // candidates are unique per (history, word) by construction, so they just
  // probe it for a same-key continuation and otherwise append directly.
  std::unordered_map<RecombKey, size_t, RecombKeyHash> recomb;
  recomb.reserve(tokens_.size() * 2 + 64);
  double running_best = -std::numeric_limits<double>::infinity();
  auto consider = [&](Token&& cand) {
    if (cand.score < running_best - beam_) return;
    running_best = std::max(running_best, cand.score);
    RecombKey key{cand.word, cand.state_idx, cand.hist, cand.hist_len};
    auto [it, inserted] = recomb.try_emplace(key, cands.size());
    if (inserted) {
      cands.push_back(std::move(cand));
      return;
    }
    Token& cur = cands[it->second];
    if (cand.score > cur.score ||
        (cand.score == cur.score && TokenBetter(cand, cur))) {
      cur = std::move(cand);
    }
  };

  // Within-word self-loops and state advances first: they carry no LM cost,
  // so they establish the frame's running best before the expansions probe
  // the beam.
  for (const Token& t : tokens_) {
    if (t.word == -1) continue;
    const auto states = lexicon_.States(t.word);
    {
      Token cand = t;
      cand.score += scores[states[t.state_idx]];
      consider(std::move(cand));
    }
    if (t.state_idx + 1 < static_cast<int>(states.size())) {
      Token cand = t;
      ++cand.state_idx;
      cand.score += scores[states[cand.state_idx]];
      consider(std::move(cand));
    }
  }

  // Word starts, best sources first so the beam tightens early.
  std::vector<std::pair<const HistKey*, const ExpandSrc*>> sources;
  sources.reserve(expand.size());
  for (const auto& [hk, src] : expand) sources.emplace_back(&hk, &src);
  std::sort(sources.begin(), sources.end(), [this](const auto& a, const auto& b) {
    if (a.second->score != b.second->score) {
      return a.second->score > b.second->score;
    }
    return TokenBetter(tokens_[a.second->token_index],
                       tokens_[b.second->token_index]);
  });

  // For candidates whose key is unique among this frame's word starts: probe
  // the continuation map but never insert.
  auto consider_unique = [&](Token&& cand) {
    RecombKey key{cand.word, cand.state_idx, cand.hist, cand.hist_len};
    auto it = recomb.find(key);
    if (it == recomb.end()) {
      cands.push_back(std::move(cand));
      return;
    }
    Token& cur = cands[it->second];
    if (cand.score > cur.score ||
        (cand.score == cur.score && TokenBetter(cand, cur))) {
      cur = std::move(cand);
    }
  };

  std::vector<std::int32_t> created;
  for (const auto& [hkp, srcp] : sources) {
    const HistKey& hk = *hkp;
    const Token& t = tokens_[srcp->token_index];
    const LmRowData& lm_row = LmRow(hk.hist, hk.hist_len);
    if (t.score + lm_row.max + max_frame_score < running_best - beam_) continue;
    std::int32_t entry = t.trace;
    if (t.word >= 0) {
      TimedWord w;
      w.text = lm_.WordText(t.word);
      w.start = static_cast<double>(t.word_start_frame) * kFrameDuration;
      w.end = static_cast<double>(f) * kFrameDuration;
      entry = arena_.New(std::move(w), t.trace);
      created.push_back(entry);
    }
    for (size_t w = 0; w < lm_row.row.size(); ++w) {
      const double sc = t.score + lm_row.row[w] + scores[first_state_[w]];
      if (sc < running_best - beam_) continue;
      running_best = std::max(running_best, sc);
      const WordId wid = static_cast<WordId>(w);
      Token cand;
      cand.word = wid;
      cand.state_idx = 0;
      cand.word_start_frame = f;
      cand.hist = hk.hist;
      cand.hist_len = hk.hist_len;
      cand.score = sc;
      cand.trace = entry;
      consider_unique(std::move(cand));
    }
    // Optional silence: transparent to the LM and the trace forest.
    if (lexicon_.has_silence()) {
      const double sc = t.score + scores[lexicon_.States(kSilenceWord)[0]];
      if (sc >= running_best - beam_) {
        running_best = std::max(running_best, sc);
        Token cand;
        cand.word = kSilenceWord;
        cand.state_idx = 0;
        cand.word_start_frame = f;
        cand.hist = hk.hist;
        cand.hist_len = hk.hist_len;
        cand.score = sc;
        cand.trace = entry;
        consider_unique(std::move(cand));
      }
    }
  }

  if (cands.empty()) throw SearchError("all tokens pruned");

  // Final beam cut against the true frame best, then the max-active cap.
  std::vector<Token> survivors;
  survivors.reserve(cands.size());
  for (Token& c : cands) {
    if (c.score >= running_best - beam_) survivors.push_back(std::move(c));
  }
  if (static_cast<int>(survivors.size()) > cfg_.max_active) {
    std::nth_element(survivors.begin(), survivors.begin() + cfg_.max_active,
                     survivors.end(), TokenBetter);
    survivors.resize(cfg_.max_active);
  }

  for (const Token& t : survivors) arena_.Ref(t.trace);
  for (const Token& t : tokens_) arena_.Unref(t.trace);
  // Entries minted this frame that no survivor picked up.
  for (std::int32_t e : created) {
    if (arena_.At(e).refcount == 0) {
      arena_.Ref(e);
      arena_.Unref(e);
    }
  }
  tokens_ = std::move(survivors);
  last_frame_index_ = f;
  ++frames_consumed_;
}

ChunkResult Decoder::DecodeChunk(const Chunk& chunk, const AcousticScorer& am) {
  if (!open_) throw ProtocolError("decode on finalized segment");
  if (chunk.segment_id != segment_id_) {
    throw OrderingViolation("chunk segment id mismatch");
  }
  if (!chunk.frames.empty()) {
    if (expected_next_index_ >= 0 &&
        chunk.frames.front().index != expected_next_index_) {
      throw OrderingViolation("non-consecutive chunk");
    }
    expected_next_index_ =
        chunk.frames.back().index + 1;
  }
  ChunkResult res;
  for (const Frame& frame : chunk.frames) {
    ProcessFrame(frame, am);
    res.token_frame_sum += static_cast<std::int64_t>(tokens_.size());
  }
  res.work = cfg_.cost.ChunkCost(res.token_frame_sum);
  res.best = BestHypothesis();
  return res;
}

const Token& Decoder::BestToken() const {
  const Token* best = &tokens_.front();
  for (const Token& t : tokens_) {
    if (TokenBetter(t, *best)) best = &t;
  }
  return *best;
}

Hypothesis Decoder::BestHypothesis() const {
  Hypothesis hyp;
  hyp.segment_id = segment_id_;
  if (tokens_.empty()) return hyp;
  const Token& best = BestToken();
  hyp.score = best.score;
  hyp.words = arena_.PathWords(TraceArena::kRoot, best.trace);
  // An in-progress silence entry contributes nothing to the transcript.
  if (best.word >= 0) {
    TimedWord w;
    w.text = lm_.WordText(best.word);
    w.start = static_cast<double>(best.word_start_frame) * kFrameDuration;
    w.end = LastFrameEndTime();
    hyp.words.push_back(std::move(w));
  }
  return hyp;
}

std::int32_t Decoder::BestTrace() const {
  return tokens_.empty() ? TraceArena::kRoot : BestToken().trace;
}

std::int32_t Decoder::CommonAncestor() const {
  if (tokens_.empty()) return emitted_cursor_;
  std::int32_t lca = tokens_.front().trace;
  for (const Token& t : tokens_) {
    std::int32_t a = lca, b = t.trace;
    while (arena_.Depth(a) > arena_.Depth(b)) a = arena_.Parent(a);
    while (arena_.Depth(b) > arena_.Depth(a)) b = arena_.Parent(b);
    while (a != b) {
      a = arena_.Parent(a);
      b = arena_.Parent(b);
    }
    lca = a;
    if (lca == emitted_cursor_) break;
  }
  return lca;
}

std::vector<TimedWord> Decoder::AdvanceCursor(std::int32_t entry) {
  if (!arena_.IsAncestor(emitted_cursor_, entry)) {
    throw SearchError("cursor may only move forward");
  }
  std::vector<TimedWord> words = arena_.PathWords(emitted_cursor_, entry);
  arena_.Ref(entry);
  if (emitted_cursor_ != TraceArena::kRoot) arena_.Unref(emitted_cursor_);
  emitted_cursor_ = entry;
  return words;
}

void Decoder::ConstrainToEntry(std::int32_t entry) {
  std::vector<Token> kept;
  kept.reserve(tokens_.size());
  for (const Token& t : tokens_) {
    if (arena_.IsAncestor(entry, t.trace)) {
      kept.push_back(t);
    } else {
      arena_.Unref(t.trace);
    }
  }
  if (kept.empty()) throw SearchError("flush constraint removed every token");
  tokens_ = std::move(kept);
}

void Decoder::NoteEndOfSegment() { ended_ = true; }

Hypothesis Decoder::FinalizeSegment() {
  if (!open_) throw ProtocolError("finalize on closed decoder");
  if (!ended_) throw ProtocolError("finalize before end of segment");
  Hypothesis hyp = BestHypothesis();
  // Root-only state (zero forwarded frames) yields an empty hypothesis.
  if (tokens_.size() == 1 && tokens_.front().word == -1) {
    hyp.words.clear();
    hyp.score = 0.0;
  }
  open_ = false;
  return hyp;
}

SyntheticScorer::SyntheticScorer(Config cfg,
                                 std::vector<int> truth_state_per_frame,
                                 std::vector<HardRegion> regions)
    : cfg_(cfg),
      alignment_(std::move(truth_state_per_frame)),
      regions_(std::move(regions)) {
  region_competitors_.reserve(regions_.size());
  for (size_t r = 0; r < regions_.size(); ++r) {
    Rng rng(Fnv1a("hard-region", cfg_.seed ^ (r * 0x9e3779b97f4a7c15ull)));
    std::vector<int> comp;
    while (static_cast<int>(comp.size()) <
               std::min(cfg_.hard_competitors, cfg_.state_count - 1)) {
      int s = static_cast<int>(rng.UniformInt(0, cfg_.state_count - 1));
      if (std::find(comp.begin(), comp.end(), s) == comp.end()) comp.push_back(s);
    }
    region_competitors_.push_back(std::move(comp));
  }
}

bool SyntheticScorer::InHardRegion(std::int64_t frame_index) const {
  for (const auto& r : regions_) {
    if (frame_index >= r.begin_frame && frame_index < r.end_frame) return true;
  }
  return false;
}

std::vector<float> SyntheticScorer::Scores(std::int64_t frame_index) const {
  if (frame_index < 0 || frame_index >= frame_count()) {
    throw std::out_of_range("synthetic scorer frame index out of range");
  }
  const int truth = alignment_[frame_index];
  int region = -1;
  for (size_t r = 0; r < regions_.size(); ++r) {
    if (frame_index >= regions_[r].begin_frame &&
        frame_index < regions_[r].end_frame) {
      region = static_cast<int>(r);
      break;
    }
  }
  Rng rng(Fnv1a("frame-scores",
                cfg_.seed ^ (static_cast<std::uint64_t>(frame_index) *
                             0xbf58476d1ce4e5b9ull)));
  std::vector<float> out(cfg_.state_count);
  const double margin = region >= 0 ? cfg_.hard_margin : cfg_.margin;
  for (int s = 0; s < cfg_.state_count; ++s) {
    double mean = s == truth ? 0.0 : -margin;
    out[s] = static_cast<float>(rng.Normal(mean, cfg_.sigma));
  }
  if (region >= 0) {
    for (int s : region_competitors_[region]) {
      if (s == truth) continue;
      out[s] = static_cast<float>(rng.Normal(-cfg_.hard_margin / 2.0, cfg_.sigma));
    }
  }
  return out;
}

std::span<const float> SyntheticScorer::ScoreFrame(const Frame& frame) const {
  scratch_ = Scores(frame.index);
  return scratch_;
}

}  // namespace latlab
