#include "latlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace latlab {

VariantConfig VariantConfig::Preset(const std::string& key) {
  VariantConfig v;
  if (key == "baseline1") {
    v = {"Baseline-1", false, false, false, false, {}};
  } else if (key == "baseline2") {
    v = {"Baseline-2", true, true, false, false, {}};
  } else if (key == "portion") {
    v = {"Portion", true, true, true, false, {}};
  } else if (key == "update") {
    v = {"Update", true, true, true, true, {}};
  } else if (key == "update-na") {
    v = {"Update-NA", true, false, true, true, {}};
  } else {
    throw std::invalid_argument("unknown variant: " + key);
  }
  return v;
}

const std::vector<std::string>& VariantConfig::PresetOrder() {
  static const std::vector<std::string> order = {
      "baseline1", "baseline2", "portion", "update", "update-na"};
  return order;
}

namespace {

constexpr int kSegmentIdStride = 10000;

void RunStream(const VariantConfig& variant, const Benchmark& bench,
               const RunConfig& cfg, const PronLexicon& lexicon, int stream,
               RunResult& out) {
  DecoderConfig dc;
  dc.beam = cfg.beam;
  dc.max_active = cfg.max_active;
  dc.cost = cfg.cost;
  Decoder dec(lexicon, bench.lm, dc);
  EmbeddedScorer scorer;
  Segmenter segmenter(cfg.segmenter);
  StreamBuffer buffer(cfg.buffer_capacity);
  std::deque<double> ready_times;
  std::vector<StreamItem> pending;
  PruneController controller(
      {cfg.beam, cfg.beam * cfg.min_beam_fraction, cfg.narrow_factor});

  const size_t chunk_size =
      variant.run_on ? static_cast<size_t>(cfg.chunk_frames) : cfg.buffer_capacity;

  double t_dec = 0.0;
  int cur_seg = -1;
  size_t committed = 0;
  std::vector<TimedWord> prev_tail;
  double last_commit = 0.0;

  auto emit = [&](EventKind kind, int seg, double t,
                  std::vector<TimedWord> words, int replace_from = 0) {
    out.events.push_back({kind, seg, RoundToMs(t), std::move(words), replace_from});
  };

  auto trim_tail = [&](size_t n) {
    if (!variant.update) return;
    prev_tail.erase(prev_tail.begin(),
                    prev_tail.begin() + std::min(n, prev_tail.size()));
  };

  auto drain = [&]() {
    for (;;) {
      const size_t before = buffer.Size();
      auto rr = buffer.ReadChunk(chunk_size);
      const size_t consumed = before - buffer.Size();
      double ready = 0.0;
      if (consumed > 0) {
        ready = ready_times[consumed - 1];
        ready_times.erase(ready_times.begin(),
                          ready_times.begin() + static_cast<long>(consumed));
      }
      if (std::holds_alternative<StreamBuffer::NotYetAvailable>(rr)) return;

      if (auto* eos = std::get_if<StreamBuffer::EndOfSegment>(&rr)) {
        const int gid = eos->segment_id;
        const double t_end = std::max(t_dec, ready);
        if (cur_seg != gid) {
          // Degenerate empty segment: open and close it in place.
          dec.InitSearch(gid);
          emit(EventKind::kSegmentStart, gid, t_end, {});
        }
        dec.NoteEndOfSegment();
        Hypothesis final = dec.FinalizeSegment();
        std::vector<TimedWord> tail(final.words.begin() + static_cast<long>(committed),
                                    final.words.end());
        if (!tail.empty()) emit(EventKind::kStable, gid, t_end, tail);
        emit(EventKind::kSegmentEnd, gid, t_end, {});
        out.finals.push_back(std::move(final));
        cur_seg = -1;
        committed = 0;
        prev_tail.clear();
        continue;
      }

      Chunk& chunk = std::get<Chunk>(rr);
      const bool new_segment = chunk.segment_id != cur_seg;
      if (new_segment) {
        cur_seg = chunk.segment_id;
        dec.InitSearch(cur_seg);
        committed = 0;
        prev_tail.clear();
      }
      const double start = std::max(t_dec, ready);
      if (t_dec < ready) controller.ResetBacklog();
      if (new_segment) {
        emit(EventKind::kSegmentStart, cur_seg, start, {});
        last_commit = start;
      }
      dec.SetBeam(variant.adaptive_pruning ? controller.beam() : cfg.beam);

      const auto wall_begin = std::chrono::steady_clock::now();
      ChunkResult res = dec.DecodeChunk(chunk, scorer);
      const double cost =
          cfg.clock == ClockMode::kWall
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              wall_begin)
                    .count()
              : res.work;
      t_dec = start + cost;
      const double rtf = cost / chunk.AudioDuration();
      controller.UpdateBacklog(chunk.AudioDuration(), cost);
      if (variant.adaptive_pruning) {
        controller.UpdateBeam(rtf, controller.backlog() == 0.0);
      }
      out.timings.push_back({stream, cur_seg, chunk.chunk_index,
                             chunk.AudioDuration(), chunk.AudioEnd(), ready,
                             start, cost, rtf, dec.beam(),
                             controller.backlog(), res.token_frame_sum});
      out.total_audio += chunk.AudioDuration();
      out.total_cost += cost;
      const double t = t_dec;

      if (variant.update) {
        std::vector<TimedWord> tail(
            res.best.words.begin() + static_cast<long>(committed),
            res.best.words.end());
        if (auto diff = DiffUpdate(prev_tail, tail)) {
          emit(EventKind::kUpdate, cur_seg, t, std::move(diff->second),
               diff->first);
        }
        prev_tail = std::move(tail);
      }
      if (variant.partial_hypothesis) {
        StablePortion portion = StablePrefix(dec);
        if (!portion.Empty()) {
          const size_t n = portion.words.size();
          emit(EventKind::kStable, cur_seg, t, std::move(portion.words));
          committed += n;
          last_commit = t;
          trim_tail(n);
        }
      }
      if (variant.flush.enabled) {
        if (auto flushed = MaybeFlush(dec, t, last_commit, variant.flush)) {
          const size_t n = flushed->size();
          emit(EventKind::kFlush, cur_seg, t, std::move(*flushed));
          committed += n;
          last_commit = t;
          trim_tail(n);
        }
      }
    }
  };

  auto push_events = [&](std::vector<SegmenterEvent> evs, double arrival) {
    for (auto& ev : evs) {
      StreamItem item;
      item.kind = ev.kind;
      item.segment_id = stream * kSegmentIdStride + ev.segment_id;
      if (ev.frame) item.frame = std::move(*ev.frame);
      pending.push_back(std::move(item));
    }
    const size_t accepted = buffer.Write(pending);
    for (size_t i = 0; i < accepted; ++i) ready_times.push_back(arrival);
    pending.erase(pending.begin(), pending.begin() + static_cast<long>(accepted));
  };

  const StreamFile& sf = bench.streams[stream];
  for (const Frame& frame : sf.frames) {
    const double arrival = frame.Time() + kFrameDuration;
    push_events(segmenter.Step(frame), arrival);
    if (!pending.empty()) drain();  // free buffer space before retrying
    if (!pending.empty()) push_events({}, arrival);
    drain();
  }
  const double stream_end =
      sf.frames.empty() ? 0.0 : sf.frames.back().Time() + kFrameDuration;
  push_events(segmenter.Finish(), stream_end);
  drain();
  buffer.Close();
  drain();
  if (!pending.empty()) {
    throw ProtocolError("stream buffer never freed space for pending frames");
  }
}

}  // namespace

RunResult RunVariant(const VariantConfig& variant, const Benchmark& bench,
                     const RunConfig& cfg) {
  const PronLexicon lexicon = BenchmarkLexicon(bench);
  RunResult out;
  for (int s = 0; s < static_cast<int>(bench.streams.size()); ++s) {
    RunStream(variant, bench, cfg, lexicon, s, out);
  }
  return out;
}

std::vector<WordLatencySample> WordLatencies(
    const std::vector<EmissionEvent>& log) {
  DisplayState display;
  for (const auto& ev : log) display.ApplyEvent(ev);
  std::vector<WordLatencySample> out;
  for (const auto& [seg_id, seg] : display.segments()) {
    if (!seg.ended) {
      throw IncompleteRun("segment " + std::to_string(seg_id) +
                          " missing segment_end");
    }
    for (const auto& dw : seg.committed) {
      out.push_back({dw.word.text, seg_id, dw.word.end, dw.first_appearance_time,
                     dw.last_update_time});
    }
  }
  return out;
}

std::vector<double> CommitmentLatencies(const std::vector<EmissionEvent>& log) {
  std::vector<double> out;
  for (const auto& ev : log) {
    if ((ev.kind == EventKind::kStable || ev.kind == EventKind::kFlush) &&
        !ev.words.empty()) {
      out.push_back(ev.emit_time - ev.words.back().end);
    }
  }
  return out;
}

double MaxEmissionGap(const std::vector<EmissionEvent>& log) {
  std::map<int, double> last_time;
  double max_gap = 0.0;
  for (const auto& ev : log) {
    switch (ev.kind) {
      case EventKind::kSegmentStart:
        last_time[ev.segment_id] = ev.emit_time;
        break;
      case EventKind::kStable:
      case EventKind::kFlush:
      case EventKind::kSegmentEnd: {
        auto it = last_time.find(ev.segment_id);
        if (it != last_time.end()) {
          max_gap = std::max(max_gap, ev.emit_time - it->second);
          it->second = ev.emit_time;
        }
        break;
      }
      case EventKind::kUpdate:
        break;
    }
  }
  return max_gap;
}

VariantReport BuildVariantReport(const std::string& name,
                                 const std::vector<EmissionEvent>& events,
                                 double total_audio, double total_cost,
                                 const Benchmark& bench) {
  VariantReport r;
  r.name = name;
  r.mean_rtf = total_audio > 0 ? total_cost / total_audio : 0.0;

  DisplayState display;
  for (const auto& ev : events) display.ApplyEvent(ev);
  // Hypothesis tokens per stream, segments in id order.
  std::map<int, std::vector<std::string>> hyp_by_stream;
  for (const auto& [seg_id, seg] : display.segments()) {
    auto& hyp = hyp_by_stream[seg_id / 10000];
    for (const auto& dw : seg.committed) hyp.push_back(dw.word.text);
  }
  for (size_t s = 0; s < bench.truths.size(); ++s) {
    std::vector<std::string> ref;
    for (const auto& w : bench.truths[s].transcript.words) ref.push_back(w.text);
    const auto& hyp = hyp_by_stream[static_cast<int>(s)];
    WerBreakdown b = ComputeWer(ref, hyp);
    r.wer.substitutions += b.substitutions;
    r.wer.deletions += b.deletions;
    r.wer.insertions += b.insertions;
    r.wer.reference_length += b.reference_length;
  }
  r.wer.wer = r.wer.reference_length > 0
                  ? static_cast<double>(r.wer.Edits()) / r.wer.reference_length
                  : 0.0;

  const auto words = WordLatencies(events);
  const auto commits = CommitmentLatencies(events);
  r.word_count = words.size();
  r.histogram.assign(static_cast<size_t>(kHistogramMax / kHistogramBin) + 1, 0);
  double word_sum = 0.0;
  for (const auto& w : words) {
    const double lat = w.last_update - w.word_end;
    word_sum += lat;
    r.max_word = std::max(r.max_word, lat);
    size_t bin = lat < 0 ? 0 : static_cast<size_t>(lat / kHistogramBin);
    if (bin >= r.histogram.size()) bin = r.histogram.size() - 1;
    ++r.histogram[bin];
  }
  r.mean_word = words.empty() ? 0.0 : word_sum / static_cast<double>(words.size());
  double commit_sum = 0.0;
  for (double c : commits) {
    commit_sum += c;
    r.max_commit = std::max(r.max_commit, c);
  }
  r.mean_commit =
      commits.empty() ? 0.0 : commit_sum / static_cast<double>(commits.size());
  return r;
}

std::string RenderOverallTable(const LatencyReport& report) {
  std::ostringstream os;
  os << "System      |  WER  |  RTF | Commit. Latency | Word Latency\n";
  os << "------------+-------+------+-----------------+-------------\n";
  char buf[128];
  for (const auto& v : report.variants) {
    std::snprintf(buf, sizeof(buf), "%-11s | %5.2f | %4.2f | %15.2f | %12.2f\n",
                  v.name.c_str(), 100.0 * v.wer.wer, v.mean_rtf, v.mean_commit,
                  v.mean_word);
    os << buf;
  }
  return os.str();
}

std::string RenderPeakTable(const LatencyReport& report) {
  std::ostringstream os;
  os << "System      | Max Commit. Latency | Max Word Latency\n";
  os << "------------+---------------------+-----------------\n";
  char buf[128];
  for (const auto& v : report.variants) {
    std::snprintf(buf, sizeof(buf), "%-11s | %19.2f | %16.2f\n", v.name.c_str(),
                  v.max_commit, v.max_word);
    os << buf;
  }
  return os.str();
}

std::string ReportToJson(const LatencyReport& report) {
  nlohmann::json j;
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : report.variants) {
    nlohmann::json jv;
    jv["name"] = v.name;
    jv["wer"] = v.wer.wer;
    jv["substitutions"] = v.wer.substitutions;
    jv["deletions"] = v.wer.deletions;
    jv["insertions"] = v.wer.insertions;
    jv["reference_length"] = v.wer.reference_length;
    jv["mean_rtf"] = v.mean_rtf;
    jv["mean_commitment_latency"] = v.mean_commit;
    jv["max_commitment_latency"] = v.max_commit;
    jv["mean_word_latency"] = v.mean_word;
    jv["max_word_latency"] = v.max_word;
    jv["word_count"] = v.word_count;
    jv["histogram_bin_s"] = kHistogramBin;
    jv["histogram"] = v.histogram;
    variants.push_back(std::move(jv));
  }
  j["variants"] = std::move(variants);
  return j.dump(2);
}

std::string RenderHistogram(const VariantReport& report) {
  std::ostringstream os;
  char buf[64];
  for (size_t i = 0; i < report.histogram.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.2f\t%lld\n",
                  static_cast<double>(i) * kHistogramBin,
                  static_cast<long long>(report.histogram[i]));
    os << buf;
  }
  return os.str();
}

std::vector<SweepRow> FlushSweep(const std::vector<double>& thresholds,
                                 const Benchmark& bench, const RunConfig& cfg) {
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<SweepRow> rows;
  for (double t : sorted) {
    VariantConfig v = VariantConfig::Preset("portion");
    if (std::isfinite(t)) {
      if (t <= 0) throw std::invalid_argument("flush threshold must be positive");
      v.flush.enabled = true;
      v.flush.threshold = t;
    }
    RunResult run = RunVariant(v, bench, cfg);
    VariantReport rep = BuildVariantReport(v.name, run.events, run.total_audio,
                                           run.total_cost, bench);
    rows.push_back({t, rep.wer.wer, rep.max_word, MaxEmissionGap(run.events)});
  }
  return rows;
}

}  // namespace latlab
