#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "latlab/benchmark.hpp"
#include "latlab/harness.hpp"
#include "latlab/protocol.hpp"

using namespace latlab;

namespace {

TimedWord W(const char* text, double start, double end) {
  return TimedWord{text, start, end};
}

EmissionEvent Ev(EventKind kind, int segment, double t,
                 std::vector<TimedWord> words = {}, int replace_from = 0) {
  EmissionEvent ev;
  ev.kind = kind;
  ev.segment_id = segment;
  ev.emit_time = t;
  ev.words = std::move(words);
  ev.replace_from = replace_from;
  return ev;
}

// A hand-written segment: "b" is displayed at 1.0 as "a", revised at 1.5,
// committed at 2.0; "c" first appears committed at 3.0.
std::vector<EmissionEvent> FixtureLog() {
  return {
      Ev(EventKind::kSegmentStart, 0, 0.0),
      Ev(EventKind::kUpdate, 0, 1.0, {W("a", 0.2, 0.8)}, 0),
      Ev(EventKind::kUpdate, 0, 1.5, {W("b", 0.2, 0.8)}, 0),
      Ev(EventKind::kStable, 0, 2.0, {W("b", 0.2, 0.8)}),
      Ev(EventKind::kStable, 0, 3.0, {W("c", 2.0, 2.5)}),
      Ev(EventKind::kSegmentEnd, 0, 3.0),
  };
}

// A small, easy benchmark: no hard regions, modest noise.
BenchmarkSpec TinySpec() {
  BenchmarkSpec spec;
  spec.seed = 11;
  spec.n_streams = 2;
  spec.words_per_stream = 50;
  spec.vocab_size = 30;
  spec.state_count = 45;
  spec.min_words_per_segment = 8;
  spec.max_words_per_segment = 14;
  spec.hard_region_rate = 0.0;
  spec.sigma = 0.4;
  return spec;
}

std::string JoinText(const Hypothesis& hyp) {
  std::string out;
  for (const auto& w : hyp.words) {
    if (!out.empty()) out += ' ';
    out += w.text;
  }
  return out;
}

std::string EncodeAll(const std::vector<EmissionEvent>& events) {
  std::string out;
  for (const auto& ev : events) out += EncodeEvent(ev) + "\n";
  return out;
}

}  // namespace

TEST_CASE("variant presets wire the expected flags") {
  const VariantConfig b1 = VariantConfig::Preset("baseline1");
  CHECK(!b1.run_on);
  CHECK(!b1.adaptive_pruning);
  CHECK(!b1.partial_hypothesis);
  CHECK(!b1.update);

  const VariantConfig b2 = VariantConfig::Preset("baseline2");
  CHECK(b2.run_on);
  CHECK(b2.adaptive_pruning);
  CHECK(!b2.partial_hypothesis);

  const VariantConfig p = VariantConfig::Preset("portion");
  CHECK(p.partial_hypothesis);
  CHECK(!p.update);

  const VariantConfig u = VariantConfig::Preset("update");
  CHECK(u.partial_hypothesis);
  CHECK(u.update);
  CHECK(u.adaptive_pruning);

  const VariantConfig una = VariantConfig::Preset("update-na");
  CHECK(una.update);
  CHECK(!una.adaptive_pruning);

  CHECK(VariantConfig::PresetOrder().size() == 5);
  CHECK(VariantConfig::PresetOrder().front() == "baseline1");
  CHECK_THROWS_AS(VariantConfig::Preset("nonsense"), std::invalid_argument);
  // No flush threshold is active by default in any preset.
  for (const auto& key : VariantConfig::PresetOrder()) {
    CHECK(!VariantConfig::Preset(key).flush.enabled);
  }
}

TEST_CASE("word latencies on a hand-computed fixture") {
  const auto samples = WordLatencies(FixtureLog());
  REQUIRE(samples.size() == 2);
  // "a" was replaced before commitment and leaves no sample.
  CHECK(samples[0].text == "b");
  CHECK(samples[0].word_end == doctest::Approx(0.8));
  CHECK(samples[0].first_appearance == doctest::Approx(1.5));
  CHECK(samples[0].last_update == doctest::Approx(1.5));
  CHECK(samples[0].last_update - samples[0].word_end == doctest::Approx(0.7));

  CHECK(samples[1].text == "c");
  CHECK(samples[1].first_appearance == doctest::Approx(3.0));
  CHECK(samples[1].last_update - samples[1].word_end == doctest::Approx(0.5));
}

TEST_CASE("word latencies require a closed segment") {
  auto log = FixtureLog();
  log.pop_back();  // drop segment_end
  CHECK_THROWS_AS(WordLatencies(log), IncompleteRun);
}

TEST_CASE("commitment latencies on a hand-computed fixture") {
  const auto commits = CommitmentLatencies(FixtureLog());
  // One value per committing emission: 2.0 - 0.8 and 3.0 - 2.5.
  REQUIRE(commits.size() == 2);
  CHECK(commits[0] == doctest::Approx(1.2));
  CHECK(commits[1] == doctest::Approx(0.5));
}

TEST_CASE("max emission gap on a hand-computed fixture") {
  // Committing emissions sit at 0.0, 2.0, 3.0, 3.0; updates do not count.
  CHECK(MaxEmissionGap(FixtureLog()) == doctest::Approx(2.0));
  CHECK(MaxEmissionGap({}) == doctest::Approx(0.0));
  // Gaps are tracked per segment, not across interleaved streams.
  std::vector<EmissionEvent> interleaved = {
      Ev(EventKind::kSegmentStart, 0, 0.0),
      Ev(EventKind::kSegmentStart, 10000, 0.5),
      Ev(EventKind::kStable, 0, 1.0, {W("a", 0.0, 0.4)}),
      Ev(EventKind::kStable, 10000, 1.2, {W("b", 0.0, 0.4)}),
      Ev(EventKind::kSegmentEnd, 0, 1.3),
      Ev(EventKind::kSegmentEnd, 10000, 1.4),
  };
  CHECK(MaxEmissionGap(interleaved) == doctest::Approx(1.0));
}

TEST_CASE("benchmark generation is deterministic and validated") {
  CHECK_THROWS_AS(GenerateBenchmark([] {
                    BenchmarkSpec s;
                    s.n_streams = 0;
                    return s;
                  }()),
                  InvalidSpec);
  CHECK_THROWS_AS(GenerateBenchmark([] {
                    BenchmarkSpec s;
                    s.vocab_size = 0;
                    return s;
                  }()),
                  InvalidSpec);

  const BenchmarkSpec spec = TinySpec();
  const Benchmark a = GenerateBenchmark(spec);
  const Benchmark b = GenerateBenchmark(spec);
  REQUIRE(a.streams.size() == b.streams.size());
  for (size_t s = 0; s < a.streams.size(); ++s) {
    REQUIRE(a.streams[s].frames.size() == b.streams[s].frames.size());
    for (size_t f = 0; f < a.streams[s].frames.size(); ++f) {
      CHECK(a.streams[s].frames[f].acoustic_scores ==
            b.streams[s].frames[f].acoustic_scores);
    }
    CHECK(a.truths[s].transcript.words == b.truths[s].transcript.words);
    CHECK(a.truths[s].segments == b.truths[s].segments);
  }
}

TEST_CASE("runs over a small benchmark behave per variant") {
  const Benchmark bench = GenerateBenchmark(TinySpec());
  RunConfig cfg;

  // The easy benchmark decodes well inside the nominal beam, so the run-on
  // variant reaches the same finals as the batch decode word for word.
  const RunResult b1 = RunVariant(VariantConfig::Preset("baseline1"), bench, cfg);
  const RunResult b2 = RunVariant(VariantConfig::Preset("baseline2"), bench, cfg);
  REQUIRE(b1.finals.size() == b2.finals.size());
  for (size_t i = 0; i < b1.finals.size(); ++i) {
    CHECK(JoinText(b1.finals[i]) == JoinText(b2.finals[i]));
  }
  for (const auto& t : b2.timings) {
    // The controller never leaves the [min_beam, nominal] band.
    CHECK(t.beam <= cfg.beam + 1e-9);
    CHECK(t.beam >= cfg.beam * cfg.min_beam_fraction - 1e-9);
    if (t.audio_duration > 0) {
      CHECK(t.rtf == doctest::Approx(t.cost / t.audio_duration));
    }
  }

  const RunResult portion = RunVariant(VariantConfig::Preset("portion"), bench, cfg);
  const RunResult update = RunVariant(VariantConfig::Preset("update"), bench, cfg);

  // The portion variant never messages revisable material.
  int portion_updates = 0, update_updates = 0;
  for (const auto& ev : portion.events) {
    if (ev.kind == EventKind::kUpdate) ++portion_updates;
  }
  for (const auto& ev : update.events) {
    if (ev.kind == EventKind::kUpdate) ++update_updates;
  }
  CHECK(portion_updates == 0);
  CHECK(update_updates > 0);

  for (const RunResult* run : {&b2, &portion, &update}) {
    CHECK(run->total_audio > 0.0);
    CHECK(run->total_cost > 0.0);
    REQUIRE(!run->timings.empty());

    // The emitted log reconstructs exactly the final hypotheses.
    DisplayState disp;
    for (const auto& ev : run->events) disp.ApplyEvent(ev);
    std::vector<int> seg_order;
    for (const auto& ev : run->events) {
      if (ev.kind == EventKind::kSegmentEnd) seg_order.push_back(ev.segment_id);
    }
    REQUIRE(seg_order.size() == run->finals.size());
    for (size_t i = 0; i < seg_order.size(); ++i) {
      CHECK(disp.CommittedText(seg_order[i]) == JoinText(run->finals[i]));
    }

    // One segment_start per generated segment, per stream.
    std::map<int, int> starts;
    for (const auto& ev : run->events) {
      if (ev.kind == EventKind::kSegmentStart) ++starts[ev.segment_id / 10000];
    }
    for (size_t s = 0; s < bench.truths.size(); ++s) {
      CHECK(starts[static_cast<int>(s)] ==
            static_cast<int>(bench.truths[s].segments.size()));
    }
  }

  // Identical runs replay byte for byte.
  const RunResult again = RunVariant(VariantConfig::Preset("update"), bench, cfg);
  CHECK(EncodeAll(again.events) == EncodeAll(update.events));
}

TEST_CASE("variant reports agree with the raw latency samples") {
  const Benchmark bench = GenerateBenchmark(TinySpec());
  RunConfig cfg;
  const RunResult run = RunVariant(VariantConfig::Preset("update"), bench, cfg);
  const VariantReport rep = BuildVariantReport("Update", run.events,
                                               run.total_audio, run.total_cost,
                                               bench);

  // Recompute every aggregate by direct summation over the samples.
  const auto words = WordLatencies(run.events);
  const auto commits = CommitmentLatencies(run.events);
  REQUIRE(!words.empty());
  REQUIRE(!commits.empty());
  double word_sum = 0.0, word_max = 0.0, commit_sum = 0.0, commit_max = 0.0;
  for (const auto& w : words) {
    const double lat = w.last_update - w.word_end;
    word_sum += lat;
    word_max = std::max(word_max, lat);
  }
  for (double c : commits) {
    commit_sum += c;
    commit_max = std::max(commit_max, c);
  }
  CHECK(rep.word_count == words.size());
  CHECK(rep.mean_word == doctest::Approx(word_sum / words.size()));
  CHECK(rep.max_word == doctest::Approx(word_max));
  CHECK(rep.mean_commit == doctest::Approx(commit_sum / commits.size()));
  CHECK(rep.max_commit == doctest::Approx(commit_max));
  CHECK(rep.mean_rtf == doctest::Approx(run.total_cost / run.total_audio));
  CHECK(rep.max_word >= rep.mean_word);

  // The histogram conserves mass: one count per finalized word.
  REQUIRE(rep.histogram.size() ==
          static_cast<size_t>(kHistogramMax / kHistogramBin) + 1);
  std::int64_t mass = 0;
  for (std::int64_t c : rep.histogram) mass += c;
  CHECK(mass == static_cast<std::int64_t>(rep.word_count));

  // WER against the generated transcripts is near zero on the easy set.
  CHECK(rep.wer.reference_length > 0);
  CHECK(rep.wer.wer < 0.1);
}

TEST_CASE("report rendering and serialization") {
  const Benchmark bench = GenerateBenchmark(TinySpec());
  RunConfig cfg;
  LatencyReport report;
  for (const std::string& key : {"baseline2", "portion"}) {
    const VariantConfig v = VariantConfig::Preset(key);
    const RunResult run = RunVariant(v, bench, cfg);
    report.variants.push_back(BuildVariantReport(v.name, run.events,
                                                 run.total_audio,
                                                 run.total_cost, bench));
  }

  const std::string overall = RenderOverallTable(report);
  const std::string peaks = RenderPeakTable(report);
  CHECK(overall.find("Baseline-2") != std::string::npos);
  CHECK(overall.find("Portion") != std::string::npos);
  CHECK(peaks.find("Max Word Latency") != std::string::npos);

  const nlohmann::json j = nlohmann::json::parse(ReportToJson(report));
  REQUIRE(j.at("variants").size() == 2);
  CHECK(j["variants"][0]["name"] == "Baseline-2");
  CHECK(j["variants"][1]["mean_word_latency"].get<double>() ==
        doctest::Approx(report.variants[1].mean_word));
  CHECK(j["variants"][0]["histogram"].size() ==
        report.variants[0].histogram.size());

  // One histogram line per bin, first column is the bin's lower edge.
  std::istringstream hist(RenderHistogram(report.variants[0]));
  std::string line;
  size_t lines = 0;
  while (std::getline(hist, line)) ++lines;
  CHECK(lines == report.variants[0].histogram.size());
}

TEST_CASE("flush sweep orders thresholds and ends unlimited") {
  const Benchmark bench = GenerateBenchmark(TinySpec());
  RunConfig cfg;
  const double inf = std::numeric_limits<double>::infinity();
  const auto rows = FlushSweep({3.0, inf, 1.0}, bench, cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].threshold == doctest::Approx(1.0));
  CHECK(rows[1].threshold == doctest::Approx(3.0));
  CHECK(std::isinf(rows[2].threshold));

  // The unlimited row is the plain portion variant.
  const RunResult plain = RunVariant(VariantConfig::Preset("portion"), bench, cfg);
  const VariantReport rep = BuildVariantReport("Portion", plain.events,
                                               plain.total_audio,
                                               plain.total_cost, bench);
  CHECK(rows[2].wer == doctest::Approx(rep.wer.wer));
  CHECK(rows[2].max_word_latency == doctest::Approx(rep.max_word));
  CHECK(rows[2].max_emission_gap == doctest::Approx(MaxEmissionGap(plain.events)));

  // A forced flush can only shorten the longest silence between emissions.
  CHECK(rows[0].max_emission_gap <= rows[2].max_emission_gap + 1e-9);
  CHECK_THROWS_AS(FlushSweep({-1.0}, bench, cfg), std::invalid_argument);
}
