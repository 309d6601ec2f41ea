#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "latlab/protocol.hpp"
#include "latlab/rng.hpp"

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

EmissionEvent RandomEvent(Rng& rng) {
  static const EventKind kinds[] = {EventKind::kSegmentStart, EventKind::kStable,
                                    EventKind::kUpdate, EventKind::kFlush,
                                    EventKind::kSegmentEnd};
  EmissionEvent ev;
  ev.kind = kinds[rng.UniformInt(0, 4)];
  ev.segment_id = static_cast<int>(rng.UniformInt(0, 50000));
  ev.emit_time = RoundToMs(rng.Uniform(0.0, 2000.0));
  ev.replace_from = static_cast<int>(rng.UniformInt(0, 5));
  const int n = static_cast<int>(rng.UniformInt(0, 4));
  double t = RoundToMs(rng.Uniform(0.0, 100.0));
  for (int i = 0; i < n; ++i) {
    double end = RoundToMs(t + rng.Uniform(0.05, 0.6));
    ev.words.push_back({"tok" + std::to_string(rng.UniformInt(0, 99)), t, end});
    t = RoundToMs(end + rng.Uniform(0.0, 0.3));
  }
  return ev;
}

}  // namespace

TEST_CASE("diff update extends a growing tail") {
  auto d = DiffUpdate({W("wear", 0.0, 0.3)},
                      {W("wear", 0.0, 0.3), W("a", 0.3, 0.4)});
  REQUIRE(d.has_value());
  CHECK(d->first == 1);
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].text == "a");
}

TEST_CASE("diff update rewrites a revised head") {
  auto d = DiffUpdate({W("where", 0.0, 0.3)}, {W("wear", 0.0, 0.3)});
  REQUIRE(d.has_value());
  CHECK(d->first == 0);
  REQUIRE(d->second.size() == 1);
  CHECK(d->second[0].text == "wear");
}

TEST_CASE("diff update stays silent on identical tails") {
  std::vector<TimedWord> tail = {W("a", 0.0, 0.2), W("b", 0.2, 0.4)};
  CHECK(!DiffUpdate(tail, tail).has_value());
  // Time-only refreshes do not message either; the diff is by text.
  std::vector<TimedWord> refreshed = {W("a", 0.0, 0.25), W("b", 0.25, 0.4)};
  CHECK(!DiffUpdate(tail, refreshed).has_value());
  CHECK(!DiffUpdate({}, {}).has_value());
}

TEST_CASE("diff update handles a shrinking tail") {
  auto d = DiffUpdate({W("a", 0.0, 0.2), W("b", 0.2, 0.4)}, {W("a", 0.0, 0.2)});
  REQUIRE(d.has_value());
  CHECK(d->first == 1);
  CHECK(d->second.empty());
}

TEST_CASE("event encoding round-trips randomized events") {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    EmissionEvent ev = RandomEvent(rng);
    EmissionEvent back = DecodeEvent(EncodeEvent(ev));
    CHECK(back == ev);
    // Re-encoding a decoded line reproduces the line byte for byte.
    CHECK(EncodeEvent(back) == EncodeEvent(ev));
  }
}

TEST_CASE("empty word lists encode and decode") {
  EmissionEvent ev = Ev(EventKind::kSegmentEnd, 3, 12.5);
  EmissionEvent back = DecodeEvent(EncodeEvent(ev));
  CHECK(back == ev);
  CHECK(back.words.empty());
}

TEST_CASE("malformed lines raise decode errors") {
  CHECK_THROWS_AS(DecodeEvent("not json at all"), DecodeError);
  CHECK_THROWS_AS(DecodeEvent("[1,2,3]"), DecodeError);
  CHECK_THROWS_AS(
      DecodeEvent(R"({"kind":"nonsense","segment":0,"t_emit":0,"replace_from":0,"words":[]})"),
      DecodeError);
  CHECK_THROWS_AS(
      DecodeEvent(R"({"segment":0,"t_emit":0,"replace_from":0,"words":[]})"),
      DecodeError);
}

TEST_CASE("event log file round trip skips comment headers") {
  std::vector<EmissionEvent> events = {
      Ev(EventKind::kSegmentStart, 0, 0.1),
      Ev(EventKind::kUpdate, 0, 0.5, {W("a", 0.1, 0.3)}),
      Ev(EventKind::kStable, 0, 0.9, {W("a", 0.1, 0.3)}),
      Ev(EventKind::kSegmentEnd, 0, 1.0),
  };
  const std::string path = "test_event_log.jsonl";
  SaveEventLog(events, path);
  {
    // Prepend a header comment like the CLI does.
    std::vector<EmissionEvent> loaded = LoadEventLog(path);
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("# header line\n", f);
    for (const auto& ev : loaded) {
      std::fputs((EncodeEvent(ev) + "\n").c_str(), f);
    }
    std::fclose(f);
  }
  std::vector<EmissionEvent> back = LoadEventLog(path);
  REQUIRE(back.size() == events.size());
  for (size_t i = 0; i < events.size(); ++i) CHECK(back[i] == events[i]);
  std::remove(path.c_str());
}

TEST_CASE("display replays an update sequence with a late revision") {
  // The running example: the tail grows word by word, commits a stable
  // portion, and the revisable head of the tail is revised once.
  DisplayState disp;
  disp.ApplyEvent(Ev(EventKind::kSegmentStart, 0, 0.0));
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.4, {W("wear", 0.0, 0.3)}, 0));
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.8, {W("a", 0.3, 0.5)}, 1));
  disp.ApplyEvent(
      Ev(EventKind::kUpdate, 0, 1.2, {W("flickering", 0.5, 0.9)}, 2));
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 1.6, {W("jeep", 0.9, 1.2)}, 3));
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 2.0, {W("cheap", 0.9, 1.2)}, 3));
  disp.ApplyEvent(Ev(EventKind::kStable, 0, 2.4,
                     {W("wear", 0.0, 0.3), W("a", 0.3, 0.5),
                      W("flickering", 0.5, 0.9), W("cheap", 0.9, 1.2)}));
  const SegmentDisplay& seg = disp.segments().at(0);
  CHECK(disp.CommittedText(0) == "wear a flickering cheap");
  CHECK(seg.revisable.empty());
  // Words committed by stability keep the update time of their last display.
  CHECK(seg.committed[0].last_update_time == doctest::Approx(0.4));
  CHECK(seg.committed[3].last_update_time == doctest::Approx(2.0));
  // "cheap" first appeared when it replaced "jeep", not at commit time.
  CHECK(seg.committed[3].first_appearance_time == doctest::Approx(2.0));
  disp.ApplyEvent(Ev(EventKind::kSegmentEnd, 0, 2.5));
  CHECK(disp.segments().at(0).ended);
}

TEST_CASE("display accepts stable-only streams") {
  DisplayState disp;
  disp.ApplyEvent(Ev(EventKind::kSegmentStart, 1, 0.0));
  disp.ApplyEvent(Ev(EventKind::kStable, 1, 1.0, {W("a", 0.0, 0.4)}));
  disp.ApplyEvent(Ev(EventKind::kStable, 1, 2.0,
                     {W("b", 0.5, 0.8), W("c", 0.9, 1.4)}));
  disp.ApplyEvent(Ev(EventKind::kSegmentEnd, 1, 2.1));
  CHECK(disp.CommittedText(1) == "a b c");
  for (const auto& dw : disp.segments().at(1).committed) {
    CHECK(dw.finalized);
  }
}

TEST_CASE("display rejects protocol violations") {
  DisplayState disp;
  // Event before segment start.
  CHECK_THROWS_AS(disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.1)),
                  ProtocolError);

  DisplayState d2;
  d2.ApplyEvent(Ev(EventKind::kSegmentStart, 0, 0.0));
  // Update replacing beyond the displayed tail.
  CHECK_THROWS_AS(
      d2.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.2, {W("x", 0.0, 0.1)}, 3)),
      ProtocolError);
  // Stable portion contradicting the displayed prefix.
  d2.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.3, {W("x", 0.0, 0.1)}, 0));
  CHECK_THROWS_AS(
      d2.ApplyEvent(Ev(EventKind::kStable, 0, 0.4, {W("y", 0.0, 0.1)})),
      ProtocolError);

  DisplayState d3;
  d3.ApplyEvent(Ev(EventKind::kSegmentStart, 0, 0.0));
  d3.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.5, {W("x", 0.0, 0.1)}, 0));
  // Segment end while revisable words are uncommitted.
  CHECK_THROWS_AS(d3.ApplyEvent(Ev(EventKind::kSegmentEnd, 0, 0.6)),
                  ProtocolError);
  // Non-monotone emit time.
  CHECK_THROWS_AS(d3.ApplyEvent(Ev(EventKind::kUpdate, 0, 0.4)), ProtocolError);

  DisplayState d4;
  d4.ApplyEvent(Ev(EventKind::kSegmentStart, 0, 0.0));
  d4.ApplyEvent(Ev(EventKind::kSegmentEnd, 0, 0.1));
  // Nothing may follow segment_end.
  CHECK_THROWS_AS(d4.ApplyEvent(Ev(EventKind::kStable, 0, 0.2)), ProtocolError);
}

TEST_CASE("committed words are never altered by later events") {
  DisplayState disp;
  disp.ApplyEvent(Ev(EventKind::kSegmentStart, 0, 0.0));
  disp.ApplyEvent(Ev(EventKind::kStable, 0, 1.0, {W("fixed", 0.0, 0.4)}));
  const TimedWord committed = disp.segments().at(0).committed[0].word;
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 1.5, {W("tail", 0.5, 0.9)}, 0));
  disp.ApplyEvent(Ev(EventKind::kUpdate, 0, 2.0, {W("other", 0.5, 0.9)}, 0));
  disp.ApplyEvent(Ev(EventKind::kStable, 0, 2.5, {W("other", 0.5, 0.9)}));
  CHECK(disp.segments().at(0).committed[0].word == committed);
  CHECK(disp.CommittedText(0) == "fixed other");
}
