#ifndef LATLAB_HARNESS_HPP
#define LATLAB_HARNESS_HPP

#include <string>
#include <vector>

#include "latlab/benchmark.hpp"
#include "latlab/protocol.hpp"
#include "latlab/pruning.hpp"
#include "latlab/stability.hpp"

namespace latlab {

// Flag matrix of the five evaluated systems.
struct VariantConfig {
  std::string name;
  bool run_on = true;
  bool adaptive_pruning = true;
  bool partial_hypothesis = true;
  bool update = true;
  FlushConfig flush;

  // Keys: baseline1, baseline2, portion, update, update-na.
  static VariantConfig Preset(const std::string& key);
  static const std::vector<std::string>& PresetOrder();
};

struct RunConfig {
  int chunk_frames = 40;
  double beam = 12.0;
  int max_active = 2000;
  CostModel cost;
  double min_beam_fraction = 1.0 / 3.0;
  double narrow_factor = 0.7;
  SegmenterConfig segmenter;
  size_t buffer_capacity = 6000;
  // Wall mode replaces the virtual cost model with measured decode time;
  // results are then machine-dependent and excluded from the test suite.
  ClockMode clock = ClockMode::kVirtual;
};

struct ChunkTiming {
  int stream = 0;
  int segment_id = 0;
  int chunk_index = 0;
  double audio_duration = 0.0;
  double audio_end = 0.0;
  double ready = 0.0;
  double start = 0.0;
  double cost = 0.0;
  double rtf = 0.0;
  double beam = 0.0;
  double backlog = 0.0;
  std::int64_t token_frame_sum = 0;
};

struct RunResult {
  std::vector<EmissionEvent> events;
  std::vector<ChunkTiming> timings;
  double total_audio = 0.0;  // forwarded speech audio, seconds
  double total_cost = 0.0;
  // Final hypothesis per segment, in emission order (oracle for tests).
  std::vector<Hypothesis> finals;
};

// Replays the benchmark through the selected pipeline wiring on the
// virtual clock.  Segment ids are stream * 10000 + per-stream index.
RunResult RunVariant(const VariantConfig& variant, const Benchmark& bench,
                     const RunConfig& cfg);

class IncompleteRun : public std::runtime_error {
 public:
  explicit IncompleteRun(const std::string& msg) : std::runtime_error(msg) {}
};

struct WordLatencySample {
  std::string text;
  int segment_id = 0;
  double word_end = 0.0;
  double first_appearance = 0.0;
  double last_update = 0.0;
};

// Per finalized displayed word: last_update_time - word end time.  Words
// that were displayed and later replaced are not represented; only the
// final display survives reconstruction.
std::vector<WordLatencySample> WordLatencies(const std::vector<EmissionEvent>& log);

// Per committing emission (stable/flush): emit time minus the audio end of
// the newly committed material.
std::vector<double> CommitmentLatencies(const std::vector<EmissionEvent>& log);

constexpr double kHistogramBin = 0.25;
constexpr double kHistogramMax = 30.0;  // final bin is overflow

struct VariantReport {
  std::string name;
  WerBreakdown wer;
  double mean_rtf = 0.0;
  double mean_commit = 0.0;
  double max_commit = 0.0;
  double mean_word = 0.0;
  double max_word = 0.0;
  std::size_t word_count = 0;
  std::vector<std::int64_t> histogram;  // 121 bins of 0.25 s
};

struct LatencyReport {
  std::vector<VariantReport> variants;
};

VariantReport BuildVariantReport(const std::string& name,
                                 const std::vector<EmissionEvent>& events,
                                 double total_audio, double total_cost,
                                 const Benchmark& bench);

std::string RenderOverallTable(const LatencyReport& report);
std::string RenderPeakTable(const LatencyReport& report);
std::string ReportToJson(const LatencyReport& report);
std::string RenderHistogram(const VariantReport& report);

struct SweepRow {
  double threshold = 0.0;  // infinity encodes "unlimited"
  double wer = 0.0;
  double max_word_latency = 0.0;
  double max_emission_gap = 0.0;
};

// Portion variant re-run per flush threshold; rows ascending, unlimited last.
std::vector<SweepRow> FlushSweep(const std::vector<double>& thresholds,
                                 const Benchmark& bench, const RunConfig& cfg);

// Longest virtual-time gap between consecutive committing emissions while a
// segment is open (segment start and segment end count as endpoints).
double MaxEmissionGap(const std::vector<EmissionEvent>& log);

}  // namespace latlab

#endif  // LATLAB_HARNESS_HPP
