#ifndef LATLAB_BENCHMARK_HPP
#define LATLAB_BENCHMARK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "latlab/decoder.hpp"
#include "latlab/ingest.hpp"
#include "latlab/lm.hpp"
#include "latlab/model.hpp"

namespace latlab {

// Fully determines the generated benchmark together with the generator
// version: frame streams, segment structure, hard regions, transcripts and
// the vocabulary LM.
struct BenchmarkSpec {
  std::uint64_t seed = 7;
  int n_streams = 8;
  int words_per_stream = 600;
  int vocab_size = 200;
  int state_count = 120;  // last state id is reserved for silence
  int states_per_word = 3;
  int lm_order = 3;

  int min_words_per_segment = 25;
  int max_words_per_segment = 45;
  double silence_gap_min = 0.7;
  double silence_gap_max = 1.2;
  double lead_silence = 0.4;
  int min_state_frames = 6;
  int max_state_frames = 14;

  double hard_region_rate = 0.10;  // target fraction of speech frames
  double hard_region_min_s = 1.0;
  double hard_region_max_s = 2.5;

  double margin = 4.0;
  double sigma = 0.5;
  double hard_margin = 1.5;
  int hard_competitors = 16;

  // Harder variant used for the adaptive-pruning peak experiments.
  static BenchmarkSpec HardRegions();
};

struct StreamTruth {
  Transcript transcript;
  std::vector<std::pair<double, double>> segments;  // start/end seconds
  std::vector<SyntheticScorer::HardRegion> hard_regions;
};

struct Benchmark {
  BenchmarkSpec spec;
  NGramModel lm;
  std::vector<StreamFile> streams;
  std::vector<StreamTruth> truths;
};

class InvalidSpec : public std::runtime_error {
 public:
  explicit InvalidSpec(const std::string& msg) : std::runtime_error(msg) {}
};

Benchmark GenerateBenchmark(const BenchmarkSpec& spec);
void SaveBenchmark(const Benchmark& bench, const std::string& dir);
Benchmark LoadBenchmark(const std::string& dir);

// The word lexicon matching a benchmark's LM vocabulary: words hash into
// the inventory below the reserved silence state.
PronLexicon BenchmarkLexicon(const Benchmark& bench);

}  // namespace latlab

#endif  // LATLAB_BENCHMARK_HPP
