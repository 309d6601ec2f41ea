#include "latlab/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "latlab/rng.hpp"

namespace latlab {

namespace fs = std::filesystem;

BenchmarkSpec BenchmarkSpec::HardRegions() {
  BenchmarkSpec spec;
  spec.hard_region_rate = 0.20;
  spec.hard_region_min_s = 2.0;
  spec.hard_region_max_s = 4.0;
  spec.hard_competitors = 24;
  // The larger competitor set needs a wider hard margin to keep accuracy
  // comparable between the pruned and unpruned configurations.
  spec.hard_margin = 1.8;
  return spec;
}

namespace {

std::string WordText(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03d", id);
  return buf;
}

nlohmann::json SpecToJson(const BenchmarkSpec& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["n_streams"] = s.n_streams;
  j["words_per_stream"] = s.words_per_stream;
  j["vocab_size"] = s.vocab_size;
  j["state_count"] = s.state_count;
  j["states_per_word"] = s.states_per_word;
  j["lm_order"] = s.lm_order;
  j["min_words_per_segment"] = s.min_words_per_segment;
  j["max_words_per_segment"] = s.max_words_per_segment;
  j["silence_gap_min"] = s.silence_gap_min;
  j["silence_gap_max"] = s.silence_gap_max;
  j["lead_silence"] = s.lead_silence;
  j["min_state_frames"] = s.min_state_frames;
  j["max_state_frames"] = s.max_state_frames;
  j["hard_region_rate"] = s.hard_region_rate;
  j["hard_region_min_s"] = s.hard_region_min_s;
  j["hard_region_max_s"] = s.hard_region_max_s;
  j["margin"] = s.margin;
  j["sigma"] = s.sigma;
  j["hard_margin"] = s.hard_margin;
  j["hard_competitors"] = s.hard_competitors;
  return j;
}

BenchmarkSpec SpecFromJson(const nlohmann::json& j) {
  BenchmarkSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.n_streams = j.at("n_streams").get<int>();
  s.words_per_stream = j.at("words_per_stream").get<int>();
  s.vocab_size = j.at("vocab_size").get<int>();
  s.state_count = j.at("state_count").get<int>();
  s.states_per_word = j.at("states_per_word").get<int>();
  s.lm_order = j.at("lm_order").get<int>();
  s.min_words_per_segment = j.at("min_words_per_segment").get<int>();
  s.max_words_per_segment = j.at("max_words_per_segment").get<int>();
  s.silence_gap_min = j.at("silence_gap_min").get<double>();
  s.silence_gap_max = j.at("silence_gap_max").get<double>();
  s.lead_silence = j.at("lead_silence").get<double>();
  s.min_state_frames = j.at("min_state_frames").get<int>();
  s.max_state_frames = j.at("max_state_frames").get<int>();
  s.hard_region_rate = j.at("hard_region_rate").get<double>();
  s.hard_region_min_s = j.at("hard_region_min_s").get<double>();
  s.hard_region_max_s = j.at("hard_region_max_s").get<double>();
  s.margin = j.at("margin").get<double>();
  s.sigma = j.at("sigma").get<double>();
  s.hard_margin = j.at("hard_margin").get<double>();
  s.hard_competitors = j.at("hard_competitors").get<int>();
  return s;
}

}  // namespace

PronLexicon BenchmarkLexicon(const Benchmark& bench) {
  PronLexicon lex = PronLexicon::FromVocabulary(
      bench.lm.words(), bench.spec.state_count, bench.spec.states_per_word,
      bench.spec.state_count - 1);
  lex.SetSilence({bench.spec.state_count - 1});
  return lex;
}

Benchmark GenerateBenchmark(const BenchmarkSpec& spec) {
  if (spec.vocab_size <= 0) throw InvalidSpec("vocabulary size must be positive");
  if (spec.words_per_stream <= 0) throw InvalidSpec("words per stream must be positive");
  if (spec.n_streams <= 0) throw InvalidSpec("stream count must be positive");
  if (spec.state_count < 2) throw InvalidSpec("state inventory too small");

  Benchmark bench;
  bench.spec = spec;

  // Vocabulary LM from a uniform random corpus; one covering sentence
  // guarantees every word is in the model.
  {
    Rng rng(Fnv1a("lm-corpus", spec.seed));
    std::vector<std::vector<std::string>> corpus;
    for (int s = 0; s < 200; ++s) {
      std::vector<std::string> sent;
      for (int w = 0; w < 80; ++w) {
        sent.push_back(WordText(static_cast<int>(
            rng.UniformInt(0, spec.vocab_size - 1))));
      }
      corpus.push_back(std::move(sent));
    }
    std::vector<std::string> covering;
    for (int w = 0; w < spec.vocab_size; ++w) covering.push_back(WordText(w));
    corpus.push_back(std::move(covering));
    bench.lm = BuildCountingModel(corpus, spec.lm_order);
  }

  const PronLexicon lexicon = BenchmarkLexicon(bench);
  const int silence_state = spec.state_count - 1;

  for (int s = 0; s < spec.n_streams; ++s) {
    Rng rng(Fnv1a("stream", spec.seed ^ (static_cast<std::uint64_t>(s) *
                                         0x9e3779b97f4a7c15ull)));
    StreamTruth truth;
    std::vector<int> alignment;
    std::vector<float> energy;

    auto add_silence = [&](double seconds) {
      const int n = static_cast<int>(std::llround(seconds / kFrameDuration));
      for (int i = 0; i < n; ++i) {
        alignment.push_back(silence_state);
        energy.push_back(static_cast<float>(rng.Normal(-9.0, 0.3)));
      }
    };

    add_silence(spec.lead_silence);
    int words_left = spec.words_per_stream;
    while (words_left > 0) {
      const int seg_words = static_cast<int>(std::min<std::int64_t>(
          words_left, rng.UniformInt(spec.min_words_per_segment,
                                     spec.max_words_per_segment)));
      const double seg_start = static_cast<double>(alignment.size()) * kFrameDuration;
      for (int w = 0; w < seg_words; ++w) {
        const int word_id = static_cast<int>(rng.UniformInt(0, spec.vocab_size - 1));
        const std::string text = WordText(word_id);
        const WordId wid = bench.lm.Lookup(text);
        const auto states = lexicon.States(wid);
        TimedWord tw;
        tw.text = text;
        tw.start = static_cast<double>(alignment.size()) * kFrameDuration;
        for (int st : states) {
          const int dur = static_cast<int>(
              rng.UniformInt(spec.min_state_frames, spec.max_state_frames));
          for (int i = 0; i < dur; ++i) {
            alignment.push_back(st);
            energy.push_back(static_cast<float>(rng.Normal(-1.0, 0.3)));
          }
        }
        tw.end = static_cast<double>(alignment.size()) * kFrameDuration;
        truth.transcript.words.push_back(std::move(tw));
      }
      const double seg_end = static_cast<double>(alignment.size()) * kFrameDuration;
      truth.segments.emplace_back(seg_start, seg_end);
      words_left -= seg_words;
      if (words_left > 0) {
        add_silence(rng.Uniform(spec.silence_gap_min, spec.silence_gap_max));
      }
    }
    add_silence(spec.silence_gap_min);

    // Plant hard regions inside segments until the target speech-frame
    // coverage is reached.
    double speech_frames = 0;
    for (const auto& [b, e] : truth.segments) speech_frames += (e - b) / kFrameDuration;
    const double target = spec.hard_region_rate * speech_frames;
    double covered = 0;
    int attempts = 0;
    while (covered < target && attempts < 10000) {
      ++attempts;
      const auto& seg =
          truth.segments[static_cast<size_t>(rng.UniformInt(
              0, static_cast<std::int64_t>(truth.segments.size()) - 1))];
      const double len = rng.Uniform(spec.hard_region_min_s, spec.hard_region_max_s);
      if (seg.second - seg.first < len + 0.2) continue;
      const double begin_s = rng.Uniform(seg.first, seg.second - len);
      SyntheticScorer::HardRegion r;
      r.begin_frame = static_cast<std::int64_t>(std::llround(begin_s / kFrameDuration));
      r.end_frame = r.begin_frame +
                    static_cast<std::int64_t>(std::llround(len / kFrameDuration));
      bool overlaps = false;
      for (const auto& ex : truth.hard_regions) {
        if (r.begin_frame < ex.end_frame && ex.begin_frame < r.end_frame) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      covered += static_cast<double>(r.end_frame - r.begin_frame);
      truth.hard_regions.push_back(r);
    }
    std::sort(truth.hard_regions.begin(), truth.hard_regions.end(),
              [](const auto& a, const auto& b) { return a.begin_frame < b.begin_frame; });

    SyntheticScorer::Config sc;
    sc.state_count = spec.state_count;
    sc.margin = spec.margin;
    sc.sigma = spec.sigma;
    sc.hard_margin = spec.hard_margin;
    sc.hard_competitors = spec.hard_competitors;
    sc.seed = Fnv1a("scorer", spec.seed ^ static_cast<std::uint64_t>(s));
    SyntheticScorer scorer(sc, alignment, truth.hard_regions);

    StreamFile sf;
    sf.state_count = spec.state_count;
    sf.frames.resize(alignment.size());
    for (size_t f = 0; f < alignment.size(); ++f) {
      sf.frames[f].index = static_cast<std::int64_t>(f);
      sf.frames[f].energy = energy[f];
      sf.frames[f].acoustic_scores = scorer.Scores(static_cast<std::int64_t>(f));
    }
    bench.streams.push_back(std::move(sf));
    bench.truths.push_back(std::move(truth));
  }
  return bench;
}

void SaveBenchmark(const Benchmark& bench, const std::string& dir) {
  fs::create_directories(dir);
  bench.lm.SaveArpa(dir + "/lm.arpa");
  nlohmann::json meta;
  meta["spec"] = SpecToJson(bench.spec);
  meta["version"] = 1;
  nlohmann::json streams = nlohmann::json::array();
  for (size_t s = 0; s < bench.streams.size(); ++s) {
    char sbuf[32], rbuf[32];
    std::snprintf(sbuf, sizeof(sbuf), "stream_%03zu.bin", s);
    std::snprintf(rbuf, sizeof(rbuf), "ref_%03zu.tsv", s);
    StreamFile sf = bench.streams[s];
    sf.transcript_path = rbuf;
    SaveStreamFile(dir + "/" + sbuf, sf);
    SaveTranscript(bench.truths[s].transcript, dir + "/" + rbuf);
    nlohmann::json js;
    js["stream"] = sbuf;
    js["transcript"] = rbuf;
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& [b, e] : bench.truths[s].segments) segs.push_back({b, e});
    js["segments"] = std::move(segs);
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : bench.truths[s].hard_regions) {
      regions.push_back({r.begin_frame, r.end_frame});
    }
    js["hard_regions"] = std::move(regions);
    streams.push_back(std::move(js));
  }
  meta["streams"] = std::move(streams);
  std::ofstream out(dir + "/bench.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/bench.json");
  out << meta.dump(2) << "\n";
}

Benchmark LoadBenchmark(const std::string& dir) {
  std::ifstream in(dir + "/bench.json");
  if (!in) throw std::runtime_error("cannot open " + dir + "/bench.json");
  nlohmann::json meta = nlohmann::json::parse(in);
  Benchmark bench;
  bench.spec = SpecFromJson(meta.at("spec"));
  bench.lm = NGramModel::LoadArpa(dir + "/lm.arpa");
  for (const auto& js : meta.at("streams")) {
    bench.streams.push_back(LoadStreamFile(dir + "/" + js.at("stream").get<std::string>()));
    StreamTruth truth;
    truth.transcript = LoadTranscript(dir + "/" + js.at("transcript").get<std::string>());
    for (const auto& seg : js.at("segments")) {
      truth.segments.emplace_back(seg[0].get<double>(), seg[1].get<double>());
    }
    for (const auto& r : js.at("hard_regions")) {
      truth.hard_regions.push_back({r[0].get<std::int64_t>(), r[1].get<std::int64_t>()});
    }
    bench.truths.push_back(std::move(truth));
  }
  return bench;
}

}  // namespace latlab
