// latlab command line: benchmark synthesis, variant replay, reporting and
// the flush-threshold sweep.  Exit codes: 0 success, 2 usage error,
// 3 input/IO error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latlab/benchmark.hpp"
#include "latlab/harness.hpp"
#include "latlab/protocol.hpp"

namespace {

constexpr const char* kVersion = "latlab 0.1.0";

struct SynthArgs {
  latlab::BenchmarkSpec spec;
  std::string out;
  bool hard = false;
};

struct RunArgs {
  std::string variant;
  std::string bench;
  std::string log;
  double flush_threshold = std::numeric_limits<double>::infinity();
  int chunk_frames = 40;
  double beam = 12.0;
  std::string clock = "virtual";
};

struct ReportArgs {
  std::vector<std::string> logs;
  std::string refs;
  std::string out;
  std::string hist;
};

struct SweepArgs {
  std::string thresholds = "1,2,3,4,5,inf";
  std::string bench;
  int chunk_frames = 40;
  double beam = 12.0;
};

struct LoadedLog {
  std::string variant = "unknown";
  std::uint64_t seed = 0;
  double total_audio = 0.0;
  double total_cost = 0.0;
  std::vector<latlab::EmissionEvent> events;
};

void WriteHeader(std::ostream& os, const RunArgs& a, std::uint64_t seed,
                 const latlab::RunResult& run) {
  char buf[128];
  os << "# " << kVersion << "\n";
  os << "# variant: " << latlab::VariantConfig::Preset(a.variant).name << "\n";
  os << "# seed: " << seed << "\n";
  os << "# chunk_frames: " << a.chunk_frames << "\n";
  std::snprintf(buf, sizeof(buf), "# beam: %g\n", a.beam);
  os << buf;
  os << "# clock: " << a.clock << "\n";
  if (std::isfinite(a.flush_threshold)) {
    std::snprintf(buf, sizeof(buf), "# flush_threshold: %g\n", a.flush_threshold);
  } else {
    std::snprintf(buf, sizeof(buf), "# flush_threshold: inf\n");
  }
  os << buf;
  std::snprintf(buf, sizeof(buf), "# total_audio: %.6f\n", run.total_audio);
  os << buf;
  std::snprintf(buf, sizeof(buf), "# total_cost: %.6f\n", run.total_cost);
  os << buf;
}

LoadedLog LoadLog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log: " + path);
  LoadedLog log;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "variant:") {
        std::string rest;
        std::getline(hs, rest);
        const size_t p = rest.find_first_not_of(' ');
        log.variant = p == std::string::npos ? rest : rest.substr(p);
      } else if (key == "seed:") {
        hs >> log.seed;
      } else if (key == "total_audio:") {
        hs >> log.total_audio;
      } else if (key == "total_cost:") {
        hs >> log.total_cost;
      }
      continue;
    }
    try {
      log.events.push_back(latlab::DecodeEvent(line));
    } catch (const latlab::DecodeError& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return log;
}

std::vector<double> ParseThresholds(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) throw std::invalid_argument("empty threshold entry");
    if (tok == "inf" || tok == "unlimited") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !(v > 0)) {
      throw std::invalid_argument("bad threshold: " + tok);
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("no thresholds given");
  return out;
}

std::string HistPath(const std::string& base, const std::string& variant,
                     bool single) {
  if (single) return base;
  const size_t dot = base.find_last_of('.');
  const std::string tag = "." + variant;
  if (dot == std::string::npos || base.find('/', dot) != std::string::npos) {
    return base + tag;
  }
  return base.substr(0, dot) + tag + base.substr(dot);
}

int CmdSynth(const SynthArgs& args) {
  latlab::BenchmarkSpec spec =
      args.hard ? latlab::BenchmarkSpec::HardRegions() : latlab::BenchmarkSpec{};
  // Values the user set override whichever preset was chosen.
  spec.seed = args.spec.seed;
  spec.n_streams = args.spec.n_streams;
  spec.words_per_stream = args.spec.words_per_stream;
  spec.vocab_size = args.spec.vocab_size;
  spec.sigma = args.spec.sigma;
  try {
    latlab::Benchmark bench = latlab::GenerateBenchmark(spec);
    latlab::SaveBenchmark(bench, args.out);
  } catch (const latlab::InvalidSpec& e) {
    std::cerr << "invalid spec: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "# " << kVersion << "\n# seed: " << spec.seed << "\nwrote "
            << args.out << " (" << spec.n_streams << " streams)\n";
  return 0;
}

int CmdRun(const RunArgs& args) {
  latlab::Benchmark bench;
  try {
    bench = latlab::LoadBenchmark(args.bench);
  } catch (const std::exception& e) {
    std::cerr << "cannot load benchmark: " << e.what() << "\n";
    return 3;
  }
  latlab::VariantConfig variant = latlab::VariantConfig::Preset(args.variant);
  if (std::isfinite(args.flush_threshold)) {
    if (args.flush_threshold <= 0) {
      std::cerr << "--flush-threshold must be positive\n";
      return 2;
    }
    variant.flush.enabled = true;
    variant.flush.threshold = args.flush_threshold;
  }
  latlab::RunConfig cfg;
  cfg.chunk_frames = args.chunk_frames;
  cfg.beam = args.beam;
  cfg.clock =
      args.clock == "wall" ? latlab::ClockMode::kWall : latlab::ClockMode::kVirtual;
  if (cfg.chunk_frames <= 0 || cfg.beam <= 0) {
    std::cerr << "--chunk-frames and --beam must be positive\n";
    return 2;
  }
  latlab::RunResult run = latlab::RunVariant(variant, bench, cfg);

  std::ofstream out(args.log);
  if (!out) {
    std::cerr << "cannot write log: " << args.log << "\n";
    return 3;
  }
  WriteHeader(out, args, bench.spec.seed, run);
  for (const auto& ev : run.events) out << latlab::EncodeEvent(ev) << "\n";
  std::cout << "# " << kVersion << "\nwrote " << run.events.size()
            << " events to " << args.log << "\n";
  return 0;
}

int CmdReport(const ReportArgs& args) {
  std::vector<LoadedLog> logs;
  try {
    for (const auto& path : args.logs) logs.push_back(LoadLog(path));
  } catch (const std::exception& e) {
    std::cerr << "cannot read logs: " << e.what() << "\n";
    return 3;
  }
  latlab::Benchmark bench;
  try {
    bench = latlab::LoadBenchmark(args.refs);
  } catch (const std::exception& e) {
    std::cerr << "cannot load references: " << e.what() << "\n";
    return 3;
  }
  // Fixed Table-1 row order first, any extra names after in input order.
  std::vector<const LoadedLog*> ordered;
  for (const auto& key : latlab::VariantConfig::PresetOrder()) {
    const std::string name = latlab::VariantConfig::Preset(key).name;
    for (const auto& log : logs) {
      if (log.variant == name) ordered.push_back(&log);
    }
  }
  for (const auto& log : logs) {
    if (std::find(ordered.begin(), ordered.end(), &log) == ordered.end()) {
      ordered.push_back(&log);
    }
  }

  latlab::LatencyReport report;
  try {
    for (const LoadedLog* log : ordered) {
      report.variants.push_back(latlab::BuildVariantReport(
          log->variant, log->events, log->total_audio, log->total_cost, bench));
    }
  } catch (const std::exception& e) {
    std::cerr << "bad log contents: " << e.what() << "\n";
    return 3;
  }

  std::cout << "# " << kVersion << "\n# seed: " << bench.spec.seed << "\n";
  std::cout << latlab::RenderOverallTable(report) << "\n";
  std::cout << latlab::RenderPeakTable(report);
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) {
      std::cerr << "cannot write report: " << args.out << "\n";
      return 3;
    }
    out << latlab::ReportToJson(report) << "\n";
  }
  if (!args.hist.empty()) {
    for (const auto& v : report.variants) {
      const std::string path =
          HistPath(args.hist, v.name, report.variants.size() == 1);
      std::ofstream out(path);
      if (!out) {
        std::cerr << "cannot write histogram: " << path << "\n";
        return 3;
      }
      out << latlab::RenderHistogram(v);
    }
  }
  return 0;
}

int CmdSweep(const SweepArgs& args) {
  std::vector<double> thresholds;
  try {
    thresholds = ParseThresholds(args.thresholds);
  } catch (const std::exception& e) {
    std::cerr << "bad --thresholds: " << e.what() << "\n";
    return 2;
  }
  latlab::Benchmark bench;
  try {
    bench = latlab::LoadBenchmark(args.bench);
  } catch (const std::exception& e) {
    std::cerr << "cannot load benchmark: " << e.what() << "\n";
    return 3;
  }
  latlab::RunConfig cfg;
  cfg.chunk_frames = args.chunk_frames;
  cfg.beam = args.beam;
  const auto rows = latlab::FlushSweep(thresholds, bench, cfg);
  std::cout << "# " << kVersion << "\n# seed: " << bench.spec.seed << "\n";
  std::cout << "threshold\twer\tmax_word_latency\tmax_emission_gap\n";
  char buf[128];
  for (const auto& row : rows) {
    if (std::isfinite(row.threshold)) {
      std::snprintf(buf, sizeof(buf), "%g\t%.4f\t%.3f\t%.3f\n", row.threshold,
                    row.wer, row.max_word_latency, row.max_emission_gap);
    } else {
      std::snprintf(buf, sizeof(buf), "inf\t%.4f\t%.3f\t%.3f\n", row.wer,
                    row.max_word_latency, row.max_emission_gap);
    }
    std::cout << buf;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latlab: streaming recognition pipeline simulator and latency lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
  synth->add_option("--seed", synth_args.spec.seed, "generator seed")
      ->capture_default_str();
  synth->add_option("--streams", synth_args.spec.n_streams, "number of streams")
      ->capture_default_str();
  synth->add_option("--words", synth_args.spec.words_per_stream,
                    "words per stream")
      ->capture_default_str();
  synth->add_option("--vocab", synth_args.spec.vocab_size, "vocabulary size")
      ->capture_default_str();
  synth->add_option("--sigma", synth_args.spec.sigma, "acoustic noise sigma")
      ->capture_default_str();
  synth->add_flag("--hard", synth_args.hard,
                  "use the hard-region-heavy preset");
  synth->add_option("--out", synth_args.out, "output directory")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "replay one variant over a benchmark");
  run->add_option("--variant", run_args.variant, "system variant")
      ->required()
      ->check(CLI::IsMember(latlab::VariantConfig::PresetOrder()));
  run->add_option("--bench", run_args.bench, "benchmark directory")->required();
  run->add_option("--log", run_args.log, "event log output path")->required();
  run->add_option("--flush-threshold", run_args.flush_threshold,
                  "forced-flush threshold in seconds");
  run->add_option("--chunk-frames", run_args.chunk_frames, "frames per chunk")
      ->capture_default_str();
  run->add_option("--beam", run_args.beam, "nominal beam width")
      ->capture_default_str();
  run->add_option("--clock", run_args.clock, "virtual or wall clock")
      ->check(CLI::IsMember({"virtual", "wall"}))
      ->capture_default_str();

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "aggregate event logs into tables");
  report->add_option("--logs", report_args.logs, "event log files")
      ->required()
      ->expected(-1);
  report->add_option("--refs", report_args.refs,
                     "benchmark directory holding the references")
      ->required();
  report->add_option("--out", report_args.out, "machine-readable report path");
  report->add_option("--hist", report_args.hist,
                     "word-latency histogram output path");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "flush-threshold sweep (Portion)");
  sweep->add_option("--thresholds", sweep_args.thresholds,
                    "comma list of seconds, `inf` for unlimited")
      ->capture_default_str();
  sweep->add_option("--bench", sweep_args.bench, "benchmark directory")
      ->required();
  sweep->add_option("--chunk-frames", sweep_args.chunk_frames, "frames per chunk")
      ->capture_default_str();
  sweep->add_option("--beam", sweep_args.beam, "nominal beam width")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return CmdSynth(synth_args);
    if (run->parsed()) return CmdRun(run_args);
    if (report->parsed()) return CmdReport(report_args);
    if (sweep->parsed()) return CmdSweep(sweep_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
