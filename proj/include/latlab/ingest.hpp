#ifndef LATLAB_INGEST_HPP
#define LATLAB_INGEST_HPP

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "latlab/model.hpp"

namespace latlab {

// One 10 ms frame: log energy plus the acoustic log-score vector over the
// model's state inventory.
struct Frame {
  std::int64_t index = 0;
  float energy = 0.0f;
  std::vector<float> acoustic_scores;

  double Time() const { return static_cast<double>(index) * kFrameDuration; }
};

struct Chunk {
  std::vector<Frame> frames;
  int segment_id = 0;
  int chunk_index = 0;

  double AudioDuration() const {
    return static_cast<double>(frames.size()) * kFrameDuration;
  }
  // End-of-audio time of the last frame in the chunk.
  double AudioEnd() const {
    return frames.empty() ? 0.0 : frames.back().Time() + kFrameDuration;
  }
};

enum class SegmenterEventKind { kSegmentStart, kFrameForwarded, kSegmentEnd };

struct SegmenterEvent {
  SegmenterEventKind kind;
  int segment_id = 0;
  double time = 0.0;
  std::optional<Frame> frame;  // present for kFrameForwarded
};

struct SegmenterConfig {
  float t_on = -4.0f;    // log-energy onset threshold
  float t_off = -5.0f;   // log-energy offset threshold
  int min_speech_frames = 10;   // 100 ms
  int min_silence_frames = 30;  // 300 ms
  int pad_frames = 10;          // 100 ms lead-in / lead-out
};

// Energy-based hysteresis segmenter.  Speech opens after min_speech frames
// above t_on (the SegmentStart is emitted retroactively, including pad
// lead-in); it closes after min_silence frames below t_off, ending pad
// frames past the last loud frame.  Inter-segment silence is dropped.
class Segmenter {
 public:
  explicit Segmenter(SegmenterConfig cfg) : cfg_(cfg) {}

  std::vector<SegmenterEvent> Step(const Frame& frame);
  // Flushes an open segment at end of stream.
  std::vector<SegmenterEvent> Finish();

  int segments_started() const { return next_segment_id_; }

 private:
  std::vector<SegmenterEvent> OpenSegment(std::vector<SegmenterEvent> out);

  SegmenterConfig cfg_;
  std::vector<Frame> pending_;  // silence-side frames held for pad/onset
  bool in_speech_ = false;
  int loud_run_ = 0;
  int quiet_run_ = 0;
  int next_segment_id_ = 0;
  std::int64_t last_index_ = -1;
};

// log of mean squared amplitude over one frame window, floored.
float FrameEnergy(std::span<const float> samples, float floor_log = -12.0f);

// Items carried by the shared stream buffer: forwarded frames plus segment
// framing markers so the consumer can detect boundaries in order.
struct StreamItem {
  SegmenterEventKind kind;
  int segment_id = 0;
  Frame frame;  // valid for kFrameForwarded
};

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bounded single-producer / single-consumer ring buffer between the
// segmenter and the decoder.  Capacity counts buffered items; the producer
// never blocks, it is told how many items were accepted and retries later.
class StreamBuffer {
 public:
  explicit StreamBuffer(size_t capacity = 6000)
      : capacity_(capacity), slots_(capacity + 1) {}

  StreamBuffer(const StreamBuffer&) = delete;
  StreamBuffer& operator=(const StreamBuffer&) = delete;

  // Appends up to capacity - backlog items; returns how many were accepted.
  size_t Write(std::span<const StreamItem> items);
  void Close();
  bool closed() const { return closed_.load(std::memory_order_acquire); }

  size_t capacity() const { return capacity_; }
  size_t Size() const;

  struct NotYetAvailable {};
  struct EndOfSegment {
    int segment_id = 0;
  };
  using ReadResult = std::variant<Chunk, NotYetAvailable, EndOfSegment>;

  // Consumer side: returns a full chunk once chunk_size frames of the
  // current segment are buffered, a short final chunk when the segment end
  // marker is in view, then EndOfSegment.  NotYetAvailable otherwise.
  ReadResult ReadChunk(size_t chunk_size);

 private:
  bool Peek(size_t offset, StreamItem& out) const;
  void Pop(size_t n);

  size_t capacity_;
  std::vector<StreamItem> slots_;
  std::atomic<size_t> write_cursor_{0};
  std::atomic<size_t> read_cursor_{0};
  std::atomic<bool> closed_{false};
  int next_chunk_index_ = 0;
  int current_segment_ = -1;
};

enum class ClockMode { kWall, kVirtual };

// Monotone pipeline clock.  Virtual mode advances only by explicit work
// amounts, which is what makes latency runs replayable.
class ReplayClock {
 public:
  explicit ReplayClock(ClockMode mode, double start = 0.0)
      : mode_(mode), now_(start) {}

  ClockMode mode() const { return mode_; }
  double Now() const;

  // Returns the new time.  Wall mode ignores `work`.
  double Advance(double work);
  // Virtual mode only: jump forward to an absolute time (waiting for audio).
  void AdvanceTo(double t);

 private:
  ClockMode mode_;
  double now_;
};

// Synthetic stream file: little-endian binary header
// (frame_duration_ms, state_count, frame_count as uint32) followed by one
// record per frame: energy then state_count scores, all float32.  A JSON
// sidecar `<path>.meta.json` names the paired reference transcript.
struct StreamFile {
  int state_count = 0;
  std::vector<Frame> frames;
  std::string transcript_path;  // from sidecar, may be empty
};

void SaveStreamFile(const std::string& path, const StreamFile& sf);
StreamFile LoadStreamFile(const std::string& path);

// PCM 16-bit mono 16 kHz WAV reader; returns samples normalized to [-1, 1].
std::vector<float> LoadWav(const std::string& path);

}  // namespace latlab

#endif  // LATLAB_INGEST_HPP
