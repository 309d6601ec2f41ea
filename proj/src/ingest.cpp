#include "latlab/ingest.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace latlab {

float FrameEnergy(std::span<const float> samples, float floor_log) {
  if (samples.empty()) {
    throw std::invalid_argument("frame_energy: empty sample window");
  }
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  acc /= static_cast<double>(samples.size());
  if (acc <= 0.0) return floor_log;
  const float e = static_cast<float>(std::log(acc));
  return e < floor_log ? floor_log : e;
}

std::vector<SegmenterEvent> Segmenter::OpenSegment(
    std::vector<SegmenterEvent> out) {
  const int id = next_segment_id_++;
  // Forward the loud run plus up to pad_frames of lead-in silence.
  const size_t want = static_cast<size_t>(loud_run_ + cfg_.pad_frames);
  const size_t first = pending_.size() > want ? pending_.size() - want : 0;
  out.push_back({SegmenterEventKind::kSegmentStart, id,
                 pending_[first].Time(), std::nullopt});
  for (size_t i = first; i < pending_.size(); ++i) {
    out.push_back({SegmenterEventKind::kFrameForwarded, id,
                   pending_[i].Time(), std::move(pending_[i])});
  }
  pending_.clear();
  in_speech_ = true;
  quiet_run_ = 0;
  loud_run_ = 0;
  return out;
}

std::vector<SegmenterEvent> Segmenter::Step(const Frame& frame) {
  if (frame.index <= last_index_) {
    throw OrderingViolation("segmenter received out-of-order frame");
  }
  last_index_ = frame.index;
  std::vector<SegmenterEvent> out;
  if (!in_speech_) {
    pending_.push_back(frame);
    if (frame.energy > cfg_.t_on) {
      ++loud_run_;
      if (loud_run_ >= cfg_.min_speech_frames) return OpenSegment(std::move(out));
    } else {
      loud_run_ = 0;
      // Keep only what a future onset could need as lead-in.
      const size_t keep =
          static_cast<size_t>(cfg_.min_speech_frames + cfg_.pad_frames);
      if (pending_.size() > keep) {
        pending_.erase(pending_.begin(),
                       pending_.end() - static_cast<long>(keep));
      }
    }
    return out;
  }

  // In speech: quiet frames are held back until they either prove to be a
  // mid-segment dip or accumulate into an end-of-segment run.
  if (frame.energy < cfg_.t_off) {
    pending_.push_back(frame);
    ++quiet_run_;
    if (quiet_run_ >= cfg_.min_silence_frames) {
      const int id = next_segment_id_ - 1;
      const size_t pad = std::min(pending_.size(),
                                  static_cast<size_t>(cfg_.pad_frames));
      double end_time = 0.0;
      for (size_t i = 0; i < pad; ++i) {
        end_time = pending_[i].Time() + kFrameDuration;
        out.push_back({SegmenterEventKind::kFrameForwarded, id,
                       pending_[i].Time(), std::move(pending_[i])});
      }
      if (pad == 0) {
        end_time = pending_.front().Time();  // last loud frame's end
      }
      out.push_back({SegmenterEventKind::kSegmentEnd, id, end_time,
                     std::nullopt});
      // Remaining quiet frames stay around as lead-in for the next onset.
      pending_.erase(pending_.begin(), pending_.begin() + static_cast<long>(pad));
      in_speech_ = false;
      quiet_run_ = 0;
      loud_run_ = 0;
    }
    return out;
  }

  const int id = next_segment_id_ - 1;
  for (auto& held : pending_) {
    out.push_back({SegmenterEventKind::kFrameForwarded, id, held.Time(),
                   std::move(held)});
  }
  pending_.clear();
  quiet_run_ = 0;
  out.push_back({SegmenterEventKind::kFrameForwarded, id, frame.Time(), frame});
  return out;
}

std::vector<SegmenterEvent> Segmenter::Finish() {
  std::vector<SegmenterEvent> out;
  if (!in_speech_) return out;
  const int id = next_segment_id_ - 1;
  double end_time = 0.0;
  for (auto& held : pending_) {
    end_time = held.Time() + kFrameDuration;
    out.push_back({SegmenterEventKind::kFrameForwarded, id, held.Time(),
                   std::move(held)});
  }
  pending_.clear();
  if (end_time == 0.0) {
    end_time = static_cast<double>(last_index_ + 1) * kFrameDuration;
  }
  out.push_back({SegmenterEventKind::kSegmentEnd, id, end_time, std::nullopt});
  in_speech_ = false;
  return out;
}

size_t StreamBuffer::Size() const {
  return write_cursor_.load(std::memory_order_acquire) -
         read_cursor_.load(std::memory_order_acquire);
}

size_t StreamBuffer::Write(std::span<const StreamItem> items) {
  if (closed_.load(std::memory_order_acquire)) {
    throw ProtocolError("write to closed stream buffer");
  }
  const size_t w = write_cursor_.load(std::memory_order_relaxed);
  const size_t r = read_cursor_.load(std::memory_order_acquire);
  const size_t free = capacity_ - (w - r);
  const size_t n = std::min(items.size(), free);
  for (size_t i = 0; i < n; ++i) {
    slots_[(w + i) % slots_.size()] = items[i];
  }
  write_cursor_.store(w + n, std::memory_order_release);
  return n;
}

void StreamBuffer::Close() { closed_.store(true, std::memory_order_release); }

bool StreamBuffer::Peek(size_t offset, StreamItem& out) const {
  const size_t r = read_cursor_.load(std::memory_order_relaxed);
  const size_t w = write_cursor_.load(std::memory_order_acquire);
  if (r + offset >= w) return false;
  out = slots_[(r + offset) % slots_.size()];
  return true;
}

void StreamBuffer::Pop(size_t n) {
  read_cursor_.store(read_cursor_.load(std::memory_order_relaxed) + n,
                     std::memory_order_release);
}

StreamBuffer::ReadResult StreamBuffer::ReadChunk(size_t chunk_size) {
  StreamItem item;
  // Swallow a leading SegmentStart marker.
  while (Peek(0, item) && item.kind == SegmenterEventKind::kSegmentStart) {
    current_segment_ = item.segment_id;
    next_chunk_index_ = 0;
    Pop(1);
  }
  if (Peek(0, item) && item.kind == SegmenterEventKind::kSegmentEnd) {
    Pop(1);
    const int id = item.segment_id;
    current_segment_ = -1;
    return EndOfSegment{id};
  }

  size_t frames_in_view = 0;
  bool end_in_view = false;
  for (size_t off = 0; Peek(off, item); ++off) {
    if (item.kind == SegmenterEventKind::kSegmentEnd) {
      end_in_view = true;
      break;
    }
    if (++frames_in_view == chunk_size) break;
  }
  if (frames_in_view == 0 || (frames_in_view < chunk_size && !end_in_view)) {
    return NotYetAvailable{};
  }
  Chunk chunk;
  chunk.segment_id = current_segment_;
  chunk.chunk_index = next_chunk_index_++;
  chunk.frames.reserve(frames_in_view);
  for (size_t i = 0; i < frames_in_view; ++i) {
    Peek(i, item);
    chunk.frames.push_back(std::move(item.frame));
  }
  Pop(frames_in_view);
  return chunk;
}

double ReplayClock::Now() const {
  if (mode_ == ClockMode::kVirtual) return now_;
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

double ReplayClock::Advance(double work) {
  if (work < 0.0) throw std::invalid_argument("clock advance: negative work");
  if (mode_ == ClockMode::kVirtual) now_ += work;
  return Now();
}

void ReplayClock::AdvanceTo(double t) {
  if (mode_ == ClockMode::kVirtual && t > now_) now_ = t;
}

namespace {

void WriteU32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t ReadU32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void WriteF32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  WriteU32(out, bits);
}

float ReadF32(std::ifstream& in) {
  std::uint32_t bits = ReadU32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void SaveStreamFile(const std::string& path, const StreamFile& sf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write stream file: " + path);
  WriteU32(out, 10);  // frame_duration_ms
  WriteU32(out, static_cast<std::uint32_t>(sf.state_count));
  WriteU32(out, static_cast<std::uint32_t>(sf.frames.size()));
  for (const auto& f : sf.frames) {
    WriteF32(out, f.energy);
    for (float s : f.acoustic_scores) WriteF32(out, s);
  }
  nlohmann::json meta;
  meta["transcript"] = sf.transcript_path;
  std::ofstream ms(path + ".meta.json");
  ms << meta.dump() << "\n";
}

StreamFile LoadStreamFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open stream file: " + path);
  const std::uint32_t frame_ms = ReadU32(in);
  if (frame_ms != 10) {
    throw std::runtime_error(path + ": unsupported frame duration " +
                             std::to_string(frame_ms) + " ms");
  }
  StreamFile sf;
  sf.state_count = static_cast<int>(ReadU32(in));
  const std::uint32_t count = ReadU32(in);
  sf.frames.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Frame& f = sf.frames[i];
    f.index = i;
    f.energy = ReadF32(in);
    f.acoustic_scores.resize(sf.state_count);
    for (int s = 0; s < sf.state_count; ++s) f.acoustic_scores[s] = ReadF32(in);
  }
  if (!in) throw std::runtime_error(path + ": truncated stream file");
  std::ifstream ms(path + ".meta.json");
  if (ms) {
    nlohmann::json meta = nlohmann::json::parse(ms, nullptr, false);
    if (!meta.is_discarded() && meta.contains("transcript")) {
      sf.transcript_path = meta["transcript"].get<std::string>();
    }
  }
  return sf;
}

std::vector<float> LoadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav: " + path);
  char tag[5] = {0};
  in.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error(path + ": not RIFF");
  ReadU32(in);
  in.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error(path + ": not WAVE");
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<float> samples;
  while (in.read(tag, 4)) {
    const std::uint32_t size = ReadU32(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      std::vector<char> fmt(size);
      in.read(fmt.data(), size);
      std::memcpy(&channels, fmt.data() + 2, 2);
      std::memcpy(&rate, fmt.data() + 4, 4);
      std::memcpy(&bits, fmt.data() + 14, 2);
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (channels != 1 || rate != 16000 || bits != 16) {
        throw std::runtime_error(path + ": expected PCM16 mono 16 kHz");
      }
      std::vector<std::int16_t> raw(size / 2);
      in.read(reinterpret_cast<char*>(raw.data()), raw.size() * 2);
      samples.reserve(raw.size());
      for (std::int16_t s : raw) samples.push_back(static_cast<float>(s) / 32768.0f);
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  return samples;
}

}  // namespace latlab
