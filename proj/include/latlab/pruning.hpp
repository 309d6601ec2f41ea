#ifndef LATLAB_PRUNING_HPP
#define LATLAB_PRUNING_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace latlab {

// Virtual processing-cost model: a fixed per-chunk overhead plus a linear
// term in surviving token-frames.  Calibrated so the reference benchmark
// decodes around RTF 0.6 outside hard regions and above 1.0 inside them.
struct CostModel {
  double c0 = 0.020;    // seconds per chunk
  double c1 = 4.3e-5;   // seconds per active token per frame

  double ChunkCost(std::int64_t token_frame_sum) const {
    if (token_frame_sum < 0) throw std::invalid_argument("negative token-frame sum");
    return c0 + c1 * static_cast<double>(token_frame_sum);
  }
};

struct PruneConfig {
  double nominal_beam = 12.0;
  double min_beam = 4.0;  // nominal / 3
  double narrow_factor = 0.7;
};

// Narrows the beam after any chunk that decoded slower than real time and
// restores it the moment the decoder has caught up with live audio.
class PruneController {
 public:
  explicit PruneController(PruneConfig cfg) : cfg_(cfg), beam_(cfg.nominal_beam) {}

  double beam() const { return beam_; }
  double backlog() const { return backlog_; }
  const PruneConfig& config() const { return cfg_; }

  double UpdateBeam(double chunk_rtf, bool caught_up) {
    if (chunk_rtf < 0) throw std::invalid_argument("negative chunk RTF");
    if (chunk_rtf > 1.0) {
      beam_ = std::max(cfg_.min_beam, cfg_.narrow_factor * beam_);
    }
    if (caught_up) beam_ = cfg_.nominal_beam;
    return beam_;
  }

  double UpdateBacklog(double chunk_audio_duration, double chunk_cost) {
    if (chunk_audio_duration < 0 || chunk_cost < 0) {
      throw std::invalid_argument("negative duration in backlog update");
    }
    backlog_ = std::max(0.0, backlog_ + chunk_cost - chunk_audio_duration);
    return backlog_;
  }

  void ResetBacklog() { backlog_ = 0.0; }

 private:
  PruneConfig cfg_;
  double beam_;
  double backlog_ = 0.0;
};

}  // namespace latlab

#endif  // LATLAB_PRUNING_HPP
