#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stunet/dataset.hpp"
#include "stunet/shots.hpp"

namespace stunet {

// Synthetic videos with planted structure.
//
// Each video has `clusters` contiguous segments of (near) equal length. A
// segment is cut into ceil(steps / e) sub-shots, e = ceil(keyframe_fraction *
// steps); one of them, at a random position, is the event shot of exactly e
// steps and its frames are the planted keyframes. The other sub-shots share the
// remaining steps evenly. Step features are
//
//   background sub-shot:  center_j + shot_spread * u + noise
//   event sub-shot:       center_j + event_strength * a + noise
//
// where center_j (norm center_scale) and u live in the last dim - activity
// channels, a is a random unit vector in the first `activity_channels`
// channels, and noise is i.i.d. N(0, noise^2) per step and channel. With
// shot_spread = event_strength = noise = 0 the features are constant within
// each segment.
struct SynthSpec {
  std::size_t clusters = 4;
  std::size_t frames = 128;
  std::size_t dim = 16;
  double noise = 0.1;
  double keyframe_fraction = 0.2;
  std::size_t users = 3;
  std::size_t videos = 20;
  std::size_t expansion = 1;
  std::uint64_t seed = 0;
  double center_scale = 2.0;
  double shot_spread = 1.0;
  double event_strength = 4.0;
  std::size_t activity_channels = 4;
  // Max frames a simulated user moves each event-shot edge; 0 picks
  // max(1, event frames / 4).
  std::size_t jitter = 0;

  void validate() const;
};

struct SynthVideo {
  std::vector<std::size_t> segment_boundaries;  // frames, 0 = b_0 < ... < b_k = L
  std::vector<std::size_t> shot_boundaries;     // planted sub-shots, frames
  Mask planted;                                  // event-shot frames
};

struct SynthDataset {
  Dataset dataset;
  std::vector<SynthVideo> truth;  // parallel to dataset.videos
  double planted_fraction = 0.0;  // share of frames that are planted keyframes
};

SynthDataset synth_dataset(const SynthSpec& spec);

// Writes <id>.fseq and <id>.ann per video plus manifest.jsonl into `dir`
// (created if needed). Returns the manifest path.
std::string write_synth_dataset(const std::string& dir, const SynthDataset& synth);

}  // namespace stunet
