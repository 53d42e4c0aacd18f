#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stunet {

enum class AnnotationKind { kFrameScores, kKeyframeMask, kShotScores };

const char* annotation_kind_name(AnnotationKind kind);

// Ground truth of one video from several annotators.
struct AnnotationSet {
  std::string video_id;
  std::size_t frames = 0;
  AnnotationKind kind = AnnotationKind::kKeyframeMask;
  double range_lo = 0.0;
  double range_hi = 1.0;
  // Shot boundaries 0 = b_0 < ... < b_m = frames; required for shot scores.
  std::vector<std::size_t> shot_boundaries;
  // One row of `frames` values per user.
  std::vector<std::vector<double>> users;

  void validate() const;
};

// Text format, one record per line, '#' starts a comment:
//
//   video <id>
//   frames <L>
//   users <U>
//   kind <frame_scores | keyframe_mask | shot_scores>
//   range <lo> <hi>            optional, defaults to 0 1
//   shots <b_0> ... <b_m>      required for shot_scores
//   <U lines of L values>
std::string format_annotations(const AnnotationSet& set);
AnnotationSet parse_annotations(const std::string& text, const std::string& source);
void write_annotations(const std::string& path, const AnnotationSet& set);
AnnotationSet read_annotations(const std::string& path);

}  // namespace stunet
