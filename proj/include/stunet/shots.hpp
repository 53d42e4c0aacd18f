#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stunet/features.hpp"

namespace stunet {

// Binary per-frame inclusion.
using Mask = std::vector<std::uint8_t>;

// Disjoint intervals [b_j, b_{j+1}) covering [0, L).
class ShotSegmentation {
 public:
  ShotSegmentation() = default;
  // Boundaries must satisfy 0 = b_0 < b_1 < ... < b_m = L.
  explicit ShotSegmentation(std::vector<std::size_t> boundaries);

  const std::vector<std::size_t>& boundaries() const { return boundaries_; }
  std::size_t shot_count() const { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }
  std::size_t frames() const { return boundaries_.empty() ? 0 : boundaries_.back(); }
  std::size_t begin(std::size_t shot) const { return boundaries_[shot]; }
  std::size_t end(std::size_t shot) const { return boundaries_[shot + 1]; }
  std::size_t length(std::size_t shot) const { return end(shot) - begin(shot); }
  std::size_t shot_of(std::size_t frame) const;

 private:
  std::vector<std::size_t> boundaries_;
};

struct KtsOptions {
  // 0 means floor(max_segments_ratio * L), at least 1.
  std::size_t max_segments = 0;
  double max_segments_ratio = 0.1;
  double penalty = 1.0;
};

// Within-segment scatter of l2-normalised rows under a linear kernel:
// sum_{t in [i,j)} K_tt - (1 / (j - i)) sum_{t,u in [i,j)} K_tu.
double segment_scatter(const FrameMatrix& normalized, std::size_t begin, std::size_t end);

FrameMatrix l2_normalize_rows(const FrameMatrix& m);

// Kernel temporal segmentation: exact minimiser over m <= max_segments of
//   sum_j scatter(b_j, b_{j+1}) + penalty * m * (log(L / m) + 1).
ShotSegmentation kts_segment(const FrameMatrix& features, const KtsOptions& options = {});

enum class KeyframeMode { kThreshold, kSample };

// Threshold: {t : p_t >= 0.5}. Sample: one Bernoulli draw per frame.
std::vector<std::size_t> keyframes_from_policy(std::span<const double> p, KeyframeMode mode,
                                               std::uint64_t seed = 0);

struct KnapsackItem {
  std::size_t weight = 1;
  double value = 0.0;
};

// Exact 0/1 knapsack by dynamic programming. Among optimal sets prefers fewer
// total weight, then earlier items. Returns selected item indices, ascending.
std::vector<std::size_t> knapsack_select(std::span<const KnapsackItem> items, std::size_t capacity);

struct ShotItem {
  std::size_t shot = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t weight = 0;  // frame count
  double value = 0.0;      // mean predicted score over the shot
  bool has_keyframe = false;
  bool selected = false;
};

enum class SummaryStatus { kOk, kNoCandidates, kNothingFits };

const char* summary_status_name(SummaryStatus status);

struct Summary {
  std::string video_id;
  double budget_fraction = 0.15;
  std::size_t capacity = 0;  // floor(budget_fraction * L)
  SummaryStatus status = SummaryStatus::kOk;
  ShotSegmentation segmentation;
  std::vector<ShotItem> shots;
  Mask mask;

  std::size_t frames() const { return mask.size(); }
  std::size_t selected_frames() const;
};

std::size_t budget_capacity(double budget_fraction, std::size_t frames);

// Key frames -> candidate shots -> knapsack under floor(l * L) frames.
Summary build_summary(std::span<const double> p, const ShotSegmentation& segmentation,
                      double budget_fraction);
Summary build_summary(std::span<const double> p, const FrameMatrix& features,
                      double budget_fraction, const KtsOptions& kts = {});

// Versioned text format:
//
//   # stunet summary v1
//   video <id> frames <L> budget <l> capacity <frames> status <ok|no_candidates|nothing_fits>
//   shot <begin> <end> <mean score> <selected 0|1>      one line per shot
//   mask <L characters of 0/1>
std::string format_summary(const Summary& summary);
Summary parse_summary(const std::string& text, const std::string& source);
void write_summary(const std::string& path, const Summary& summary);

}  // namespace stunet
