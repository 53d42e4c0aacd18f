#include "stunet/shots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "stunet/error.hpp"

namespace stunet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper-triangular table of segment scatters g(i, j), 0 <= i < j <= L, built
// from prefix sums of the normalised rows so that each block sum of the Gram
// matrix is |S_j - S_i|^2.
class ScatterTable {
 public:
  explicit ScatterTable(const FrameMatrix& normalized)
      : frames_(normalized.rows()), table_(frames_ * (frames_ + 1) / 2) {
    const std::size_t dim = normalized.cols();
    std::vector<double> prefix((frames_ + 1) * dim, 0.0);
    std::vector<double> diag(frames_ + 1, 0.0);
    for (std::size_t t = 0; t < frames_; ++t) {
      const auto row = normalized.row(t);
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        prefix[(t + 1) * dim + d] = prefix[t * dim + d] + row[d];
        sq += row[d] * row[d];
      }
      diag[t + 1] = diag[t] + sq;
    }
    for (std::size_t i = 0; i < frames_; ++i) {
      for (std::size_t j = i + 1; j <= frames_; ++j) {
        double block = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double s = prefix[j * dim + d] - prefix[i * dim + d];
          block += s * s;
        }
        const double g = (diag[j] - diag[i]) - block / static_cast<double>(j - i);
        table_[index(i, j)] = std::max(0.0, g);
      }
    }
  }

  double operator()(std::size_t i, std::size_t j) const { return table_[index(i, j)]; }

 private:
  // Row i holds j = i+1..L.
  std::size_t index(std::size_t i, std::size_t j) const {
    return i * frames_ - i * (i - 1) / 2 + (j - i - 1);
  }

  std::size_t frames_;
  std::vector<double> table_;
};

}  // namespace

ShotSegmentation::ShotSegmentation(std::vector<std::size_t> boundaries)
    : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 2 || boundaries_.front() != 0) {
    throw DataError("shot segmentation must start at 0 and contain at least one shot");
  }
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (boundaries_[i] <= boundaries_[i - 1]) {
      throw DataError("shot boundaries must be strictly increasing (index " + std::to_string(i) +
                      ")");
    }
  }
}

std::size_t ShotSegmentation::shot_of(std::size_t frame) const {
  if (frame >= frames()) throw DataError("frame " + std::to_string(frame) + " outside segmentation");
  auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), frame);
  return static_cast<std::size_t>(it - boundaries_.begin()) - 1;
}

FrameMatrix l2_normalize_rows(const FrameMatrix& m) {
  FrameMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto src = m.row(r);
    double norm = 0.0;
    for (double v : src) norm += v * v;
    norm = std::sqrt(norm);
    auto dst = out.row(r);
    if (norm == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / norm;
  }
  return out;
}

double segment_scatter(const FrameMatrix& normalized, std::size_t begin, std::size_t end) {
  if (begin >= end || end > normalized.rows()) throw DataError("segment_scatter: empty or invalid range");
  double diag = 0.0;
  double block = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    const auto a = normalized.row(t);
    for (std::size_t u = begin; u < end; ++u) {
      const auto b = normalized.row(u);
      double k = 0.0;
      for (std::size_t d = 0; d < normalized.cols(); ++d) k += a[d] * b[d];
      block += k;
      if (t == u) diag += k;
    }
  }
  return diag - block / static_cast<double>(end - begin);
}

ShotSegmentation kts_segment(const FrameMatrix& features, const KtsOptions& options) {
  const std::size_t frames = features.rows();
  if (frames == 0) throw DegenerateInputError("kts_segment: empty feature sequence");
  if (options.penalty < 0.0) throw ConfigError("kts_segment: penalty must be >= 0");
  std::size_t max_segments = options.max_segments;
  if (max_segments == 0) {
    if (!(options.max_segments_ratio > 0.0 && options.max_segments_ratio <= 1.0)) {
      throw ConfigError("kts: max_segments_ratio must lie in (0, 1]");
    }
    max_segments = std::max<std::size_t>(
        1, static_cast<std::size_t>(options.max_segments_ratio * static_cast<double>(frames)));
  }
  max_segments = std::min(max_segments, frames);

  const ScatterTable scatter(l2_normalize_rows(features));

  // cost[m][j]: best scatter of [0, j) split into m segments; back[m][j] the
  // start of the last segment.
  std::vector<std::vector<double>> cost(max_segments + 1, std::vector<double>(frames + 1, kInf));
  std::vector<std::vector<std::size_t>> back(max_segments + 1,
                                             std::vector<std::size_t>(frames + 1, 0));
  for (std::size_t j = 1; j <= frames; ++j) cost[1][j] = scatter(0, j);
  for (std::size_t m = 2; m <= max_segments; ++m) {
    for (std::size_t j = m; j <= frames; ++j) {
      double best = kInf;
      std::size_t arg = m - 1;
      for (std::size_t i = m - 1; i < j; ++i) {
        const double c = cost[m - 1][i] + scatter(i, j);
        if (c < best) {
          best = c;
          arg = i;
        }
      }
      cost[m][j] = best;
      back[m][j] = arg;
    }
  }

  const double n = static_cast<double>(frames);
  std::size_t best_m = 1;
  double best_objective = kInf;
  for (std::size_t m = 1; m <= max_segments; ++m) {
    const double md = static_cast<double>(m);
    const double objective = cost[m][frames] + options.penalty * md * (std::log(n / md) + 1.0);
    if (objective < best_objective) {
      best_objective = objective;
      best_m = m;
    }
  }

  std::vector<std::size_t> boundaries(best_m + 1);
  boundaries[best_m] = frames;
  std::size_t j = frames;
  for (std::size_t m = best_m; m >= 2; --m) {
    j = back[m][j];
    boundaries[m - 1] = j;
  }
  boundaries[0] = 0;
  return ShotSegmentation(std::move(boundaries));
}

std::vector<std::size_t> keyframes_from_policy(std::span<const double> p, KeyframeMode mode,
                                               std::uint64_t seed) {
  std::vector<std::size_t> out;
  if (mode == KeyframeMode::kThreshold) {
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] >= 0.5) out.push_back(t);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (unit(rng) < std::clamp(p[t], 1e-6, 1.0 - 1e-6)) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> knapsack_select(std::span<const KnapsackItem> items, std::size_t capacity) {
  const std::size_t n = items.size();
  // best[i][w]: max value of a subset of items[0, i) with total weight exactly w.
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(capacity + 1, -kInf));
  best[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const KnapsackItem& item = items[i - 1];
    if (item.weight == 0) throw DataError("knapsack_select: zero-weight item " + std::to_string(i - 1));
    for (std::size_t w = 0; w <= capacity; ++w) {
      double v = best[i - 1][w];
      if (w >= item.weight && best[i - 1][w - item.weight] != -kInf) {
        v = std::max(v, best[i - 1][w - item.weight] + item.value);
      }
      best[i][w] = v;
    }
  }

  // Highest value; values within a relative 1e-12 count as ties and resolve
  // toward the lighter load.
  double top = -kInf;
  for (std::size_t w = 0; w <= capacity; ++w) top = std::max(top, best[n][w]);
  const double tol = 1e-12 * std::max(1.0, std::abs(top));
  std::size_t load = 0;
  for (std::size_t w = 0; w <= capacity; ++w) {
    if (best[n][w] >= top - tol) {
      load = w;
      break;
    }
  }

  // Walking back, skip an item whenever the value is reachable without it so
  // later items give way to earlier ones.
  std::vector<std::size_t> chosen;
  std::size_t w = load;
  for (std::size_t i = n; i >= 1; --i) {
    if (best[i][w] == best[i - 1][w]) continue;
    chosen.push_back(i - 1);
    w -= items[i - 1].weight;
  }
  std::reverse(chosen.begin(), chosen.end());
  return chosen;
}

const char* summary_status_name(SummaryStatus status) {
  switch (status) {
    case SummaryStatus::kOk: return "ok";
    case SummaryStatus::kNoCandidates: return "no_candidates";
    case SummaryStatus::kNothingFits: return "nothing_fits";
  }
  return "ok";
}

std::size_t Summary::selected_frames() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::size_t budget_capacity(double budget_fraction, std::size_t frames) {
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw ConfigError("budget fraction " + std::to_string(budget_fraction) + " outside (0, 1]");
  }
  return static_cast<std::size_t>(std::floor(budget_fraction * static_cast<double>(frames)));
}

Summary build_summary(std::span<const double> p, const ShotSegmentation& segmentation,
                      double budget_fraction) {
  if (segmentation.frames() != p.size()) {
    throw ShapeError("build_summary: segmentation covers " + std::to_string(segmentation.frames()) +
                     " frames, policy has " + std::to_string(p.size()));
  }
  Summary s;
  s.budget_fraction = budget_fraction;
  s.capacity = budget_capacity(budget_fraction, p.size());
  s.segmentation = segmentation;
  s.mask.assign(p.size(), 0);

  std::vector<bool> is_key(p.size(), false);
  for (std::size_t t : keyframes_from_policy(p, KeyframeMode::kThreshold)) is_key[t] = true;

  std::vector<KnapsackItem> candidates;
  std::vector<std::size_t> candidate_shot;
  for (std::size_t j = 0; j < segmentation.shot_count(); ++j) {
    ShotItem item;
    item.shot = j;
    item.begin = segmentation.begin(j);
    item.end = segmentation.end(j);
    item.weight = item.end - item.begin;
    double acc = 0.0;
    for (std::size_t t = item.begin; t < item.end; ++t) {
      acc += p[t];
      item.has_keyframe = item.has_keyframe || is_key[t];
    }
    item.value = acc / static_cast<double>(item.weight);
    if (item.has_keyframe) {
      candidates.push_back({item.weight, item.value});
      candidate_shot.push_back(j);
    }
    s.shots.push_back(item);
  }

  if (candidates.empty()) {
    s.status = SummaryStatus::kNoCandidates;
    return s;
  }
  const auto chosen = knapsack_select(candidates, s.capacity);
  if (chosen.empty()) {
    s.status = SummaryStatus::kNothingFits;
    return s;
  }
  for (std::size_t c : chosen) {
    ShotItem& item = s.shots[candidate_shot[c]];
    item.selected = true;
    std::fill(s.mask.begin() + static_cast<std::ptrdiff_t>(item.begin),
              s.mask.begin() + static_cast<std::ptrdiff_t>(item.end), std::uint8_t{1});
  }
  return s;
}

Summary build_summary(std::span<const double> p, const FrameMatrix& features,
                      double budget_fraction, const KtsOptions& kts) {
  if (features.rows() != p.size()) {
    throw ShapeError("build_summary: " + std::to_string(features.rows()) + " feature rows vs " +
                     std::to_string(p.size()) + " scores");
  }
  return build_summary(p, kts_segment(features, kts), budget_fraction);
}

std::string format_summary(const Summary& summary) {
  std::ostringstream os;
  os.precision(17);
  os << "# stunet summary v1\n";
  os << "video " << (summary.video_id.empty() ? "-" : summary.video_id) << " frames "
     << summary.frames() << " budget " << summary.budget_fraction << " capacity "
     << summary.capacity << " status " << summary_status_name(summary.status) << '\n';
  for (const ShotItem& item : summary.shots) {
    os << "shot " << item.begin << ' ' << item.end << ' ' << item.value << ' '
       << (item.selected ? 1 : 0) << '\n';
  }
  os << "mask ";
  for (std::uint8_t m : summary.mask) os << (m ? '1' : '0');
  os << '\n';
  return os.str();
}

Summary parse_summary(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  Summary s;
  std::vector<std::size_t> boundaries{0};
  std::size_t frames = 0;
  bool have_header = false, have_mask = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "video") {
      std::string k1, k2, k3, k4, status;
      ls >> s.video_id >> k1 >> frames >> k2 >> s.budget_fraction >> k3 >> s.capacity >> k4 >> status;
      if (!ls || k1 != "frames" || k2 != "budget" || k3 != "capacity" || k4 != "status") {
        throw DataError(where + ": malformed summary header");
      }
      if (status == "ok") s.status = SummaryStatus::kOk;
      else if (status == "no_candidates") s.status = SummaryStatus::kNoCandidates;
      else if (status == "nothing_fits") s.status = SummaryStatus::kNothingFits;
      else throw DataError(where + ": unknown status '" + status + "'");
      have_header = true;
    } else if (key == "shot") {
      ShotItem item;
      int selected = 0;
      ls >> item.begin >> item.end >> item.value >> selected;
      if (!ls || item.begin != boundaries.back() || item.end <= item.begin) {
        throw DataError(where + ": malformed or non-contiguous shot record");
      }
      item.shot = s.shots.size();
      item.weight = item.end - item.begin;
      item.selected = selected != 0;
      boundaries.push_back(item.end);
      s.shots.push_back(item);
    } else if (key == "mask") {
      std::string bits;
      ls >> bits;
      s.mask.clear();
      for (char c : bits) {
        if (c != '0' && c != '1') throw DataError(where + ": mask must contain only 0/1");
        s.mask.push_back(c == '1' ? 1 : 0);
      }
      have_mask = true;
    } else {
      throw DataError(where + ": unknown record '" + key + "'");
    }
  }
  if (!have_header || !have_mask) throw DataError(source + ": missing header or mask record");
  if (s.mask.size() != frames) throw DataError(source + ": mask length differs from header");
  if (!s.shots.empty()) {
    if (boundaries.back() != frames) throw DataError(source + ": shots do not cover every frame");
    s.segmentation = ShotSegmentation(std::move(boundaries));
  }
  return s;
}

void write_summary(const std::string& path, const Summary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << format_summary(summary);
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace stunet
