#include "stunet/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "stunet/error.hpp"

namespace stunet {

PrecisionRecall precision_recall(std::span<const std::uint8_t> predicted,
                                 std::span<const std::uint8_t> reference) {
  if (predicted.size() != reference.size()) {
    throw ShapeError("precision_recall: predicted mask has " + std::to_string(predicted.size()) +
                     " frames, reference has " + std::to_string(reference.size()));
  }
  std::size_t overlap = 0, pred = 0, ref = 0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const bool a = predicted[t] != 0;
    const bool b = reference[t] != 0;
    pred += a;
    ref += b;
    overlap += a && b;
  }
  PrecisionRecall pr;
  if (pred > 0) pr.precision = static_cast<double>(overlap) / static_cast<double>(pred);
  if (ref > 0) pr.recall = static_cast<double>(overlap) / static_cast<double>(ref);
  return pr;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

EvalResult f1_multi_user(std::span<const std::uint8_t> predicted, const std::vector<Mask>& references,
                         Reduction reduction, double budget) {
  if (references.empty()) throw DataError("f1_multi_user: no reference summaries");
  EvalResult r;
  r.reduction = reduction;
  r.budget = budget;
  for (const Mask& ref : references) {
    const PrecisionRecall pr = precision_recall(predicted, ref);
    r.users.push_back({pr.precision, pr.recall, f1_score(pr.precision, pr.recall)});
  }
  const double n = static_cast<double>(r.users.size());
  for (const UserScore& u : r.users) {
    r.f1_mean += u.f1;
    r.f1_max = std::max(r.f1_max, u.f1);
    r.precision += u.precision;
    r.recall += u.recall;
  }
  r.f1_mean /= n;
  r.precision /= n;
  r.recall /= n;
  r.f1 = reduction == Reduction::kMax ? r.f1_max : r.f1_mean;
  return r;
}

OracleSummary oracle_summary(const std::vector<Mask>& users, double budget_fraction) {
  if (users.empty()) throw DataError("oracle_summary: no user summaries");
  const std::size_t frames = users.front().size();
  for (const Mask& u : users) {
    if (u.size() != frames) throw ShapeError("oracle_summary: user masks differ in length");
  }
  const std::size_t capacity = budget_capacity(budget_fraction, frames);
  const std::size_t n_users = users.size();

  std::vector<std::size_t> sizes(n_users, 0);
  for (std::size_t u = 0; u < n_users; ++u) {
    sizes[u] = static_cast<std::size_t>(std::count_if(users[u].begin(), users[u].end(),
                                                      [](std::uint8_t v) { return v != 0; }));
  }
  std::vector<std::size_t> candidates;
  for (std::size_t t = 0; t < frames; ++t) {
    for (const Mask& u : users) {
      if (u[t] != 0) {
        candidates.push_back(t);
        break;
      }
    }
  }

  auto mean_f1 = [&](std::size_t m, const std::vector<std::size_t>& overlap) {
    double s = 0.0;
    for (std::size_t u = 0; u < n_users; ++u) {
      const std::size_t denom = m + sizes[u];
      if (overlap[u] > 0) s += 2.0 * static_cast<double>(overlap[u]) / static_cast<double>(denom);
    }
    return s / static_cast<double>(n_users);
  };

  OracleSummary out;
  out.mask.assign(frames, 0);
  std::vector<std::size_t> overlap(n_users, 0);
  std::size_t m = 0;
  double current = 0.0;
  std::vector<std::size_t> trial(n_users);
  while (m < capacity) {
    double best = current;
    std::size_t best_t = frames;
    for (std::size_t t : candidates) {
      if (out.mask[t] != 0) continue;
      for (std::size_t u = 0; u < n_users; ++u) trial[u] = overlap[u] + (users[u][t] != 0);
      const double f = mean_f1(m + 1, trial);
      if (f > best) {
        best = f;
        best_t = t;
      }
    }
    if (best_t == frames) break;
    out.mask[best_t] = 1;
    ++m;
    for (std::size_t u = 0; u < n_users; ++u) overlap[u] += users[u][best_t] != 0;
    current = best;
    out.mean_f1_trace.push_back(current);
  }

  out.scores.assign(frames, 0.0);
  for (const Mask& u : users) {
    for (std::size_t t = 0; t < frames; ++t) out.scores[t] += u[t] != 0 ? 1.0 : 0.0;
  }
  for (double& s : out.scores) s /= static_cast<double>(n_users);
  return out;
}

namespace {

std::vector<double> normalized_user(const AnnotationSet& ann, std::size_t u) {
  const double span = ann.range_hi - ann.range_lo;
  std::vector<double> v(ann.frames);
  for (std::size_t t = 0; t < ann.frames; ++t) {
    v[t] = span > 0.0 ? (ann.users[u][t] - ann.range_lo) / span : 0.0;
  }
  return v;
}

Mask keyshot_mask(const std::vector<double>& scores, const ShotSegmentation& seg, double budget) {
  std::vector<KnapsackItem> items;
  for (std::size_t j = 0; j < seg.shot_count(); ++j) {
    double s = 0.0;
    for (std::size_t t = seg.begin(j); t < seg.end(j); ++t) s += scores[t];
    items.push_back({seg.length(j), s / static_cast<double>(seg.length(j))});
  }
  Mask mask(seg.frames(), 0);
  for (std::size_t j : knapsack_select(items, budget_capacity(budget, seg.frames()))) {
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(seg.begin(j)),
              mask.begin() + static_cast<std::ptrdiff_t>(seg.end(j)), 1);
  }
  return mask;
}

}  // namespace

std::vector<double> importance_scores(const AnnotationSet& ann) {
  ann.validate();
  std::vector<double> out(ann.frames, 0.0);
  for (std::size_t u = 0; u < ann.users.size(); ++u) {
    const std::vector<double> v = normalized_user(ann, u);
    for (std::size_t t = 0; t < ann.frames; ++t) out[t] += v[t];
  }
  for (double& s : out) s /= static_cast<double>(ann.users.size());
  return out;
}

std::vector<Mask> reference_masks(const AnnotationSet& ann, double budget_fraction,
                                  const FrameMatrix* features, const KtsOptions& kts) {
  ann.validate();
  std::vector<Mask> masks;
  if (ann.kind == AnnotationKind::kKeyframeMask) {
    for (const auto& user : ann.users) {
      Mask m(ann.frames, 0);
      for (std::size_t t = 0; t < ann.frames; ++t) m[t] = user[t] == ann.range_hi ? 1 : 0;
      masks.push_back(std::move(m));
    }
    return masks;
  }
  ShotSegmentation seg;
  if (ann.kind == AnnotationKind::kShotScores) {
    seg = ShotSegmentation(ann.shot_boundaries);
  } else {
    if (features == nullptr) {
      throw ConfigError("video '" + ann.video_id +
                        "': frame-score annotations need features to segment shots");
    }
    seg = kts_segment(*features, kts);
  }
  for (std::size_t u = 0; u < ann.users.size(); ++u) {
    masks.push_back(keyshot_mask(normalized_user(ann, u), seg, budget_fraction));
  }
  return masks;
}

OracleSummary oracle_summary(const AnnotationSet& ann, double budget_fraction,
                             const FrameMatrix* features, const KtsOptions& kts) {
  OracleSummary out = oracle_summary(reference_masks(ann, budget_fraction, features, kts),
                                     budget_fraction);
  out.scores = importance_scores(ann);
  return out;
}

double ground_truth_proportion(const AnnotationSet& ann) {
  ann.validate();
  if (ann.kind == AnnotationKind::kKeyframeMask) {
    double total = 0.0;
    for (const auto& user : ann.users) {
      total += static_cast<double>(std::count(user.begin(), user.end(), ann.range_hi));
    }
    return total / static_cast<double>(ann.users.size() * ann.frames);
  }
  const std::vector<double> s = importance_scores(ann);
  return static_cast<double>(std::count_if(s.begin(), s.end(), [](double v) { return v >= 0.5; })) /
         static_cast<double>(ann.frames);
}

std::vector<Split> split_dataset(const std::vector<std::string>& ids, std::size_t n_splits,
                                 double train_fraction, std::uint64_t seed) {
  if (ids.size() < 2) throw DataError("split_dataset: need at least 2 videos");
  if (n_splits == 0) throw ConfigError("split_dataset: n_splits must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split_dataset: train_fraction must lie in (0, 1)");
  }
  const std::size_t n = ids.size();
  const auto n_train = static_cast<std::size_t>(std::clamp<double>(
      std::round(train_fraction * static_cast<double>(n)), 1.0, static_cast<double>(n - 1)));
  std::mt19937_64 rng(seed);
  std::vector<Split> splits;
  for (std::size_t s = 0; s < n_splits; ++s) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint8_t> in_train(n, 0);
    for (std::size_t i = 0; i < n_train; ++i) in_train[perm[i]] = 1;
    Split split;
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? split.train : split.test).push_back(ids[i]);
    splits.push_back(std::move(split));
  }
  return splits;
}

Budget Budget::parse(const std::string& text) {
  if (text == "P" || text == "p") return Budget{true, 0.0};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v > 0.0 && v <= 1.0)) {
    throw ConfigError("budget '" + text + "' must be a fraction in (0, 1] or P");
  }
  return Budget{false, v};
}

std::string Budget::label() const {
  if (proportional) return "P";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", fraction);
  return buf;
}

double Budget::resolve(const Video& video) const {
  if (!proportional) return fraction;
  if (!video.annotations) {
    throw DataError("video '" + video.id() + "': budget P needs annotations");
  }
  const double frames = static_cast<double>(video.sequence.frames());
  return std::clamp(ground_truth_proportion(*video.annotations), 1.0 / frames, 1.0);
}

std::vector<Budget> default_study_budgets() {
  return {Budget{false, 0.15}, Budget{false, 0.20}, Budget{false, 0.25}, Budget{true, 0.0}};
}

std::vector<VideoEvaluation> evaluate_videos(const std::vector<const Video*>& videos,
                                             const ScoreFn& scores, const EvalOptions& options,
                                             std::size_t split) {
  if (options.budgets.empty()) throw ConfigError("evaluation needs at least one budget");
  const std::size_t nb = options.budgets.size();
  std::vector<VideoEvaluation> out(videos.size() * nb);

  auto run_one = [&](std::size_t i) {
    const Video& v = *videos[i];
    if (!v.annotations) throw DataError("video '" + v.id() + "' has no annotations to evaluate");
    const FrameMatrix x = frame_vectors(v.sequence);
    const std::vector<double> p = scores(v);
    const ShotSegmentation seg = kts_segment(x, options.kts);
    for (std::size_t b = 0; b < nb; ++b) {
      const double l = options.budgets[b].resolve(v);
      const Summary s = build_summary(p, seg, l);
      VideoEvaluation& e = out[i * nb + b];
      e.video_id = v.id();
      e.split = split;
      e.budget_label = options.budgets[b].label();
      e.budget = l;
      e.status = s.status;
      e.result = f1_multi_user(s.mask, reference_masks(*v.annotations, l, &x, options.kts),
                               options.reduction, l);
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, videos.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < videos.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  for (std::size_t j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < videos.size(); i = next++) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<StudyRow> length_study(const std::vector<VideoEvaluation>& evaluations) {
  std::vector<StudyRow> rows;
  for (const VideoEvaluation& e : evaluations) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const StudyRow& r) { return r.budget_label == e.budget_label; });
    if (it == rows.end()) {
      rows.push_back(StudyRow{e.budget_label});
      it = rows.end() - 1;
    }
    it->f1_mean += e.result.f1_mean;
    it->f1_max += e.result.f1_max;
    it->f1 += e.result.f1;
    ++it->videos;
  }
  for (StudyRow& r : rows) {
    const double n = static_cast<double>(r.videos);
    r.f1_mean /= n;
    r.f1_max /= n;
    r.f1 /= n;
  }
  return rows;
}

std::string format_results(const std::vector<VideoEvaluation>& evaluations) {
  std::ostringstream out;
  out << "video\tsplit\tbudget\tbudget_value\tstatus\tprecision\trecall\tf1_mean\tf1_max\n";
  out.precision(6);
  for (const VideoEvaluation& e : evaluations) {
    out << e.video_id << '\t' << e.split << '\t' << e.budget_label << '\t' << e.budget << '\t'
        << summary_status_name(e.status) << '\t' << e.result.precision << '\t' << e.result.recall
        << '\t' << e.result.f1_mean << '\t' << e.result.f1_max << '\n';
  }
  return out.str();
}

std::string format_plot_data(const std::vector<StudyRow>& rows) {
  std::ostringstream out;
  out << "# budget\tf1\n";
  out.precision(6);
  for (const StudyRow& r : rows) out << r.budget_label << '\t' << r.f1 << '\n';
  return out.str();
}

}  // namespace stunet
