#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stunet/annotations.hpp"
#include "stunet/dataset.hpp"
#include "stunet/shots.hpp"

namespace stunet {

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Overlap |pred & ref| over |pred| and over |ref|; an empty side gives 0.
PrecisionRecall precision_recall(std::span<const std::uint8_t> predicted,
                                 std::span<const std::uint8_t> reference);
// Harmonic mean, 0 when P + R == 0.
double f1_score(double precision, double recall);

struct UserScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalResult {
  std::vector<UserScore> users;
  Reduction reduction = Reduction::kMean;
  double f1 = 0.0;        // reduced with `reduction`
  double f1_mean = 0.0;
  double f1_max = 0.0;
  double precision = 0.0;  // mean over users
  double recall = 0.0;
  double budget = 0.0;
};

EvalResult f1_multi_user(std::span<const std::uint8_t> predicted, const std::vector<Mask>& references,
                         Reduction reduction, double budget = 0.0);

struct OracleSummary {
  Mask mask;
  std::vector<double> scores;        // p*: mean normalised user importance
  std::vector<double> mean_f1_trace;  // mean per-user F1 after each addition
};

// Greedy: repeatedly add the user keyframe with the largest mean per-user F1,
// stopping when nothing improves it or the floor(l * L) budget is full.
OracleSummary oracle_summary(const std::vector<Mask>& users, double budget_fraction);

// Per-user importance rescaled to [0, 1] and averaged over users.
std::vector<double> importance_scores(const AnnotationSet& ann);

// One binary reference summary per user. Keyframe masks are used as given;
// score annotations are turned into key-shot masks by the knapsack at the
// evaluation budget, over the annotated shots or over KTS shots of `features`.
std::vector<Mask> reference_masks(const AnnotationSet& ann, double budget_fraction,
                                  const FrameMatrix* features = nullptr,
                                  const KtsOptions& kts = {});

OracleSummary oracle_summary(const AnnotationSet& ann, double budget_fraction,
                             const FrameMatrix* features = nullptr, const KtsOptions& kts = {});

// Fraction of important frames in the ground truth, averaged over users.
// Score annotations count frames whose mean normalised importance is >= 0.5.
double ground_truth_proportion(const AnnotationSet& ann);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Each split shuffles the ids independently and takes round(f * N) (clamped to
// [1, N - 1]) for training. Ids keep their input order within each side.
std::vector<Split> split_dataset(const std::vector<std::string>& ids, std::size_t n_splits = 5,
                                 double train_fraction = 0.8, std::uint64_t seed = 0);

// A fixed fraction or the per-video ground-truth proportion "P".
struct Budget {
  bool proportional = false;
  double fraction = 0.15;

  static Budget parse(const std::string& text);
  std::string label() const;
  double resolve(const Video& video) const;
};

std::vector<Budget> default_study_budgets();

using ScoreFn = std::function<std::vector<double>(const Video&)>;

struct VideoEvaluation {
  std::string video_id;
  std::size_t split = 0;
  std::string budget_label;
  double budget = 0.0;
  SummaryStatus status = SummaryStatus::kOk;
  EvalResult result;
};

struct EvalOptions {
  std::vector<Budget> budgets{Budget{}};
  Reduction reduction = Reduction::kMean;
  KtsOptions kts;
  std::size_t jobs = 1;
};

// Scores every video, builds a summary per budget and compares it with the
// reference masks. Work is spread over `jobs` threads; output order is
// video-major, budget-minor regardless of scheduling.
std::vector<VideoEvaluation> evaluate_videos(const std::vector<const Video*>& videos,
                                             const ScoreFn& scores, const EvalOptions& options,
                                             std::size_t split = 0);

struct StudyRow {
  std::string budget_label;
  double f1_mean = 0.0;   // mean over videos of the mean-reduced F1
  double f1_max = 0.0;    // mean over videos of the max-reduced F1
  double f1 = 0.0;        // mean over videos under the configured reduction
  std::size_t videos = 0;
};

// Averages evaluations per budget label, in first-seen order.
std::vector<StudyRow> length_study(const std::vector<VideoEvaluation>& evaluations);

// Tab-separated: video split budget budget_value status precision recall f1_mean f1_max
std::string format_results(const std::vector<VideoEvaluation>& evaluations);
// Tab-separated (budget, mean F1) pairs for plotting.
std::string format_plot_data(const std::vector<StudyRow>& rows);

}  // namespace stunet
