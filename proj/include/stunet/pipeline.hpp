#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stunet/config.hpp"
#include "stunet/dataset.hpp"
#include "stunet/gradcheck.hpp"
#include "stunet/eval.hpp"
#include "stunet/model.hpp"
#include "stunet/train.hpp"

namespace stunet {

// Pads, runs the network and truncates back to the sequence's L frames.
std::vector<double> model_scores(const ModelParams& params, const FeatureSequence& seq);
ScoreFn model_score_fn(const ModelParams& params);

// Uniform random scores, seeded per video id so results do not depend on
// evaluation order.
ScoreFn random_score_fn(std::uint64_t seed);

// Training videos for the given ids. Supervised targets are the oracle's
// ground-truth scores at `target_budget`.
std::vector<TrainingVideo> training_set(const Dataset& dataset, const std::vector<std::string>& ids,
                                        const ModelConfig& config, Paradigm paradigm,
                                        double target_budget, const KtsOptions& kts = {});

std::vector<const Video*> select_videos(const Dataset& dataset, const std::vector<std::string>& ids);

// Checks the features of every video fit the model's input geometry.
void require_dataset_compatible(const Dataset& dataset, const ModelConfig& config);

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
  bool passed = false;
};

// Finite-difference checks of every op plus the full network (C = 4,
// w = h = 1, levels = 2, n = 2, T = config.steps) and the training losses.
std::vector<GradCheckCase> gradcheck_suite(const GradCheckConfig& config, std::uint64_t seed = 0);

}  // namespace stunet
