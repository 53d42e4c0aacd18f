#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stunet/dataset.hpp"
#include "stunet/eval.hpp"
#include "stunet/model.hpp"
#include "stunet/shots.hpp"
#include "stunet/synth.hpp"
#include "stunet/train.hpp"

namespace stunet {

struct EvalConfig {
  std::size_t splits = 5;
  double train_fraction = 0.8;
  // Budget used to build supervised targets.
  double target_budget = 0.15;
  // Train and evaluate only the first this many splits; 0 means all.
  std::size_t max_splits = 0;
};

struct GradCheckConfig {
  double eps = 1e-6;
  double tolerance = 1e-4;
  std::size_t steps = 8;
  // Flips the sign of the conv3d input gradient to prove the check can fail.
  bool inject_conv_fault = false;
};

// Everything a run needs. JSON sections mirror the members; every key is
// optional and unknown keys are rejected.
//
//   {"manifest": "...", "out": "...", "seed": 0, "jobs": 1,
//    "budgets": ["0.15"], "reduction": "mean",
//    "model": {...}, "train": {...}, "kts": {...}, "eval": {...},
//    "synth": {...}, "gradcheck": {...}}
struct RunConfig {
  std::string manifest;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<std::string> budgets{"0.15"};
  Reduction reduction = Reduction::kMean;
  ModelConfig model;
  TrainConfig train;
  KtsOptions kts;
  EvalConfig eval;
  SynthSpec synth;
  GradCheckConfig gradcheck;

  // Throws ConfigError on a violated invariant.
  void validate() const;
  std::vector<Budget> parsed_budgets() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);
// Complete effective config, every field spelled out.
std::string dump_run_config(const RunConfig& config);

}  // namespace stunet
