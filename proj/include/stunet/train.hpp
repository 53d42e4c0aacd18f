#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stunet/features.hpp"
#include "stunet/model.hpp"
#include "stunet/rewards.hpp"

namespace stunet {

enum class Paradigm { kUnsupervised, kSupervised };

const char* paradigm_name(Paradigm p);
Paradigm parse_paradigm(const std::string& name);

struct TrainConfig {
  double lambda = 0.01;
  double epsilon = 0.5;
  std::size_t episodes = 5;
  double baseline_decay = 0.9;
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  std::size_t epochs = 60;
  std::size_t lr_step_epochs = 30;
  double lr_step_factor = 0.5;
  std::uint64_t seed = 0;
  Paradigm paradigm = Paradigm::kUnsupervised;
  bool reward_rep = true;
  bool reward_div = true;
  // Rescales the whole gradient to this l2 norm when it is larger; 0 disables.
  double max_grad_norm = 0.0;

  // Throws ConfigError on a violated invariant.
  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
};

// One training video with everything the step needs precomputed.
struct TrainingVideo {
  std::string id;
  Tensor features;              // padded to a multiple of 2^levels steps
  std::size_t frames = 0;       // original L
  FrameMatrix vectors;          // L x C reward features
  std::vector<double> target;   // p*, empty for unsupervised training
};

TrainingVideo make_training_video(const FeatureSequence& seq, std::size_t levels,
                                  std::vector<double> target = {});

// Probabilities for the original L frames, built on the tape.
Var policy_graph(Tape& tape, const BoundParams& bound, const ModelConfig& config,
                 const TrainingVideo& video);

struct VideoRecord {
  std::size_t epoch = 0;
  std::string video_id;
  double r_rep = 0.0;
  double r_div = 0.0;
  double reward = 0.0;
  double loss_reg = 0.0;
  double loss_pred = 0.0;
  double loss = 0.0;
  double baseline = 0.0;
  double lr = 0.0;
  std::size_t empty_episodes = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double r_rep = 0.0;
  double r_div = 0.0;
  double reward = 0.0;
  double loss_reg = 0.0;
  double loss_pred = 0.0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;           // last good parameters
  std::vector<EpochMetrics> epochs;
  bool diverged = false;
  std::string diagnostic;
};

using VideoRecordSink = std::function<void(const VideoRecord&)>;

// SGD with momentum and weight decay, one update per video, videos visited in
// a seeded random order each epoch. On a non-finite loss or gradient the run
// stops and returns the parameters from the end of the last complete epoch.
TrainResult train(const std::vector<TrainingVideo>& videos, const ModelParams& init,
                  const TrainConfig& cfg, const VideoRecordSink& sink = {});

}  // namespace stunet
