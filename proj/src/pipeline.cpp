#include "stunet/pipeline.hpp"

#include <functional>
#include <random>

#include "stunet/error.hpp"

namespace stunet {

std::vector<double> model_scores(const ModelParams& params, const FeatureSequence& seq) {
  const PaddedSequence padded = pad_to_pow2(seq, params.config().levels);
  const FramePolicy p = forward(padded.sequence.features, params);
  return truncate_scores(p.p, padded.original_frames);
}

ScoreFn model_score_fn(const ModelParams& params) {
  return [params](const Video& v) { return model_scores(params, v.sequence); };
}

ScoreFn random_score_fn(std::uint64_t seed) {
  return [seed](const Video& v) {
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(v.id()));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(v.sequence.frames());
    for (double& x : p) x = u(rng);
    return p;
  };
}

std::vector<const Video*> select_videos(const Dataset& dataset, const std::vector<std::string>& ids) {
  std::vector<const Video*> out;
  for (const std::string& id : ids) out.push_back(&dataset.find(id));
  return out;
}

void require_dataset_compatible(const Dataset& dataset, const ModelConfig& config) {
  for (const Video& v : dataset.videos) {
    const Tensor& f = v.sequence.features;
    if (f.dim(1) != config.in_channels) {
      throw ConfigError("video '" + v.id() + "' has " + std::to_string(f.dim(1)) +
                        " feature channels but model.in_channels is " +
                        std::to_string(config.in_channels));
    }
    if (f.dim(2) != config.width || f.dim(3) != config.height) {
      throw ConfigError("video '" + v.id() + "' has spatial size " + std::to_string(f.dim(2)) + "x" +
                        std::to_string(f.dim(3)) + " but the model expects " +
                        std::to_string(config.width) + "x" + std::to_string(config.height));
    }
    if (v.sequence.expansion != config.expansion) {
      throw ConfigError("video '" + v.id() + "' has expansion " +
                        std::to_string(v.sequence.expansion) + " but model.expansion is " +
                        std::to_string(config.expansion));
    }
  }
}

std::vector<TrainingVideo> training_set(const Dataset& dataset, const std::vector<std::string>& ids,
                                        const ModelConfig& config, Paradigm paradigm,
                                        double target_budget, const KtsOptions& kts) {
  std::vector<TrainingVideo> out;
  for (const std::string& id : ids) {
    const Video& v = dataset.find(id);
    std::vector<double> target;
    if (paradigm == Paradigm::kSupervised) {
      if (!v.annotations) {
        throw ConfigError("supervised training needs annotations, video '" + id + "' has none");
      }
      const FrameMatrix x = frame_vectors(v.sequence);
      target = oracle_summary(*v.annotations, target_budget, &x, kts).scores;
    }
    out.push_back(make_training_video(v.sequence, config.levels, std::move(target)));
  }
  return out;
}

}  // namespace stunet
