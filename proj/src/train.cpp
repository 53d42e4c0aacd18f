#include "stunet/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "stunet/error.hpp"

namespace stunet {

const char* paradigm_name(Paradigm p) {
  return p == Paradigm::kSupervised ? "supervised" : "unsupervised";
}

Paradigm parse_paradigm(const std::string& name) {
  if (name == "unsupervised") return Paradigm::kUnsupervised;
  if (name == "supervised") return Paradigm::kSupervised;
  throw ConfigError("unknown paradigm '" + name + "' (expected unsupervised or supervised)");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("train.epsilon must lie in (0, 1)");
  if (episodes < 1) throw ConfigError("train.episodes must be >= 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("train.baseline_decay must lie in [0, 1)");
  }
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("train.max_grad_norm must be >= 0");
  if (lr_step_epochs < 1) throw ConfigError("train.lr_step_epochs must be >= 1");
  if (!(lr_step_factor > 0.0 && lr_step_factor <= 1.0)) {
    throw ConfigError("train.lr_step_factor must lie in (0, 1]");
  }
  if (!reward_rep && !reward_div && paradigm == Paradigm::kUnsupervised) {
    throw ConfigError("unsupervised training needs at least one reward term");
  }
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  return learning_rate * std::pow(lr_step_factor, static_cast<double>(epoch / lr_step_epochs));
}

TrainingVideo make_training_video(const FeatureSequence& seq, std::size_t levels,
                                  std::vector<double> target) {
  TrainingVideo v;
  v.id = seq.video_id;
  v.frames = seq.frames();
  v.vectors = frame_vectors(seq);
  v.features = pad_to_pow2(seq, levels).sequence.features;
  if (!target.empty() && target.size() != v.frames) {
    throw DataError("video '" + seq.video_id + "': target has " + std::to_string(target.size()) +
                    " frames, features describe " + std::to_string(v.frames));
  }
  v.target = std::move(target);
  return v;
}

Var policy_graph(Tape& tape, const BoundParams& bound, const ModelConfig& config,
                 const TrainingVideo& video) {
  Var p = forward_graph(tape, tape.constant(video.features), bound, config);
  if (p.value().size() == video.frames) return p;
  return ops::take_prefix(p, video.frames);
}

namespace {

bool all_finite(const ModelParams& params) {
  for (const NamedTensor& t : params.tensors()) {
    if (!t.value.all_finite()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const std::vector<TrainingVideo>& videos, const ModelParams& init,
                  const TrainConfig& cfg, const VideoRecordSink& sink) {
  cfg.validate();
  if (videos.empty()) throw ConfigError("train: empty training set");
  const bool supervised = cfg.paradigm == Paradigm::kSupervised;
  for (const TrainingVideo& v : videos) {
    if (supervised && v.target.empty()) {
      throw ConfigError("supervised training needs ground-truth scores for video '" + v.id + "'");
    }
  }

  const ModelConfig& mc = init.config();
  ModelParams params = init;
  TrainResult result;
  result.params = params;

  std::map<std::string, Tensor> velocity;
  for (const NamedTensor& t : params.tensors()) velocity.emplace(t.name, Tensor(t.value.shape()));
  std::map<std::string, Baseline> baselines;

  PolicyGradientConfig pg;
  pg.weights = {cfg.lambda, cfg.epsilon};
  pg.episodes = cfg.episodes;
  pg.rewards = {cfg.reward_rep, cfg.reward_div};

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    try {
      for (std::size_t idx : order) {
        const TrainingVideo& v = videos[idx];
        Baseline& baseline = baselines.try_emplace(v.id, cfg.baseline_decay).first->second;
        auto policy = [&](Tape& tape) {
          return policy_graph(tape, bind(tape, params), mc, v);
        };
        std::span<const double> target;
        if (supervised) target = v.target;
        PolicyGradientResult step = policy_gradient_step(policy, v.vectors, target, pg, baseline, rng);
        if (!std::isfinite(step.loss.total)) {
          throw NumericError("loss is not finite on video '" + v.id + "' in epoch " +
                             std::to_string(epoch));
        }

        double grad_scale = 1.0;
        if (cfg.max_grad_norm > 0.0) {
          double sq = 0.0;
          for (const auto& [name, g] : step.gradients) {
            for (double v : g.value.data()) sq += v * v;
          }
          const double norm = std::sqrt(sq);
          if (norm > cfg.max_grad_norm) grad_scale = cfg.max_grad_norm / norm;
        }
        for (const NamedTensor& t : params.tensors()) {
          const Tensor& g = step.gradients.at(t.name).value;
          Tensor& vel = velocity.at(t.name);
          std::vector<double> next(t.value.data().begin(), t.value.data().end());
          std::vector<double> vnext(vel.data().begin(), vel.data().end());
          for (std::size_t i = 0; i < next.size(); ++i) {
            const double gi = grad_scale * g[i] + cfg.weight_decay * next[i];
            vnext[i] = cfg.momentum * vnext[i] + gi;
            next[i] -= lr * vnext[i];
          }
          vel = Tensor(vel.shape(), std::move(vnext));
          params.set(t.name, Tensor(t.value.shape(), std::move(next)));
        }
        if (!all_finite(params)) {
          throw NumericError("parameters became non-finite after video '" + v.id + "' in epoch " +
                             std::to_string(epoch));
        }

        VideoRecord rec;
        rec.epoch = epoch;
        rec.video_id = v.id;
        for (const RewardBreakdown& r : step.episodes) {
          rec.r_rep += r.r_rep;
          rec.r_div += r.r_div;
          if (r.empty_summary) ++rec.empty_episodes;
        }
        rec.r_rep /= static_cast<double>(step.episodes.size());
        rec.r_div /= static_cast<double>(step.episodes.size());
        rec.reward = step.loss.mean_reward;
        rec.loss_reg = step.loss.reg;
        rec.loss_pred = step.loss.pred;
        rec.loss = step.loss.total;
        rec.baseline = step.baseline_used;
        rec.lr = lr;
        if (sink) sink(rec);

        m.r_rep += rec.r_rep;
        m.r_div += rec.r_div;
        m.reward += rec.reward;
        m.loss_reg += rec.loss_reg;
        m.loss_pred += rec.loss_pred;
        m.loss += rec.loss;
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostic = e.what();
      return result;
    }
    const double n = static_cast<double>(videos.size());
    m.r_rep /= n;
    m.r_div /= n;
    m.reward /= n;
    m.loss_reg /= n;
    m.loss_pred /= n;
    m.loss /= n;
    result.epochs.push_back(m);
    result.params = params;
  }
  return result;
}

}  // namespace stunet
