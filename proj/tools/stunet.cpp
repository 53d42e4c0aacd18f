// Command-line entry point: train, summarize, evaluate, gradcheck, synth.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric error
// (divergence or a failed gradient check).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "stunet/checkpoint.hpp"
#include "stunet/config.hpp"
#include "stunet/error.hpp"
#include "stunet/pipeline.hpp"
#include "stunet/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace stunet;

namespace {

struct Overrides {
  std::string config;
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> epochs;
  std::optional<std::string> paradigm;
  std::vector<std::string> budgets;
  std::vector<std::string> videos;
  bool random_scores = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? parse_run_config("{}") : load_run_config(o.config);
  if (!o.manifest.empty()) c.manifest = o.manifest;
  if (!o.out.empty()) c.out = o.out;
  if (o.seed) c.seed = c.train.seed = c.synth.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.paradigm) c.train.paradigm = parse_paradigm(*o.paradigm);
  if (!o.budgets.empty()) c.budgets = o.budgets;
  c.validate();
  return c;
}

void make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  return f;
}

Dataset load_manifest(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("no manifest given (--manifest or \"manifest\" in the config)");
  return load_dataset(c.manifest);
}

// Trains on `ids`, streaming per-video and per-epoch records to `log`.
TrainResult run_training(const RunConfig& c, const Dataset& data, const std::vector<std::string>& ids,
                         std::ostream& log) {
  require_dataset_compatible(data, c.model);
  const auto videos = training_set(data, ids, c.model, c.train.paradigm, c.eval.target_budget, c.kts);
  const ModelParams init = init_params(c.model, c.seed);
  TrainResult r = train(videos, init, c.train, [&](const VideoRecord& v) {
    log << json{{"type", "video"},     {"epoch", v.epoch},       {"video", v.video_id},
                {"reward", v.reward},  {"r_rep", v.r_rep},       {"r_div", v.r_div},
                {"loss", v.loss},      {"loss_reg", v.loss_reg}, {"loss_pred", v.loss_pred},
                {"baseline", v.baseline}, {"lr", v.lr},          {"empty_episodes", v.empty_episodes}}
               .dump()
        << "\n";
  });
  for (const EpochMetrics& m : r.epochs) {
    log << json{{"type", "epoch"},   {"epoch", m.epoch}, {"reward", m.reward}, {"r_rep", m.r_rep},
                {"r_div", m.r_div},  {"loss", m.loss},   {"loss_reg", m.loss_reg},
                {"loss_pred", m.loss_pred}, {"lr", m.lr}}
               .dump()
        << "\n";
  }
  return r;
}

void echo_config(std::ostream& log, const std::string& command, const RunConfig& c) {
  log << json{{"type", "config"}, {"command", command}, {"config", json::parse(dump_run_config(c))}}.dump()
      << "\n";
}

int cmd_train(const Overrides& o) {
  const RunConfig c = effective_config(o);
  const Dataset data = load_manifest(c);
  make_out_dir(c.out);
  std::ofstream log = open_out(fs::path(c.out) / "train_log.jsonl");
  echo_config(log, "train", c);
  const TrainResult r = run_training(c, data, data.ids(), log);
  const fs::path ckpt = o.checkpoint.empty() ? fs::path(c.out) / "model.ckpt" : fs::path(o.checkpoint);
  save_checkpoint(ckpt.string(), r.params);
  if (r.diverged) {
    log << json{{"type", "diverged"}, {"diagnostic", r.diagnostic}}.dump() << "\n";
    std::cerr << "training diverged: " << r.diagnostic << "\nlast good checkpoint written to "
              << ckpt.string() << "\n";
    return static_cast<int>(ErrorKind::kNumeric);
  }
  if (!r.epochs.empty()) {
    std::printf("epochs %zu  first reward %.4f  last reward %.4f\n", r.epochs.size(),
                r.epochs.front().reward, r.epochs.back().reward);
  }
  std::printf("%s\n", ckpt.string().c_str());
  return 0;
}

// Model taken from the checkpoint; a config file, when given, must agree.
ModelParams load_model(const Overrides& o, const RunConfig& c) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  ModelParams params = load_checkpoint(o.checkpoint);
  if (!o.config.empty()) require_compatible(c.model, params.config());
  return params;
}

int cmd_summarize(const Overrides& o) {
  RunConfig c = effective_config(o);
  const ModelParams params = load_model(o, c);
  c.model = params.config();
  const Dataset data = load_manifest(c);
  require_dataset_compatible(data, c.model);
  make_out_dir(c.out);
  const std::vector<std::string> ids = o.videos.empty() ? data.ids() : o.videos;
  for (const std::string& id : ids) {
    const Video& v = data.find(id);
    const std::vector<double> p = model_scores(params, v.sequence);
    const ShotSegmentation seg = kts_segment(frame_vectors(v.sequence), c.kts);
    for (const Budget& b : c.parsed_budgets()) {
      Summary s = build_summary(p, seg, b.resolve(v));
      s.video_id = id;
      const fs::path path = fs::path(c.out) / (id + "_" + b.label() + ".summary");
      write_summary(path.string(), s);
      std::printf("%s\t%s\t%s\t%zu/%zu\n", path.string().c_str(), b.label().c_str(),
                  summary_status_name(s.status), s.selected_frames(), s.frames());
    }
  }
  return 0;
}

int cmd_evaluate(const Overrides& o) {
  RunConfig c = effective_config(o);
  std::optional<ModelParams> fixed;
  if (!o.checkpoint.empty()) {
    fixed = load_model(o, c);
    c.model = fixed->config();
  }
  const Dataset data = load_manifest(c);
  for (const Video& v : data.videos) {
    if (!v.annotations) throw DataError("evaluate needs annotations, video '" + v.id() + "' has none");
  }
  if (!o.random_scores) require_dataset_compatible(data, c.model);
  make_out_dir(c.out);
  std::ofstream log = open_out(fs::path(c.out) / "eval_log.jsonl");
  echo_config(log, "evaluate", c);

  EvalOptions opts;
  opts.budgets = c.parsed_budgets();
  opts.reduction = c.reduction;
  opts.kts = c.kts;
  opts.jobs = c.jobs;

  const std::vector<Split> splits = split_dataset(data.ids(), c.eval.splits, c.eval.train_fraction, c.seed);
  const std::size_t n = c.eval.max_splits == 0 ? splits.size() : std::min(c.eval.max_splits, splits.size());
  std::vector<VideoEvaluation> all;
  for (std::size_t s = 0; s < n; ++s) {
    ScoreFn scores;
    if (o.random_scores) {
      scores = random_score_fn(c.seed + s);
    } else if (fixed) {
      scores = model_score_fn(*fixed);
    } else {
      TrainResult r = run_training(c, data, splits[s].train, log);
      if (r.diverged) {
        std::cerr << "training diverged on split " << s << ": " << r.diagnostic << "\n";
        return static_cast<int>(ErrorKind::kNumeric);
      }
      save_checkpoint((fs::path(c.out) / ("split" + std::to_string(s) + ".ckpt")).string(), r.params);
      scores = model_score_fn(r.params);
    }
    auto evals = evaluate_videos(select_videos(data, splits[s].test), scores, opts, s);
    all.insert(all.end(), evals.begin(), evals.end());
  }
  open_out(fs::path(c.out) / "results.tsv") << format_results(all);
  const std::vector<StudyRow> rows = length_study(all);
  open_out(fs::path(c.out) / "length_study.tsv") << format_plot_data(rows);
  std::printf("budget\tf1\tf1_mean\tf1_max\tvideos\n");
  for (const StudyRow& r : rows) {
    std::printf("%s\t%.4f\t%.4f\t%.4f\t%zu\n", r.budget_label.c_str(), r.f1, r.f1_mean, r.f1_max, r.videos);
  }
  return 0;
}

int cmd_gradcheck(const Overrides& o) {
  const RunConfig c = effective_config(o);
  testing::set_conv_backward_fault(c.gradcheck.inject_conv_fault);
  const std::vector<GradCheckCase> cases = gradcheck_suite(c.gradcheck, c.seed);
  testing::set_conv_backward_fault(false);
  bool ok = true;
  for (const GradCheckCase& r : cases) {
    std::printf("%-18s %s  max_rel_error %.3e  coordinates %zu  worst %s[%zu]\n", r.name.c_str(),
                r.passed ? "ok  " : "FAIL", r.report.max_rel_error, r.report.coordinates,
                r.report.worst_tensor.c_str(), r.report.worst_index);
    ok = ok && r.passed;
  }
  return ok ? 0 : static_cast<int>(ErrorKind::kNumeric);
}

int cmd_synth(const Overrides& o) {
  const RunConfig c = effective_config(o);
  const SynthDataset synth = synth_dataset(c.synth);
  std::printf("%s\n", write_synth_dataset(c.out, synth).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video summarization with a 3D spatio-temporal U-Net policy"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run config");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "seed for initialisation, sampling and splits");
  };
  auto data = [&o](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "dataset manifest (JSON lines)");
    sub->add_option("--budget", o.budgets, "summary budget fraction or P; repeatable");
  };

  CLI::App* train = app.add_subcommand("train", "train a model, write a checkpoint and a JSON-lines log");
  common(train);
  data(train);
  train->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out>/model.ckpt)");
  train->add_option("--epochs", o.epochs, "override train.epochs");
  train->add_option("--paradigm", o.paradigm, "unsupervised or supervised");

  CLI::App* summarize = app.add_subcommand("summarize", "write key-shot summaries for videos");
  common(summarize);
  data(summarize);
  summarize->add_option("--checkpoint", o.checkpoint, "trained model")->required();
  summarize->add_option("--video", o.videos, "video id; repeatable (default all)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "cross-validated F1 evaluation");
  common(evaluate);
  data(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "evaluate this model instead of training per split");
  evaluate->add_option("--jobs", o.jobs, "evaluation threads");
  evaluate->add_option("--epochs", o.epochs, "override train.epochs");
  evaluate->add_option("--paradigm", o.paradigm, "unsupervised or supervised");
  evaluate->add_flag("--random", o.random_scores, "score frames uniformly at random (baseline)");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
  common(gradcheck);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with planted structure");
  common(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*train) return cmd_train(o);
    if (*summarize) return cmd_summarize(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*gradcheck) return cmd_gradcheck(o);
    if (*synth) return cmd_synth(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}
