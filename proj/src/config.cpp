#include "stunet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stunet/error.hpp"

namespace stunet {

using json = nlohmann::ordered_json;

namespace {

// Reads the keys of one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void read(const std::string& key, std::uint64_t& out, int) {
    std::size_t tmp = out;
    read(key, tmp);
    out = tmp;
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + where(it.key()));
    }
  }
  std::string where(const std::string& key = {}) const {
    std::string p = path_.empty() ? key : (key.empty() ? path_ : path_ + "." + key);
    return "'" + (p.empty() ? std::string("<root>") : p) + "'";
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  Section s(j, "model");
  s.read("in_channels", m.in_channels);
  s.read("squeezed_channels", m.squeezed_channels);
  s.read("levels", m.levels);
  s.read("base_channels", m.base_channels);
  s.read("expansion", m.expansion);
  s.read("width", m.width);
  s.read("height", m.height);
  s.finish();
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.read("lambda", t.lambda);
  s.read("epsilon", t.epsilon);
  s.read("episodes", t.episodes);
  s.read("baseline_decay", t.baseline_decay);
  s.read("learning_rate", t.learning_rate);
  s.read("momentum", t.momentum);
  s.read("weight_decay", t.weight_decay);
  s.read("epochs", t.epochs);
  s.read("lr_step_epochs", t.lr_step_epochs);
  s.read("lr_step_factor", t.lr_step_factor);
  s.read("max_grad_norm", t.max_grad_norm);
  s.read("reward_rep", t.reward_rep);
  s.read("reward_div", t.reward_div);
  std::string paradigm = paradigm_name(t.paradigm);
  s.read("paradigm", paradigm);
  t.paradigm = parse_paradigm(paradigm);
  s.finish();
}

void read_kts(const json& j, KtsOptions& k) {
  Section s(j, "kts");
  s.read("max_segments", k.max_segments);
  s.read("max_segments_ratio", k.max_segments_ratio);
  s.read("penalty", k.penalty);
  s.finish();
}

void read_eval(const json& j, EvalConfig& e) {
  Section s(j, "eval");
  s.read("splits", e.splits);
  s.read("train_fraction", e.train_fraction);
  s.read("target_budget", e.target_budget);
  s.read("max_splits", e.max_splits);
  s.finish();
}

void read_synth(const json& j, SynthSpec& sp) {
  Section s(j, "synth");
  s.read("clusters", sp.clusters);
  s.read("frames", sp.frames);
  s.read("dim", sp.dim);
  s.read("noise", sp.noise);
  s.read("keyframe_fraction", sp.keyframe_fraction);
  s.read("users", sp.users);
  s.read("videos", sp.videos);
  s.read("expansion", sp.expansion);
  s.read("center_scale", sp.center_scale);
  s.read("shot_spread", sp.shot_spread);
  s.read("event_strength", sp.event_strength);
  s.read("activity_channels", sp.activity_channels);
  s.read("jitter", sp.jitter);
  s.finish();
}

void read_gradcheck(const json& j, GradCheckConfig& g) {
  Section s(j, "gradcheck");
  s.read("eps", g.eps);
  s.read("tolerance", g.tolerance);
  s.read("steps", g.steps);
  s.read("inject_conv_fault", g.inject_conv_fault);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (budgets.empty()) throw ConfigError("budgets must not be empty");
  parsed_budgets();
  model.validate();
  train.validate();
  if (!(kts.penalty >= 0.0)) throw ConfigError("kts.penalty must be >= 0");
  if (!(kts.max_segments_ratio > 0.0 && kts.max_segments_ratio <= 1.0)) {
    throw ConfigError("kts.max_segments_ratio must lie in (0, 1]");
  }
  if (eval.splits < 1) throw ConfigError("eval.splits must be >= 1");
  if (!(eval.train_fraction > 0.0 && eval.train_fraction < 1.0)) {
    throw ConfigError("eval.train_fraction must lie in (0, 1)");
  }
  if (!(eval.target_budget > 0.0 && eval.target_budget <= 1.0)) {
    throw ConfigError("eval.target_budget must lie in (0, 1]");
  }
  synth.validate();
  if (!(gradcheck.eps >= 1e-7 && gradcheck.eps <= 1e-3)) {
    throw ConfigError("gradcheck.eps must lie in [1e-7, 1e-3]");
  }
  if (!(gradcheck.tolerance > 0.0)) throw ConfigError("gradcheck.tolerance must be > 0");
  if (gradcheck.steps < 1) throw ConfigError("gradcheck.steps must be >= 1");
}

std::vector<Budget> RunConfig::parsed_budgets() const {
  std::vector<Budget> out;
  for (const std::string& b : budgets) out.push_back(Budget::parse(b));
  return out;
}

RunConfig parse_run_config(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  RunConfig c;
  Section s(j, "");
  s.read("manifest", c.manifest);
  s.read("out", c.out);
  s.read("seed", c.seed, 0);
  s.read("jobs", c.jobs);
  if (const json* b = s.take("budgets")) {
    if (!b->is_array()) throw ConfigError("'budgets' must be an array");
    c.budgets.clear();
    for (const json& v : *b) {
      if (v.is_string()) {
        c.budgets.push_back(v.get<std::string>());
      } else if (v.is_number()) {
        std::ostringstream os;
        os << v.get<double>();
        c.budgets.push_back(os.str());
      } else {
        throw ConfigError("'budgets' entries must be numbers or \"P\"");
      }
    }
  }
  std::string reduction = reduction_name(c.reduction);
  s.read("reduction", reduction);
  c.reduction = parse_reduction(reduction);
  if (const json* v = s.take("model")) read_model(*v, c.model);
  if (const json* v = s.take("train")) read_train(*v, c.train);
  if (const json* v = s.take("kts")) read_kts(*v, c.kts);
  if (const json* v = s.take("eval")) read_eval(*v, c.eval);
  if (const json* v = s.take("synth")) read_synth(*v, c.synth);
  if (const json* v = s.take("gradcheck")) read_gradcheck(*v, c.gradcheck);
  s.finish();
  c.train.seed = c.seed;
  c.synth.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["manifest"] = c.manifest;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["budgets"] = c.budgets;
  j["reduction"] = reduction_name(c.reduction);
  const ModelConfig& m = c.model;
  j["model"] = {{"in_channels", m.in_channels},   {"squeezed_channels", m.squeezed_channels},
                {"levels", m.levels},             {"base_channels", m.base_channels},
                {"expansion", m.expansion},       {"width", m.width},
                {"height", m.height}};
  const TrainConfig& t = c.train;
  j["train"] = {{"paradigm", paradigm_name(t.paradigm)},
                {"lambda", t.lambda},
                {"epsilon", t.epsilon},
                {"episodes", t.episodes},
                {"baseline_decay", t.baseline_decay},
                {"learning_rate", t.learning_rate},
                {"momentum", t.momentum},
                {"weight_decay", t.weight_decay},
                {"epochs", t.epochs},
                {"lr_step_epochs", t.lr_step_epochs},
                {"lr_step_factor", t.lr_step_factor},
                {"max_grad_norm", t.max_grad_norm},
                {"reward_rep", t.reward_rep},
                {"reward_div", t.reward_div}};
  j["kts"] = {{"max_segments", c.kts.max_segments},
              {"max_segments_ratio", c.kts.max_segments_ratio},
              {"penalty", c.kts.penalty}};
  j["eval"] = {{"splits", c.eval.splits},
               {"train_fraction", c.eval.train_fraction},
               {"target_budget", c.eval.target_budget},
               {"max_splits", c.eval.max_splits}};
  const SynthSpec& sp = c.synth;
  j["synth"] = {{"clusters", sp.clusters},
                {"frames", sp.frames},
                {"dim", sp.dim},
                {"noise", sp.noise},
                {"keyframe_fraction", sp.keyframe_fraction},
                {"users", sp.users},
                {"videos", sp.videos},
                {"expansion", sp.expansion},
                {"center_scale", sp.center_scale},
                {"shot_spread", sp.shot_spread},
                {"event_strength", sp.event_strength},
                {"activity_channels", sp.activity_channels},
                {"jitter", sp.jitter}};
  j["gradcheck"] = {{"eps", c.gradcheck.eps},
                    {"tolerance", c.gradcheck.tolerance},
                    {"steps", c.gradcheck.steps},
                    {"inject_conv_fault", c.gradcheck.inject_conv_fault}};
  return j.dump();
}

}  // namespace stunet
