#include "stunet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "stunet/error.hpp"

namespace stunet {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (clusters < 2) throw ConfigError("synth.clusters must be >= 2, got " + std::to_string(clusters));
  if (expansion < 1) throw ConfigError("synth.expansion must be >= 1");
  if (frames == 0 || frames % expansion != 0) {
    throw ConfigError("synth.frames (" + std::to_string(frames) +
                      ") must be a positive multiple of synth.expansion (" +
                      std::to_string(expansion) + ")");
  }
  if (frames / expansion < clusters) throw ConfigError("synth: fewer feature steps than clusters");
  if (dim < activity_channels + 2) {
    throw ConfigError("synth.dim must exceed synth.activity_channels by at least 2");
  }
  if (!(noise >= 0.0)) throw ConfigError("synth.noise must be >= 0");
  if (!(keyframe_fraction > 0.0 && keyframe_fraction < 1.0)) {
    throw ConfigError("synth.keyframe_fraction must lie in (0, 1)");
  }
  if (users < 1) throw ConfigError("synth.users must be >= 1");
  if (videos < 1) throw ConfigError("synth.videos must be >= 1");
  if (!(center_scale > 0.0)) throw ConfigError("synth.center_scale must be > 0");
  if (!(shot_spread >= 0.0) || !(event_strength >= 0.0)) {
    throw ConfigError("synth.shot_spread and synth.event_strength must be >= 0");
  }
}

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim, std::size_t lo,
                                std::size_t hi) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim, 0.0);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (std::size_t c = lo; c < hi; ++c) {
      v[c] = g(rng);
      norm += v[c] * v[c];
    }
    norm = std::sqrt(norm);
  }
  for (std::size_t c = lo; c < hi; ++c) v[c] /= norm;
  return v;
}

// Splits `total` into `parts` lengths differing by at most one.
std::vector<std::size_t> even_parts(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

double jaccard(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    inter += a[t] && b[t];
    uni += a[t] || b[t];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct EventShot {
  std::size_t begin, end;          // frames
  std::size_t seg_begin, seg_end;  // frames of the enclosing segment
};

}  // namespace

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t steps = spec.frames / spec.expansion;
  const std::size_t n = spec.expansion;
  const std::size_t act = spec.activity_channels;

  SynthDataset out;
  out.dataset.defaults.expansion = n;
  out.dataset.defaults.budget = 0.15;
  std::size_t planted_total = 0;

  for (std::size_t vi = 0; vi < spec.videos; ++vi) {
    SynthVideo truth;
    std::vector<double> data(steps * spec.dim, 0.0);
    std::vector<EventShot> events;
    truth.segment_boundaries.push_back(0);
    truth.shot_boundaries.push_back(0);

    std::size_t step0 = 0;
    for (std::size_t seg_steps : even_parts(steps, spec.clusters)) {
      std::vector<double> center = random_unit(rng, spec.dim, act, spec.dim);
      for (double& c : center) c *= spec.center_scale;

      const auto e = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(spec.keyframe_fraction * static_cast<double>(seg_steps))));
      const std::size_t event_len = std::min(e, seg_steps);
      // Background sub-shots are never longer than the event shot, so shot
      // length carries no information about where the event is.
      const std::size_t q = (seg_steps + event_len - 1) / event_len;
      const std::size_t event_idx = std::uniform_int_distribution<std::size_t>(0, q - 1)(rng);
      // Event shot gets exactly event_len steps; others share the rest.
      std::vector<std::size_t> lens;
      if (q == 1) {
        lens = {seg_steps};
      } else {
        std::vector<std::size_t> others = even_parts(seg_steps - event_len, q - 1);
        for (std::size_t j = 0, o = 0; j < q; ++j) lens.push_back(j == event_idx ? event_len : others[o++]);
      }

      std::size_t s = step0;
      for (std::size_t j = 0; j < q; ++j) {
        const bool is_event = j == event_idx;
        std::vector<double> offset = is_event ? random_unit(rng, spec.dim, 0, act)
                                              : random_unit(rng, spec.dim, act, spec.dim);
        const double amp = is_event ? spec.event_strength : spec.shot_spread;
        for (std::size_t t = s; t < s + lens[j]; ++t) {
          for (std::size_t c = 0; c < spec.dim; ++c) {
            data[t * spec.dim + c] = center[c] + amp * offset[c] + spec.noise * gauss(rng);
          }
        }
        if (is_event) {
          events.push_back({s * n, (s + lens[j]) * n, step0 * n, (step0 + seg_steps) * n});
        }
        s += lens[j];
        truth.shot_boundaries.push_back(s * n);
      }
      step0 += seg_steps;
      truth.segment_boundaries.push_back(step0 * n);
    }

    truth.planted.assign(spec.frames, 0);
    for (const EventShot& ev : events) {
      std::fill(truth.planted.begin() + static_cast<std::ptrdiff_t>(ev.begin),
                truth.planted.begin() + static_cast<std::ptrdiff_t>(ev.end), 1);
      planted_total += ev.end - ev.begin;
    }

    AnnotationSet ann;
    ann.video_id = "synth_" + std::to_string(vi);
    ann.frames = spec.frames;
    ann.kind = AnnotationKind::kKeyframeMask;
    for (std::size_t u = 0; u < spec.users; ++u) {
      Mask mask(spec.frames, 0);
      for (const EventShot& ev : events) {
        const std::size_t len = ev.end - ev.begin;
        const auto j = static_cast<long>(spec.jitter > 0 ? spec.jitter : std::max<std::size_t>(1, len / 4));
        std::uniform_int_distribution<long> shift(-j, j);
        Mask base(spec.frames, 0), shot(spec.frames, 0);
        std::fill(base.begin() + static_cast<std::ptrdiff_t>(ev.begin),
                  base.begin() + static_cast<std::ptrdiff_t>(ev.end), 1);
        do {
          const long b = std::clamp<long>(static_cast<long>(ev.begin) + shift(rng),
                                          static_cast<long>(ev.seg_begin), static_cast<long>(ev.end) - 1);
          const long en = std::clamp<long>(static_cast<long>(ev.end) + shift(rng), b + 1,
                                           static_cast<long>(ev.seg_end));
          std::fill(shot.begin(), shot.end(), 0);
          std::fill(shot.begin() + b, shot.begin() + en, 1);
        } while (jaccard(shot, base) < 0.5);
        for (std::size_t t = 0; t < spec.frames; ++t) mask[t] |= shot[t];
      }
      ann.users.emplace_back(mask.begin(), mask.end());
    }

    Video video;
    video.sequence.video_id = ann.video_id;
    video.sequence.features = Tensor(Shape{steps, spec.dim, 1, 1}, std::move(data));
    video.sequence.expansion = n;
    video.sequence.kind = FeatureKind::kSynthetic;
    video.annotations = std::move(ann);
    out.dataset.videos.push_back(std::move(video));
    out.truth.push_back(std::move(truth));
  }
  out.planted_fraction =
      static_cast<double>(planted_total) / static_cast<double>(spec.frames * spec.videos);
  return out;
}

std::string write_synth_dataset(const std::string& dir, const SynthDataset& synth) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
  DatasetManifest manifest;
  manifest.defaults = synth.dataset.defaults;
  for (const Video& v : synth.dataset.videos) {
    ManifestEntry e;
    e.id = v.id();
    e.features = v.id() + ".fseq";
    e.kind = v.sequence.kind;
    write_features((fs::path(dir) / e.features).string(), v.sequence);
    if (v.annotations) {
      e.annotations = v.id() + ".ann";
      write_annotations((fs::path(dir) / e.annotations).string(), *v.annotations);
    }
    manifest.entries.push_back(std::move(e));
  }
  const std::string path = (fs::path(dir) / "manifest.jsonl").string();
  write_manifest(path, manifest);
  return path;
}

}  // namespace stunet
