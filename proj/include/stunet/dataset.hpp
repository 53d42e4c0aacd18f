#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stunet/annotations.hpp"
#include "stunet/features.hpp"

namespace stunet {

// How per-user F1 scores collapse into one number per video.
enum class Reduction { kMean, kMax };

const char* reduction_name(Reduction r);
Reduction parse_reduction(const std::string& name);

struct ManifestDefaults {
  std::size_t expansion = 16;
  double budget = 0.15;
  Reduction reduction = Reduction::kMean;
};

struct ManifestEntry {
  std::string id;
  std::string features;     // path, relative to the manifest directory
  std::string annotations;  // empty when the video has no ground truth
  FeatureKind kind = FeatureKind::kSynthetic;
};

// Line-delimited JSON. The first record may carry dataset defaults:
//
//   {"defaults": {"expansion": 16, "budget": 0.15, "reduction": "mean"}}
//   {"id": "v0", "features": "v0.fseq", "annotations": "v0.ann", "kind": "st3d"}
struct DatasetManifest {
  ManifestDefaults defaults;
  std::vector<ManifestEntry> entries;
  std::string base_dir;
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

struct Video {
  FeatureSequence sequence;
  std::optional<AnnotationSet> annotations;

  const std::string& id() const { return sequence.video_id; }
};

struct Dataset {
  ManifestDefaults defaults;
  std::vector<Video> videos;

  const Video& find(const std::string& id) const;
  std::vector<std::string> ids() const;
};

// Reads every referenced file; checks ids are unique and that annotation frame
// counts match the features.
Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::string& manifest_path);

// Appends `extra` videos to `base`; ids must stay unique.
void append_dataset(Dataset& base, Dataset extra);

}  // namespace stunet
