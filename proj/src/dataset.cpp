#include "stunet/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "stunet/error.hpp"

namespace stunet {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* reduction_name(Reduction r) { return r == Reduction::kMax ? "max" : "mean"; }

Reduction parse_reduction(const std::string& name) {
  if (name == "mean") return Reduction::kMean;
  if (name == "max") return Reduction::kMax;
  throw ConfigError("unknown reduction '" + name + "' (expected mean or max)");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  DatasetManifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();

  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    try {
      if (record.contains("defaults")) {
        const json& d = record.at("defaults");
        for (const auto& [key, value] : d.items()) {
          if (key == "expansion") {
            manifest.defaults.expansion = value.get<std::size_t>();
          } else if (key == "budget") {
            manifest.defaults.budget = value.get<double>();
          } else if (key == "reduction") {
            manifest.defaults.reduction = parse_reduction(value.get<std::string>());
          } else {
            throw DataError(where + ": unknown defaults key '" + key + "'");
          }
        }
        continue;
      }
      ManifestEntry entry;
      entry.id = record.at("id").get<std::string>();
      entry.features = record.at("features").get<std::string>();
      entry.annotations = record.value("annotations", std::string());
      entry.kind = parse_feature_kind(record.value("kind", std::string("synthetic")));
      for (const auto& [key, value] : record.items()) {
        if (key != "id" && key != "features" && key != "annotations" && key != "kind") {
          throw DataError(where + ": unknown manifest key '" + key + "'");
        }
      }
      if (!seen.insert(entry.id).second) {
        throw DataError(where + ": duplicate video id '" + entry.id + "'");
      }
      manifest.entries.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  json defaults = {{"expansion", manifest.defaults.expansion},
                   {"budget", manifest.defaults.budget},
                   {"reduction", reduction_name(manifest.defaults.reduction)}};
  out << json{{"defaults", defaults}}.dump() << '\n';
  for (const ManifestEntry& e : manifest.entries) {
    json record = {{"id", e.id}, {"features", e.features}, {"kind", feature_kind_name(e.kind)}};
    if (!e.annotations.empty()) record["annotations"] = e.annotations;
    out << record.dump() << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

const Video& Dataset::find(const std::string& id) const {
  for (const Video& v : videos) {
    if (v.id() == id) return v;
  }
  throw DataError("video '" + id + "' not in dataset");
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(videos.size());
  for (const Video& v : videos) out.push_back(v.id());
  return out;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  auto resolve = [&manifest](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(manifest.base_dir) / path).string();
  };
  Dataset ds;
  ds.defaults = manifest.defaults;
  std::set<std::string> seen;
  for (const ManifestEntry& e : manifest.entries) {
    if (!seen.insert(e.id).second) throw DataError("duplicate video id '" + e.id + "'");
    Video v;
    v.sequence = read_features(resolve(e.features));
    v.sequence.video_id = e.id;
    v.sequence.kind = e.kind;
    if (!e.annotations.empty()) {
      AnnotationSet ann = read_annotations(resolve(e.annotations));
      if (ann.frames != v.sequence.frames()) {
        throw DataError("video '" + e.id + "': annotations cover " + std::to_string(ann.frames) +
                        " frames but features describe " + std::to_string(v.sequence.frames()));
      }
      v.annotations = std::move(ann);
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

Dataset load_dataset(const std::string& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

void append_dataset(Dataset& base, Dataset extra) {
  std::set<std::string> ids;
  for (const Video& v : base.videos) ids.insert(v.id());
  for (Video& v : extra.videos) {
    if (!ids.insert(v.id()).second) {
      throw DataError("video id '" + v.id() + "' appears in more than one manifest");
    }
    base.videos.push_back(std::move(v));
  }
}

}  // namespace stunet
