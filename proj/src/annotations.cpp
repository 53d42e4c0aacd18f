#include "stunet/annotations.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stunet/error.hpp"

namespace stunet {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw DataError(where + ": '" + tok + "' is not a finite number");
  }
  return v;
}

std::size_t parse_count(const std::string& tok, const std::string& where) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DataError(where + ": '" + tok + "' is not a non-negative integer");
  }
  return v;
}

AnnotationKind parse_kind(const std::string& tok, const std::string& where) {
  if (tok == "frame_scores") return AnnotationKind::kFrameScores;
  if (tok == "keyframe_mask") return AnnotationKind::kKeyframeMask;
  if (tok == "shot_scores") return AnnotationKind::kShotScores;
  throw DataError(where + ": unknown annotation kind '" + tok + "'");
}

}  // namespace

const char* annotation_kind_name(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::kFrameScores: return "frame_scores";
    case AnnotationKind::kKeyframeMask: return "keyframe_mask";
    case AnnotationKind::kShotScores: return "shot_scores";
  }
  return "keyframe_mask";
}

void AnnotationSet::validate() const {
  const std::string where = "annotations for '" + video_id + "'";
  if (frames == 0) throw DataError(where + ": frame count must be >= 1");
  if (users.empty()) throw DataError(where + ": at least one user required");
  if (!(range_lo < range_hi)) throw DataError(where + ": empty value range");
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (users[u].size() != frames) {
      throw DataError(where + ": user " + std::to_string(u) + " has " +
                      std::to_string(users[u].size()) + " values, expected " +
                      std::to_string(frames));
    }
    for (std::size_t t = 0; t < frames; ++t) {
      const double v = users[u][t];
      if (v < range_lo || v > range_hi) {
        throw DataError(where + ": user " + std::to_string(u) + " frame " + std::to_string(t) +
                        " value " + std::to_string(v) + " outside [" + std::to_string(range_lo) +
                        ", " + std::to_string(range_hi) + "]");
      }
      if (kind == AnnotationKind::kKeyframeMask && v != range_lo && v != range_hi) {
        throw DataError(where + ": keyframe mask value " + std::to_string(v) + " at user " +
                        std::to_string(u) + " frame " + std::to_string(t) + " is not binary");
      }
    }
  }
  if (kind == AnnotationKind::kShotScores) {
    if (shot_boundaries.size() < 2 || shot_boundaries.front() != 0 ||
        shot_boundaries.back() != frames) {
      throw DataError(where + ": shot boundaries must start at 0 and end at " +
                      std::to_string(frames));
    }
    for (std::size_t i = 1; i < shot_boundaries.size(); ++i) {
      if (shot_boundaries[i] <= shot_boundaries[i - 1]) {
        throw DataError(where + ": shot boundaries must be strictly increasing");
      }
    }
  }
}

std::string format_annotations(const AnnotationSet& set) {
  set.validate();
  std::ostringstream os;
  os.precision(17);
  os << "# stunet annotations v1\n";
  os << "video " << set.video_id << '\n';
  os << "frames " << set.frames << '\n';
  os << "users " << set.users.size() << '\n';
  os << "kind " << annotation_kind_name(set.kind) << '\n';
  os << "range " << set.range_lo << ' ' << set.range_hi << '\n';
  if (!set.shot_boundaries.empty()) {
    os << "shots";
    for (std::size_t b : set.shot_boundaries) os << ' ' << b;
    os << '\n';
  }
  for (const auto& row : set.users) {
    for (std::size_t t = 0; t < row.size(); ++t) os << (t ? " " : "") << row[t];
    os << '\n';
  }
  return os.str();
}

AnnotationSet parse_annotations(const std::string& text, const std::string& source) {
  AnnotationSet set;
  bool have_video = false, have_frames = false, have_users = false, have_kind = false;
  std::size_t user_count = 0;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);

    if (std::isalpha(static_cast<unsigned char>(tokens[0][0]))) {
      if (!set.users.empty()) throw DataError(where + ": header line after value rows");
      const std::string& key = tokens[0];
      auto expect_args = [&](std::size_t n) {
        if (tokens.size() != n + 1) {
          throw DataError(where + ": '" + key + "' takes " + std::to_string(n) + " value(s)");
        }
      };
      if (key == "video") {
        expect_args(1);
        set.video_id = tokens[1];
        have_video = true;
      } else if (key == "frames") {
        expect_args(1);
        set.frames = parse_count(tokens[1], where);
        have_frames = true;
      } else if (key == "users") {
        expect_args(1);
        user_count = parse_count(tokens[1], where);
        have_users = true;
      } else if (key == "kind") {
        expect_args(1);
        set.kind = parse_kind(tokens[1], where);
        have_kind = true;
      } else if (key == "range") {
        expect_args(2);
        set.range_lo = parse_double(tokens[1], where);
        set.range_hi = parse_double(tokens[2], where);
      } else if (key == "shots") {
        set.shot_boundaries.clear();
        for (std::size_t i = 1; i < tokens.size(); ++i) {
          set.shot_boundaries.push_back(parse_count(tokens[i], where));
        }
      } else {
        throw DataError(where + ": unknown header key '" + key + "'");
      }
      continue;
    }

    if (!(have_video && have_frames && have_users && have_kind)) {
      throw DataError(where + ": value row before complete header (need video, frames, users, kind)");
    }
    if (tokens.size() != set.frames) {
      throw DataError(where + ": expected " + std::to_string(set.frames) + " values, found " +
                      std::to_string(tokens.size()));
    }
    if (set.users.size() == user_count) {
      throw DataError(where + ": more value rows than the declared " + std::to_string(user_count) +
                      " users");
    }
    std::vector<double> row;
    row.reserve(tokens.size());
    for (const auto& tok : tokens) row.push_back(parse_double(tok, where));
    set.users.push_back(std::move(row));
  }

  if (!(have_video && have_frames && have_users && have_kind)) {
    throw DataError(source + ": incomplete header (need video, frames, users, kind)");
  }
  if (set.users.size() != user_count) {
    throw DataError(source + ": declared " + std::to_string(user_count) + " users but found " +
                    std::to_string(set.users.size()) + " value rows");
  }
  if (set.kind == AnnotationKind::kShotScores && set.shot_boundaries.empty()) {
    throw DataError(source + ": kind shot_scores requires a 'shots' boundary line");
  }
  try {
    set.validate();
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return set;
}

void write_annotations(const std::string& path, const AnnotationSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << format_annotations(set);
  if (!out) throw DataError("write to '" + path + "' failed");
}

AnnotationSet read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_annotations(buf.str(), path);
}

}  // namespace stunet
