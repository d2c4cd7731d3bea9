#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cuboidtrack/heatmap.hpp"
#include "cuboidtrack/scene.hpp"
#include "cuboidtrack/tracker.hpp"

namespace ct {

// Line-delimited record formats: one JSON object per line, header first.
// Schemas are documented in docs/FORMAT.md. Writers are canonical (fixed
// field order, shortest round-trip float formatting), so identical inputs
// produce byte-identical files.

struct SceneFile {
  SceneHeader header;
  std::vector<FrameObservation> frames;
  bool operator==(const SceneFile&) const = default;
};

/// Streaming single-pass scene reader; frames are validated as they are
/// produced (orthonormal poses, positive extents, strictly increasing
/// frame indices).
class SceneReader {
 public:
  explicit SceneReader(const std::string& path);
  const SceneHeader& header() const { return header_; }
  std::optional<FrameObservation> next();

 private:
  std::string path_;
  std::ifstream in_;
  SceneHeader header_;
  std::size_t line_number_ = 0;
  std::int64_t last_frame_index_ = -1;
};

class SceneWriter {
 public:
  SceneWriter(const std::string& path, const SceneHeader& header);
  void write_frame(const FrameObservation& frame);
  void finish();

 private:
  std::string path_;
  std::ofstream out_;
  std::int64_t last_frame_index_ = -1;
};

SceneFile read_scene(const std::string& path);
void write_scene(const std::string& path, const SceneFile& scene);

struct FrameMatches {
  std::int64_t frame_index = 0;
  std::vector<MatchResult> matches;
  bool operator==(const FrameMatches&) const = default;
};

struct TrackFile {
  int version = 1;
  TrackerConfig config;
  std::vector<FrameMatches> frames;
  Registry registry;
  bool operator==(const TrackFile&) const = default;
};

class TrackWriter {
 public:
  TrackWriter(const std::string& path, const TrackerConfig& config);
  void write_frame(std::int64_t frame_index,
                   std::span<const MatchResult> matches);
  /// Writes the final registry snapshot and flushes the stream.
  void finish(const Registry& registry);

 private:
  std::string path_;
  std::ofstream out_;
  bool finished_ = false;
};

TrackFile read_tracks(const std::string& path);
void write_tracks(const std::string& path, const TrackFile& tracks);

GroundTruthLabels read_truth(const std::string& path);
void write_truth(const std::string& path, const GroundTruthLabels& truth);

HeatmapGrid read_grid(const std::string& path);
void write_grid(const std::string& path, const HeatmapGrid& grid);

/// Deterministic display color for a label.
std::array<std::uint8_t, 3> label_color(std::uint64_t label);

/// ASCII PLY with one colored vertex per heat cell (colored by the track box
/// containing the cell mean, gray otherwise) followed by the corners of every
/// registry box, wired as 12-edge line sets.
void export_ply(const std::string& path, const HeatmapGrid& grid,
                const Registry& registry);

// Enum token mappings shared by file formats and the CLI.
std::string to_token(UnionMode mode);
std::string to_token(Assignment assignment);
std::string to_token(FusionMode fusion);
UnionMode union_mode_from_token(const std::string& token);
Assignment assignment_from_token(const std::string& token);
FusionMode fusion_from_token(const std::string& token);

}  // namespace ct
