#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cuboidtrack/geometry.hpp"
#include "cuboidtrack/scene.hpp"

namespace ct {

/// A labeled global-frame object with observation statistics. Boxes are
/// gravity-aligned (rotation zero) in the world frame.
struct ObjectTrack {
  std::uint64_t label = 0;
  Cuboid box;
  std::uint64_t observation_count = 0;
  std::int64_t first_seen = 0;
  std::int64_t last_seen = 0;
  double heat = 0.0;
  bool operator==(const ObjectTrack&) const = default;
};

enum class Assignment {
  greedy_one_to_one,   // highest-overlap pairs first, each track used once
  independent_argmax,  // every proposal takes its own best track
};

enum class FusionMode {
  count_weighted,  // running mean over all observations
  fixed_alpha,     // constant blend weight; alpha = 1 keeps the latest box
};

struct TrackerConfig {
  double tau = 0.25;  // IoU acceptance threshold, in (0, 1]
  Assignment assignment = Assignment::greedy_one_to_one;
  UnionMode union_mode = UnionMode::axis_product;
  FusionMode fusion = FusionMode::count_weighted;
  double fusion_alpha = 1.0;

  void validate() const;
  bool operator==(const TrackerConfig&) const = default;
};

struct MatchResult {
  std::size_t proposal_index = 0;
  std::uint64_t assigned_label = 0;
  double best_iou = 0.0;
  bool is_new = false;
  bool operator==(const MatchResult&) const = default;
};

/// The scene's object database. Labels are issued sequentially from 1 and
/// never reused; tracks are never deleted.
class Registry {
 public:
  Registry() = default;

  const std::vector<ObjectTrack>& tracks() const { return tracks_; }
  std::uint64_t next_label() const { return next_label_; }
  std::size_t size() const { return tracks_.size(); }
  const ObjectTrack* find(std::uint64_t label) const;

  /// Appends a new track for a gravity-aligned global-frame box and returns
  /// its label.
  std::uint64_t register_new(const Cuboid& box, std::int64_t frame_index);

  /// Fuses a matched observation into the identified track.
  void apply_observation(std::uint64_t label, const Cuboid& observation,
                         std::int64_t frame_index, const TrackerConfig& cfg);

  /// Rebuilds a registry from a serialized snapshot; labels must be the
  /// contiguous sequence 1..N.
  static Registry restore(std::vector<ObjectTrack> tracks,
                          std::uint64_t next_label);

  bool operator==(const Registry&) const = default;

 private:
  std::vector<ObjectTrack> tracks_;
  std::uint64_t next_label_ = 1;
};

struct BestMatch {
  std::optional<std::uint64_t> label;
  double iou = 0.0;
};

/// Scans every track once and returns the highest-IoU label (lowest label
/// wins ties). Label is empty when the registry is empty.
BestMatch best_match(const Cuboid& proposal, const Registry& registry,
                     UnionMode mode = UnionMode::axis_product);

/// Pure fusion step: blends the observation into the track box and bumps the
/// observation statistics.
ObjectTrack update_track(const ObjectTrack& track, const Cuboid& observation,
                         std::int64_t frame_index, const TrackerConfig& cfg);

/// Matches one frame's global-frame proposals against the registry, updating
/// matched tracks and registering new ones. Results come back in proposal
/// order; fresh labels are issued in proposal order.
std::vector<MatchResult> assign_labels(std::span<const Cuboid> proposals,
                                       std::int64_t frame_index,
                                       Registry& registry,
                                       const TrackerConfig& cfg);

struct FrameOutcome {
  Registry registry;
  std::vector<MatchResult> matches;
};

/// Full per-frame step: gravity-aligns each camera-frame proposal, maps it
/// through the frame pose into the world frame, then assigns labels. Returns
/// the updated registry instead of mutating shared state.
FrameOutcome process_frame(const FrameObservation& frame, Registry registry,
                           const TrackerConfig& cfg);

}  // namespace ct
