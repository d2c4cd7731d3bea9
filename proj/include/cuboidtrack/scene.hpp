#pragma once

#include <cstdint>
#include <vector>

#include "cuboidtrack/geometry.hpp"

namespace ct {

/// One depth measurement: pixel (u, v) with metric depth z.
struct DepthSample {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
  bool operator==(const DepthSample&) const = default;
};

/// One frame's camera pose plus its camera-frame cuboid proposals.
/// Depth samples are optional; an empty list means none were recorded.
struct FrameObservation {
  std::int64_t frame_index = 0;
  Pose pose;
  std::vector<Cuboid> proposals;
  std::vector<DepthSample> depth_samples;
  bool operator==(const FrameObservation&) const = default;
};

struct SceneHeader {
  int version = 1;
  Intrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  double voxel_size = 0.02;
  std::uint64_t seed = 0;
  bool operator==(const SceneHeader&) const = default;
};

/// Inclusive frame range [first, last] during which an object emits no
/// proposals.
struct OcclusionWindow {
  std::uint64_t object_id = 0;
  std::int64_t first = 0;
  std::int64_t last = 0;
  bool operator==(const OcclusionWindow&) const = default;
};

/// Per-frame true object ids, aligned index-for-index with the proposals
/// emitted for that frame.
struct GroundTruthLabels {
  std::vector<std::uint64_t> object_ids;
  std::vector<OcclusionWindow> occlusions;
  std::vector<std::vector<std::uint64_t>> frame_ids;
  bool operator==(const GroundTruthLabels&) const = default;
};

}  // namespace ct
