#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "cuboidtrack/geometry.hpp"
#include "cuboidtrack/scene.hpp"

namespace ct {

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    const std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL ^
                            static_cast<std::uint64_t>(k.y) * 19349663ULL ^
                            static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

/// Accumulated evidence for one voxel: heat total plus the running mean of
/// every point that landed in it.
struct HeatCell {
  Vec3 mean_position;
  double heat = 0.0;
  std::uint64_t sample_count = 0;
  bool operator==(const HeatCell&) const = default;
};

struct WeightedPoint {
  Vec3 position;
  double heat = 1.0;
};

/// Sparse voxel hash grid of heat-weighted running-mean points. Points that
/// key into an existing cell add heat and refine the cell mean; other points
/// open new cells. Single writer; concurrent readers are fine while no
/// update runs.
class HeatmapGrid {
 public:
  explicit HeatmapGrid(double voxel_size);

  double voxel_size() const { return voxel_size_; }
  VoxelKey key_of(const Vec3& p) const;

  /// Folds a batch of global-frame points into the grid. The whole batch is
  /// validated (finite positions, positive heat) before anything is applied.
  void add_points(std::span<const WeightedPoint> points);

  /// Back-projects the depth samples with the frame's pose and intrinsics and
  /// adds them with unit heat.
  void merge_frame(const FrameObservation& frame,
                   std::span<const DepthSample> samples, const Intrinsics& k);

  /// Thresholds cells by heat, labels 26-connected voxel components, and
  /// returns the axis-aligned bounds of every component with at least
  /// min_cells voxels.
  std::vector<Cuboid> extract_boundaries(double min_heat,
                                         std::size_t min_cells = 8) const;

  const std::unordered_map<VoxelKey, HeatCell, VoxelKeyHash>& cells() const {
    return cells_;
  }
  std::size_t cell_count() const { return cells_.size(); }
  double total_heat() const;

  /// Restores one serialized cell; the cell mean must key to `key`.
  void insert_cell(const VoxelKey& key, const HeatCell& cell);

 private:
  double voxel_size_;
  std::unordered_map<VoxelKey, HeatCell, VoxelKeyHash> cells_;
};

}  // namespace ct
