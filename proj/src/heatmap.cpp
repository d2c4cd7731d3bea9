#include "cuboidtrack/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ct {

HeatmapGrid::HeatmapGrid(double voxel_size) : voxel_size_(voxel_size) {
  if (!std::isfinite(voxel_size) || voxel_size <= 0.0) {
    fail(ErrorKind::invalid_argument, "voxel_size must be positive");
  }
}

VoxelKey HeatmapGrid::key_of(const Vec3& p) const {
  return VoxelKey{static_cast<std::int64_t>(std::floor(p.x / voxel_size_)),
                  static_cast<std::int64_t>(std::floor(p.y / voxel_size_)),
                  static_cast<std::int64_t>(std::floor(p.z / voxel_size_))};
}

void HeatmapGrid::add_points(std::span<const WeightedPoint> points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i].position)) {
      std::ostringstream msg;
      msg << "point " << i << ": position must be finite";
      fail(ErrorKind::invalid_argument, msg.str());
    }
    if (!std::isfinite(points[i].heat) || points[i].heat <= 0.0) {
      std::ostringstream msg;
      msg << "point " << i << ": heat must be positive";
      fail(ErrorKind::invalid_argument, msg.str());
    }
  }
  for (const WeightedPoint& p : points) {
    const VoxelKey key = key_of(p.position);
    auto [it, inserted] = cells_.try_emplace(key, HeatCell{p.position, p.heat, 1});
    if (!inserted) {
      HeatCell& cell = it->second;
      cell.sample_count += 1;
      const double inv_n = 1.0 / static_cast<double>(cell.sample_count);
      cell.mean_position =
          cell.mean_position + (p.position - cell.mean_position) * inv_n;
      cell.heat += p.heat;
    }
  }
}

void HeatmapGrid::merge_frame(const FrameObservation& frame,
                              std::span<const DepthSample> samples,
                              const Intrinsics& k) {
  std::vector<WeightedPoint> points;
  points.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      const Vec3 camera = backproject(samples[i].u, samples[i].v, samples[i].z, k);
      points.push_back(WeightedPoint{frame.pose.apply(camera), 1.0});
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "depth sample " << i << ": " << e.what();
      fail(e.kind(), msg.str());
    }
  }
  add_points(points);
}

std::vector<Cuboid> HeatmapGrid::extract_boundaries(double min_heat,
                                                    std::size_t min_cells) const {
  if (!std::isfinite(min_heat) || min_heat <= 0.0) {
    fail(ErrorKind::invalid_argument, "min_heat must be positive");
  }
  std::vector<VoxelKey> hot;
  hot.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) {
    if (cell.heat >= min_heat) hot.push_back(key);
  }
  // Sorted seeds keep component order independent of hash layout.
  std::sort(hot.begin(), hot.end(), [](const VoxelKey& a, const VoxelKey& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  });

  std::unordered_set<VoxelKey, VoxelKeyHash> pending(hot.begin(), hot.end());
  std::vector<Cuboid> boundaries;
  std::vector<VoxelKey> stack;
  for (const VoxelKey& seed : hot) {
    if (!pending.contains(seed)) continue;
    pending.erase(seed);
    stack.assign(1, seed);
    VoxelKey lo = seed;
    VoxelKey hi = seed;
    std::size_t voxels = 0;
    while (!stack.empty()) {
      const VoxelKey v = stack.back();
      stack.pop_back();
      ++voxels;
      lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
      hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const VoxelKey n{v.x + dx, v.y + dy, v.z + dz};
            auto it = pending.find(n);
            if (it != pending.end()) {
              pending.erase(it);
              stack.push_back(n);
            }
          }
        }
      }
    }
    if (voxels < min_cells) continue;
    const Vec3 anchor{static_cast<double>(lo.x) * voxel_size_,
                      static_cast<double>(lo.y) * voxel_size_,
                      static_cast<double>(lo.z) * voxel_size_};
    const Vec3 extents{static_cast<double>(hi.x - lo.x + 1) * voxel_size_,
                       static_cast<double>(hi.y - lo.y + 1) * voxel_size_,
                       static_cast<double>(hi.z - lo.z + 1) * voxel_size_};
    boundaries.emplace_back(anchor, extents);
  }
  return boundaries;
}

double HeatmapGrid::total_heat() const {
  double total = 0.0;
  for (const auto& [key, cell] : cells_) total += cell.heat;
  return total;
}

void HeatmapGrid::insert_cell(const VoxelKey& key, const HeatCell& cell) {
  if (!is_finite(cell.mean_position)) {
    fail(ErrorKind::invariant, "cell mean must be finite");
  }
  if (!std::isfinite(cell.heat) || cell.heat <= 0.0) {
    fail(ErrorKind::invariant, "cell heat must be positive");
  }
  if (cell.sample_count < 1) {
    fail(ErrorKind::invariant, "cell sample_count must be >= 1");
  }
  if (!(key_of(cell.mean_position) == key)) {
    std::ostringstream msg;
    msg << "cell mean does not key to its voxel (" << key.x << ", " << key.y
        << ", " << key.z << ")";
    fail(ErrorKind::invariant, msg.str());
  }
  if (!cells_.emplace(key, cell).second) {
    fail(ErrorKind::invariant, "duplicate voxel key");
  }
}

}  // namespace ct
