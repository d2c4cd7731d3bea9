#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cuboidtrack/io.hpp"
#include "cuboidtrack/scene.hpp"

namespace ct {

/// Deterministic random source: mt19937_64 with explicit mappings so the
/// same seed yields the same stream everywhere (see docs/FORMAT.md).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via the Box-Muller transform; consumes two uniforms.
  double normal();

 private:
  std::mt19937_64 engine_;
};

struct ScenarioObject {
  std::uint64_t id = 0;
  Cuboid box;  // world frame, gravity-aligned
};

struct NoiseModel {
  double anchor_sigma = 0.0;
  double extent_sigma = 0.0;
  double dropout = 0.0;
  bool operator==(const NoiseModel&) const = default;
};

/// Declarative description of a synthetic capture: static world objects, a
/// camera trajectory, per-object occlusion windows, and a proposal noise
/// model. Fully reproducible from the seed.
struct Scenario {
  std::uint64_t seed = 0;
  SceneHeader header;
  std::vector<ScenarioObject> objects;
  std::vector<Pose> trajectory;
  std::vector<OcclusionWindow> occlusions;
  NoiseModel noise;
  int depth_samples_per_object = 0;

  void validate() const;
};

struct GeneratedScene {
  SceneFile scene;
  GroundTruthLabels truth;
};

/// Renders the scenario into per-frame camera-frame proposals: every
/// non-occluded object's world box is mapped through the inverse pose,
/// jittered, and possibly dropped. Deterministic under the seed.
GeneratedScene generate(const Scenario& scenario);

/// Loads a scenario config file (JSON; schema in docs/FORMAT.md).
Scenario load_scenario(const std::string& path);

/// Discretized overlap measurement for axis-aligned boxes on a common grid
/// anchored at the joint minimum corner, with voxel-center membership tests.
/// Counts factor per axis, so the full 3D tallies are reconstructed exactly
/// from three 1D scans.
struct VoxelCounts {
  double pitch = 0.0;
  std::array<std::int64_t, 3> in_a{};
  std::array<std::int64_t, 3> in_b{};
  std::array<std::int64_t, 3> in_both{};
  std::array<std::int64_t, 3> in_either{};

  std::int64_t count_a() const { return in_a[0] * in_a[1] * in_a[2]; }
  std::int64_t count_b() const { return in_b[0] * in_b[1] * in_b[2]; }
  std::int64_t count_intersection() const {
    return in_both[0] * in_both[1] * in_both[2];
  }
  std::int64_t count_union() const {
    return count_a() + count_b() - count_intersection();
  }
  double cell_volume() const { return pitch * pitch * pitch; }
  double intersection_volume() const {
    return static_cast<double>(count_intersection()) * cell_volume();
  }
  double union_volume() const {
    return static_cast<double>(count_union()) * cell_volume();
  }
  double axis_union_length(int axis) const {
    return static_cast<double>(in_either[axis]) * pitch;
  }
  double iou() const {
    const std::int64_t u = count_union();
    return u == 0 ? 0.0 : static_cast<double>(count_intersection()) /
                              static_cast<double>(u);
  }
};

VoxelCounts voxel_rasterize(const Cuboid& a, const Cuboid& b, double pitch);

/// Independent brute-force IoU check: count(a and b) / count(a or b) on the
/// rasterized grid. Refuses a pitch coarser than a tenth of the smallest
/// extent.
double voxel_iou_oracle(const Cuboid& a, const Cuboid& b, double pitch);

struct Metrics {
  double consistency = 0.0;    // objects keeping one constant label
  std::int64_t id_switches = 0;  // observations disagreeing with the modal label
  double reid_success = 0.0;   // occlusion windows whose label is restored
  std::int64_t count_error = 0;  // |labels issued - true objects|
  std::int64_t evaluated_windows = 0;
};

/// Scores a track file against ground truth. Frame counts and per-frame
/// proposal counts must line up.
Metrics evaluate(const TrackFile& tracks, const GroundTruthLabels& truth);

/// Fixed-layout single-line rendering of the four metrics.
std::string metrics_machine_line(const Metrics& m);

}  // namespace ct
