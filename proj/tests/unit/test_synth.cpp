#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cuboidtrack/synth.hpp"
#include "cuboidtrack/tracker.hpp"
#include "doctest.h"

using namespace ct;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("cuboidtrack_synth_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Cuboid box(double x, double y, double z, double l, double w, double h) {
  return Cuboid(Vec3{x, y, z}, Vec3{l, w, h});
}

// Eight well-separated boxes on a 4x2 grid, anchored at z = 1.5 so every
// trajectory keeps them in front of the camera.
std::vector<ScenarioObject> eight_objects() {
  return {
      {1, box(0.0, 0.0, 1.5, 0.30, 0.30, 0.40)},
      {2, box(1.2, 0.0, 1.5, 0.40, 0.30, 0.25)},
      {3, box(2.4, 0.0, 1.5, 0.35, 0.35, 0.35)},
      {4, box(3.6, 0.0, 1.5, 0.25, 0.40, 0.30)},
      {5, box(0.0, 1.2, 1.5, 0.45, 0.25, 0.30)},
      {6, box(1.2, 1.2, 1.5, 0.30, 0.45, 0.50)},
      {7, box(2.4, 1.2, 1.5, 0.40, 0.40, 0.28)},
      {8, box(3.6, 1.2, 1.5, 0.33, 0.27, 0.45)},
  };
}

Scenario base_scenario(int frames, std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.objects = eight_objects();
  sc.trajectory.assign(static_cast<std::size_t>(frames), Pose{});
  auto at = [frames](double f) { return static_cast<std::int64_t>(frames * f); };
  sc.occlusions = {{3, at(0.15), at(0.30)},
                   {5, at(0.40), at(0.55)},
                   {7, at(0.65), at(0.80)}};
  return sc;
}

TrackFile run_tracker(const SceneFile& scene, const TrackerConfig& cfg) {
  Registry reg;
  TrackFile tf;
  tf.config = cfg;
  for (const FrameObservation& frame : scene.frames) {
    FrameOutcome outcome = process_frame(frame, std::move(reg), cfg);
    reg = std::move(outcome.registry);
    tf.frames.push_back(FrameMatches{frame.frame_index, std::move(outcome.matches)});
  }
  tf.registry = std::move(reg);
  return tf;
}

}  // namespace

TEST_CASE("rng streams are reproducible and well ranged") {
  Rng a(99), b(99), c(100);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double va = a.uniform01();
    all_equal = all_equal && va == b.uniform01();
    any_diff = any_diff || va != c.uniform01();
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);

  // normals roughly centered with unit-ish spread
  Rng g(7);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = g.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("zero-noise identity trajectory reproduces the world boxes") {
  Scenario sc = base_scenario(30, 1);
  sc.occlusions.clear();
  const GeneratedScene g = generate(sc);
  REQUIRE(g.scene.frames.size() == 30);
  for (const FrameObservation& frame : g.scene.frames) {
    REQUIRE(frame.proposals.size() == sc.objects.size());
    for (std::size_t i = 0; i < sc.objects.size(); ++i) {
      CHECK(frame.proposals[i] == sc.objects[i].box);
    }
  }
  for (const auto& ids : g.truth.frame_ids) {
    REQUIRE(ids.size() == 8);
    CHECK(ids.front() == 1);
    CHECK(ids.back() == 8);
  }
}

TEST_CASE("occluded objects emit no proposals inside their window") {
  Scenario sc = base_scenario(30, 2);
  sc.occlusions = {{3, 10, 20}};
  const GeneratedScene g = generate(sc);
  for (std::size_t f = 0; f < g.truth.frame_ids.size(); ++f) {
    const bool has3 =
        std::find(g.truth.frame_ids[f].begin(), g.truth.frame_ids[f].end(), 3) !=
        g.truth.frame_ids[f].end();
    if (f >= 10 && f <= 20) {
      CHECK_FALSE(has3);
      CHECK(g.scene.frames[f].proposals.size() == 7);
    } else {
      CHECK(has3);
    }
  }
}

TEST_CASE("generation is deterministic under the seed") {
  Scenario sc = base_scenario(20, 77);
  sc.noise = {0.01, 0.005, 0.1};
  const GeneratedScene a = generate(sc);
  const GeneratedScene b = generate(sc);
  CHECK(a.scene == b.scene);
  CHECK(a.truth == b.truth);

  const fs::path pa = test_dir() / "a.scene.jsonl";
  const fs::path pb = test_dir() / "b.scene.jsonl";
  write_scene(pa.string(), a.scene);
  write_scene(pb.string(), b.scene);
  CHECK(slurp(pa) == slurp(pb));

  sc.seed = 78;
  const GeneratedScene c = generate(sc);
  CHECK(a.scene.frames != c.scene.frames);
}

TEST_CASE("jitter moves proposals but respects the extent floor") {
  Scenario sc = base_scenario(10, 3);
  sc.occlusions.clear();
  sc.noise.anchor_sigma = 0.01;
  const GeneratedScene g = generate(sc);
  bool moved = false;
  for (std::size_t f = 0; f < g.scene.frames.size(); ++f) {
    for (std::size_t i = 0; i < g.scene.frames[f].proposals.size(); ++i) {
      const Cuboid& p = g.scene.frames[f].proposals[i];
      moved = moved || p.anchor != sc.objects[i].box.anchor;
      CHECK(p.extents == sc.objects[i].box.extents);  // extent jitter off
    }
  }
  CHECK(moved);
}

TEST_CASE("dropout removes roughly the configured share") {
  Scenario sc = base_scenario(200, 4);
  sc.occlusions.clear();
  sc.noise.dropout = 0.4;
  const GeneratedScene g = generate(sc);
  std::size_t emitted = 0;
  for (const auto& ids : g.truth.frame_ids) emitted += ids.size();
  const double rate =
      1.0 - static_cast<double>(emitted) / (200.0 * 8.0);
  CHECK(rate > 0.35);
  CHECK(rate < 0.45);
}

TEST_CASE("scenario validation") {
  Scenario sc = base_scenario(10, 5);
  sc.noise.extent_sigma = 0.25 / 4.0;  // exactly min extent / 4
  CHECK_THROWS_AS(generate(sc), Error);

  sc = base_scenario(10, 5);
  sc.occlusions = {{3, 5, 10}};  // last == frames, out of range
  CHECK_THROWS_AS(generate(sc), Error);

  sc = base_scenario(10, 5);
  sc.occlusions = {{99, 1, 2}};
  CHECK_THROWS_AS(generate(sc), Error);

  sc = base_scenario(10, 5);
  sc.objects.push_back(sc.objects.front());  // duplicate id
  CHECK_THROWS_AS(generate(sc), Error);

  sc = base_scenario(10, 5);
  sc.noise.dropout = 1.0;
  CHECK_THROWS_AS(generate(sc), Error);
}

TEST_CASE("scenario files load and expand trajectories") {
  const fs::path path = test_dir() / "scenario.json";
  std::ofstream(path) << R"({
    "seed": 5,
    "voxel_size": 0.03,
    "objects": [
      {"id": 1, "box": [0, 0, 1.5, 0.4, 0.4, 0.4, 0, 0, 0]},
      {"id": 2, "box": [2, 0, 1.5, 0.5, 0.3, 0.6, 0, 0, 0]}
    ],
    "trajectory": {"kind": "quarter_turns", "frames": 40, "radius": 3.0, "height": 0.5},
    "occlusions": [{"object": 2, "first": 10, "last": 20}],
    "noise": {"anchor_sigma": 0.0, "extent_sigma": 0.0, "dropout": 0.0},
    "depth_samples_per_object": 3
  })";
  const Scenario sc = load_scenario(path.string());
  CHECK(sc.seed == 5);
  CHECK(sc.header.voxel_size == 0.03);
  CHECK(sc.trajectory.size() == 40);
  CHECK(sc.occlusions.size() == 1);
  CHECK(sc.depth_samples_per_object == 3);

  // headings really are quarter turns: orthonormal with axis-aligned entries
  for (const Pose& p : sc.trajectory) {
    for (double v : p.rotation.m) {
      CHECK((v == 0.0 || v == 1.0 || v == -1.0));
    }
  }

  const GeneratedScene g = generate(sc);
  CHECK(g.scene.frames.size() == 40);
  std::size_t depth_total = 0;
  for (const auto& f : g.scene.frames) depth_total += f.depth_samples.size();
  CHECK(depth_total > 0);

  SUBCASE("line and static kinds") {
    const fs::path p2 = test_dir() / "scenario2.json";
    std::ofstream(p2) << R"({
      "seed": 1,
      "objects": [{"id": 1, "box": [0, 0, 1.5, 0.4, 0.4, 0.4, 0, 0, 0]}],
      "trajectory": {"kind": "line", "frames": 5, "from": [0, 0, 0], "to": [1, 0, 0]}
    })";
    const Scenario line = load_scenario(p2.string());
    CHECK(line.trajectory.size() == 5);
    CHECK(line.trajectory.front().translation == Vec3{0, 0, 0});
    CHECK(line.trajectory.back().translation == Vec3{1, 0, 0});

    const fs::path p3 = test_dir() / "scenario3.json";
    std::ofstream(p3) << R"({
      "seed": 1,
      "objects": [{"id": 1, "box": [0, 0, 1.5, 0.4, 0.4, 0.4, 0, 0, 0]}],
      "trajectory": {"kind": "static", "frames": 3}
    })";
    CHECK(load_scenario(p3.string()).trajectory.size() == 3);
  }

  SUBCASE("malformed scenarios name the problem") {
    const fs::path bad = test_dir() / "bad_scenario.json";
    std::ofstream(bad) << R"({"seed": 1, "objects": [], "trajectory": {"kind": "static", "frames": 3}})";
    CHECK_THROWS_AS(load_scenario(bad.string()), Error);

    std::ofstream(bad) << R"({"seed": 1, "objects": [{"id": 1, "box": [0,0,0,1,1,1,0,0,0]}], "trajectory": {"kind": "warp", "frames": 3}})";
    CHECK_THROWS_AS(load_scenario(bad.string()), Error);

    std::ofstream(bad) << R"(not json)";
    CHECK_THROWS_AS(load_scenario(bad.string()), Error);
  }
}

TEST_CASE("voxel oracle basics") {
  const Cuboid a = box(0, 0, 0, 2, 2, 2);
  CHECK(voxel_iou_oracle(a, a, 0.05) == 1.0);
  CHECK(voxel_iou_oracle(a, box(5, 0, 0, 2, 2, 2), 0.05) == 0.0);

  const Cuboid b = box(1, 1, 1, 2, 2, 2);
  CHECK(std::abs(voxel_iou_oracle(a, b, 0.01) - 1.0 / 15.0) <= 0.01);

  CHECK_THROWS_AS(voxel_iou_oracle(a, b, 0.5), Error);  // > min extent / 10
  CHECK_THROWS_AS(voxel_iou_oracle(a, b, 0.0), Error);
  const Cuboid rotated(Vec3{0, 0, 0}, Vec3{2, 2, 2}, RotationEuler{0, 0, 0.4});
  CHECK_THROWS_AS(voxel_iou_oracle(a, rotated, 0.01), Error);
}

TEST_CASE("factorized counts match a literal 3D rasterization") {
  // tiny boxes so the cubic scan stays cheap
  const Cuboid a = box(0, 0, 0, 0.6, 0.5, 0.4);
  const Cuboid b = box(0.2, 0.1, 0.15, 0.5, 0.6, 0.4);
  const double pitch = 0.04;
  const VoxelCounts counts = voxel_rasterize(a, b, pitch);

  const Vec3 lo = component_min(a.anchor, b.anchor);
  const Vec3 hi = component_max(a.max_corner(), b.max_corner());
  auto inside = [](const Cuboid& c, const Vec3& p) {
    const Vec3 mc = c.max_corner();
    return p.x >= c.anchor.x && p.x < mc.x && p.y >= c.anchor.y &&
           p.y < mc.y && p.z >= c.anchor.z && p.z < mc.z;
  };
  std::int64_t n_a = 0, n_b = 0, n_and = 0, n_or = 0;
  const auto cells = [&](int axis) {
    return static_cast<std::int64_t>(std::ceil((hi[axis] - lo[axis]) / pitch));
  };
  for (std::int64_t i = 0; i < cells(0); ++i) {
    for (std::int64_t j = 0; j < cells(1); ++j) {
      for (std::int64_t k = 0; k < cells(2); ++k) {
        const Vec3 p{lo.x + (static_cast<double>(i) + 0.5) * pitch,
                     lo.y + (static_cast<double>(j) + 0.5) * pitch,
                     lo.z + (static_cast<double>(k) + 0.5) * pitch};
        const bool ia = inside(a, p), ib = inside(b, p);
        n_a += ia;
        n_b += ib;
        n_and += ia && ib;
        n_or += ia || ib;
      }
    }
  }
  CHECK(counts.count_a() == n_a);
  CHECK(counts.count_b() == n_b);
  CHECK(counts.count_intersection() == n_and);
  CHECK(counts.count_union() == n_or);
}

TEST_CASE("oracle agrees with the analytic iou on random pairs") {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 150; ++i) {
    const Cuboid a = box(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                         rng.uniform(2.5, 4.0), rng.uniform(2.5, 4.0),
                         rng.uniform(2.5, 4.0));
    const Cuboid b(
        a.anchor + Vec3{rng.uniform(0, 0.2) * a.extents.x,
                        rng.uniform(0, 0.2) * a.extents.y,
                        rng.uniform(0, 0.2) * a.extents.z},
        Vec3{rng.uniform(2.5, 4.0), rng.uniform(2.5, 4.0), rng.uniform(2.5, 4.0)});
    const double oracle = voxel_iou_oracle(a, b, 0.01);
    const double analytic = iou3d(a, b, UnionMode::inclusion_exclusion);
    worst = std::max(worst, std::abs(oracle - analytic));
  }
  CHECK(worst <= 0.02);

  // the paper-form union is checked per factor instead: intersection volume
  // and per-axis union lengths
  const Cuboid a = box(0, 0, 0, 2, 2, 2);
  const Cuboid b = box(1, 1, 1, 2, 2, 2);
  const VoxelCounts counts = voxel_rasterize(a, b, 0.01);
  CHECK(std::abs(counts.intersection_volume() - cuboid_intersection_volume(a, b)) <= 0.05);
  double product = 1.0;
  for (int axis = 0; axis < 3; ++axis) product *= counts.axis_union_length(axis);
  CHECK(std::abs(product - cuboid_union_volume(a, b, UnionMode::axis_product)) <= 0.30);
}

TEST_CASE("evaluate scores perfect tracking as perfect") {
  TrackFile tf;
  Registry reg;
  reg.register_new(box(0, 0, 0, 1, 1, 1), 0);
  reg.register_new(box(5, 0, 0, 1, 1, 1), 0);
  GroundTruthLabels truth;
  truth.object_ids = {10, 20};
  for (int f = 0; f < 3; ++f) {
    tf.frames.push_back(FrameMatches{
        f, {MatchResult{0, 1, f == 0 ? 0.0 : 1.0, f == 0},
            MatchResult{1, 2, f == 0 ? 0.0 : 1.0, f == 0}}});
    truth.frame_ids.push_back({10, 20});
  }
  tf.registry = reg;
  const Metrics m = evaluate(tf, truth);
  CHECK(m.consistency == 1.0);
  CHECK(m.id_switches == 0);
  CHECK(m.reid_success == 1.0);
  CHECK(m.count_error == 0);
  CHECK(metrics_machine_line(m) ==
        "consistency=1.000 switches=0 reid=1.000 count_err=0");
}

TEST_CASE("evaluate charges a fresh-label-per-frame tracker in full") {
  TrackFile tf;
  Registry reg;
  GroundTruthLabels truth;
  truth.object_ids = {1, 2};
  for (int f = 0; f < 10; ++f) {
    const std::uint64_t l1 = reg.register_new(box(0, 0, 0, 1, 1, 1), f);
    const std::uint64_t l2 = reg.register_new(box(5, 0, 0, 1, 1, 1), f);
    tf.frames.push_back(FrameMatches{f, {MatchResult{0, l1, 0.0, true},
                                         MatchResult{1, l2, 0.0, true}}});
    truth.frame_ids.push_back({1, 2});
  }
  tf.registry = reg;
  const Metrics m = evaluate(tf, truth);
  CHECK(m.consistency == 0.0);
  CHECK(m.count_error == 18);
  CHECK(m.id_switches == 18);  // modal label keeps one frame per object
}

TEST_CASE("one mid-sequence relabel costs exactly one switch") {
  TrackFile tf;
  Registry reg;
  reg.register_new(box(0, 0, 0, 1, 1, 1), 0);
  reg.register_new(box(0, 0, 0, 1, 1, 1), 7);
  GroundTruthLabels truth;
  truth.object_ids = {4};
  for (int f = 0; f < 8; ++f) {
    const std::uint64_t label = f == 7 ? 2 : 1;
    tf.frames.push_back(FrameMatches{f, {MatchResult{0, label, 0.5, f == 7}}});
    truth.frame_ids.push_back({4});
  }
  tf.registry = reg;
  const Metrics m = evaluate(tf, truth);
  CHECK(m.id_switches == 1);
  CHECK(m.consistency == 0.0);
  CHECK(m.count_error == 1);
}

TEST_CASE("evaluate rejects mismatched inputs") {
  TrackFile tf;
  tf.registry = Registry{};
  GroundTruthLabels truth;
  truth.frame_ids = {{1}};
  CHECK_THROWS_AS(evaluate(tf, truth), Error);

  tf.frames.push_back(FrameMatches{0, {}});
  truth.frame_ids = {{1}};
  CHECK_THROWS_AS(evaluate(tf, truth), Error);
}

TEST_CASE("noise-free end-to-end run is perfect") {
  Scenario sc = base_scenario(120, 6);
  const GeneratedScene g = generate(sc);
  const TrackFile tf = run_tracker(g.scene, TrackerConfig{});
  const Metrics m = evaluate(tf, g.truth);
  CHECK(m.consistency == 1.0);
  CHECK(m.id_switches == 0);
  CHECK(m.reid_success == 1.0);
  CHECK(m.evaluated_windows == 3);
  CHECK(m.count_error == 0);
  // first frame labels follow input order 1..8
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(tf.frames[0].matches[i].assigned_label == i + 1);
  }
}

TEST_CASE("re-id success degrades monotonically with anchor jitter") {
  const double sigmas[] = {0.0, 0.01, 0.02, 0.04};
  double previous = 2.0;
  for (const double sigma : sigmas) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Scenario sc = base_scenario(120, seed);
      sc.noise.anchor_sigma = sigma;
      const GeneratedScene g = generate(sc);
      const TrackFile tf = run_tracker(g.scene, TrackerConfig{});
      total += evaluate(tf, g.truth).reid_success;
    }
    const double mean = total / 20.0;
    CHECK(mean <= previous + 1e-12);
    previous = mean;
  }
}
