#include "cuboidtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace ct {

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

constexpr double kExtentFloor = 1e-3;  // jittered extents never collapse

double min_extent(const std::vector<ScenarioObject>& objects) {
  double m = std::numeric_limits<double>::infinity();
  for (const ScenarioObject& o : objects) {
    m = std::min({m, o.box.extents.x, o.box.extents.y, o.box.extents.z});
  }
  return m;
}

}  // namespace

void Scenario::validate() const {
  if (objects.empty()) {
    fail(ErrorKind::invalid_argument, "scenario needs at least one object");
  }
  if (trajectory.empty()) {
    fail(ErrorKind::invalid_argument, "scenario needs at least one pose");
  }
  std::set<std::uint64_t> ids;
  for (const ScenarioObject& o : objects) {
    if (o.id == 0) {
      fail(ErrorKind::invalid_argument, "object ids must be positive");
    }
    if (!ids.insert(o.id).second) {
      fail(ErrorKind::invalid_argument,
           "duplicate object id " + std::to_string(o.id));
    }
    if (!o.box.rotation.is_zero()) {
      fail(ErrorKind::invalid_argument,
           "world boxes must be gravity-aligned (rotation zero)");
    }
  }
  const auto frames = static_cast<std::int64_t>(trajectory.size());
  for (const OcclusionWindow& w : occlusions) {
    if (!ids.contains(w.object_id)) {
      fail(ErrorKind::invalid_argument,
           "occlusion window names unknown object " + std::to_string(w.object_id));
    }
    if (w.first < 0 || w.last < w.first || w.last >= frames) {
      std::ostringstream msg;
      msg << "occlusion window [" << w.first << ", " << w.last
          << "] outside trajectory of " << frames << " frames";
      fail(ErrorKind::invalid_argument, msg.str());
    }
  }
  if (!std::isfinite(noise.anchor_sigma) || noise.anchor_sigma < 0.0 ||
      !std::isfinite(noise.extent_sigma) || noise.extent_sigma < 0.0) {
    fail(ErrorKind::invalid_argument, "noise sigmas must be non-negative");
  }
  if (!std::isfinite(noise.dropout) || noise.dropout < 0.0 || noise.dropout >= 1.0) {
    fail(ErrorKind::invalid_argument, "dropout must be within [0, 1)");
  }
  if (noise.extent_sigma > 0.0 && noise.extent_sigma >= min_extent(objects) / 4.0) {
    std::ostringstream msg;
    msg << "extent_sigma " << noise.extent_sigma
        << " risks non-positive extents; must be below min extent / 4 ("
        << min_extent(objects) / 4.0 << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  if (depth_samples_per_object < 0) {
    fail(ErrorKind::invalid_argument, "depth_samples_per_object must be >= 0");
  }
  if (!std::isfinite(header.voxel_size) || header.voxel_size <= 0.0) {
    fail(ErrorKind::invalid_argument, "voxel_size must be positive");
  }
}

GeneratedScene generate(const Scenario& scenario) {
  scenario.validate();
  Rng rng(scenario.seed);

  // Per-object occlusion mask over the whole trajectory.
  const std::size_t n_frames = scenario.trajectory.size();
  std::unordered_map<std::uint64_t, std::vector<bool>> occluded;
  for (const ScenarioObject& o : scenario.objects) {
    occluded.emplace(o.id, std::vector<bool>(n_frames, false));
  }
  for (const OcclusionWindow& w : scenario.occlusions) {
    std::vector<bool>& mask = occluded.at(w.object_id);
    for (std::int64_t f = w.first; f <= w.last; ++f) {
      mask[static_cast<std::size_t>(f)] = true;
    }
  }

  GeneratedScene out;
  out.scene.header = scenario.header;
  out.scene.header.seed = scenario.seed;
  for (const ScenarioObject& o : scenario.objects) {
    out.truth.object_ids.push_back(o.id);
  }
  out.truth.occlusions = scenario.occlusions;

  for (std::size_t f = 0; f < n_frames; ++f) {
    const Pose& pose = scenario.trajectory[f];
    const Pose inverse = pose.inverse();
    FrameObservation frame;
    frame.frame_index = static_cast<std::int64_t>(f);
    frame.pose = pose;
    std::vector<std::uint64_t> ids;

    for (const ScenarioObject& o : scenario.objects) {
      if (occluded.at(o.id)[f]) continue;
      const bool dropped = rng.uniform01() < scenario.noise.dropout;
      if (dropped) continue;

      Cuboid camera_box = transform_to_global(o.box, inverse);
      // Jitter draws are consumed even at sigma zero so a seed produces the
      // same stream across noise settings.
      const Vec3 anchor_jitter{rng.normal(), rng.normal(), rng.normal()};
      const Vec3 extent_jitter{rng.normal(), rng.normal(), rng.normal()};
      if (scenario.noise.anchor_sigma > 0.0 || scenario.noise.extent_sigma > 0.0) {
        Vec3 anchor = camera_box.anchor + anchor_jitter * scenario.noise.anchor_sigma;
        Vec3 extents = camera_box.extents + extent_jitter * scenario.noise.extent_sigma;
        for (int axis = 0; axis < 3; ++axis) {
          extents[axis] = std::max(extents[axis], kExtentFloor);
        }
        camera_box = Cuboid(anchor, extents);
      }
      frame.proposals.push_back(camera_box);
      ids.push_back(o.id);

      for (int s = 0; s < scenario.depth_samples_per_object; ++s) {
        const Vec3 world{
            o.box.anchor.x + rng.uniform01() * o.box.extents.x,
            o.box.anchor.y + rng.uniform01() * o.box.extents.y,
            o.box.anchor.z + rng.uniform01() * o.box.extents.z};
        const Vec3 camera = inverse.apply(world);
        if (camera.z <= 1e-6) continue;  // behind the camera, not imaged
        const Pixel px = project(camera, scenario.header.intrinsics);
        frame.depth_samples.push_back(DepthSample{px.u, px.v, camera.z});
      }
    }
    out.scene.frames.push_back(std::move(frame));
    out.truth.frame_ids.push_back(std::move(ids));
  }
  return out;
}

// ---------------------------------------------------------------------------
// scenario config files

namespace {

using json = nlohmann::json;

[[noreturn]] void fail_field(const std::string& path, const std::string& detail) {
  fail(ErrorKind::parse, path + ": " + detail);
}

double get_number(const json& j, const char* name, const std::string& path) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_number()) {
    fail_field(path, std::string("field '") + name + "' must be a number");
  }
  return it->get<double>();
}

std::vector<Pose> expand_trajectory(const json& j, const std::string& path) {
  if (!j.is_object()) {
    fail_field(path, "field 'trajectory' must be an object");
  }
  auto kind_it = j.find("kind");
  if (kind_it == j.end() || !kind_it->is_string()) {
    fail_field(path, "trajectory field 'kind' must be a string");
  }
  const std::string kind = kind_it->get<std::string>();
  std::vector<Pose> poses;

  if (kind == "poses") {
    auto it = j.find("poses");
    if (it == j.end() || !it->is_array() || it->empty()) {
      fail_field(path, "trajectory 'poses' must be a non-empty array");
    }
    for (const json& p : *it) {
      auto rot = p.find("rotation");
      auto tr = p.find("translation");
      if (rot == p.end() || !rot->is_array() || rot->size() != 9 ||
          tr == p.end() || !tr->is_array() || tr->size() != 3) {
        fail_field(path, "each pose needs rotation[9] and translation[3]");
      }
      Mat3 m;
      for (int i = 0; i < 9; ++i) {
        if (!(*rot)[i].is_number()) fail_field(path, "pose rotation must be numeric");
        m.m[static_cast<std::size_t>(i)] = (*rot)[i].get<double>();
      }
      Vec3 t;
      for (int i = 0; i < 3; ++i) {
        if (!(*tr)[i].is_number()) fail_field(path, "pose translation must be numeric");
        t[i] = (*tr)[i].get<double>();
      }
      try {
        poses.emplace_back(m, t);
      } catch (const Error& e) {
        fail_field(path, std::string("invalid pose: ") + e.what());
      }
    }
    return poses;
  }

  auto frames_it = j.find("frames");
  if (frames_it == j.end() || !frames_it->is_number_integer() ||
      frames_it->get<std::int64_t>() <= 0) {
    fail_field(path, "trajectory field 'frames' must be a positive integer");
  }
  const std::int64_t frames = frames_it->get<std::int64_t>();

  if (kind == "static") {
    poses.assign(static_cast<std::size_t>(frames), Pose{});
    return poses;
  }
  if (kind == "line") {
    Vec3 from, to;
    auto read_vec = [&](const char* name, Vec3& v) {
      auto it = j.find(name);
      if (it == j.end() || !it->is_array() || it->size() != 3) {
        fail_field(path, std::string("trajectory field '") + name + "' must be [x, y, z]");
      }
      for (int i = 0; i < 3; ++i) {
        if (!(*it)[i].is_number()) fail_field(path, "trajectory endpoints must be numeric");
        v[i] = (*it)[i].get<double>();
      }
    };
    read_vec("from", from);
    read_vec("to", to);
    for (std::int64_t f = 0; f < frames; ++f) {
      const double s = frames == 1 ? 0.0
                                   : static_cast<double>(f) /
                                         static_cast<double>(frames - 1);
      poses.emplace_back(Mat3::identity(), from + (to - from) * s);
    }
    return poses;
  }
  if (kind == "quarter_turns") {
    // Walks the camera around a square while facing quarter-turn headings;
    // the axis-aligned rotations keep box hulls exact under the transforms.
    const double radius = j.contains("radius") ? get_number(j, "radius", path) : 2.0;
    const double height = j.contains("height") ? get_number(j, "height", path) : 0.5;
    Mat3 turn;  // 90 degrees about z
    turn.m = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    const std::array<Mat3, 4> headings{Mat3::identity(), turn, turn * turn,
                                       turn * turn * turn};
    const std::array<Vec3, 4> corners{Vec3{radius, radius, height},
                                      Vec3{-radius, radius, height},
                                      Vec3{-radius, -radius, height},
                                      Vec3{radius, -radius, height}};
    for (std::int64_t f = 0; f < frames; ++f) {
      const double phase = 4.0 * static_cast<double>(f) / static_cast<double>(frames);
      const int seg = std::min(3, static_cast<int>(phase));
      const double s = phase - seg;
      const Vec3 a = corners[static_cast<std::size_t>(seg)];
      const Vec3 b = corners[static_cast<std::size_t>((seg + 1) % 4)];
      poses.emplace_back(headings[static_cast<std::size_t>(seg)], a + (b - a) * s);
    }
    return poses;
  }
  fail_field(path, "unknown trajectory kind '" + kind +
                       "' (expected static|line|quarter_turns|poses)");
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, path + ": malformed scenario: " + e.what());
  }
  if (!j.is_object()) fail_field(path, "scenario must be a JSON object");

  Scenario sc;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned()) {
      fail_field(path, "field 'seed' must be an integer");
    }
    sc.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("intrinsics")) {
    const json& k = j["intrinsics"];
    try {
      sc.header.intrinsics =
          Intrinsics(get_number(k, "fx", path), get_number(k, "fy", path),
                     get_number(k, "cx", path), get_number(k, "cy", path));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse) throw;
      fail_field(path, e.what());
    }
  }
  if (j.contains("voxel_size")) {
    sc.header.voxel_size = get_number(j, "voxel_size", path);
  }

  auto objs = j.find("objects");
  if (objs == j.end() || !objs->is_array() || objs->empty()) {
    fail_field(path, "field 'objects' must be a non-empty array");
  }
  for (std::size_t i = 0; i < objs->size(); ++i) {
    const json& o = (*objs)[i];
    const std::string octx = "object " + std::to_string(i);
    auto id_it = o.find("id");
    if (id_it == o.end() || !id_it->is_number_integer() ||
        id_it->get<std::int64_t>() <= 0) {
      fail_field(path, octx + ": field 'id' must be a positive integer");
    }
    auto box_it = o.find("box");
    if (box_it == o.end() || !box_it->is_array() || box_it->size() != 9) {
      fail_field(path, octx + ": field 'box' must be an array of 9 numbers");
    }
    std::array<double, 9> v{};
    for (int c = 0; c < 9; ++c) {
      if (!(*box_it)[c].is_number()) {
        fail_field(path, octx + ": field 'box' must be numeric");
      }
      v[static_cast<std::size_t>(c)] = (*box_it)[c].get<double>();
    }
    try {
      sc.objects.push_back(ScenarioObject{
          id_it->get<std::uint64_t>(),
          Cuboid(Vec3{v[0], v[1], v[2]}, Vec3{v[3], v[4], v[5]},
                 RotationEuler{v[6], v[7], v[8]})});
    } catch (const Error& e) {
      fail_field(path, octx + ": " + e.what());
    }
  }

  auto traj = j.find("trajectory");
  if (traj == j.end()) fail_field(path, "field 'trajectory' is required");
  sc.trajectory = expand_trajectory(*traj, path);

  if (j.contains("occlusions")) {
    const json& occ = j["occlusions"];
    if (!occ.is_array()) fail_field(path, "field 'occlusions' must be an array");
    for (std::size_t i = 0; i < occ.size(); ++i) {
      const json& w = occ[i];
      const std::string wctx = "occlusion " + std::to_string(i);
      auto need_int = [&](const char* name) {
        auto it = w.find(name);
        if (it == w.end() || !it->is_number_integer()) {
          fail_field(path, wctx + ": field '" + name + "' must be an integer");
        }
        return it->get<std::int64_t>();
      };
      OcclusionWindow window;
      const std::int64_t id = need_int("object");
      if (id <= 0) fail_field(path, wctx + ": object id must be positive");
      window.object_id = static_cast<std::uint64_t>(id);
      window.first = need_int("first");
      window.last = need_int("last");
      sc.occlusions.push_back(window);
    }
  }

  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (n.contains("anchor_sigma")) sc.noise.anchor_sigma = get_number(n, "anchor_sigma", path);
    if (n.contains("extent_sigma")) sc.noise.extent_sigma = get_number(n, "extent_sigma", path);
    if (n.contains("dropout")) sc.noise.dropout = get_number(n, "dropout", path);
  }
  if (j.contains("depth_samples_per_object")) {
    if (!j["depth_samples_per_object"].is_number_integer()) {
      fail_field(path, "field 'depth_samples_per_object' must be an integer");
    }
    sc.depth_samples_per_object =
        static_cast<int>(j["depth_samples_per_object"].get<std::int64_t>());
  }

  try {
    sc.validate();
  } catch (const Error& e) {
    fail(ErrorKind::parse, path + ": " + e.what());
  }
  return sc;
}

// ---------------------------------------------------------------------------
// voxel-count oracle

VoxelCounts voxel_rasterize(const Cuboid& a, const Cuboid& b, double pitch) {
  if (!a.rotation.is_zero() || !b.rotation.is_zero()) {
    fail(ErrorKind::invalid_argument, "voxel oracle requires axis-aligned boxes");
  }
  if (!std::isfinite(pitch) || pitch <= 0.0) {
    fail(ErrorKind::invalid_argument, "pitch must be positive");
  }
  const double smallest =
      std::min({a.extents.x, a.extents.y, a.extents.z, b.extents.x,
                b.extents.y, b.extents.z});
  if (pitch > smallest / 10.0) {
    std::ostringstream msg;
    msg << "pitch " << pitch << " too coarse for min extent " << smallest
        << " (must be <= extent / 10)";
    fail(ErrorKind::invalid_argument, msg.str());
  }

  VoxelCounts counts;
  counts.pitch = pitch;
  for (int axis = 0; axis < 3; ++axis) {
    const double a_lo = a.anchor[axis];
    const double a_hi = a_lo + a.extents[axis];
    const double b_lo = b.anchor[axis];
    const double b_hi = b_lo + b.extents[axis];
    const double lo = std::min(a_lo, b_lo);
    const double hi = std::max(a_hi, b_hi);
    const auto cells = static_cast<std::int64_t>(std::ceil((hi - lo) / pitch));
    std::int64_t na = 0, nb = 0, nboth = 0, neither = 0;
    for (std::int64_t kcell = 0; kcell < cells; ++kcell) {
      const double center = lo + (static_cast<double>(kcell) + 0.5) * pitch;
      const bool ina = center >= a_lo && center < a_hi;
      const bool inb = center >= b_lo && center < b_hi;
      na += ina;
      nb += inb;
      nboth += ina && inb;
      neither += ina || inb;
    }
    counts.in_a[axis] = na;
    counts.in_b[axis] = nb;
    counts.in_both[axis] = nboth;
    counts.in_either[axis] = neither;
  }
  return counts;
}

double voxel_iou_oracle(const Cuboid& a, const Cuboid& b, double pitch) {
  return voxel_rasterize(a, b, pitch).iou();
}

// ---------------------------------------------------------------------------
// metrics

Metrics evaluate(const TrackFile& tracks, const GroundTruthLabels& truth) {
  if (tracks.frames.size() != truth.frame_ids.size()) {
    std::ostringstream msg;
    msg << "frame count mismatch: tracks has " << tracks.frames.size()
        << ", truth has " << truth.frame_ids.size();
    fail(ErrorKind::invalid_argument, msg.str());
  }

  // object id -> ordered (frame, assigned label) observations
  std::map<std::uint64_t, std::vector<std::pair<std::int64_t, std::uint64_t>>>
      observations;
  for (std::size_t f = 0; f < tracks.frames.size(); ++f) {
    const FrameMatches& fm = tracks.frames[f];
    const std::vector<std::uint64_t>& ids = truth.frame_ids[f];
    if (fm.matches.size() != ids.size()) {
      std::ostringstream msg;
      msg << "frame " << fm.frame_index << ": tracks has " << fm.matches.size()
          << " results but truth lists " << ids.size() << " proposals";
      fail(ErrorKind::invalid_argument, msg.str());
    }
    for (const MatchResult& m : fm.matches) {
      if (m.proposal_index >= ids.size()) {
        fail(ErrorKind::invalid_argument, "match proposal index out of range");
      }
      observations[ids[m.proposal_index]].emplace_back(fm.frame_index,
                                                       m.assigned_label);
    }
  }

  Metrics metrics;

  std::size_t consistent = 0;
  for (const auto& [id, obs] : observations) {
    bool constant = true;
    for (const auto& [frame, label] : obs) {
      constant = constant && label == obs.front().second;
    }
    consistent += constant;

    // Modal label: most frequent, smallest on ties.
    std::map<std::uint64_t, std::size_t> counts;
    for (const auto& [frame, label] : obs) ++counts[label];
    std::uint64_t modal = obs.front().second;
    std::size_t best = 0;
    for (const auto& [label, count] : counts) {
      if (count > best) {
        best = count;
        modal = label;
      }
    }
    for (const auto& [frame, label] : obs) {
      metrics.id_switches += label != modal;
    }
  }
  metrics.consistency =
      observations.empty()
          ? 1.0
          : static_cast<double>(consistent) /
                static_cast<double>(observations.size());

  // Re-identification: label immediately before a window must be restored at
  // the first sighting after it. Windows with no sighting on either side
  // cannot be scored and are skipped.
  std::int64_t restored = 0;
  for (const OcclusionWindow& w : truth.occlusions) {
    auto it = observations.find(w.object_id);
    if (it == observations.end()) continue;
    const auto& obs = it->second;
    const std::pair<std::int64_t, std::uint64_t>* before = nullptr;
    const std::pair<std::int64_t, std::uint64_t>* after = nullptr;
    for (const auto& entry : obs) {
      if (entry.first < w.first) before = &entry;
      if (entry.first > w.last && after == nullptr) after = &entry;
    }
    if (before == nullptr || after == nullptr) continue;
    ++metrics.evaluated_windows;
    restored += before->second == after->second;
  }
  metrics.reid_success =
      metrics.evaluated_windows == 0
          ? 1.0
          : static_cast<double>(restored) /
                static_cast<double>(metrics.evaluated_windows);

  const auto issued = static_cast<std::int64_t>(tracks.registry.size());
  const auto true_objects = static_cast<std::int64_t>(truth.object_ids.size());
  metrics.count_error = std::abs(issued - true_objects);
  return metrics;
}

std::string metrics_machine_line(const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "consistency=%.3f switches=%lld reid=%.3f count_err=%lld",
                m.consistency, static_cast<long long>(m.id_switches),
                m.reid_success, static_cast<long long>(m.count_error));
  return buf;
}

}  // namespace ct
