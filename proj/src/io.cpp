#include "cuboidtrack/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace ct {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void fail_ctx(ErrorKind kind, const std::string& ctx,
                           const std::string& detail) {
  fail(kind, ctx + ": " + detail);
}

json parse_line(const std::string& line, const std::string& ctx) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    fail_ctx(ErrorKind::parse, ctx, std::string("malformed record: ") + e.what());
  }
}

const json& require_field(const json& j, const char* name,
                          const std::string& ctx) {
  auto it = j.find(name);
  if (it == j.end()) {
    fail_ctx(ErrorKind::parse, ctx, std::string("missing field '") + name + "'");
  }
  return *it;
}

double require_number(const json& j, const char* name, const std::string& ctx) {
  const json& v = require_field(j, name, ctx);
  if (!v.is_number()) {
    fail_ctx(ErrorKind::parse, ctx, std::string("field '") + name + "' must be a number");
  }
  return v.get<double>();
}

std::int64_t require_int(const json& j, const char* name,
                         const std::string& ctx) {
  const json& v = require_field(j, name, ctx);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    fail_ctx(ErrorKind::parse, ctx,
             std::string("field '") + name + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::uint64_t require_uint(const json& j, const char* name,
                           const std::string& ctx) {
  const std::int64_t v = require_int(j, name, ctx);
  if (v < 0) {
    fail_ctx(ErrorKind::parse, ctx,
             std::string("field '") + name + "' must be non-negative");
  }
  return static_cast<std::uint64_t>(v);
}

std::string require_string(const json& j, const char* name,
                           const std::string& ctx) {
  const json& v = require_field(j, name, ctx);
  if (!v.is_string()) {
    fail_ctx(ErrorKind::parse, ctx, std::string("field '") + name + "' must be a string");
  }
  return v.get<std::string>();
}

bool require_bool(const json& j, const char* name, const std::string& ctx) {
  const json& v = require_field(j, name, ctx);
  if (!v.is_boolean()) {
    fail_ctx(ErrorKind::parse, ctx, std::string("field '") + name + "' must be a boolean");
  }
  return v.get<bool>();
}

const json& require_array(const json& j, const char* name,
                          const std::string& ctx,
                          std::size_t expected = static_cast<std::size_t>(-1)) {
  const json& v = require_field(j, name, ctx);
  if (!v.is_array()) {
    fail_ctx(ErrorKind::parse, ctx, std::string("field '") + name + "' must be an array");
  }
  if (expected != static_cast<std::size_t>(-1) && v.size() != expected) {
    std::ostringstream msg;
    msg << "field '" << name << "' must have " << expected << " entries (got "
        << v.size() << ")";
    fail_ctx(ErrorKind::parse, ctx, msg.str());
  }
  return v;
}

std::vector<double> number_array(const json& arr, const char* name,
                                 const std::string& ctx) {
  std::vector<double> values;
  values.reserve(arr.size());
  for (const json& v : arr) {
    if (!v.is_number()) {
      fail_ctx(ErrorKind::parse, ctx,
               std::string("field '") + name + "' must contain numbers only");
    }
    values.push_back(v.get<double>());
  }
  return values;
}

void require_record_type(const json& j, const char* expected,
                         const std::string& ctx) {
  const std::string type = require_string(j, "type", ctx);
  if (type != expected) {
    fail_ctx(ErrorKind::parse, ctx,
             "expected record type '" + std::string(expected) + "', got '" + type + "'");
  }
}

ojson cuboid_to_json(const Cuboid& c) {
  return ojson::array({c.anchor.x, c.anchor.y, c.anchor.z, c.extents.x,
                       c.extents.y, c.extents.z, c.rotation.rx, c.rotation.ry,
                       c.rotation.rz});
}

Cuboid cuboid_from_array(const json& arr, const std::string& ctx) {
  if (!arr.is_array() || arr.size() != 9) {
    fail_ctx(ErrorKind::parse, ctx, "cuboid must be an array of 9 numbers");
  }
  const std::vector<double> v = number_array(arr, "cuboid", ctx);
  try {
    return Cuboid(Vec3{v[0], v[1], v[2]}, Vec3{v[3], v[4], v[5]},
                  RotationEuler{v[6], v[7], v[8]});
  } catch (const Error& e) {
    fail_ctx(ErrorKind::invariant, ctx, e.what());
  }
}

ojson pose_to_json(const Pose& p) {
  ojson o;
  o["rotation"] = p.rotation.m;
  o["translation"] = ojson::array({p.translation.x, p.translation.y, p.translation.z});
  return o;
}

Pose pose_from_json(const json& j, const std::string& ctx) {
  const json& rot = require_array(j, "rotation", ctx, 9);
  const json& tr = require_array(j, "translation", ctx, 3);
  const std::vector<double> r = number_array(rot, "rotation", ctx);
  const std::vector<double> t = number_array(tr, "translation", ctx);
  Mat3 m;
  std::copy(r.begin(), r.end(), m.m.begin());
  try {
    return Pose(m, Vec3{t[0], t[1], t[2]});
  } catch (const Error& e) {
    fail_ctx(ErrorKind::invariant, ctx, e.what());
  }
}

ojson intrinsics_to_json(const Intrinsics& k) {
  ojson o;
  o["fx"] = k.fx;
  o["fy"] = k.fy;
  o["cx"] = k.cx;
  o["cy"] = k.cy;
  return o;
}

Intrinsics intrinsics_from_json(const json& j, const std::string& ctx) {
  try {
    return Intrinsics(require_number(j, "fx", ctx), require_number(j, "fy", ctx),
                      require_number(j, "cx", ctx), require_number(j, "cy", ctx));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    fail_ctx(ErrorKind::invariant, ctx, e.what());
  }
}

std::string line_ctx(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
  return out;
}

void write_line(std::ofstream& out, const std::string& path, const ojson& record) {
  out << record.dump() << '\n';
  if (!out) fail(ErrorKind::io, "write failed on '" + path + "'");
}

ojson config_to_json(const TrackerConfig& cfg) {
  ojson o;
  o["tau"] = cfg.tau;
  o["assignment"] = to_token(cfg.assignment);
  o["union_mode"] = to_token(cfg.union_mode);
  o["fusion"] = to_token(cfg.fusion);
  o["fusion_alpha"] = cfg.fusion_alpha;
  return o;
}

TrackerConfig config_from_json(const json& j, const std::string& ctx) {
  TrackerConfig cfg;
  cfg.tau = require_number(j, "tau", ctx);
  cfg.assignment = assignment_from_token(require_string(j, "assignment", ctx));
  cfg.union_mode = union_mode_from_token(require_string(j, "union_mode", ctx));
  cfg.fusion = fusion_from_token(require_string(j, "fusion", ctx));
  cfg.fusion_alpha = require_number(j, "fusion_alpha", ctx);
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail_ctx(ErrorKind::invariant, ctx, e.what());
  }
  return cfg;
}

}  // namespace

std::string to_token(UnionMode mode) {
  return mode == UnionMode::axis_product ? "paper" : "ie";
}

std::string to_token(Assignment assignment) {
  return assignment == Assignment::greedy_one_to_one ? "greedy" : "argmax";
}

std::string to_token(FusionMode fusion) {
  return fusion == FusionMode::count_weighted ? "count_weighted" : "fixed";
}

UnionMode union_mode_from_token(const std::string& token) {
  if (token == "paper") return UnionMode::axis_product;
  if (token == "ie") return UnionMode::inclusion_exclusion;
  fail(ErrorKind::parse, "unknown union mode '" + token + "' (expected paper|ie)");
}

Assignment assignment_from_token(const std::string& token) {
  if (token == "greedy") return Assignment::greedy_one_to_one;
  if (token == "argmax") return Assignment::independent_argmax;
  fail(ErrorKind::parse,
       "unknown assignment '" + token + "' (expected greedy|argmax)");
}

FusionMode fusion_from_token(const std::string& token) {
  if (token == "count_weighted") return FusionMode::count_weighted;
  if (token == "fixed") return FusionMode::fixed_alpha;
  fail(ErrorKind::parse,
       "unknown fusion mode '" + token + "' (expected count_weighted|fixed)");
}

// ---------------------------------------------------------------------------
// scene files

SceneReader::SceneReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in_, line)) {
    fail(ErrorKind::parse, path + ": empty file, header record required");
  }
  ++line_number_;
  const std::string ctx = line_ctx(path_, line_number_);
  const json j = parse_line(line, ctx);
  require_record_type(j, "header", ctx);
  if (require_string(j, "format", ctx) != "scene") {
    fail_ctx(ErrorKind::parse, ctx, "format must be 'scene'");
  }
  header_.version = static_cast<int>(require_int(j, "version", ctx));
  if (header_.version != 1) {
    fail_ctx(ErrorKind::parse, ctx,
             "unrecognized version " + std::to_string(header_.version));
  }
  header_.intrinsics =
      intrinsics_from_json(require_field(j, "intrinsics", ctx), ctx);
  header_.voxel_size = require_number(j, "voxel_size", ctx);
  if (!std::isfinite(header_.voxel_size) || header_.voxel_size <= 0.0) {
    fail_ctx(ErrorKind::invariant, ctx, "voxel_size must be positive");
  }
  header_.seed = j.contains("seed") ? require_uint(j, "seed", ctx) : 0;
}

std::optional<FrameObservation> SceneReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (line.empty()) continue;
    const std::string ctx = line_ctx(path_, line_number_);
    const json j = parse_line(line, ctx);
    require_record_type(j, "frame", ctx);

    FrameObservation frame;
    frame.frame_index = require_int(j, "frame_index", ctx);
    if (frame.frame_index < 0) {
      fail_ctx(ErrorKind::invariant, ctx, "frame_index must be non-negative");
    }
    if (frame.frame_index <= last_frame_index_) {
      std::ostringstream msg;
      msg << "frame_index " << frame.frame_index
          << " does not increase (previous " << last_frame_index_ << ")";
      fail_ctx(ErrorKind::invariant, ctx, msg.str());
    }
    const std::string frame_ctx =
        ctx + ": frame " + std::to_string(frame.frame_index);
    frame.pose = pose_from_json(require_field(j, "pose", ctx), frame_ctx);
    const json& proposals = require_array(j, "proposals", ctx);
    frame.proposals.reserve(proposals.size());
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      frame.proposals.push_back(cuboid_from_array(
          proposals[i], frame_ctx + " proposal " + std::to_string(i)));
    }
    if (j.contains("depth")) {
      const json& depth = require_array(j, "depth", ctx);
      frame.depth_samples.reserve(depth.size());
      for (std::size_t i = 0; i < depth.size(); ++i) {
        const std::string sample_ctx =
            frame_ctx + " depth sample " + std::to_string(i);
        if (!depth[i].is_array() || depth[i].size() != 3) {
          fail_ctx(ErrorKind::parse, sample_ctx, "must be [u, v, z]");
        }
        const std::vector<double> v = number_array(depth[i], "depth", sample_ctx);
        if (!std::isfinite(v[0]) || !std::isfinite(v[1]) ||
            !std::isfinite(v[2]) || v[2] <= 0.0) {
          fail_ctx(ErrorKind::invariant, sample_ctx,
                   "u and v must be finite and z positive");
        }
        frame.depth_samples.push_back(DepthSample{v[0], v[1], v[2]});
      }
    }
    last_frame_index_ = frame.frame_index;
    return frame;
  }
  return std::nullopt;
}

SceneWriter::SceneWriter(const std::string& path, const SceneHeader& header)
    : path_(path), out_(open_for_write(path)) {
  ojson o;
  o["type"] = "header";
  o["format"] = "scene";
  o["version"] = header.version;
  o["intrinsics"] = intrinsics_to_json(header.intrinsics);
  o["voxel_size"] = header.voxel_size;
  o["seed"] = header.seed;
  write_line(out_, path_, o);
}

void SceneWriter::write_frame(const FrameObservation& frame) {
  if (frame.frame_index < 0 || frame.frame_index <= last_frame_index_) {
    fail(ErrorKind::invariant,
         "scene frames must have strictly increasing non-negative indices");
  }
  ojson o;
  o["type"] = "frame";
  o["frame_index"] = frame.frame_index;
  o["pose"] = pose_to_json(frame.pose);
  ojson proposals = ojson::array();
  for (const Cuboid& c : frame.proposals) proposals.push_back(cuboid_to_json(c));
  o["proposals"] = std::move(proposals);
  if (!frame.depth_samples.empty()) {
    ojson depth = ojson::array();
    for (const DepthSample& s : frame.depth_samples) {
      if (!std::isfinite(s.u) || !std::isfinite(s.v) || !std::isfinite(s.z) ||
          s.z <= 0.0) {
        fail(ErrorKind::invariant, "depth samples must be finite with z > 0");
      }
      depth.push_back(ojson::array({s.u, s.v, s.z}));
    }
    o["depth"] = std::move(depth);
  }
  last_frame_index_ = frame.frame_index;
  write_line(out_, path_, o);
}

void SceneWriter::finish() {
  out_.flush();
  if (!out_) fail(ErrorKind::io, "flush failed on '" + path_ + "'");
  out_.close();
}

SceneFile read_scene(const std::string& path) {
  SceneReader reader(path);
  SceneFile scene;
  scene.header = reader.header();
  while (auto frame = reader.next()) scene.frames.push_back(std::move(*frame));
  return scene;
}

void write_scene(const std::string& path, const SceneFile& scene) {
  SceneWriter writer(path, scene.header);
  for (const FrameObservation& frame : scene.frames) writer.write_frame(frame);
  writer.finish();
}

// ---------------------------------------------------------------------------
// track files

TrackWriter::TrackWriter(const std::string& path, const TrackerConfig& config)
    : path_(path), out_(open_for_write(path)) {
  config.validate();
  ojson o;
  o["type"] = "header";
  o["format"] = "tracks";
  o["version"] = 1;
  o["config"] = config_to_json(config);
  write_line(out_, path_, o);
}

void TrackWriter::write_frame(std::int64_t frame_index,
                              std::span<const MatchResult> matches) {
  ojson o;
  o["type"] = "frame";
  o["frame_index"] = frame_index;
  ojson arr = ojson::array();
  for (const MatchResult& m : matches) {
    ojson rec;
    rec["proposal"] = m.proposal_index;
    rec["label"] = m.assigned_label;
    rec["iou"] = m.best_iou;
    rec["new"] = m.is_new;
    arr.push_back(std::move(rec));
  }
  o["matches"] = std::move(arr);
  write_line(out_, path_, o);
}

void TrackWriter::finish(const Registry& registry) {
  ojson o;
  o["type"] = "registry";
  o["next_label"] = registry.next_label();
  ojson arr = ojson::array();
  for (const ObjectTrack& t : registry.tracks()) {
    ojson rec;
    rec["label"] = t.label;
    rec["box"] = cuboid_to_json(t.box);
    rec["observations"] = t.observation_count;
    rec["first_seen"] = t.first_seen;
    rec["last_seen"] = t.last_seen;
    rec["heat"] = t.heat;
    arr.push_back(std::move(rec));
  }
  o["tracks"] = std::move(arr);
  write_line(out_, path_, o);
  out_.flush();
  if (!out_) fail(ErrorKind::io, "flush failed on '" + path_ + "'");
  out_.close();
  finished_ = true;
}

TrackFile read_tracks(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  TrackFile tracks;
  std::string line;
  std::size_t line_number = 0;

  if (!std::getline(in, line)) {
    fail(ErrorKind::parse, path + ": empty file, header record required");
  }
  ++line_number;
  {
    const std::string ctx = line_ctx(path, line_number);
    const json j = parse_line(line, ctx);
    require_record_type(j, "header", ctx);
    if (require_string(j, "format", ctx) != "tracks") {
      fail_ctx(ErrorKind::parse, ctx, "format must be 'tracks'");
    }
    tracks.version = static_cast<int>(require_int(j, "version", ctx));
    if (tracks.version != 1) {
      fail_ctx(ErrorKind::parse, ctx,
               "unrecognized version " + std::to_string(tracks.version));
    }
    tracks.config = config_from_json(require_field(j, "config", ctx), ctx);
  }

  bool saw_registry = false;
  std::int64_t last_frame_index = -1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string ctx = line_ctx(path, line_number);
    const json j = parse_line(line, ctx);
    const std::string type = require_string(j, "type", ctx);
    if (type == "frame") {
      if (saw_registry) {
        fail_ctx(ErrorKind::parse, ctx, "frame record after registry record");
      }
      FrameMatches fm;
      fm.frame_index = require_int(j, "frame_index", ctx);
      if (fm.frame_index <= last_frame_index) {
        fail_ctx(ErrorKind::invariant, ctx, "frame_index does not increase");
      }
      last_frame_index = fm.frame_index;
      const json& arr = require_array(j, "matches", ctx);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string mctx = ctx + ": match " + std::to_string(i);
        const json& rec = arr[i];
        MatchResult m;
        m.proposal_index = static_cast<std::size_t>(require_uint(rec, "proposal", mctx));
        m.assigned_label = require_uint(rec, "label", mctx);
        m.best_iou = require_number(rec, "iou", mctx);
        m.is_new = require_bool(rec, "new", mctx);
        if (m.assigned_label == 0) {
          fail_ctx(ErrorKind::invariant, mctx, "labels are positive");
        }
        if (!std::isfinite(m.best_iou) || m.best_iou < 0.0 || m.best_iou > 1.0) {
          fail_ctx(ErrorKind::invariant, mctx, "iou must be within [0, 1]");
        }
        fm.matches.push_back(m);
      }
      tracks.frames.push_back(std::move(fm));
    } else if (type == "registry") {
      if (saw_registry) {
        fail_ctx(ErrorKind::parse, ctx, "duplicate registry record");
      }
      saw_registry = true;
      std::vector<ObjectTrack> list;
      const json& arr = require_array(j, "tracks", ctx);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string tctx = ctx + ": track " + std::to_string(i);
        const json& rec = arr[i];
        list.push_back(ObjectTrack{
            require_uint(rec, "label", tctx),
            cuboid_from_array(require_field(rec, "box", tctx), tctx),
            require_uint(rec, "observations", tctx),
            require_int(rec, "first_seen", tctx),
            require_int(rec, "last_seen", tctx),
            require_number(rec, "heat", tctx)});
      }
      try {
        tracks.registry =
            Registry::restore(std::move(list), require_uint(j, "next_label", ctx));
      } catch (const Error& e) {
        fail_ctx(e.kind(), ctx, e.what());
      }
    } else {
      fail_ctx(ErrorKind::parse, ctx, "unexpected record type '" + type + "'");
    }
  }
  if (!saw_registry) {
    fail(ErrorKind::parse, path + ": missing final registry record");
  }
  for (const FrameMatches& fm : tracks.frames) {
    for (const MatchResult& m : fm.matches) {
      if (tracks.registry.find(m.assigned_label) == nullptr) {
        std::ostringstream msg;
        msg << path << ": frame " << fm.frame_index << " assigns label "
            << m.assigned_label << " absent from the final registry";
        fail(ErrorKind::invariant, msg.str());
      }
    }
  }
  return tracks;
}

void write_tracks(const std::string& path, const TrackFile& tracks) {
  for (const FrameMatches& fm : tracks.frames) {
    for (const MatchResult& m : fm.matches) {
      if (tracks.registry.find(m.assigned_label) == nullptr) {
        fail(ErrorKind::invariant,
             "match labels must appear in the final registry");
      }
    }
  }
  TrackWriter writer(path, tracks.config);
  for (const FrameMatches& fm : tracks.frames) {
    writer.write_frame(fm.frame_index, fm.matches);
  }
  writer.finish(tracks.registry);
}

// ---------------------------------------------------------------------------
// ground-truth files

GroundTruthLabels read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  GroundTruthLabels truth;
  std::string line;
  std::size_t line_number = 0;

  if (!std::getline(in, line)) {
    fail(ErrorKind::parse, path + ": empty file, header record required");
  }
  ++line_number;
  {
    const std::string ctx = line_ctx(path, line_number);
    const json j = parse_line(line, ctx);
    require_record_type(j, "header", ctx);
    if (require_string(j, "format", ctx) != "truth") {
      fail_ctx(ErrorKind::parse, ctx, "format must be 'truth'");
    }
    if (require_int(j, "version", ctx) != 1) {
      fail_ctx(ErrorKind::parse, ctx, "unrecognized version");
    }
    for (const json& v : require_array(j, "objects", ctx)) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        fail_ctx(ErrorKind::parse, ctx, "objects must be integers");
      }
      truth.object_ids.push_back(v.get<std::uint64_t>());
    }
    const json& occ = require_array(j, "occlusions", ctx);
    for (std::size_t i = 0; i < occ.size(); ++i) {
      const std::string octx = ctx + ": occlusion " + std::to_string(i);
      OcclusionWindow w;
      w.object_id = require_uint(occ[i], "object", octx);
      w.first = require_int(occ[i], "first", octx);
      w.last = require_int(occ[i], "last", octx);
      if (w.last < w.first) {
        fail_ctx(ErrorKind::invariant, octx, "window last must be >= first");
      }
      truth.occlusions.push_back(w);
    }
  }

  std::int64_t expected = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string ctx = line_ctx(path, line_number);
    const json j = parse_line(line, ctx);
    require_record_type(j, "frame", ctx);
    if (require_int(j, "frame_index", ctx) != expected) {
      fail_ctx(ErrorKind::invariant, ctx,
               "truth frames must be contiguous from 0");
    }
    ++expected;
    std::vector<std::uint64_t> ids;
    for (const json& v : require_array(j, "true_ids", ctx)) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        fail_ctx(ErrorKind::parse, ctx, "true_ids must be integers");
      }
      ids.push_back(v.get<std::uint64_t>());
    }
    truth.frame_ids.push_back(std::move(ids));
  }
  return truth;
}

void write_truth(const std::string& path, const GroundTruthLabels& truth) {
  std::ofstream out = open_for_write(path);
  ojson header;
  header["type"] = "header";
  header["format"] = "truth";
  header["version"] = 1;
  header["objects"] = truth.object_ids;
  ojson occ = ojson::array();
  for (const OcclusionWindow& w : truth.occlusions) {
    ojson rec;
    rec["object"] = w.object_id;
    rec["first"] = w.first;
    rec["last"] = w.last;
    occ.push_back(std::move(rec));
  }
  header["occlusions"] = std::move(occ);
  write_line(out, path, header);
  for (std::size_t i = 0; i < truth.frame_ids.size(); ++i) {
    ojson o;
    o["type"] = "frame";
    o["frame_index"] = i;
    o["true_ids"] = truth.frame_ids[i];
    write_line(out, path, o);
  }
  out.flush();
  if (!out) fail(ErrorKind::io, "flush failed on '" + path + "'");
}

// ---------------------------------------------------------------------------
// heatmap grid files

namespace {

std::vector<std::pair<VoxelKey, HeatCell>> sorted_cells(const HeatmapGrid& grid) {
  std::vector<std::pair<VoxelKey, HeatCell>> cells(grid.cells().begin(),
                                                   grid.cells().end());
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.first.x != b.first.x) return a.first.x < b.first.x;
    if (a.first.y != b.first.y) return a.first.y < b.first.y;
    return a.first.z < b.first.z;
  });
  return cells;
}

}  // namespace

HeatmapGrid read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::string line;
  std::size_t line_number = 0;
  if (!std::getline(in, line)) {
    fail(ErrorKind::parse, path + ": empty file, header record required");
  }
  ++line_number;
  const std::string hctx = line_ctx(path, line_number);
  const json h = parse_line(line, hctx);
  require_record_type(h, "header", hctx);
  if (require_string(h, "format", hctx) != "grid") {
    fail_ctx(ErrorKind::parse, hctx, "format must be 'grid'");
  }
  if (require_int(h, "version", hctx) != 1) {
    fail_ctx(ErrorKind::parse, hctx, "unrecognized version");
  }
  const double voxel = require_number(h, "voxel_size", hctx);
  if (!std::isfinite(voxel) || voxel <= 0.0) {
    fail_ctx(ErrorKind::invariant, hctx, "voxel_size must be positive");
  }
  HeatmapGrid grid(voxel);
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string ctx = line_ctx(path, line_number);
    const json j = parse_line(line, ctx);
    require_record_type(j, "cell", ctx);
    const std::vector<double> key =
        number_array(require_array(j, "key", ctx, 3), "key", ctx);
    const std::vector<double> mean =
        number_array(require_array(j, "mean", ctx, 3), "mean", ctx);
    HeatCell cell;
    cell.mean_position = Vec3{mean[0], mean[1], mean[2]};
    cell.heat = require_number(j, "heat", ctx);
    cell.sample_count = require_uint(j, "count", ctx);
    try {
      grid.insert_cell(VoxelKey{static_cast<std::int64_t>(key[0]),
                                static_cast<std::int64_t>(key[1]),
                                static_cast<std::int64_t>(key[2])},
                       cell);
    } catch (const Error& e) {
      fail_ctx(e.kind(), ctx, e.what());
    }
  }
  return grid;
}

void write_grid(const std::string& path, const HeatmapGrid& grid) {
  std::ofstream out = open_for_write(path);
  ojson header;
  header["type"] = "header";
  header["format"] = "grid";
  header["version"] = 1;
  header["voxel_size"] = grid.voxel_size();
  write_line(out, path, header);
  for (const auto& [key, cell] : sorted_cells(grid)) {
    ojson o;
    o["type"] = "cell";
    o["key"] = ojson::array({key.x, key.y, key.z});
    o["mean"] = ojson::array(
        {cell.mean_position.x, cell.mean_position.y, cell.mean_position.z});
    o["heat"] = cell.heat;
    o["count"] = cell.sample_count;
    write_line(out, path, o);
  }
  out.flush();
  if (!out) fail(ErrorKind::io, "flush failed on '" + path + "'");
}

// ---------------------------------------------------------------------------
// PLY export

namespace {

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  auto to_byte = [&](double f) {
    return static_cast<std::uint8_t>(std::lround((f + m) * 255.0));
  };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

bool contains_point(const Cuboid& box, const Vec3& p) {
  const Vec3 hi = box.max_corner();
  return p.x >= box.anchor.x && p.x <= hi.x && p.y >= box.anchor.y &&
         p.y <= hi.y && p.z >= box.anchor.z && p.z <= hi.z;
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

}  // namespace

std::array<std::uint8_t, 3> label_color(std::uint64_t label) {
  // Golden-ratio hue stepping keeps nearby labels visually distinct.
  const double hue = std::fmod(static_cast<double>(label) * 0.61803398874989485, 1.0);
  return hsv_to_rgb(hue, 0.72, 0.95);
}

void export_ply(const std::string& path, const HeatmapGrid& grid,
                const Registry& registry) {
  const auto cells = sorted_cells(grid);
  const std::size_t n_boxes = registry.size();
  const std::size_t n_vertices = cells.size() + 8 * n_boxes;
  const std::size_t n_edges = 12 * n_boxes;

  std::string body;
  body.reserve(64 * n_vertices);
  auto emit_vertex = [&](const Vec3& p, const std::array<std::uint8_t, 3>& rgb) {
    append_number(body, p.x);
    body += ' ';
    append_number(body, p.y);
    body += ' ';
    append_number(body, p.z);
    body += ' ';
    body += std::to_string(rgb[0]);
    body += ' ';
    body += std::to_string(rgb[1]);
    body += ' ';
    body += std::to_string(rgb[2]);
    body += '\n';
  };

  constexpr std::array<std::uint8_t, 3> gray{128, 128, 128};
  for (const auto& [key, cell] : cells) {
    std::array<std::uint8_t, 3> rgb = gray;
    for (const ObjectTrack& t : registry.tracks()) {
      if (contains_point(t.box, cell.mean_position)) {
        rgb = label_color(t.label);
        break;
      }
    }
    emit_vertex(cell.mean_position, rgb);
  }
  for (const ObjectTrack& t : registry.tracks()) {
    const auto rgb = label_color(t.label);
    for (const Vec3& corner : t.box.corners()) emit_vertex(corner, rgb);
  }

  static constexpr int kEdges[12][2] = {{0, 1}, {1, 3}, {3, 2}, {2, 0},
                                        {4, 5}, {5, 7}, {7, 6}, {6, 4},
                                        {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (std::size_t b = 0; b < n_boxes; ++b) {
    const std::size_t base = cells.size() + 8 * b;
    for (const auto& e : kEdges) {
      body += std::to_string(base + e[0]);
      body += ' ';
      body += std::to_string(base + e[1]);
      body += '\n';
    }
  }

  std::ofstream out = open_for_write(path);
  out << "ply\n"
      << "format ascii 1.0\n"
      << "comment cuboidtrack heatmap and track boxes\n"
      << "element vertex " << n_vertices << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element edge " << n_edges << "\n"
      << "property int vertex1\nproperty int vertex2\n"
      << "end_header\n"
      << body;
  out.flush();
  if (!out) fail(ErrorKind::io, "write failed on '" + path + "'");
}

}  // namespace ct
