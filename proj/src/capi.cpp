#include "cuboidtrack.h"

#include <algorithm>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "cuboidtrack/io.hpp"
#include "cuboidtrack/synth.hpp"
#include "cuboidtrack/tracker.hpp"

namespace {

thread_local std::string t_last_error;

ct_status status_from(ct::ErrorKind kind) {
  switch (kind) {
    case ct::ErrorKind::invalid_argument: return CT_ERROR_INVALID_ARGUMENT;
    case ct::ErrorKind::parse: return CT_ERROR_PARSE;
    case ct::ErrorKind::invariant: return CT_ERROR_INVARIANT;
    case ct::ErrorKind::io: return CT_ERROR_IO;
  }
  return CT_ERROR_INTERNAL;
}

ct_status capture_current_exception() {
  try {
    throw;
  } catch (const ct::Error& e) {
    t_last_error = e.what();
    return status_from(e.kind());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return CT_ERROR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return CT_ERROR_INTERNAL;
  }
}

template <typename F>
ct_status guarded(F&& f) {
  try {
    f();
    return CT_OK;
  } catch (...) {
    return capture_current_exception();
  }
}

ct_status invalid(const char* message) {
  t_last_error = message;
  return CT_ERROR_INVALID_ARGUMENT;
}

ct::Cuboid to_cuboid(const ct_cuboid& c) {
  return ct::Cuboid(ct::Vec3{c.x, c.y, c.z}, ct::Vec3{c.l, c.w, c.h},
                    ct::RotationEuler{c.rx, c.ry, c.rz});
}

ct_cuboid from_cuboid(const ct::Cuboid& c) {
  return ct_cuboid{c.anchor.x,    c.anchor.y,    c.anchor.z,
                   c.extents.x,   c.extents.y,   c.extents.z,
                   c.rotation.rx, c.rotation.ry, c.rotation.rz};
}

ct::Pose to_pose(const ct_pose& p) {
  ct::Mat3 m;
  std::copy(std::begin(p.rotation), std::end(p.rotation), m.m.begin());
  return ct::Pose(m, ct::Vec3{p.translation[0], p.translation[1], p.translation[2]});
}

ct_pose from_pose(const ct::Pose& p) {
  ct_pose out;
  std::copy(p.rotation.m.begin(), p.rotation.m.end(), out.rotation);
  out.translation[0] = p.translation.x;
  out.translation[1] = p.translation.y;
  out.translation[2] = p.translation.z;
  return out;
}

ct::Intrinsics to_intrinsics(const ct_intrinsics& k) {
  return ct::Intrinsics(k.fx, k.fy, k.cx, k.cy);
}

ct::UnionMode to_union_mode(ct_union_mode mode) {
  if (mode != CT_UNION_PAPER && mode != CT_UNION_IE) {
    ct::fail(ct::ErrorKind::invalid_argument, "unknown union mode");
  }
  return mode == CT_UNION_PAPER ? ct::UnionMode::axis_product
                                : ct::UnionMode::inclusion_exclusion;
}

ct::TrackerConfig to_config(const ct_tracker_config& cfg) {
  ct::TrackerConfig out;
  out.tau = cfg.tau;
  if (cfg.assignment != CT_ASSIGN_GREEDY && cfg.assignment != CT_ASSIGN_ARGMAX) {
    ct::fail(ct::ErrorKind::invalid_argument, "unknown assignment mode");
  }
  out.assignment = cfg.assignment == CT_ASSIGN_GREEDY
                       ? ct::Assignment::greedy_one_to_one
                       : ct::Assignment::independent_argmax;
  out.union_mode = to_union_mode(cfg.union_mode);
  if (cfg.fusion != CT_FUSION_COUNT_WEIGHTED && cfg.fusion != CT_FUSION_FIXED_ALPHA) {
    ct::fail(ct::ErrorKind::invalid_argument, "unknown fusion mode");
  }
  out.fusion = cfg.fusion == CT_FUSION_COUNT_WEIGHTED
                   ? ct::FusionMode::count_weighted
                   : ct::FusionMode::fixed_alpha;
  out.fusion_alpha = cfg.fusion_alpha;
  out.validate();
  return out;
}

}  // namespace

struct ct_registry {
  ct::TrackerConfig config;
  ct::Registry registry;
};

struct ct_heatmap {
  ct::HeatmapGrid grid;
};

struct ct_scene_reader {
  explicit ct_scene_reader(const std::string& path) : reader(path) {}
  ct::SceneReader reader;
  std::optional<ct::FrameObservation> frame;
  std::vector<ct_cuboid> proposals;
  std::vector<double> depth;
};

struct ct_track_writer {
  ct::TrackWriter writer;
};

extern "C" {

const char* ct_version(void) { return "0.1.0"; }

const char* ct_last_error(void) { return t_last_error.c_str(); }

/* geometry ------------------------------------------------------------ */

ct_status ct_interval_intersection(double a_start, double a_length,
                                   double b_start, double b_length,
                                   double* out) {
  if (out == nullptr) return invalid("out must not be NULL");
  return guarded([&] {
    *out = ct::interval_intersection(ct::Interval(a_start, a_length),
                                     ct::Interval(b_start, b_length));
  });
}

ct_status ct_interval_union(double a_start, double a_length, double b_start,
                            double b_length, double* out) {
  if (out == nullptr) return invalid("out must not be NULL");
  return guarded([&] {
    *out = ct::interval_union(ct::Interval(a_start, a_length),
                              ct::Interval(b_start, b_length));
  });
}

ct_status ct_cuboid_intersection_volume(const ct_cuboid* a, const ct_cuboid* b,
                                        double* out) {
  if (a == nullptr || b == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded(
      [&] { *out = ct::cuboid_intersection_volume(to_cuboid(*a), to_cuboid(*b)); });
}

ct_status ct_cuboid_union_volume(const ct_cuboid* a, const ct_cuboid* b,
                                 ct_union_mode mode, double* out) {
  if (a == nullptr || b == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    *out = ct::cuboid_union_volume(to_cuboid(*a), to_cuboid(*b),
                                   to_union_mode(mode));
  });
}

ct_status ct_iou3d(const ct_cuboid* a, const ct_cuboid* b, ct_union_mode mode,
                   double* out) {
  if (a == nullptr || b == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    *out = ct::iou3d(to_cuboid(*a), to_cuboid(*b), to_union_mode(mode));
  });
}

ct_status ct_gravity_align(const ct_cuboid* in, ct_cuboid* out) {
  if (in == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  return guarded([&] { *out = from_cuboid(ct::gravity_align(to_cuboid(*in))); });
}

ct_status ct_transform_to_global(const ct_cuboid* in, const ct_pose* pose,
                                 ct_cuboid* out) {
  if (in == nullptr || pose == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    *out = from_cuboid(ct::transform_to_global(to_cuboid(*in), to_pose(*pose)));
  });
}

ct_status ct_backproject(double u, double v, double z, const ct_intrinsics* k,
                         ct_vec3* out) {
  if (k == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  return guarded([&] {
    const ct::Vec3 p = ct::backproject(u, v, z, to_intrinsics(*k));
    *out = ct_vec3{p.x, p.y, p.z};
  });
}

ct_status ct_voxel_iou_oracle(const ct_cuboid* a, const ct_cuboid* b,
                              double pitch, double* out) {
  if (a == nullptr || b == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded(
      [&] { *out = ct::voxel_iou_oracle(to_cuboid(*a), to_cuboid(*b), pitch); });
}

/* tracker ------------------------------------------------------------- */

void ct_tracker_config_default(ct_tracker_config* cfg) {
  if (cfg == nullptr) return;
  const ct::TrackerConfig defaults;
  cfg->tau = defaults.tau;
  cfg->assignment = CT_ASSIGN_GREEDY;
  cfg->union_mode = CT_UNION_PAPER;
  cfg->fusion = CT_FUSION_COUNT_WEIGHTED;
  cfg->fusion_alpha = defaults.fusion_alpha;
}

ct_status ct_registry_new(const ct_tracker_config* cfg, ct_registry** out) {
  if (cfg == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  *out = nullptr;
  return guarded([&] { *out = new ct_registry{to_config(*cfg), ct::Registry{}}; });
}

void ct_registry_free(ct_registry* registry) { delete registry; }

ct_status ct_registry_process_frame(ct_registry* registry, int64_t frame_index,
                                    const ct_pose* pose,
                                    const ct_cuboid* proposals,
                                    size_t proposal_count,
                                    ct_match_result* results) {
  if (registry == nullptr || pose == nullptr) {
    return invalid("registry and pose must not be NULL");
  }
  if (proposal_count > 0 && proposals == nullptr) {
    return invalid("proposals must not be NULL when proposal_count > 0");
  }
  return guarded([&] {
    ct::FrameObservation frame;
    frame.frame_index = frame_index;
    frame.pose = to_pose(*pose);
    frame.proposals.reserve(proposal_count);
    for (size_t i = 0; i < proposal_count; ++i) {
      try {
        frame.proposals.push_back(to_cuboid(proposals[i]));
      } catch (const ct::Error& e) {
        ct::fail(e.kind(), "frame " + std::to_string(frame_index) +
                               " proposal " + std::to_string(i) + ": " + e.what());
      }
    }
    ct::FrameOutcome outcome = ct::process_frame(
        frame, std::move(registry->registry), registry->config);
    registry->registry = std::move(outcome.registry);
    if (results != nullptr) {
      for (size_t i = 0; i < outcome.matches.size(); ++i) {
        const ct::MatchResult& m = outcome.matches[i];
        results[i] = ct_match_result{m.proposal_index, m.assigned_label,
                                     m.best_iou, m.is_new ? 1 : 0};
      }
    }
  });
}

size_t ct_registry_size(const ct_registry* registry) {
  return registry == nullptr ? 0 : registry->registry.size();
}

ct_status ct_registry_track(const ct_registry* registry, size_t index,
                            ct_track_info* out) {
  if (registry == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  if (index >= registry->registry.size()) {
    return invalid("track index out of range");
  }
  const ct::ObjectTrack& t = registry->registry.tracks()[index];
  *out = ct_track_info{t.label,      from_cuboid(t.box), t.observation_count,
                       t.first_seen, t.last_seen,        t.heat};
  return CT_OK;
}

ct_status ct_registry_best_match(const ct_registry* registry,
                                 const ct_cuboid* proposal, uint64_t* label,
                                 double* iou) {
  if (registry == nullptr || proposal == nullptr || label == nullptr ||
      iou == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    const ct::BestMatch best = ct::best_match(
        to_cuboid(*proposal), registry->registry, registry->config.union_mode);
    *label = best.label.value_or(0);
    *iou = best.iou;
  });
}

/* heatmap -------------------------------------------------------------- */

ct_status ct_heatmap_new(double voxel_size, ct_heatmap** out) {
  if (out == nullptr) return invalid("out must not be NULL");
  *out = nullptr;
  return guarded([&] { *out = new ct_heatmap{ct::HeatmapGrid(voxel_size)}; });
}

void ct_heatmap_free(ct_heatmap* heatmap) { delete heatmap; }

ct_status ct_heatmap_add_points(ct_heatmap* heatmap, const ct_vec3* points,
                                const double* heats, size_t count) {
  if (heatmap == nullptr || (count > 0 && points == nullptr)) {
    return invalid("heatmap and points must not be NULL");
  }
  return guarded([&] {
    std::vector<ct::WeightedPoint> batch;
    batch.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      batch.push_back(ct::WeightedPoint{
          ct::Vec3{points[i].x, points[i].y, points[i].z},
          heats == nullptr ? 1.0 : heats[i]});
    }
    heatmap->grid.add_points(batch);
  });
}

ct_status ct_heatmap_merge_frame(ct_heatmap* heatmap, const ct_pose* pose,
                                 const ct_intrinsics* k, const double* uvz,
                                 size_t count) {
  if (heatmap == nullptr || pose == nullptr || k == nullptr ||
      (count > 0 && uvz == nullptr)) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    ct::FrameObservation frame;
    frame.pose = to_pose(*pose);
    std::vector<ct::DepthSample> samples;
    samples.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      samples.push_back(
          ct::DepthSample{uvz[3 * i], uvz[3 * i + 1], uvz[3 * i + 2]});
    }
    heatmap->grid.merge_frame(frame, samples, to_intrinsics(*k));
  });
}

size_t ct_heatmap_cell_count(const ct_heatmap* heatmap) {
  return heatmap == nullptr ? 0 : heatmap->grid.cell_count();
}

double ct_heatmap_total_heat(const ct_heatmap* heatmap) {
  return heatmap == nullptr ? 0.0 : heatmap->grid.total_heat();
}

ct_status ct_heatmap_extract_boundaries(const ct_heatmap* heatmap,
                                        double min_heat, size_t min_cells,
                                        ct_cuboid* out, size_t capacity,
                                        size_t* count) {
  if (heatmap == nullptr || count == nullptr || (capacity > 0 && out == nullptr)) {
    return invalid("arguments must not be NULL");
  }
  std::vector<ct::Cuboid> bounds;
  const ct_status st = guarded(
      [&] { bounds = heatmap->grid.extract_boundaries(min_heat, min_cells); });
  if (st != CT_OK) return st;
  *count = bounds.size();
  if (bounds.size() > capacity) {
    t_last_error = "output buffer too small";
    return CT_ERROR_BUFFER_TOO_SMALL;
  }
  for (size_t i = 0; i < bounds.size(); ++i) out[i] = from_cuboid(bounds[i]);
  return CT_OK;
}

ct_status ct_heatmap_save(const ct_heatmap* heatmap, const char* path) {
  if (heatmap == nullptr || path == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] { ct::write_grid(path, heatmap->grid); });
}

ct_status ct_heatmap_load(const char* path, ct_heatmap** out) {
  if (path == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  *out = nullptr;
  return guarded([&] { *out = new ct_heatmap{ct::read_grid(path)}; });
}

/* scene streaming ------------------------------------------------------ */

ct_status ct_scene_reader_open(const char* path, ct_scene_reader** out) {
  if (path == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  *out = nullptr;
  return guarded([&] { *out = new ct_scene_reader(path); });
}

void ct_scene_reader_free(ct_scene_reader* reader) { delete reader; }

ct_status ct_scene_reader_header(const ct_scene_reader* reader,
                                 ct_scene_header* out) {
  if (reader == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  const ct::SceneHeader& h = reader->reader.header();
  out->version = h.version;
  out->intrinsics =
      ct_intrinsics{h.intrinsics.fx, h.intrinsics.fy, h.intrinsics.cx, h.intrinsics.cy};
  out->voxel_size = h.voxel_size;
  out->seed = h.seed;
  return CT_OK;
}

ct_status ct_scene_reader_next(ct_scene_reader* reader, int* has_frame) {
  if (reader == nullptr || has_frame == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    reader->frame = reader->reader.next();
    reader->proposals.clear();
    reader->depth.clear();
    if (reader->frame.has_value()) {
      for (const ct::Cuboid& c : reader->frame->proposals) {
        reader->proposals.push_back(from_cuboid(c));
      }
      for (const ct::DepthSample& s : reader->frame->depth_samples) {
        reader->depth.push_back(s.u);
        reader->depth.push_back(s.v);
        reader->depth.push_back(s.z);
      }
    }
    *has_frame = reader->frame.has_value() ? 1 : 0;
  });
}

int64_t ct_scene_frame_index(const ct_scene_reader* reader) {
  return (reader != nullptr && reader->frame.has_value())
             ? reader->frame->frame_index
             : -1;
}

ct_status ct_scene_frame_pose(const ct_scene_reader* reader, ct_pose* out) {
  if (reader == nullptr || out == nullptr) return invalid("arguments must not be NULL");
  if (!reader->frame.has_value()) return invalid("no current frame");
  *out = from_pose(reader->frame->pose);
  return CT_OK;
}

size_t ct_scene_frame_proposal_count(const ct_scene_reader* reader) {
  return (reader != nullptr && reader->frame.has_value())
             ? reader->proposals.size()
             : 0;
}

const ct_cuboid* ct_scene_frame_proposals(const ct_scene_reader* reader) {
  return (reader != nullptr && !reader->proposals.empty())
             ? reader->proposals.data()
             : nullptr;
}

size_t ct_scene_frame_depth_count(const ct_scene_reader* reader) {
  return (reader != nullptr) ? reader->depth.size() / 3 : 0;
}

const double* ct_scene_frame_depth_samples(const ct_scene_reader* reader) {
  return (reader != nullptr && !reader->depth.empty()) ? reader->depth.data()
                                                       : nullptr;
}

/* track files ----------------------------------------------------------- */

ct_status ct_track_writer_open(const char* path, const ct_tracker_config* cfg,
                               ct_track_writer** out) {
  if (path == nullptr || cfg == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  *out = nullptr;
  return guarded(
      [&] { *out = new ct_track_writer{ct::TrackWriter(path, to_config(*cfg))}; });
}

ct_status ct_track_writer_frame(ct_track_writer* writer, int64_t frame_index,
                                const ct_match_result* matches, size_t count) {
  if (writer == nullptr || (count > 0 && matches == nullptr)) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    std::vector<ct::MatchResult> list;
    list.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      list.push_back(ct::MatchResult{matches[i].proposal_index,
                                     matches[i].assigned_label,
                                     matches[i].best_iou,
                                     matches[i].is_new != 0});
    }
    writer->writer.write_frame(frame_index, list);
  });
}

ct_status ct_track_writer_finish(ct_track_writer* writer,
                                 const ct_registry* registry) {
  if (writer == nullptr || registry == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] { writer->writer.finish(registry->registry); });
}

void ct_track_writer_free(ct_track_writer* writer) { delete writer; }

/* synthesis, evaluation, export ------------------------------------------ */

ct_status ct_synth_generate(const char* scenario_path,
                            const uint64_t* seed_override,
                            const char* scene_out, const char* truth_out) {
  if (scenario_path == nullptr || scene_out == nullptr || truth_out == nullptr) {
    return invalid("paths must not be NULL");
  }
  return guarded([&] {
    ct::Scenario scenario = ct::load_scenario(scenario_path);
    if (seed_override != nullptr) scenario.seed = *seed_override;
    const ct::GeneratedScene generated = ct::generate(scenario);
    ct::write_scene(scene_out, generated.scene);
    ct::write_truth(truth_out, generated.truth);
  });
}

ct_status ct_evaluate_files(const char* tracks_path, const char* truth_path,
                            ct_metrics* out) {
  if (tracks_path == nullptr || truth_path == nullptr || out == nullptr) {
    return invalid("arguments must not be NULL");
  }
  return guarded([&] {
    const ct::TrackFile tracks = ct::read_tracks(tracks_path);
    const ct::GroundTruthLabels truth = ct::read_truth(truth_path);
    const ct::Metrics m = ct::evaluate(tracks, truth);
    *out = ct_metrics{m.consistency, m.id_switches, m.reid_success,
                      m.count_error, m.evaluated_windows};
  });
}

ct_status ct_export_ply(const char* tracks_path, const char* grid_path,
                        const char* ply_path) {
  if (tracks_path == nullptr || grid_path == nullptr || ply_path == nullptr) {
    return invalid("paths must not be NULL");
  }
  return guarded([&] {
    const ct::TrackFile tracks = ct::read_tracks(tracks_path);
    const ct::HeatmapGrid grid = ct::read_grid(grid_path);
    ct::export_ply(ply_path, grid, tracks.registry);
  });
}

}  // extern "C"
