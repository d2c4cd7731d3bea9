/*
 * C API for the cuboidtrack engine: 3D cuboid geometry, IoU-based object
 * tracking, heatmap aggregation, synthetic scene generation, and evaluation.
 *
 * Conventions:
 *   - Every fallible call returns a ct_status; CT_OK is 0.
 *   - On failure, ct_last_error() returns a thread-local message describing
 *     the most recent failing call on this thread.
 *   - Handles (ct_registry, ct_heatmap, ...) are opaque; free them with the
 *     matching *_free function. Creator functions write the handle through
 *     an out-parameter and leave it NULL on failure.
 *   - Pointers returned by frame accessors are owned by the reader and stay
 *     valid until the next ct_scene_reader_next() call.
 */

#ifndef CUBOIDTRACK_H
#define CUBOIDTRACK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CT_API __declspec(dllexport)
#elif defined(__GNUC__)
#define CT_API __attribute__((visibility("default")))
#else
#define CT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ct_status {
  CT_OK = 0,
  CT_ERROR_INVALID_ARGUMENT = 1, /* precondition violated by the caller */
  CT_ERROR_PARSE = 2,            /* malformed input file or record */
  CT_ERROR_INVARIANT = 3,        /* well-formed input breaking an invariant */
  CT_ERROR_IO = 4,               /* filesystem failure */
  CT_ERROR_BUFFER_TOO_SMALL = 5,
  CT_ERROR_INTERNAL = 6
} ct_status;

CT_API const char* ct_version(void);
CT_API const char* ct_last_error(void);

/* ------------------------------------------------------------------ */
/* geometry                                                            */

typedef struct ct_vec3 {
  double x, y, z;
} ct_vec3;

/* Minimum-corner anchor (x, y, z), extents (l, w, h) along +x/+y/+z, and
 * Euler rotation (rx, ry, rz) in radians applied about the centroid. */
typedef struct ct_cuboid {
  double x, y, z;
  double l, w, h;
  double rx, ry, rz;
} ct_cuboid;

/* Rigid camera-to-world transform; rotation is row-major. */
typedef struct ct_pose {
  double rotation[9];
  double translation[3];
} ct_pose;

typedef struct ct_intrinsics {
  double fx, fy, cx, cy;
} ct_intrinsics;

typedef enum ct_union_mode {
  CT_UNION_PAPER = 0, /* product of per-axis union lengths */
  CT_UNION_IE = 1     /* inclusion-exclusion volume */
} ct_union_mode;

CT_API ct_status ct_interval_intersection(double a_start, double a_length,
                                          double b_start, double b_length,
                                          double* out);
CT_API ct_status ct_interval_union(double a_start, double a_length,
                                   double b_start, double b_length,
                                   double* out);
CT_API ct_status ct_cuboid_intersection_volume(const ct_cuboid* a,
                                               const ct_cuboid* b, double* out);
CT_API ct_status ct_cuboid_union_volume(const ct_cuboid* a, const ct_cuboid* b,
                                        ct_union_mode mode, double* out);
CT_API ct_status ct_iou3d(const ct_cuboid* a, const ct_cuboid* b,
                          ct_union_mode mode, double* out);
CT_API ct_status ct_gravity_align(const ct_cuboid* in, ct_cuboid* out);
CT_API ct_status ct_transform_to_global(const ct_cuboid* in,
                                        const ct_pose* pose, ct_cuboid* out);
CT_API ct_status ct_backproject(double u, double v, double z,
                                const ct_intrinsics* k, ct_vec3* out);
/* Brute-force rasterized IoU (inclusion-exclusion semantics). */
CT_API ct_status ct_voxel_iou_oracle(const ct_cuboid* a, const ct_cuboid* b,
                                     double pitch, double* out);

/* ------------------------------------------------------------------ */
/* tracker                                                             */

typedef enum ct_assignment {
  CT_ASSIGN_GREEDY = 0, /* one-to-one, highest overlap first */
  CT_ASSIGN_ARGMAX = 1  /* independent per-proposal argmax */
} ct_assignment;

typedef enum ct_fusion {
  CT_FUSION_COUNT_WEIGHTED = 0,
  CT_FUSION_FIXED_ALPHA = 1
} ct_fusion;

typedef struct ct_tracker_config {
  double tau; /* IoU acceptance threshold in (0, 1] */
  ct_assignment assignment;
  ct_union_mode union_mode;
  ct_fusion fusion;
  double fusion_alpha; /* fixed-alpha blend weight; 1 keeps the latest box */
} ct_tracker_config;

CT_API void ct_tracker_config_default(ct_tracker_config* cfg);

typedef struct ct_registry ct_registry;

typedef struct ct_match_result {
  size_t proposal_index;
  uint64_t assigned_label;
  double best_iou;
  int is_new;
} ct_match_result;

typedef struct ct_track_info {
  uint64_t label;
  ct_cuboid box;
  uint64_t observation_count;
  int64_t first_seen;
  int64_t last_seen;
  double heat;
} ct_track_info;

CT_API ct_status ct_registry_new(const ct_tracker_config* cfg,
                                 ct_registry** out);
CT_API void ct_registry_free(ct_registry* registry);
/* Gravity-aligns the camera-frame proposals, maps them through the pose, and
 * assigns labels. `results` may be NULL or must hold proposal_count slots. */
CT_API ct_status ct_registry_process_frame(ct_registry* registry,
                                           int64_t frame_index,
                                           const ct_pose* pose,
                                           const ct_cuboid* proposals,
                                           size_t proposal_count,
                                           ct_match_result* results);
CT_API size_t ct_registry_size(const ct_registry* registry);
CT_API ct_status ct_registry_track(const ct_registry* registry, size_t index,
                                   ct_track_info* out);
/* Best label for a gravity-aligned global-frame box; label 0 means the
 * registry is empty. */
CT_API ct_status ct_registry_best_match(const ct_registry* registry,
                                        const ct_cuboid* proposal,
                                        uint64_t* label, double* iou);

/* ------------------------------------------------------------------ */
/* heatmap                                                             */

typedef struct ct_heatmap ct_heatmap;

CT_API ct_status ct_heatmap_new(double voxel_size, ct_heatmap** out);
CT_API void ct_heatmap_free(ct_heatmap* heatmap);
/* heats may be NULL for unit heat per point. */
CT_API ct_status ct_heatmap_add_points(ct_heatmap* heatmap,
                                       const ct_vec3* points,
                                       const double* heats, size_t count);
/* uvz holds count (u, v, z) triples. */
CT_API ct_status ct_heatmap_merge_frame(ct_heatmap* heatmap,
                                        const ct_pose* pose,
                                        const ct_intrinsics* k,
                                        const double* uvz, size_t count);
CT_API size_t ct_heatmap_cell_count(const ct_heatmap* heatmap);
CT_API double ct_heatmap_total_heat(const ct_heatmap* heatmap);
/* Writes up to capacity component bounds; *count receives the total found.
 * Returns CT_ERROR_BUFFER_TOO_SMALL when capacity is insufficient. */
CT_API ct_status ct_heatmap_extract_boundaries(const ct_heatmap* heatmap,
                                               double min_heat,
                                               size_t min_cells,
                                               ct_cuboid* out, size_t capacity,
                                               size_t* count);
CT_API ct_status ct_heatmap_save(const ct_heatmap* heatmap, const char* path);
CT_API ct_status ct_heatmap_load(const char* path, ct_heatmap** out);

/* ------------------------------------------------------------------ */
/* scene streaming                                                     */

typedef struct ct_scene_reader ct_scene_reader;

typedef struct ct_scene_header {
  int version;
  ct_intrinsics intrinsics;
  double voxel_size;
  uint64_t seed;
} ct_scene_header;

CT_API ct_status ct_scene_reader_open(const char* path, ct_scene_reader** out);
CT_API void ct_scene_reader_free(ct_scene_reader* reader);
CT_API ct_status ct_scene_reader_header(const ct_scene_reader* reader,
                                        ct_scene_header* out);
/* Advances to the next frame; *has_frame becomes 0 at end of stream. */
CT_API ct_status ct_scene_reader_next(ct_scene_reader* reader, int* has_frame);
CT_API int64_t ct_scene_frame_index(const ct_scene_reader* reader);
CT_API ct_status ct_scene_frame_pose(const ct_scene_reader* reader,
                                     ct_pose* out);
CT_API size_t ct_scene_frame_proposal_count(const ct_scene_reader* reader);
CT_API const ct_cuboid* ct_scene_frame_proposals(const ct_scene_reader* reader);
CT_API size_t ct_scene_frame_depth_count(const ct_scene_reader* reader);
/* (u, v, z) triples, depth_count of them. */
CT_API const double* ct_scene_frame_depth_samples(const ct_scene_reader* reader);

/* ------------------------------------------------------------------ */
/* track files                                                         */

typedef struct ct_track_writer ct_track_writer;

CT_API ct_status ct_track_writer_open(const char* path,
                                      const ct_tracker_config* cfg,
                                      ct_track_writer** out);
CT_API ct_status ct_track_writer_frame(ct_track_writer* writer,
                                       int64_t frame_index,
                                       const ct_match_result* matches,
                                       size_t count);
/* Appends the registry snapshot and flushes the file. */
CT_API ct_status ct_track_writer_finish(ct_track_writer* writer,
                                        const ct_registry* registry);
CT_API void ct_track_writer_free(ct_track_writer* writer);

/* ------------------------------------------------------------------ */
/* synthesis, evaluation, export                                       */

/* seed_override may be NULL to use the scenario's own seed. */
CT_API ct_status ct_synth_generate(const char* scenario_path,
                                   const uint64_t* seed_override,
                                   const char* scene_out,
                                   const char* truth_out);

typedef struct ct_metrics {
  double consistency;
  int64_t id_switches;
  double reid_success;
  int64_t count_error;
  int64_t evaluated_windows;
} ct_metrics;

CT_API ct_status ct_evaluate_files(const char* tracks_path,
                                   const char* truth_path, ct_metrics* out);
CT_API ct_status ct_export_ply(const char* tracks_path, const char* grid_path,
                               const char* ply_path);

#ifdef __cplusplus
}
#endif

#endif /* CUBOIDTRACK_H */
