// cuboidtrack command-line front end. Everything goes through the public
// C API in cuboidtrack.h; the shared library owns all the actual logic.

#include <chrono>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cuboidtrack.h"

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel g_log_level = LogLevel::info;

void init_log_level() {
  const char* env = std::getenv("CUBOID_TRACK_LOG");
  if (env == nullptr) return;
  const std::string v = env;
  if (v == "error") g_log_level = LogLevel::error;
  else if (v == "warn") g_log_level = LogLevel::warn;
  else if (v == "info") g_log_level = LogLevel::info;
  else if (v == "debug") g_log_level = LogLevel::debug;
  else std::fprintf(stderr, "[warn] unknown CUBOID_TRACK_LOG level '%s'\n", v.c_str());
}

void logf(LogLevel level, const char* fmt, ...) {
  if (level > g_log_level) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] ", names[static_cast<int>(level)]);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

// Exit codes: 0 success, 2 parse/validation/usage, 1 I/O and everything else.
int exit_code_for(ct_status status) {
  switch (status) {
    case CT_OK: return 0;
    case CT_ERROR_INVALID_ARGUMENT:
    case CT_ERROR_PARSE:
    case CT_ERROR_INVARIANT: return 2;
    default: return 1;
  }
}

int fail_status(ct_status status) {
  logf(LogLevel::error, "%s", ct_last_error());
  return exit_code_for(status);
}

const char* union_token(ct_union_mode mode) {
  return mode == CT_UNION_PAPER ? "paper" : "ie";
}

const char* assignment_token(ct_assignment a) {
  return a == CT_ASSIGN_GREEDY ? "greedy" : "argmax";
}

struct TrackOptions {
  std::string scene_path;
  std::string tracks_path;
  std::string grid_path;
  double tau = 0.25;
  std::string union_mode = "paper";
  std::string assignment = "greedy";
  double voxel = 0.0;  // 0 = use the scene header value
};

int run_track(const TrackOptions& opt) {
  ct_tracker_config cfg;
  ct_tracker_config_default(&cfg);
  cfg.tau = opt.tau;
  cfg.union_mode = opt.union_mode == "ie" ? CT_UNION_IE : CT_UNION_PAPER;
  cfg.assignment = opt.assignment == "argmax" ? CT_ASSIGN_ARGMAX : CT_ASSIGN_GREEDY;

  ct_scene_reader* reader = nullptr;
  ct_status st = ct_scene_reader_open(opt.scene_path.c_str(), &reader);
  if (st != CT_OK) return fail_status(st);

  ct_scene_header header;
  ct_scene_reader_header(reader, &header);
  const double voxel = opt.voxel > 0.0 ? opt.voxel : header.voxel_size;
  logf(LogLevel::info,
       "config: tau=%g union_mode=%s assignment=%s voxel=%g scene_seed=%llu",
       cfg.tau, union_token(cfg.union_mode), assignment_token(cfg.assignment),
       voxel, static_cast<unsigned long long>(header.seed));

  ct_registry* registry = nullptr;
  st = ct_registry_new(&cfg, &registry);
  if (st != CT_OK) {
    ct_scene_reader_free(reader);
    return fail_status(st);
  }
  ct_heatmap* heatmap = nullptr;
  st = ct_heatmap_new(voxel, &heatmap);
  if (st != CT_OK) {
    ct_registry_free(registry);
    ct_scene_reader_free(reader);
    return fail_status(st);
  }
  ct_track_writer* writer = nullptr;
  st = ct_track_writer_open(opt.tracks_path.c_str(), &cfg, &writer);
  if (st != CT_OK) {
    ct_heatmap_free(heatmap);
    ct_registry_free(registry);
    ct_scene_reader_free(reader);
    return fail_status(st);
  }

  auto cleanup = [&]() {
    ct_track_writer_free(writer);
    ct_heatmap_free(heatmap);
    ct_registry_free(registry);
    ct_scene_reader_free(reader);
  };

  std::size_t frames = 0;
  std::size_t proposals_total = 0;
  std::size_t new_labels = 0;
  std::vector<ct_match_result> results;

  using clock = std::chrono::steady_clock;
  const auto pipeline_start = clock::now();
  while (true) {
    int has_frame = 0;
    st = ct_scene_reader_next(reader, &has_frame);
    if (st != CT_OK) {
      cleanup();
      return fail_status(st);
    }
    if (!has_frame) break;

    const auto frame_start = clock::now();
    const int64_t frame_index = ct_scene_frame_index(reader);
    ct_pose pose;
    ct_scene_frame_pose(reader, &pose);
    const size_t n = ct_scene_frame_proposal_count(reader);
    results.resize(n);
    st = ct_registry_process_frame(registry, frame_index, &pose,
                                   ct_scene_frame_proposals(reader), n,
                                   results.data());
    if (st != CT_OK) {
      cleanup();
      return fail_status(st);
    }
    const size_t depth_count = ct_scene_frame_depth_count(reader);
    if (depth_count > 0) {
      st = ct_heatmap_merge_frame(heatmap, &pose, &header.intrinsics,
                                  ct_scene_frame_depth_samples(reader),
                                  depth_count);
      if (st != CT_OK) {
        cleanup();
        return fail_status(st);
      }
    }
    st = ct_track_writer_frame(writer, frame_index, results.data(), n);
    if (st != CT_OK) {
      cleanup();
      return fail_status(st);
    }

    size_t fresh = 0;
    for (const ct_match_result& m : results) fresh += m.is_new != 0;
    new_labels += fresh;
    ++frames;
    proposals_total += n;
    if (g_log_level >= LogLevel::info) {
      const double ms =
          std::chrono::duration<double, std::milli>(clock::now() - frame_start)
              .count();
      logf(LogLevel::info, "frame %lld: proposals=%zu tracks=%zu new=%zu ms=%.3f",
           static_cast<long long>(frame_index), n, ct_registry_size(registry),
           fresh, ms);
    }
  }
  const double pipeline_s =
      std::chrono::duration<double>(clock::now() - pipeline_start).count();

  st = ct_track_writer_finish(writer, registry);
  if (st != CT_OK) {
    cleanup();
    return fail_status(st);
  }
  if (!opt.grid_path.empty()) {
    st = ct_heatmap_save(heatmap, opt.grid_path.c_str());
    if (st != CT_OK) {
      cleanup();
      return fail_status(st);
    }
  }

  std::printf("frames=%zu proposals=%zu tracks=%zu new_labels=%zu pipeline_s=%.6f\n",
              frames, proposals_total, ct_registry_size(registry), new_labels,
              pipeline_s);
  cleanup();
  return 0;
}

int run_synth(const std::string& scenario, const std::string& out_stem,
              const uint64_t* seed) {
  const std::string scene_path = out_stem + ".scene.jsonl";
  const std::string truth_path = out_stem + ".truth.jsonl";
  const ct_status st =
      ct_synth_generate(scenario.c_str(), seed, scene_path.c_str(), truth_path.c_str());
  if (st != CT_OK) return fail_status(st);
  std::printf("scene=%s truth=%s\n", scene_path.c_str(), truth_path.c_str());
  return 0;
}

int run_eval(const std::string& tracks, const std::string& truth, bool machine) {
  ct_metrics m;
  const ct_status st = ct_evaluate_files(tracks.c_str(), truth.c_str(), &m);
  if (st != CT_OK) return fail_status(st);
  if (machine) {
    std::printf("consistency=%.3f switches=%lld reid=%.3f count_err=%lld\n",
                m.consistency, static_cast<long long>(m.id_switches),
                m.reid_success, static_cast<long long>(m.count_error));
  } else {
    std::printf("label consistency          %.3f\n", m.consistency);
    std::printf("id switches                %lld\n",
                static_cast<long long>(m.id_switches));
    std::printf("re-identification success  %.3f  (%lld windows scored)\n",
                m.reid_success, static_cast<long long>(m.evaluated_windows));
    std::printf("track-count error          %lld\n",
                static_cast<long long>(m.count_error));
  }
  return 0;
}

int run_export(const std::string& tracks, const std::string& grid,
               const std::string& ply) {
  const ct_status st = ct_export_ply(tracks.c_str(), grid.c_str(), ply.c_str());
  if (st != CT_OK) return fail_status(st);
  std::printf("ply=%s\n", ply.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_log_level();

  CLI::App app{"3D cuboid shape-matching tracker"};
  app.set_version_flag("--version", std::string("cuboidtrack ") + ct_version());
  app.require_subcommand(1);

  // track
  TrackOptions track_opt;
  CLI::App* track = app.add_subcommand(
      "track", "Assign persistent labels to the proposals of a scene stream");
  track->add_option("scene", track_opt.scene_path, "input scene file")
      ->required()
      ->check(CLI::ExistingFile);
  track->add_option("tracks", track_opt.tracks_path, "output track file")
      ->required();
  track->add_option("--grid-out", track_opt.grid_path,
                    "write the accumulated heatmap grid to this path");
  track->add_option("--tau", track_opt.tau, "IoU acceptance threshold (0, 1]")
      ->check(CLI::Range(1e-12, 1.0));
  track->add_option("--union-mode", track_opt.union_mode, "paper|ie")
      ->check(CLI::IsMember({"paper", "ie"}));
  track->add_option("--assignment", track_opt.assignment, "greedy|argmax")
      ->check(CLI::IsMember({"greedy", "argmax"}));
  track->add_option("--voxel", track_opt.voxel, "heatmap voxel size in meters")
      ->check(CLI::PositiveNumber);

  // synth
  std::string scenario_path, out_stem;
  uint64_t seed_value = 0;
  bool seed_set = false;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a synthetic scene and its ground truth");
  synth->add_option("scenario", scenario_path, "scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("out", out_stem,
                    "output stem; writes <out>.scene.jsonl and <out>.truth.jsonl")
      ->required();
  synth->add_option("--seed", seed_value, "override the scenario seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });

  // eval
  std::string eval_tracks, eval_truth;
  bool machine = false;
  CLI::App* eval = app.add_subcommand("eval", "Score a track file against ground truth");
  eval->add_option("tracks", eval_tracks, "track file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("truth", eval_truth, "ground-truth file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_flag("--machine", machine, "emit one machine-readable line");

  // export
  std::string exp_tracks, exp_grid, exp_ply;
  CLI::App* exp = app.add_subcommand("export", "Export a colored PLY of grid and boxes");
  exp->add_option("tracks", exp_tracks, "track file")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("grid", exp_grid, "heatmap grid file")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("ply", exp_ply, "output PLY path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (track->parsed()) return run_track(track_opt);
  if (synth->parsed()) return run_synth(scenario_path, out_stem, seed_set ? &seed_value : nullptr);
  if (eval->parsed()) return run_eval(eval_tracks, eval_truth, machine);
  if (exp->parsed()) return run_export(exp_tracks, exp_grid, exp_ply);
  return 2;
}
