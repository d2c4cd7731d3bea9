#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "cuboidtrack/tracker.hpp"
#include "doctest.h"

using namespace ct;

namespace {

Cuboid box(double x, double y, double z, double l = 1, double w = 1, double h = 1) {
  return Cuboid(Vec3{x, y, z}, Vec3{l, w, h});
}

Registry registry_of(const std::vector<Cuboid>& boxes) {
  Registry reg;
  for (const Cuboid& b : boxes) reg.register_new(b, 0);
  return reg;
}

Pose rz90_pose(const Vec3& t) {
  Mat3 r;
  r.m = {0, -1, 0, 1, 0, 0, 0, 0, 1};
  return Pose(r, t);
}

}  // namespace

TEST_CASE("best_match") {
  const TrackerConfig cfg;
  Registry empty;
  const BestMatch none = best_match(box(0, 0, 0), empty);
  CHECK_FALSE(none.label.has_value());
  CHECK(none.iou == 0.0);

  // five tracks; the fifth is identical to the probe
  Registry reg = registry_of({box(10, 0, 0), box(20, 0, 0), box(30, 0, 0),
                              box(40, 0, 0), box(1, 2, 3)});
  const BestMatch hit = best_match(box(1, 2, 3), reg);
  CHECK(hit.label == 5);
  CHECK(hit.iou == 1.0);

  // two candidates, exhaustively checkable: 1/27 beats 0
  Registry two = registry_of({box(0, 0, 0, 2, 2, 2), box(10, 0, 0, 2, 2, 2)});
  const BestMatch overlap = best_match(box(1, 1, 1, 2, 2, 2), two);
  CHECK(overlap.label == 1);
  CHECK(std::abs(overlap.iou - 1.0 / 27.0) <= 1e-15);
}

TEST_CASE("best_match breaks ties on the lower label") {
  Registry reg = registry_of({box(0, 0, 0), box(0, 0, 0)});
  const BestMatch tie = best_match(box(0, 0, 0), reg);
  CHECK(tie.label == 1);
  CHECK(tie.iou == 1.0);
}

TEST_CASE("register_new issues consecutive labels from 1") {
  Registry reg;
  CHECK(reg.register_new(box(0, 0, 0), 3) == 1);
  CHECK(reg.register_new(box(2, 0, 0), 3) == 2);
  CHECK(reg.register_new(box(4, 0, 0), 4) == 3);
  CHECK(reg.next_label() == 4);
  const ObjectTrack* t = reg.find(1);
  REQUIRE(t != nullptr);
  CHECK(t->observation_count == 1);
  CHECK(t->first_seen == 3);
  CHECK(t->last_seen == 3);
  CHECK(t->heat == 1.0);
  CHECK(reg.find(99) == nullptr);
  CHECK_THROWS_AS(
      reg.register_new(Cuboid(Vec3{0, 0, 0}, Vec3{1, 1, 1}, RotationEuler{0, 0, 1}), 0),
      Error);
}

TEST_CASE("update_track running mean") {
  const TrackerConfig cfg;
  const ObjectTrack track{1, box(0, 0, 0, 2, 2, 2), 1, 0, 0, 1.0};
  const ObjectTrack once = update_track(track, box(1, 0, 0, 2, 2, 2), 5, cfg);
  CHECK(once.box.anchor == Vec3{0.5, 0, 0});
  CHECK(once.observation_count == 2);
  CHECK(once.last_seen == 5);
  CHECK(once.first_seen == 0);
  CHECK(once.heat == 2.0);
  CHECK(once.label == 1);

  // n = 3, extent 2.0 fused with 4.0 gives (3*2 + 4)/4 = 2.5; cross-check by
  // folding the raw sequence one observation at a time
  const TrackerConfig fold_cfg;
  ObjectTrack folded{2, box(0, 0, 0, 2, 2, 2), 1, 0, 0, 1.0};
  folded = update_track(folded, box(0, 0, 0, 2, 2, 2), 1, fold_cfg);
  folded = update_track(folded, box(0, 0, 0, 2, 2, 2), 2, fold_cfg);
  CHECK(folded.observation_count == 3);
  folded = update_track(folded, box(0, 0, 0, 4, 4, 4), 3, fold_cfg);
  CHECK(std::abs(folded.box.extents.x - 2.5) <= 1e-15);
  const double raw_mean = (2.0 + 2.0 + 2.0 + 4.0) / 4.0;
  CHECK(std::abs(folded.box.extents.x - raw_mean) <= 1e-12);
}

TEST_CASE("update_track fixed alpha") {
  TrackerConfig cfg;
  cfg.fusion = FusionMode::fixed_alpha;
  cfg.fusion_alpha = 1.0;  // keep the latest observation
  const ObjectTrack track{1, box(0, 0, 0), 4, 0, 3, 4.0};
  const ObjectTrack latest = update_track(track, box(9, 9, 9), 8, cfg);
  CHECK(latest.box.anchor == Vec3{9, 9, 9});

  cfg.fusion_alpha = 0.0;  // keep the first observation
  const ObjectTrack first = update_track(track, box(9, 9, 9), 8, cfg);
  CHECK(first.box.anchor == Vec3{0, 0, 0});
  CHECK(first.observation_count == 5);
  CHECK(first.last_seen == 8);
}

TEST_CASE("assign_labels matches an identical box") {
  TrackerConfig cfg;
  cfg.tau = 0.25;
  Registry reg = registry_of({box(5, 0, 0), box(9, 0, 0), box(1, 2, 3)});
  const std::vector<Cuboid> proposals{box(1, 2, 3)};
  const auto results = assign_labels(proposals, 7, reg, cfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].assigned_label == 3);
  CHECK(results[0].best_iou == 1.0);
  CHECK_FALSE(results[0].is_new);
  CHECK(reg.find(3)->observation_count == 2);
  CHECK(reg.find(3)->last_seen == 7);
}

TEST_CASE("assign_labels registers a disjoint proposal") {
  TrackerConfig cfg;
  Registry reg = registry_of({box(0, 0, 0)});
  const std::vector<Cuboid> proposals{box(50, 0, 0)};
  const auto results = assign_labels(proposals, 1, reg, cfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].is_new);
  CHECK(results[0].assigned_label == 2);
  CHECK(results[0].best_iou == 0.0);
  CHECK(reg.size() == 2);
}

TEST_CASE("greedy one-to-one vs independent argmax") {
  // Tracks: t1 at x=0, t2 at x=16/21. Proposals: A at x=1/9 (IoU 0.8 with
  // t1), B at x=1/3 (0.5 with t1, 0.4 with t2). Unit boxes throughout.
  const Cuboid t1 = box(0, 0, 0);
  const Cuboid t2 = box(16.0 / 21.0, 0, 0);
  const Cuboid a = box(1.0 / 9.0, 0, 0);
  const Cuboid b = box(1.0 / 3.0, 0, 0);

  // pin down the pair matrix the scenario is built on
  CHECK(std::abs(iou3d(a, t1) - 0.8) <= 1e-12);
  CHECK(std::abs(iou3d(b, t1) - 0.5) <= 1e-12);
  CHECK(std::abs(iou3d(b, t2) - 0.4) <= 1e-12);
  CHECK(iou3d(a, t2) < 0.25);

  TrackerConfig cfg;
  cfg.tau = 0.25;

  {
    Registry reg = registry_of({t1, t2});
    const std::vector<Cuboid> proposals{a, b};
    const auto results = assign_labels(proposals, 1, reg, cfg);
    CHECK(results[0].assigned_label == 1);
    CHECK(std::abs(results[0].best_iou - 0.8) <= 1e-12);
    CHECK_FALSE(results[0].is_new);
    CHECK(results[1].assigned_label == 2);
    CHECK(std::abs(results[1].best_iou - 0.4) <= 1e-12);
    CHECK_FALSE(results[1].is_new);
    CHECK(reg.size() == 2);
  }
  {
    TrackerConfig argmax_cfg = cfg;
    argmax_cfg.assignment = Assignment::independent_argmax;
    Registry reg = registry_of({t1, t2});
    const std::vector<Cuboid> proposals{a, b};
    const auto results = assign_labels(proposals, 1, reg, argmax_cfg);
    CHECK(results[0].assigned_label == 1);
    CHECK(results[1].assigned_label == 1);  // both claim the same track
    CHECK(std::abs(results[1].best_iou - 0.5) <= 1e-12);
    CHECK(reg.find(1)->observation_count == 3);
  }
}

TEST_CASE("greedy assignment is one-to-one") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> pos(-4.0, 4.0);
  std::uniform_real_distribution<double> ext(0.5, 2.0);
  TrackerConfig cfg;
  for (int round = 0; round < 200; ++round) {
    Registry reg;
    for (int t = 0; t < 6; ++t) {
      reg.register_new(box(pos(rng), pos(rng), pos(rng), ext(rng), ext(rng), ext(rng)), 0);
    }
    std::vector<Cuboid> proposals;
    for (int p = 0; p < 6; ++p) {
      proposals.push_back(box(pos(rng), pos(rng), pos(rng), ext(rng), ext(rng), ext(rng)));
    }
    const auto results = assign_labels(proposals, 1, reg, cfg);
    std::vector<std::uint64_t> used;
    for (const MatchResult& r : results) {
      CHECK(r.is_new == (r.best_iou < cfg.tau));
      if (!r.is_new) {
        for (std::uint64_t label : used) CHECK(label != r.assigned_label);
        used.push_back(r.assigned_label);
      }
    }
  }
}

TEST_CASE("assign_labels rejects rotated proposals") {
  TrackerConfig cfg;
  Registry reg;
  const std::vector<Cuboid> proposals{
      Cuboid(Vec3{0, 0, 0}, Vec3{1, 1, 1}, RotationEuler{0, 0, 0.5})};
  CHECK_THROWS_AS(assign_labels(proposals, 0, reg, cfg), Error);
}

TEST_CASE("tracker config validation") {
  TrackerConfig cfg;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.tau = 1.01;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.tau = 1.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.fusion = FusionMode::fixed_alpha;
  cfg.fusion_alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("process_frame basics") {
  const TrackerConfig cfg;

  // zero proposals leave the registry untouched
  FrameObservation empty;
  empty.frame_index = 0;
  const FrameOutcome none = process_frame(empty, Registry{}, cfg);
  CHECK(none.registry.size() == 0);
  CHECK(none.matches.empty());

  // first frame labels proposals 1..M in input order
  FrameObservation first;
  first.frame_index = 0;
  const int m = 7;
  for (int i = 0; i < m; ++i) first.proposals.push_back(box(3.0 * i, 0, 0));
  const FrameOutcome outcome = process_frame(first, Registry{}, cfg);
  REQUIRE(outcome.matches.size() == m);
  for (int i = 0; i < m; ++i) {
    CHECK(outcome.matches[i].assigned_label == static_cast<std::uint64_t>(i + 1));
    CHECK(outcome.matches[i].is_new);
  }
}

TEST_CASE("process_frame attaches the frame index to errors") {
  TrackerConfig cfg;
  cfg.tau = 0.0;  // invalid
  FrameObservation frame;
  frame.frame_index = 12;
  try {
    process_frame(frame, Registry{}, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("tau") != std::string::npos);
  }
}

TEST_CASE("occlusion re-identification restores the original label") {
  const TrackerConfig cfg;
  Registry reg;
  const Cuboid home = box(1, 1, 0);
  const Cuboid elsewhere = box(8, 8, 0);

  // seen for a while, absent for a gap, then back at the same place
  for (int f = 0; f < 5; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    frame.proposals = {home, elsewhere};
    auto outcome = process_frame(frame, std::move(reg), cfg);
    reg = std::move(outcome.registry);
  }
  for (int f = 5; f < 15; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    frame.proposals = {elsewhere};
    auto outcome = process_frame(frame, std::move(reg), cfg);
    reg = std::move(outcome.registry);
    CHECK(outcome.matches[0].assigned_label == 2);
  }
  FrameObservation back;
  back.frame_index = 15;
  back.proposals = {home};
  const auto outcome = process_frame(back, std::move(reg), cfg);
  CHECK(outcome.matches[0].assigned_label == 1);
  CHECK_FALSE(outcome.matches[0].is_new);
  CHECK(outcome.registry.size() == 2);  // no extra label issued
  CHECK(outcome.registry.find(1)->last_seen == 15);
}

TEST_CASE("labels persist and are never reused") {
  const TrackerConfig cfg;
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> pos(-10.0, 10.0);
  Registry reg;
  std::vector<std::pair<std::uint64_t, Cuboid>> snapshots;
  for (int f = 0; f < 50; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    for (int p = 0; p < 3; ++p) frame.proposals.push_back(box(pos(rng), pos(rng), 0));
    auto outcome = process_frame(frame, std::move(reg), cfg);
    reg = std::move(outcome.registry);
    // labels stay attached to their tracks, in issue order
    for (std::size_t i = 0; i < reg.tracks().size(); ++i) {
      CHECK(reg.tracks()[i].label == i + 1);
    }
    CHECK(reg.next_label() == reg.size() + 1);
  }
}

TEST_CASE("re-basing the world frame leaves labeling unchanged") {
  const TrackerConfig cfg;
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> ext(0.4, 1.5);

  // camera-frame content is shared; only the poses are re-based
  std::vector<FrameObservation> frames;
  for (int f = 0; f < 20; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    frame.pose = rz90_pose(Vec3{pos(rng), pos(rng), 0});
    for (int p = 0; p < 4; ++p) {
      frame.proposals.push_back(box(pos(rng), pos(rng), pos(rng), ext(rng), ext(rng), ext(rng)));
    }
    frames.push_back(frame);
  }
  const Pose rebase = rz90_pose(Vec3{11, -7, 3});

  Registry base, shifted;
  for (const FrameObservation& frame : frames) {
    auto a = process_frame(frame, std::move(base), cfg);
    base = std::move(a.registry);

    FrameObservation moved = frame;
    moved.pose = compose(rebase, frame.pose);
    auto b = process_frame(moved, std::move(shifted), cfg);
    shifted = std::move(b.registry);

    REQUIRE(a.matches.size() == b.matches.size());
    for (std::size_t i = 0; i < a.matches.size(); ++i) {
      CHECK(a.matches[i].assigned_label == b.matches[i].assigned_label);
      CHECK(a.matches[i].is_new == b.matches[i].is_new);
    }
  }
  CHECK(base.size() == shifted.size());
}

TEST_CASE("identical inputs give bit-identical outcomes") {
  const TrackerConfig cfg;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::vector<FrameObservation> frames;
  for (int f = 0; f < 30; ++f) {
    FrameObservation frame;
    frame.frame_index = f;
    for (int p = 0; p < 5; ++p) frame.proposals.push_back(box(pos(rng), pos(rng), 0));
    frames.push_back(frame);
  }
  Registry r1, r2;
  std::vector<MatchResult> m1, m2;
  for (const FrameObservation& frame : frames) {
    auto a = process_frame(frame, std::move(r1), cfg);
    r1 = std::move(a.registry);
    m1.insert(m1.end(), a.matches.begin(), a.matches.end());
    auto b = process_frame(frame, std::move(r2), cfg);
    r2 = std::move(b.registry);
    m2.insert(m2.end(), b.matches.begin(), b.matches.end());
  }
  CHECK(r1 == r2);
  CHECK(m1 == m2);
}

TEST_CASE("registry restore validates its snapshot") {
  std::vector<ObjectTrack> good{{1, box(0, 0, 0), 2, 0, 5, 2.0},
                                {2, box(3, 0, 0), 1, 4, 4, 1.0}};
  const Registry reg = Registry::restore(good, 3);
  CHECK(reg.size() == 2);
  CHECK(reg.next_label() == 3);

  std::vector<ObjectTrack> gap{{1, box(0, 0, 0), 1, 0, 0, 1.0},
                               {7, box(3, 0, 0), 1, 0, 0, 1.0}};
  CHECK_THROWS_AS(Registry::restore(gap, 8), Error);
  CHECK_THROWS_AS(Registry::restore(good, 9), Error);
  std::vector<ObjectTrack> bad_count{{1, box(0, 0, 0), 0, 0, 0, 0.0}};
  CHECK_THROWS_AS(Registry::restore(bad_count, 2), Error);
  std::vector<ObjectTrack> bad_seen{{1, box(0, 0, 0), 1, 5, 2, 1.0}};
  CHECK_THROWS_AS(Registry::restore(bad_seen, 2), Error);
}
