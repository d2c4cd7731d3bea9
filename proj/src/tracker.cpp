#include "cuboidtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ct {

namespace {

Vec3 blend(const Vec3& old_value, const Vec3& observed, double alpha) {
  return old_value + (observed - old_value) * alpha;
}

void require_global_proposal(const Cuboid& c, std::size_t index) {
  if (!c.rotation.is_zero()) {
    std::ostringstream msg;
    msg << "proposal " << index
        << ": rotation must be zero (gravity_align before matching)";
    fail(ErrorKind::invalid_argument, msg.str());
  }
}

}  // namespace

void TrackerConfig::validate() const {
  if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0) {
    std::ostringstream msg;
    msg << "tau must be in (0, 1] (got " << tau << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  if (fusion == FusionMode::fixed_alpha &&
      (!std::isfinite(fusion_alpha) || fusion_alpha < 0.0 ||
       fusion_alpha > 1.0)) {
    fail(ErrorKind::invalid_argument, "fusion_alpha must be in [0, 1]");
  }
}

const ObjectTrack* Registry::find(std::uint64_t label) const {
  if (label == 0 || label > tracks_.size()) return nullptr;
  return &tracks_[label - 1];
}

std::uint64_t Registry::register_new(const Cuboid& box,
                                     std::int64_t frame_index) {
  if (!box.rotation.is_zero()) {
    fail(ErrorKind::invalid_argument,
         "registered boxes must be gravity-aligned (rotation zero)");
  }
  const std::uint64_t label = next_label_++;
  tracks_.push_back(ObjectTrack{label, box, 1, frame_index, frame_index, 1.0});
  return label;
}

void Registry::apply_observation(std::uint64_t label, const Cuboid& observation,
                                 std::int64_t frame_index,
                                 const TrackerConfig& cfg) {
  if (label == 0 || label > tracks_.size()) {
    std::ostringstream msg;
    msg << "unknown track label " << label;
    fail(ErrorKind::invalid_argument, msg.str());
  }
  ObjectTrack& track = tracks_[label - 1];
  track = update_track(track, observation, frame_index, cfg);
}

Registry Registry::restore(std::vector<ObjectTrack> tracks,
                           std::uint64_t next_label) {
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const ObjectTrack& t = tracks[i];
    if (t.label != i + 1) {
      std::ostringstream msg;
      msg << "registry labels must be the contiguous sequence 1..N (track "
          << i << " has label " << t.label << ")";
      fail(ErrorKind::invariant, msg.str());
    }
    if (t.observation_count < 1) {
      fail(ErrorKind::invariant, "track observation_count must be >= 1");
    }
    if (t.last_seen < t.first_seen) {
      fail(ErrorKind::invariant, "track last_seen must be >= first_seen");
    }
  }
  if (next_label != tracks.size() + 1) {
    fail(ErrorKind::invariant,
         "registry next_label must exceed every issued label by one");
  }
  Registry reg;
  reg.tracks_ = std::move(tracks);
  reg.next_label_ = next_label;
  return reg;
}

BestMatch best_match(const Cuboid& proposal, const Registry& registry,
                     UnionMode mode) {
  BestMatch best;
  for (const ObjectTrack& track : registry.tracks()) {
    const double value = iou3d(proposal, track.box, mode);
    if (!best.label.has_value() || value > best.iou) {
      best.label = track.label;
      best.iou = value;
    }
  }
  return best;
}

ObjectTrack update_track(const ObjectTrack& track, const Cuboid& observation,
                         std::int64_t frame_index, const TrackerConfig& cfg) {
  const double alpha =
      cfg.fusion == FusionMode::count_weighted
          ? 1.0 / static_cast<double>(track.observation_count + 1)
          : cfg.fusion_alpha;
  ObjectTrack updated = track;
  updated.box = Cuboid(blend(track.box.anchor, observation.anchor, alpha),
                       blend(track.box.extents, observation.extents, alpha));
  updated.observation_count += 1;
  updated.last_seen = frame_index;
  updated.heat += 1.0;
  return updated;
}

std::vector<MatchResult> assign_labels(std::span<const Cuboid> proposals,
                                       std::int64_t frame_index,
                                       Registry& registry,
                                       const TrackerConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    require_global_proposal(proposals[i], i);
  }

  const std::vector<ObjectTrack>& tracks = registry.tracks();
  const std::size_t n_proposals = proposals.size();
  const std::size_t n_tracks = tracks.size();

  // Accepted match per proposal: (label, iou). Scored against the registry
  // state at frame start; updates are applied afterwards.
  std::vector<std::optional<std::pair<std::uint64_t, double>>> accepted(
      n_proposals);
  // Best IoU to report for proposals that end up unmatched.
  std::vector<double> unmatched_iou(n_proposals, 0.0);

  if (cfg.assignment == Assignment::independent_argmax) {
    for (std::size_t i = 0; i < n_proposals; ++i) {
      const BestMatch best = best_match(proposals[i], registry, cfg.union_mode);
      if (best.label.has_value() && best.iou >= cfg.tau) {
        accepted[i] = {*best.label, best.iou};
      } else {
        unmatched_iou[i] = best.iou;
      }
    }
  } else {
    struct Candidate {
      double iou;
      std::uint64_t label;
      std::size_t proposal;
      std::size_t track_index;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < n_proposals; ++i) {
      for (std::size_t j = 0; j < n_tracks; ++j) {
        const double value = iou3d(proposals[i], tracks[j].box, cfg.union_mode);
        if (value >= cfg.tau) {
          candidates.push_back({value, tracks[j].label, i, j});
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.iou != b.iou) return a.iou > b.iou;
                if (a.label != b.label) return a.label < b.label;
                return a.proposal < b.proposal;
              });
    std::vector<bool> track_used(n_tracks, false);
    for (const Candidate& c : candidates) {
      if (accepted[c.proposal].has_value() || track_used[c.track_index]) {
        continue;
      }
      accepted[c.proposal] = {c.label, c.iou};
      track_used[c.track_index] = true;
    }
    // Every remaining >= tau pair points at a claimed track, so the
    // reportable best for an unmatched proposal is its max over the tracks
    // left unclaimed this frame (always below tau).
    for (std::size_t i = 0; i < n_proposals; ++i) {
      if (accepted[i].has_value()) continue;
      double best = 0.0;
      for (std::size_t j = 0; j < n_tracks; ++j) {
        if (track_used[j]) continue;
        best = std::max(best,
                        iou3d(proposals[i], tracks[j].box, cfg.union_mode));
      }
      unmatched_iou[i] = best;
    }
  }

  std::vector<MatchResult> results(n_proposals);
  for (std::size_t i = 0; i < n_proposals; ++i) {
    if (accepted[i].has_value()) {
      const auto [label, value] = *accepted[i];
      registry.apply_observation(label, proposals[i], frame_index, cfg);
      results[i] = MatchResult{i, label, value, false};
    } else {
      const std::uint64_t label =
          registry.register_new(proposals[i], frame_index);
      results[i] = MatchResult{i, label, unmatched_iou[i], true};
    }
  }
  return results;
}

FrameOutcome process_frame(const FrameObservation& frame, Registry registry,
                           const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<Cuboid> global;
  global.reserve(frame.proposals.size());
  for (std::size_t i = 0; i < frame.proposals.size(); ++i) {
    try {
      global.push_back(
          transform_to_global(gravity_align(frame.proposals[i]), frame.pose));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "frame " << frame.frame_index << " proposal " << i << ": "
          << e.what();
      fail(e.kind(), msg.str());
    }
  }
  std::vector<MatchResult> matches;
  try {
    matches = assign_labels(global, frame.frame_index, registry, cfg);
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << "frame " << frame.frame_index << ": " << e.what();
    fail(e.kind(), msg.str());
  }
  return FrameOutcome{std::move(registry), std::move(matches)};
}

}  // namespace ct
