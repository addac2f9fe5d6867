#include "croptrack/tracker.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace croptrack {

const char* to_string(SuppressReason r) {
  switch (r) {
    case SuppressReason::StartZone: return "start_zone";
    case SuppressReason::StopZone: return "stop_zone";
    case SuppressReason::MergeIoU: return "merge_iou";
    case SuppressReason::Boundary: return "boundary";
  }
  return "?";
}

std::vector<std::pair<std::size_t, std::size_t>> associate_greedy(
    const std::vector<BoundingBox>& track_boxes,
    const std::vector<BoundingBox>& det_boxes, double iou_threshold) {
  const std::size_t n_tracks = track_boxes.size();
  const std::size_t n_dets = det_boxes.size();
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  if (n_tracks == 0 || n_dets == 0) {
    return matches;
  }

  std::vector<double> iou_matrix(n_tracks * n_dets);
  for (std::size_t t = 0; t < n_tracks; ++t) {
    for (std::size_t d = 0; d < n_dets; ++d) {
      iou_matrix[t * n_dets + d] = iou(track_boxes[t], det_boxes[d]);
    }
  }

  std::vector<bool> track_used(n_tracks, false);
  std::vector<bool> det_used(n_dets, false);

  // Iterated global max: scan order (track asc, det asc) plus strict >
  // on the running best gives the (lower track, lower detection) tie-break.
  while (true) {
    double best = -1.0;
    std::size_t best_t = 0;
    std::size_t best_d = 0;
    for (std::size_t t = 0; t < n_tracks; ++t) {
      if (track_used[t]) continue;
      for (std::size_t d = 0; d < n_dets; ++d) {
        if (det_used[d]) continue;
        const double v = iou_matrix[t * n_dets + d];
        if (v > best) {
          best = v;
          best_t = t;
          best_d = d;
        }
      }
    }
    if (!(best > iou_threshold)) {
      break;
    }
    track_used[best_t] = true;
    det_used[best_d] = true;
    matches.emplace_back(best_t, best_d);
  }
  return matches;
}

std::size_t track_quality(const Track& t) {
  if (t.detection_count < 1) {
    throw std::logic_error("track_quality: track has no detections");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.quality_votes.size(); ++i) {
    if (t.quality_votes[i] > t.quality_votes[best] ||
        (t.quality_votes[i] == t.quality_votes[best] &&
         t.quality_score_sums[i] > t.quality_score_sums[best])) {
      best = i;
    }
  }
  return best;
}

Tracker::Tracker(TrackerConfig config, LabelSet labels)
    : config_(std::move(config)), labels_(std::move(labels)) {
  config_.validate();
}

std::int64_t Tracker::spawn_track(const Detection& det, std::int64_t frame_index) {
  Track t;
  t.id = next_id_++;
  t.current_box = det.box;
  t.state = TrackState::Active;
  t.quality_votes.assign(labels_.size(), 0);
  t.quality_score_sums.assign(labels_.size(), 0.0);
  t.init_frame = frame_index;
  t.last_seen_frame = frame_index;
  bind_detection(t, det, frame_index);
  tracks_.push_back(std::move(t));
  return tracks_.back().id;
}

void Tracker::bind_detection(Track& track, const Detection& det,
                             std::int64_t frame_index) {
  if (det.quality_scores.size() != labels_.size()) {
    throw std::invalid_argument("detection quality scores do not match the label set");
  }
  track.current_box = det.box;
  track.miss_count = 0;
  track.quality_votes[argmax_quality(det)] += 1;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    track.quality_score_sums[i] += det.quality_scores[i];
  }
  track.fg_history.push_back(det.fg_score);
  track.last_seen_frame = frame_index;
  track.detection_count += 1;
  track.per_frame_detected.push_back(true);
}

FrameUpdate Tracker::init_frame(const FrameDetections& frame) {
  if (initialized_) {
    throw TrackerStateError("init_frame called twice");
  }
  if (finalized_) {
    throw TrackerStateError("tracker already finalized");
  }
  FrameUpdate update;
  update.frame_index = frame.frame_index;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const Detection& det = frame.detections[i];
    if (config_.init_frame_zone_filter) {
      const Zone z = zone_of(det.box, config_.geometry);
      if (z == Zone::Start) {
        update.suppressed.emplace_back(i, SuppressReason::StartZone);
        continue;
      }
      if (z == Zone::Stop) {
        update.suppressed.emplace_back(i, SuppressReason::StopZone);
        continue;
      }
    }
    update.spawned.push_back(spawn_track(det, frame.frame_index));
  }
  initialized_ = true;
  last_frame_ = frame.frame_index;
  return update;
}

FrameUpdate Tracker::step(const FrameDetections& frame) {
  if (!initialized_) {
    throw TrackerStateError("step called before init_frame");
  }
  if (finalized_) {
    throw TrackerStateError("tracker already finalized");
  }
  if (frame.frame_index <= last_frame_) {
    throw TrackerStateError("frame " + std::to_string(frame.frame_index) +
                            " is not after frame " + std::to_string(last_frame_));
  }

  FrameUpdate update;
  update.frame_index = frame.frame_index;

  std::vector<std::size_t> active;  // indices into tracks_, ascending id
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (tracks_[i].state == TrackState::Active) {
      active.push_back(i);
    }
  }

  // Stage 1: greedy global-max IoU association against active tracks.
  std::vector<BoundingBox> track_boxes;
  track_boxes.reserve(active.size());
  for (std::size_t i : active) {
    track_boxes.push_back(tracks_[i].current_box);
  }
  std::vector<BoundingBox> det_boxes;
  det_boxes.reserve(frame.detections.size());
  for (const Detection& d : frame.detections) {
    det_boxes.push_back(d.box);
  }

  std::vector<bool> det_consumed(frame.detections.size(), false);
  std::vector<bool> track_matched(tracks_.size(), false);
  for (const auto& [ti, di] :
       associate_greedy(track_boxes, det_boxes, config_.gamma_dt)) {
    Track& track = tracks_[active[ti]];
    bind_detection(track, frame.detections[di], frame.frame_index);
    track_matched[active[ti]] = true;
    det_consumed[di] = true;
    update.matched.emplace_back(track.id, di);
  }

  // Stage 2: remaining detections become spawn candidates, strongest
  // foreground score first. Freshly spawned tracks join the active set
  // immediately so overlapping candidates cannot double-spawn.
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    if (!det_consumed[i]) {
      remaining.push_back(i);
    }
  }
  std::stable_sort(remaining.begin(), remaining.end(),
                   [&](std::size_t a, std::size_t b) {
                     return frame.detections[a].fg_score >
                            frame.detections[b].fg_score;
                   });

  for (std::size_t di : remaining) {
    const Detection& det = frame.detections[di];
    const Zone z = zone_of(det.box, config_.geometry);
    if (z == Zone::Start) {
      update.suppressed.emplace_back(di, SuppressReason::StartZone);
      continue;
    }
    if (z == Zone::Stop) {
      update.suppressed.emplace_back(di, SuppressReason::StopZone);
      continue;
    }
    double max_iou = 0.0;
    double max_bndry = 0.0;
    for (const Track& t : tracks_) {
      if (t.state != TrackState::Active) continue;
      max_iou = std::max(max_iou, iou(t.current_box, det.box));
      max_bndry = std::max(max_bndry, boundary_measure(t.current_box, det.box));
    }
    if (max_iou >= config_.gamma_merge) {
      update.suppressed.emplace_back(di, SuppressReason::MergeIoU);
      continue;
    }
    if (max_bndry >= config_.gamma_bndry) {
      update.suppressed.emplace_back(di, SuppressReason::Boundary);
      continue;
    }
    update.spawned.push_back(spawn_track(det, frame.frame_index));
  }

  // Miss counting for tracks that existed before this frame and went
  // unmatched. The counter is consecutive: any match resets it.
  for (std::size_t i : active) {
    Track& t = tracks_[i];
    if (t.state != TrackState::Active || track_matched[i]) continue;
    t.miss_count += 1;
    t.per_frame_detected.push_back(false);
    if (t.miss_count >= config_.max_misses) {
      t.state = TrackState::Retired;
      update.retired_by_miss.push_back(t.id);
    }
  }

  // Stop-zone retirement, after the frame's update: a matched track that
  // drifted into the stop zone still finishes its update first.
  for (Track& t : tracks_) {
    if (t.state != TrackState::Active) continue;
    if (zone_of(t.current_box, config_.geometry) == Zone::Stop) {
      t.state = TrackState::Retired;
      update.retired_by_stop_zone.push_back(t.id);
    }
  }

  last_frame_ = frame.frame_index;
  return update;
}

FrameUpdate Tracker::process(const FrameDetections& frame) {
  return initialized_ ? step(frame) : init_frame(frame);
}

CountReport Tracker::finalize() {
  if (finalized_) {
    throw TrackerStateError("finalize called twice");
  }
  finalized_ = true;
  for (Track& t : tracks_) {
    t.state = TrackState::Retired;
  }
  CountReport report;
  report.labels = labels_;
  report.per_quality.assign(labels_.size(), 0);
  for (const Track& t : tracks_) {
    if (t.detection_count < config_.min_track_detections) continue;
    const std::size_t q = track_quality(t);
    report.per_quality[q] += 1;
    report.tracks.push_back(TrackRecord{t.id, q, t.init_frame, t.last_seen_frame,
                                        t.last_seen_frame - t.init_frame + 1,
                                        t.detection_count});
  }
  report.total = std::accumulate(report.per_quality.begin(),
                                 report.per_quality.end(), std::int64_t{0});
  return report;
}

CountReport run_tracker(const TrackerConfig& config, const LabelSet& labels,
                        const std::vector<FrameDetections>& frames,
                        std::vector<FrameUpdate>* updates) {
  Tracker tracker(config, labels);
  for (const FrameDetections& frame : frames) {
    FrameUpdate u = tracker.process(frame);
    if (updates != nullptr) {
      updates->push_back(std::move(u));
    }
  }
  return tracker.finalize();
}

}  // namespace croptrack
