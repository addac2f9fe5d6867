#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "croptrack/detections.hpp"
#include "croptrack/geometry.hpp"

namespace croptrack {

/// Tracker thresholds and gates.
///
/// gamma_dt     stage-1 association: bind when IoU is strictly above it.
/// gamma_merge  stage-2 suppression: drop a candidate when its IoU against
///              any active track reaches it.
/// gamma_bndry  stage-2 suppression: drop a candidate when the fraction of
///              it contained in any active track reaches it.
///
/// Thresholds above 1 are legal and disable the corresponding gate, since
/// both measures are bounded by 1.
struct TrackerConfig {
  double gamma_dt = 0.3;
  double gamma_merge = 0.4;
  double gamma_bndry = 0.5;
  ImageGeometry geometry;
  int max_misses = 3;
  int min_track_detections = 1;
  bool init_frame_zone_filter = false;

  TrackerConfig() = default;
  explicit TrackerConfig(ImageGeometry g) : geometry(std::move(g)) {}

  void validate() const {
    auto check_gamma = [](double g, const char* name) {
      if (!(g >= 0.0) || !std::isfinite(g)) {
        throw std::invalid_argument(std::string("TrackerConfig: ") + name +
                                    " must be finite and >= 0");
      }
    };
    check_gamma(gamma_dt, "gamma_dt");
    check_gamma(gamma_merge, "gamma_merge");
    check_gamma(gamma_bndry, "gamma_bndry");
    if (max_misses < 1) {
      throw std::invalid_argument("TrackerConfig: max_misses must be >= 1");
    }
    if (min_track_detections < 1) {
      throw std::invalid_argument("TrackerConfig: min_track_detections must be >= 1");
    }
    geometry.validate();
  }
};

enum class TrackState { Active, Retired };

/// Lifecycle record of one tracked object. The box is always the last
/// matched detection; there is no motion model.
struct Track {
  std::int64_t id = 0;
  BoundingBox current_box;
  TrackState state = TrackState::Active;
  int miss_count = 0;
  std::vector<std::int64_t> quality_votes;    // per label
  std::vector<double> quality_score_sums;     // per label, for vote tie-breaks
  std::vector<double> fg_history;
  std::int64_t init_frame = 0;
  std::int64_t last_seen_frame = 0;
  std::int64_t detection_count = 0;
  std::vector<bool> per_frame_detected;       // one entry per processed frame while active
};

enum class SuppressReason { StartZone, StopZone, MergeIoU, Boundary };

const char* to_string(SuppressReason r);

/// Audit record of one processed frame: where every detection went and
/// which tracks changed state. Each detection index lands in exactly one
/// of matched / spawned / suppressed.
struct FrameUpdate {
  std::int64_t frame_index = 0;
  std::vector<std::pair<std::int64_t, std::size_t>> matched;  // (track id, det index)
  std::vector<std::int64_t> spawned;                          // track ids
  std::vector<std::int64_t> retired_by_miss;
  std::vector<std::int64_t> retired_by_stop_zone;
  std::vector<std::pair<std::size_t, SuppressReason>> suppressed;  // (det index, reason)
};

struct TrackRecord {
  std::int64_t id = 0;
  std::size_t quality = 0;
  std::int64_t init_frame = 0;
  std::int64_t last_seen_frame = 0;
  std::int64_t lifetime = 0;  // frames from init to last seen, inclusive
  std::int64_t detection_count = 0;
};

/// Final per-quality counts. Only tracks meeting min_track_detections are
/// counted and listed; total always equals the sum of per-quality counts.
struct CountReport {
  LabelSet labels;
  std::vector<std::int64_t> per_quality;
  std::int64_t total = 0;
  std::vector<TrackRecord> tracks;
};

class TrackerStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Stage-1 association core: repeatedly bind the globally best
/// (track, detection) pair while its IoU is strictly above the threshold.
/// Ties break toward the lower track index, then the lower detection
/// index. Returns (track index, detection index) pairs in bind order.
std::vector<std::pair<std::size_t, std::size_t>> associate_greedy(
    const std::vector<BoundingBox>& track_boxes,
    const std::vector<BoundingBox>& det_boxes, double iou_threshold);

/// Two-stage tracking-via-detection state machine. Single-owner and
/// strictly sequential: feed frames in increasing frame order, then
/// finalize once. Separate instances are independent.
class Tracker {
 public:
  Tracker(TrackerConfig config, LabelSet labels);

  /// Seeds one track per detection of the first frame. With the zone
  /// filter on, detections in the start/stop zones are suppressed instead.
  FrameUpdate init_frame(const FrameDetections& frame);

  /// Processes one subsequent frame: stage-1 association, stage-2
  /// spawning behind the zone/merge/boundary gates, then miss counting
  /// and stop-zone retirement.
  FrameUpdate step(const FrameDetections& frame);

  /// init_frame on the first call, step afterwards.
  FrameUpdate process(const FrameDetections& frame);

  /// Retires everything still active and tallies the counts.
  CountReport finalize();

  bool initialized() const { return initialized_; }
  bool finalized() const { return finalized_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }
  const LabelSet& labels() const { return labels_; }

 private:
  std::int64_t spawn_track(const Detection& det, std::int64_t frame_index);
  void bind_detection(Track& track, const Detection& det, std::int64_t frame_index);

  TrackerConfig config_;
  LabelSet labels_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 0;
  std::int64_t last_frame_ = -1;
  bool initialized_ = false;
  bool finalized_ = false;
};

/// Quality of a finished track: the most frequent vote, ties broken by
/// the higher cumulative score over the track's history, then by label
/// order. Requires at least one vote.
std::size_t track_quality(const Track& t);

/// Convenience pipeline: run a whole stream through a fresh tracker.
/// Per-frame audit records are appended to *updates when given.
CountReport run_tracker(const TrackerConfig& config, const LabelSet& labels,
                        const std::vector<FrameDetections>& frames,
                        std::vector<FrameUpdate>* updates = nullptr);

}  // namespace croptrack
