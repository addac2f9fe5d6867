#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "croptrack/detections.hpp"
#include "croptrack/geometry.hpp"
#include "croptrack/tracker.hpp"

namespace croptrack {

struct GroundTruthObject {
  BoundingBox box;
  std::size_t quality = 0;
};

struct GroundTruthFrame {
  std::int64_t frame_index = 0;
  std::vector<GroundTruthObject> objects;
};

struct GroundTruthStream {
  LabelSet labels;
  std::optional<StreamMeta> meta;
  std::vector<GroundTruthFrame> frames;
};

/// Reads a JSON Lines ground-truth stream:
/// {"frame": n, "objects": [{"box": [...], "quality": "red"}, ...]}
GroundTruthStream parse_ground_truth(std::istream& source,
                                     const std::optional<LabelSet>& forced_labels = {});

void write_ground_truth(std::ostream& out, const GroundTruthStream& stream);

/// Detection match tallies. True negatives have no meaning for detection
/// (there is no enumerable set of correct rejections); the field is kept
/// as an always-zero placeholder so the tally mirrors the usual quartet.
struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;  // placeholder, always 0

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

struct FrameMatchResult {
  MatchCounts counts;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (det index, gt index)
};

/// Greedy one-to-one matching by descending IoU, binding pairs with
/// IoU >= iou_threshold. Same greedy discipline as the tracker's stage 1;
/// ties break toward the lower ground-truth index, then detection index.
/// Unmatched detections are FP, unmatched ground truths FN.
FrameMatchResult match_frame(const std::vector<Detection>& dets,
                             const std::vector<GroundTruthObject>& gts,
                             double iou_threshold);

/// P = TP/(TP+FP), R = TP/(TP+FN); an empty denominator counts as a
/// vacuously perfect 1.0 so threshold sweeps stay total.
std::pair<double, double> precision_recall(const MatchCounts& counts);

struct PRPoint {
  double score_threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Sweeps the strictly increasing score thresholds: filter, match every
/// frame at iou_threshold, aggregate counts, then precision/recall.
/// Frames are aligned by frame index; a frame present on only one side
/// contributes pure FPs or FNs.
std::vector<PRPoint> pr_curve(const std::vector<FrameDetections>& frames,
                              const std::vector<GroundTruthFrame>& gt_frames,
                              double iou_threshold,
                              const std::vector<double>& score_thresholds);

/// F1 at the equal-error point, reported on a 0-100 scale.
struct EqualErrorF1 {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double score_threshold = 0.0;
  bool crossing_found = false;  // false: closest |P-R| point used instead
  bool interpolated = false;    // true: crossing found between samples
};

/// Locates the threshold where precision equals recall. An exact sampled
/// P == R point is used as is; otherwise a sign change of P - R between
/// adjacent samples is resolved by linear interpolation. With no crossing
/// at all the sampled point minimizing |P - R| is returned, flagged.
EqualErrorF1 f1_equal_error(const std::vector<PRPoint>& curve);

/// Row-normalized quality confusion. Rows are ground truth, columns are
/// predictions; percentages are per row, undefined for empty rows.
struct QualityConfusion {
  LabelSet labels;
  std::vector<std::vector<std::int64_t>> counts;

  std::int64_t row_total(std::size_t row) const;
  /// 100 * count / row_total, or nullopt when the row has no samples.
  std::optional<double> percent(std::size_t row, std::size_t col) const;
};

struct LabeledPair {
  std::size_t gt_label = 0;
  std::size_t predicted_label = 0;
};

QualityConfusion quality_confusion(const std::vector<LabeledPair>& pairs,
                                   const LabelSet& labels);

/// Matches detections to ground truth over a whole stream at one
/// (iou, score) operating point and pairs up the labels: ground truth
/// label vs the detection's argmax quality.
std::vector<LabeledPair> collect_label_pairs(
    const std::vector<FrameDetections>& frames,
    const std::vector<GroundTruthFrame>& gt_frames, double iou_threshold,
    double score_threshold);

/// Count accuracy vs ground truth: 100 * |estimated - truth| / truth.
/// A zero-truth bucket with a nonzero estimate has no defined percent
/// error and is reported as nullopt; zero vs zero is exact (0%).
struct PercentErrorReport {
  LabelSet labels;
  std::vector<std::optional<double>> per_label;
  std::optional<double> total;
};

PercentErrorReport count_percent_error(const std::vector<std::int64_t>& estimated,
                                       const std::vector<std::int64_t>& truth,
                                       const LabelSet& labels);

PercentErrorReport count_percent_error(const CountReport& estimated,
                                       const std::vector<std::int64_t>& truth);

}  // namespace croptrack
