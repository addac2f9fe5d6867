#include "croptrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace croptrack {

FrameMatchResult match_frame(const std::vector<Detection>& dets,
                             const std::vector<GroundTruthObject>& gts,
                             double iou_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0) {
    throw std::invalid_argument("match_frame: iou_threshold must lie in [0,1]");
  }
  FrameMatchResult result;

  struct Pair {
    double iou;
    std::size_t gt;
    std::size_t det;
  };
  std::vector<Pair> candidates;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const double v = iou(dets[d].box, gts[g].box);
      if (v >= iou_threshold) {
        candidates.push_back({v, g, d});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.det < b.det;
  });

  std::vector<bool> det_used(dets.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (const Pair& p : candidates) {
    if (det_used[p.det] || gt_used[p.gt]) continue;
    det_used[p.det] = true;
    gt_used[p.gt] = true;
    result.pairs.emplace_back(p.det, p.gt);
  }

  result.counts.tp = static_cast<std::int64_t>(result.pairs.size());
  result.counts.fp = static_cast<std::int64_t>(dets.size()) - result.counts.tp;
  result.counts.fn = static_cast<std::int64_t>(gts.size()) - result.counts.tp;
  return result;
}

std::pair<double, double> precision_recall(const MatchCounts& c) {
  const double precision =
      (c.tp + c.fp) == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall =
      (c.tp + c.fn) == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return {precision, recall};
}

namespace {

// Frame-aligned view over detections and ground truth. Frames present on
// only one side pair with an empty counterpart.
std::vector<std::pair<const FrameDetections*, const GroundTruthFrame*>>
align_frames(const std::vector<FrameDetections>& frames,
             const std::vector<GroundTruthFrame>& gt_frames) {
  std::map<std::int64_t, std::pair<const FrameDetections*, const GroundTruthFrame*>> merged;
  for (const FrameDetections& f : frames) {
    merged[f.frame_index].first = &f;
  }
  for (const GroundTruthFrame& g : gt_frames) {
    merged[g.frame_index].second = &g;
  }
  std::vector<std::pair<const FrameDetections*, const GroundTruthFrame*>> out;
  out.reserve(merged.size());
  for (const auto& [index, pair] : merged) {
    out.push_back(pair);
  }
  return out;
}

const std::vector<Detection> kNoDetections;
const std::vector<GroundTruthObject> kNoObjects;

}  // namespace

std::vector<PRPoint> pr_curve(const std::vector<FrameDetections>& frames,
                              const std::vector<GroundTruthFrame>& gt_frames,
                              double iou_threshold,
                              const std::vector<double>& score_thresholds) {
  for (std::size_t i = 1; i < score_thresholds.size(); ++i) {
    if (!(score_thresholds[i] > score_thresholds[i - 1])) {
      throw std::invalid_argument("pr_curve: score thresholds must be strictly increasing");
    }
  }
  const auto aligned = align_frames(frames, gt_frames);

  std::vector<PRPoint> curve;
  curve.reserve(score_thresholds.size());
  for (double threshold : score_thresholds) {
    MatchCounts total;
    for (const auto& [dets_frame, gt_frame] : aligned) {
      const auto& all_dets = dets_frame != nullptr ? dets_frame->detections : kNoDetections;
      const auto& gts = gt_frame != nullptr ? gt_frame->objects : kNoObjects;
      std::vector<Detection> kept;
      kept.reserve(all_dets.size());
      for (const Detection& d : all_dets) {
        if (d.fg_score >= threshold) kept.push_back(d);
      }
      total += match_frame(kept, gts, iou_threshold).counts;
    }
    const auto [precision, recall] = precision_recall(total);
    curve.push_back(PRPoint{threshold, precision, recall});
  }
  return curve;
}

EqualErrorF1 f1_equal_error(const std::vector<PRPoint>& curve) {
  if (curve.empty()) {
    throw std::invalid_argument("f1_equal_error: empty curve");
  }
  auto f1_of = [](double p, double r) {
    return (p + r) == 0.0 ? 0.0 : 100.0 * (2.0 * p * r) / (p + r);
  };

  // An exact sampled equal-error point wins outright.
  for (const PRPoint& pt : curve) {
    if (pt.precision == pt.recall) {
      return EqualErrorF1{f1_of(pt.precision, pt.recall), pt.precision, pt.recall,
                          pt.score_threshold, true, false};
    }
  }

  // Otherwise resolve the first sign change of P - R by linear
  // interpolation between the bracketing samples.
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const PRPoint& a = curve[i - 1];
    const PRPoint& b = curve[i];
    const double da = a.precision - a.recall;
    const double db = b.precision - b.recall;
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
      const double alpha = da / (da - db);
      const double p = a.precision + alpha * (b.precision - a.precision);
      const double r = a.recall + alpha * (b.recall - a.recall);
      const double t = a.score_threshold + alpha * (b.score_threshold - a.score_threshold);
      return EqualErrorF1{f1_of(p, r), p, r, t, true, true};
    }
  }

  // No crossing: fall back to the sample closest to equal error, flagged.
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (std::abs(curve[i].precision - curve[i].recall) <
        std::abs(curve[best].precision - curve[best].recall)) {
      best = i;
    }
  }
  const PRPoint& pt = curve[best];
  return EqualErrorF1{f1_of(pt.precision, pt.recall), pt.precision, pt.recall,
                      pt.score_threshold, false, false};
}

std::int64_t QualityConfusion::row_total(std::size_t row) const {
  std::int64_t total = 0;
  for (std::int64_t c : counts.at(row)) {
    total += c;
  }
  return total;
}

std::optional<double> QualityConfusion::percent(std::size_t row, std::size_t col) const {
  const std::int64_t total = row_total(row);
  if (total == 0) {
    return std::nullopt;
  }
  return 100.0 * static_cast<double>(counts.at(row).at(col)) / static_cast<double>(total);
}

QualityConfusion quality_confusion(const std::vector<LabeledPair>& pairs,
                                   const LabelSet& labels) {
  QualityConfusion confusion;
  confusion.labels = labels;
  confusion.counts.assign(labels.size(), std::vector<std::int64_t>(labels.size(), 0));
  for (const LabeledPair& p : pairs) {
    confusion.counts.at(p.gt_label).at(p.predicted_label) += 1;
  }
  return confusion;
}

std::vector<LabeledPair> collect_label_pairs(
    const std::vector<FrameDetections>& frames,
    const std::vector<GroundTruthFrame>& gt_frames, double iou_threshold,
    double score_threshold) {
  std::vector<LabeledPair> out;
  for (const auto& [dets_frame, gt_frame] : align_frames(frames, gt_frames)) {
    if (dets_frame == nullptr || gt_frame == nullptr) continue;
    std::vector<Detection> kept;
    for (const Detection& d : dets_frame->detections) {
      if (d.fg_score >= score_threshold) kept.push_back(d);
    }
    const FrameMatchResult match = match_frame(kept, gt_frame->objects, iou_threshold);
    for (const auto& [det_idx, gt_idx] : match.pairs) {
      out.push_back(LabeledPair{gt_frame->objects[gt_idx].quality,
                                argmax_quality(kept[det_idx])});
    }
  }
  return out;
}

PercentErrorReport count_percent_error(const std::vector<std::int64_t>& estimated,
                                       const std::vector<std::int64_t>& truth,
                                       const LabelSet& labels) {
  if (estimated.size() != labels.size() || truth.size() != labels.size()) {
    throw std::invalid_argument("count_percent_error: count vectors must match the label set");
  }
  auto percent = [](std::int64_t est, std::int64_t tru) -> std::optional<double> {
    if (tru == 0) {
      if (est == 0) return 0.0;
      return std::nullopt;  // undefined: nonzero estimate against zero truth
    }
    return 100.0 * std::abs(static_cast<double>(est - tru)) / static_cast<double>(tru);
  };

  PercentErrorReport report;
  report.labels = labels;
  std::int64_t est_total = 0;
  std::int64_t true_total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    report.per_label.push_back(percent(estimated[i], truth[i]));
    est_total += estimated[i];
    true_total += truth[i];
  }
  report.total = percent(est_total, true_total);
  return report;
}

PercentErrorReport count_percent_error(const CountReport& estimated,
                                       const std::vector<std::int64_t>& truth) {
  return count_percent_error(estimated.per_quality, truth, estimated.labels);
}

}  // namespace croptrack
