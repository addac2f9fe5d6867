#pragma once

#include <cstdint>
#include <vector>

#include "croptrack/detections.hpp"
#include "croptrack/tracker.hpp"

namespace croptrack {

/// Candidate values for the three association thresholds plus the fixed
/// remainder of the tracker configuration. Each list must be non-empty,
/// inside [0,1], and strictly increasing.
struct GridSpec {
  std::vector<double> gamma_dt;
  std::vector<double> gamma_merge;
  std::vector<double> gamma_bndry;
  TrackerConfig base;

  void validate() const;
};

/// One training stream: frames plus the per-label true counts to hit.
struct TuneStream {
  std::vector<FrameDetections> frames;
  std::vector<std::int64_t> true_counts;
};

/// One (cell, stream) evaluation from the sweep.
struct TuneRow {
  double gamma_dt = 0.0;
  double gamma_merge = 0.0;
  double gamma_bndry = 0.0;
  std::size_t stream_index = 0;
  std::vector<std::int64_t> counts;     // per label
  std::int64_t total = 0;
  std::int64_t total_abs_err = 0;       // |total - true total|
  std::int64_t quality_abs_err = 0;     // sum over labels of |count - truth|
};

struct TuneResult {
  TrackerConfig best;
  std::vector<TuneRow> table;  // every cell on every stream, cell-major
};

/// Exhaustive sweep. Objective per cell: summed total-count absolute
/// error across streams, ties broken by summed per-quality absolute
/// error, then by the smallest thresholds (gamma_dt first) — stricter
/// association wins when the counts cannot separate candidates.
/// Throws std::invalid_argument on an empty grid or empty stream list.
TuneResult grid_search(const std::vector<TuneStream>& streams,
                       const LabelSet& labels, const GridSpec& grid);

}  // namespace croptrack
