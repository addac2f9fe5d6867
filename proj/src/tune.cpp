#include "croptrack/tune.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

namespace croptrack {

namespace {

void validate_axis(const std::vector<double>& values, const char* name) {
  if (values.empty()) {
    throw std::invalid_argument(std::string("GridSpec: ") + name + " list is empty");
  }
  double prev = -1.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument(std::string("GridSpec: ") + name +
                                  " values must lie in [0,1]");
    }
    if (v <= prev) {
      throw std::invalid_argument(std::string("GridSpec: ") + name +
                                  " values must be strictly increasing");
    }
    prev = v;
  }
}

}  // namespace

void GridSpec::validate() const {
  validate_axis(gamma_dt, "gamma_dt");
  validate_axis(gamma_merge, "gamma_merge");
  validate_axis(gamma_bndry, "gamma_bndry");
  base.validate();
}

TuneResult grid_search(const std::vector<TuneStream>& streams,
                       const LabelSet& labels, const GridSpec& grid) {
  grid.validate();
  if (streams.empty()) {
    throw std::invalid_argument("grid_search: needs at least one stream");
  }
  for (std::size_t s = 0; s < streams.size(); ++s) {
    if (streams[s].true_counts.size() != labels.size()) {
      throw std::invalid_argument(
          "grid_search: stream " + std::to_string(s) + " has " +
          std::to_string(streams[s].true_counts.size()) +
          " true counts for " + std::to_string(labels.size()) + " labels");
    }
  }

  TuneResult result;
  result.best = grid.base;
  bool have_best = false;
  std::int64_t best_total_err = 0;
  std::int64_t best_quality_err = 0;

  // Ascending loop order doubles as the tie-break: the first cell to hit
  // the minimum has the lexicographically smallest (dt, merge, bndry).
  for (double dt : grid.gamma_dt) {
    for (double merge : grid.gamma_merge) {
      for (double bndry : grid.gamma_bndry) {
        TrackerConfig cfg = grid.base;
        cfg.gamma_dt = dt;
        cfg.gamma_merge = merge;
        cfg.gamma_bndry = bndry;

        std::int64_t cell_total_err = 0;
        std::int64_t cell_quality_err = 0;
        for (std::size_t s = 0; s < streams.size(); ++s) {
          const TuneStream& stream = streams[s];
          const CountReport report = run_tracker(cfg, labels, stream.frames);

          TuneRow row;
          row.gamma_dt = dt;
          row.gamma_merge = merge;
          row.gamma_bndry = bndry;
          row.stream_index = s;
          row.counts = report.per_quality;
          row.total = report.total;

          const std::int64_t true_total = std::accumulate(
              stream.true_counts.begin(), stream.true_counts.end(),
              std::int64_t{0});
          row.total_abs_err = std::llabs(report.total - true_total);
          row.quality_abs_err = 0;
          for (std::size_t q = 0; q < labels.size(); ++q) {
            row.quality_abs_err +=
                std::llabs(report.per_quality[q] - stream.true_counts[q]);
          }

          cell_total_err += row.total_abs_err;
          cell_quality_err += row.quality_abs_err;
          result.table.push_back(std::move(row));
        }

        if (!have_best || cell_total_err < best_total_err ||
            (cell_total_err == best_total_err &&
             cell_quality_err < best_quality_err)) {
          have_best = true;
          best_total_err = cell_total_err;
          best_quality_err = cell_quality_err;
          result.best = cfg;
        }
      }
    }
  }

  return result;
}

}  // namespace croptrack
