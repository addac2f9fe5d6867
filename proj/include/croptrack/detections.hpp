#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "croptrack/geometry.hpp"

namespace croptrack {

/// Ordered, fixed set of quality labels for a run. Label order matters:
/// it is the final tie-break for quality votes and the column order of
/// every report.
class LabelSet {
 public:
  /// Default set: green (immature), mixed (turning), red (ripe).
  LabelSet() : LabelSet({"green", "mixed", "red"}) {}

  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> find(std::string_view name) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

/// One detector output: a box, a foreground confidence, and one quality
/// score per label (aligned with the run's LabelSet). Scores are opaque
/// ordered scalars; logits and probabilities are both fine.
struct Detection {
  BoundingBox box;
  double fg_score = 0.0;
  std::vector<double> quality_scores;
};

/// Index of the best-scoring quality label; ties go to the earliest label.
std::size_t argmax_quality(const Detection& d);

struct FrameDetections {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;
};

/// Raw record of a detector that folds quality into the class head:
/// one background score plus one score per quality label.
struct MultiClassDetection {
  BoundingBox box;
  double bg_score = 0.0;
  std::vector<double> class_scores;  // one per quality label
};

/// Converts an (N+1)-class record to the detection + quality form.
/// fg_score is the max positive-class score, so per-class threshold
/// behavior and the quality argmax are both preserved.
Detection from_multiclass(const MultiClassDetection& d);

/// Optional stream header carrying the image dimensions.
struct StreamMeta {
  double width = 0.0;
  double height = 0.0;
};

/// A parsed detection stream: the label set in force, the optional meta
/// header, and frames in strictly increasing frame order.
struct DetectionStream {
  LabelSet labels;
  std::optional<StreamMeta> meta;
  std::vector<FrameDetections> frames;
};

/// Error raised by stream parsing; carries the 1-based source line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a JSON Lines detection stream. Each line is one frame object;
/// an optional first line {"meta": {...}} may set image size and labels.
/// MultiClass records ("classes": {...}) are converted on the fly.
/// `forced_labels` pins the label set (from config); otherwise the header
/// decides, and the default set applies when neither is present.
DetectionStream parse_stream(std::istream& source,
                             const std::optional<LabelSet>& forced_labels = {});

/// Writes the stream back out, one frame per line, meta first when present.
/// Round-trips losslessly up to floating-point text representation.
void write_stream(std::ostream& out, const DetectionStream& stream);

/// Keeps detections with fg_score >= threshold. Frame structure is
/// preserved; frames may become empty but are never dropped.
std::vector<FrameDetections> filter_by_score(
    const std::vector<FrameDetections>& frames, double threshold);

}  // namespace croptrack
