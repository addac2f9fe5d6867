#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "croptrack/eval.hpp"
#include "croptrack/simulate.hpp"
#include "croptrack/tracker.hpp"
#include "croptrack/tune.hpp"

namespace croptrack {

// ordered_json everywhere: stable key order in, stable bytes out
using Json = nlohmann::ordered_json;

Json to_json(const BoundingBox& box);
Json to_json(const ImageGeometry& g);
Json to_json(const TrackerConfig& cfg);
Json to_json(const CountReport& report);
Json to_json(const FrameUpdate& update);
Json to_json(const EqualErrorF1& point);
Json to_json(const PRPoint& point);
Json to_json(const PercentErrorReport& report);
Json to_json(const QualityConfusion& confusion);
Json to_json(const SceneConfig& cfg);

/// Per-label counts as {"labels": [...], "counts": {label: n}, "total": n}.
Json counts_to_json(const std::vector<std::int64_t>& counts, const LabelSet& labels);

/// Reads counts back from that shape, or from any object carrying a
/// "counts" member of that shape (so a count report file works as input).
std::vector<std::int64_t> counts_from_json(const Json& j, const LabelSet& labels);

/// Tracker settings file: all fields optional, overlaying the defaults.
/// "geometry" may carry width/height (recorded in has_image_size so stream
/// meta can take precedence); "labels" pins the label set.
struct ConfigFile {
  TrackerConfig config;
  bool has_image_size = false;
  std::optional<LabelSet> labels;
};

ConfigFile config_from_json(const Json& j);

SceneConfig scene_config_from_json(const Json& j);

}  // namespace croptrack
