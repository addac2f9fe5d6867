#include "croptrack/detections.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <utility>

#include <json.hpp>

namespace croptrack {

using Json = nlohmann::ordered_json;

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) {
    throw std::invalid_argument("LabelSet: needs at least one label");
  }
  std::set<std::string_view> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) {
    throw std::invalid_argument("LabelSet: labels must be unique");
  }
}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t argmax_quality(const Detection& d) {
  if (d.quality_scores.empty()) {
    throw std::invalid_argument("argmax_quality: detection has no quality scores");
  }
  // max_element keeps the first of equals, which is the label-order tie-break
  const auto it = std::max_element(d.quality_scores.begin(), d.quality_scores.end());
  return static_cast<std::size_t>(it - d.quality_scores.begin());
}

Detection from_multiclass(const MultiClassDetection& d) {
  if (d.class_scores.empty()) {
    throw std::invalid_argument("from_multiclass: no positive-class scores");
  }
  Detection out;
  out.box = d.box;
  // max (not 1-bg, not sum) keeps per-class threshold behavior intact
  out.fg_score = *std::max_element(d.class_scores.begin(), d.class_scores.end());
  out.quality_scores = d.class_scores;
  return out;
}

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

BoundingBox parse_box(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("\"box\" must be an array of 4 numbers");
  }
  return BoundingBox(j[0].get<double>(), j[1].get<double>(),
                     j[2].get<double>(), j[3].get<double>());
}

std::vector<double> parse_label_map(const Json& j, const LabelSet& labels,
                                    const char* field) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string("\"") + field + "\" must be an object");
  }
  if (j.size() != labels.size()) {
    throw std::invalid_argument(std::string("\"") + field + "\" must have exactly one entry per label (" +
                                std::to_string(labels.size()) + "), got " +
                                std::to_string(j.size()));
  }
  std::vector<double> scores(labels.size());
  for (std::size_t q = 0; q < labels.size(); ++q) {
    const auto it = j.find(labels.name(q));
    if (it == j.end()) {
      throw std::invalid_argument(std::string("\"") + field + "\" is missing label \"" +
                                  labels.name(q) + "\"");
    }
    scores[q] = it->get<double>();
  }
  return scores;
}

Detection parse_detection(const Json& j, const LabelSet& labels) {
  if (!j.is_object()) {
    throw std::invalid_argument("detection record must be an object");
  }
  const bool has_classes = j.contains("classes");
  const bool has_flat = j.contains("fg") || j.contains("quality");
  if (has_classes && has_flat) {
    throw std::invalid_argument("detection mixes \"classes\" with \"fg\"/\"quality\"");
  }

  if (has_classes) {
    const Json& classes = j.at("classes");
    if (!classes.is_object() || classes.size() != labels.size() + 1 ||
        !classes.contains("bg")) {
      throw std::invalid_argument(
          "\"classes\" must map \"bg\" plus every label to a score");
    }
    MultiClassDetection mc;
    mc.box = parse_box(j.at("box"));
    mc.bg_score = classes.at("bg").get<double>();
    mc.class_scores.resize(labels.size());
    for (std::size_t q = 0; q < labels.size(); ++q) {
      const auto it = classes.find(labels.name(q));
      if (it == classes.end()) {
        throw std::invalid_argument("\"classes\" is missing label \"" +
                                    labels.name(q) + "\"");
      }
      mc.class_scores[q] = it->get<double>();
    }
    return from_multiclass(mc);
  }

  Detection d;
  d.box = parse_box(j.at("box"));
  d.fg_score = j.at("fg").get<double>();
  if (!std::isfinite(d.fg_score)) {
    throw std::invalid_argument("\"fg\" must be finite");
  }
  d.quality_scores = parse_label_map(j.at("quality"), labels, "quality");
  return d;
}

}  // namespace

DetectionStream parse_stream(std::istream& source,
                             const std::optional<LabelSet>& forced_labels) {
  DetectionStream stream;
  if (forced_labels) stream.labels = *forced_labels;

  std::string line;
  std::size_t line_no = 0;
  bool saw_record = false;
  std::int64_t last_frame = -1;

  while (std::getline(source, line)) {
    ++line_no;
    if (is_blank(line)) continue;

    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    }

    try {
      if (!j.is_object()) {
        throw std::invalid_argument("each line must be a JSON object");
      }

      if (j.contains("meta")) {
        if (saw_record) {
          throw std::invalid_argument("\"meta\" must be the first record");
        }
        saw_record = true;
        const Json& meta = j.at("meta");
        StreamMeta m;
        m.width = meta.at("width").get<double>();
        m.height = meta.at("height").get<double>();
        if (!(m.width > 0.0) || !(m.height > 0.0)) {
          throw std::invalid_argument("meta width/height must be positive");
        }
        stream.meta = m;
        if (meta.contains("labels") && !forced_labels) {
          stream.labels = LabelSet(meta.at("labels").get<std::vector<std::string>>());
        }
        continue;
      }

      saw_record = true;
      FrameDetections frame;
      frame.frame_index = j.at("frame").get<std::int64_t>();
      if (frame.frame_index < 0) {
        throw std::invalid_argument("\"frame\" must be non-negative");
      }
      if (frame.frame_index <= last_frame) {
        throw std::invalid_argument(
            "frame index " + std::to_string(frame.frame_index) +
            " does not increase (previous was " + std::to_string(last_frame) + ")");
      }
      last_frame = frame.frame_index;

      const Json& dets = j.at("detections");
      if (!dets.is_array()) {
        throw std::invalid_argument("\"detections\" must be an array");
      }
      for (const Json& d : dets) {
        frame.detections.push_back(parse_detection(d, stream.labels));
      }
      stream.frames.push_back(std::move(frame));
    } catch (const ParseError&) {
      throw;
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }

  return stream;
}

void write_stream(std::ostream& out, const DetectionStream& stream) {
  if (stream.meta) {
    Json meta;
    meta["meta"]["width"] = stream.meta->width;
    meta["meta"]["height"] = stream.meta->height;
    meta["meta"]["labels"] = stream.labels.names();
    out << meta.dump() << '\n';
  }
  for (const FrameDetections& frame : stream.frames) {
    Json j;
    j["frame"] = frame.frame_index;
    j["detections"] = Json::array();
    for (const Detection& d : frame.detections) {
      Json rec;
      rec["box"] = {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max};
      rec["fg"] = d.fg_score;
      Json quality = Json::object();
      for (std::size_t q = 0; q < stream.labels.size(); ++q) {
        quality[stream.labels.name(q)] = d.quality_scores.at(q);
      }
      rec["quality"] = std::move(quality);
      j["detections"].push_back(std::move(rec));
    }
    out << j.dump() << '\n';
  }
}

std::vector<FrameDetections> filter_by_score(
    const std::vector<FrameDetections>& frames, double threshold) {
  std::vector<FrameDetections> out;
  out.reserve(frames.size());
  for (const FrameDetections& frame : frames) {
    FrameDetections kept;
    kept.frame_index = frame.frame_index;
    for (const Detection& d : frame.detections) {
      if (d.fg_score >= threshold) kept.detections.push_back(d);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace croptrack
