#include "croptrack/serialize.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <utility>

namespace croptrack {

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return item.key() == a; });
    if (!known) {
      throw std::invalid_argument(std::string(what) + ": unknown key \"" +
                                  item.key() + "\"");
    }
  }
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

BoundingBox box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("\"box\" must be an array of 4 numbers");
  }
  return BoundingBox(j[0].get<double>(), j[1].get<double>(),
                     j[2].get<double>(), j[3].get<double>());
}

}  // namespace

Json to_json(const BoundingBox& box) {
  return Json::array({box.x_min, box.y_min, box.x_max, box.y_max});
}

Json to_json(const ImageGeometry& g) {
  Json j;
  j["width"] = g.width;
  j["height"] = g.height;
  j["direction"] = to_string(g.direction);
  j["z_start"] = g.z_start;
  j["z_stop"] = g.z_stop;
  return j;
}

Json to_json(const TrackerConfig& cfg) {
  Json j;
  j["gamma_dt"] = cfg.gamma_dt;
  j["gamma_merge"] = cfg.gamma_merge;
  j["gamma_bndry"] = cfg.gamma_bndry;
  j["geometry"] = to_json(cfg.geometry);
  j["max_misses"] = cfg.max_misses;
  j["min_track_detections"] = cfg.min_track_detections;
  j["init_frame_zone_filter"] = cfg.init_frame_zone_filter;
  return j;
}

Json to_json(const CountReport& report) {
  Json j;
  j["labels"] = report.labels.names();
  Json counts = Json::object();
  for (std::size_t q = 0; q < report.labels.size(); ++q) {
    counts[report.labels.name(q)] = report.per_quality.at(q);
  }
  j["counts"] = std::move(counts);
  j["total"] = report.total;
  j["tracks"] = Json::array();
  for (const TrackRecord& t : report.tracks) {
    Json rec;
    rec["id"] = t.id;
    rec["quality"] = report.labels.name(t.quality);
    rec["init_frame"] = t.init_frame;
    rec["last_seen_frame"] = t.last_seen_frame;
    rec["lifetime"] = t.lifetime;
    rec["detections"] = t.detection_count;
    j["tracks"].push_back(std::move(rec));
  }
  return j;
}

Json to_json(const FrameUpdate& update) {
  Json j;
  j["frame"] = update.frame_index;
  j["matched"] = Json::array();
  for (const auto& [id, det] : update.matched) {
    j["matched"].push_back(Json::array({id, det}));
  }
  j["spawned"] = update.spawned;
  j["retired_by_miss"] = update.retired_by_miss;
  j["retired_by_stop_zone"] = update.retired_by_stop_zone;
  j["suppressed"] = Json::array();
  for (const auto& [det, reason] : update.suppressed) {
    j["suppressed"].push_back(Json::array({det, to_string(reason)}));
  }
  return j;
}

Json to_json(const EqualErrorF1& point) {
  Json j;
  j["f1"] = point.f1;
  j["precision"] = point.precision;
  j["recall"] = point.recall;
  j["score_threshold"] = point.score_threshold;
  j["crossing_found"] = point.crossing_found;
  j["interpolated"] = point.interpolated;
  return j;
}

Json to_json(const PRPoint& point) {
  Json j;
  j["threshold"] = point.score_threshold;
  j["precision"] = point.precision;
  j["recall"] = point.recall;
  return j;
}

Json to_json(const PercentErrorReport& report) {
  Json j;
  j["labels"] = report.labels.names();
  Json per_label = Json::object();
  for (std::size_t q = 0; q < report.labels.size(); ++q) {
    const auto& v = report.per_label.at(q);
    per_label[report.labels.name(q)] = v ? Json(*v) : Json(nullptr);
  }
  j["per_label"] = std::move(per_label);
  j["total"] = report.total ? Json(*report.total) : Json(nullptr);
  return j;
}

Json to_json(const QualityConfusion& confusion) {
  Json j;
  j["labels"] = confusion.labels.names();
  j["counts"] = confusion.counts;
  Json percent = Json::array();
  for (std::size_t row = 0; row < confusion.labels.size(); ++row) {
    Json prow = Json::array();
    for (std::size_t col = 0; col < confusion.labels.size(); ++col) {
      const auto p = confusion.percent(row, col);
      prow.push_back(p ? Json(*p) : Json(nullptr));
    }
    percent.push_back(std::move(prow));
  }
  j["percent"] = std::move(percent);
  return j;
}

Json to_json(const SceneConfig& cfg) {
  Json j;
  j["geometry"] = to_json(cfg.geometry);
  j["labels"] = cfg.labels.names();
  j["speed"] = cfg.speed;
  j["frame_count"] = cfg.frame_count;
  j["seed"] = cfg.seed;
  Json noise;
  noise["miss_prob"] = cfg.noise.miss_prob;
  noise["jitter_std"] = cfg.noise.jitter_std;
  noise["fp_rate"] = cfg.noise.fp_rate;
  noise["quality_flip_prob"] = cfg.noise.quality_flip_prob;
  j["noise"] = std::move(noise);
  j["fruits"] = Json::array();
  for (const SceneFruit& f : cfg.fruits) {
    Json rec;
    rec["x"] = f.x;
    rec["y"] = f.y;
    rec["width"] = f.width;
    rec["height"] = f.height;
    rec["quality"] = cfg.labels.name(f.quality);
    j["fruits"].push_back(std::move(rec));
  }
  return j;
}

Json counts_to_json(const std::vector<std::int64_t>& counts, const LabelSet& labels) {
  Json j;
  j["labels"] = labels.names();
  Json by_label = Json::object();
  for (std::size_t q = 0; q < labels.size(); ++q) {
    by_label[labels.name(q)] = counts.at(q);
  }
  j["counts"] = std::move(by_label);
  j["total"] = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  return j;
}

std::vector<std::int64_t> counts_from_json(const Json& j, const LabelSet& labels) {
  const Json& table = j.is_object() && j.contains("counts") ? j.at("counts") : j;
  if (!table.is_object()) {
    throw std::invalid_argument("counts must be an object keyed by label");
  }
  std::vector<std::int64_t> counts(labels.size());
  for (std::size_t q = 0; q < labels.size(); ++q) {
    const auto it = table.find(labels.name(q));
    if (it == table.end()) {
      throw std::invalid_argument("counts are missing label \"" + labels.name(q) + "\"");
    }
    counts[q] = it->get<std::int64_t>();
    if (counts[q] < 0) {
      throw std::invalid_argument("count for \"" + labels.name(q) + "\" is negative");
    }
  }
  return counts;
}

namespace {

void geometry_from_json(const Json& j, ImageGeometry& g, bool* has_image_size) {
  check_keys(j, {"width", "height", "direction", "z_start", "z_stop"}, "geometry");
  bool has_w = false;
  bool has_h = false;
  if (j.contains("width")) {
    g.width = j.at("width").get<double>();
    has_w = true;
  }
  if (j.contains("height")) {
    g.height = j.at("height").get<double>();
    has_h = true;
  }
  if (has_w != has_h) {
    throw std::invalid_argument("geometry: width and height must be given together");
  }
  if (has_image_size) *has_image_size = has_w;
  if (j.contains("direction")) {
    g.direction = direction_from_string(j.at("direction").get<std::string>());
  }
  if (j.contains("z_start")) g.z_start = j.at("z_start").get<double>();
  if (j.contains("z_stop")) g.z_stop = j.at("z_stop").get<double>();
}

}  // namespace

ConfigFile config_from_json(const Json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("config must be a JSON object");
  }
  check_keys(j,
             {"gamma_dt", "gamma_merge", "gamma_bndry", "geometry", "max_misses",
              "min_track_detections", "init_frame_zone_filter", "labels"},
             "config");
  ConfigFile out;
  if (j.contains("gamma_dt")) out.config.gamma_dt = j.at("gamma_dt").get<double>();
  if (j.contains("gamma_merge")) out.config.gamma_merge = j.at("gamma_merge").get<double>();
  if (j.contains("gamma_bndry")) out.config.gamma_bndry = j.at("gamma_bndry").get<double>();
  if (j.contains("geometry")) {
    geometry_from_json(j.at("geometry"), out.config.geometry, &out.has_image_size);
  }
  if (j.contains("max_misses")) out.config.max_misses = j.at("max_misses").get<int>();
  if (j.contains("min_track_detections")) {
    out.config.min_track_detections = j.at("min_track_detections").get<int>();
  }
  if (j.contains("init_frame_zone_filter")) {
    out.config.init_frame_zone_filter = j.at("init_frame_zone_filter").get<bool>();
  }
  if (j.contains("labels")) {
    out.labels = LabelSet(j.at("labels").get<std::vector<std::string>>());
  }
  return out;
}

SceneConfig scene_config_from_json(const Json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("scene config must be a JSON object");
  }
  check_keys(j, {"geometry", "labels", "speed", "frame_count", "seed", "noise", "fruits"},
             "scene config");
  SceneConfig cfg;
  if (j.contains("labels")) {
    cfg.labels = LabelSet(j.at("labels").get<std::vector<std::string>>());
  }
  geometry_from_json(j.at("geometry"), cfg.geometry, nullptr);
  if (j.contains("speed")) cfg.speed = j.at("speed").get<double>();
  cfg.frame_count = j.at("frame_count").get<std::int64_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("noise")) {
    const Json& noise = j.at("noise");
    check_keys(noise, {"miss_prob", "jitter_std", "fp_rate", "quality_flip_prob"},
               "noise");
    if (noise.contains("miss_prob")) {
      cfg.noise.miss_prob = noise.at("miss_prob").get<double>();
    }
    if (noise.contains("jitter_std")) {
      cfg.noise.jitter_std = noise.at("jitter_std").get<double>();
    }
    if (noise.contains("fp_rate")) {
      cfg.noise.fp_rate = noise.at("fp_rate").get<double>();
    }
    if (noise.contains("quality_flip_prob")) {
      cfg.noise.quality_flip_prob = noise.at("quality_flip_prob").get<double>();
    }
  }
  for (const Json& f : j.at("fruits")) {
    check_keys(f, {"x", "y", "width", "height", "quality"}, "fruit");
    SceneFruit fruit;
    fruit.x = f.at("x").get<double>();
    fruit.y = f.at("y").get<double>();
    fruit.width = f.at("width").get<double>();
    fruit.height = f.at("height").get<double>();
    const std::string quality = f.at("quality").get<std::string>();
    const auto id = cfg.labels.find(quality);
    if (!id) {
      throw std::invalid_argument("fruit quality \"" + quality +
                                  "\" is not in the label set");
    }
    fruit.quality = *id;
    cfg.fruits.push_back(fruit);
  }
  cfg.validate();
  return cfg;
}

GroundTruthStream parse_ground_truth(std::istream& source,
                                     const std::optional<LabelSet>& forced_labels) {
  GroundTruthStream stream;
  if (forced_labels) stream.labels = *forced_labels;

  std::string line;
  std::size_t line_no = 0;
  bool saw_record = false;
  std::set<std::int64_t> frame_indices;

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
      GroundTruthFrame frame;
      frame.frame_index = j.at("frame").get<std::int64_t>();
      if (frame.frame_index < 0) {
        throw std::invalid_argument("\"frame\" must be non-negative");
      }
      if (!frame_indices.insert(frame.frame_index).second) {
        throw std::invalid_argument("duplicate frame index " +
                                    std::to_string(frame.frame_index));
      }
      const Json& objects = j.at("objects");
      if (!objects.is_array()) {
        throw std::invalid_argument("\"objects\" must be an array");
      }
      for (const Json& o : objects) {
        GroundTruthObject gt;
        gt.box = box_from_json(o.at("box"));
        const std::string quality = o.at("quality").get<std::string>();
        const auto id = stream.labels.find(quality);
        if (!id) {
          throw std::invalid_argument("quality \"" + quality +
                                      "\" is not in the label set");
        }
        gt.quality = *id;
        frame.objects.push_back(std::move(gt));
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

  // indices are unique but not required to arrive sorted
  std::sort(stream.frames.begin(), stream.frames.end(),
            [](const GroundTruthFrame& a, const GroundTruthFrame& b) {
              return a.frame_index < b.frame_index;
            });
  return stream;
}

void write_ground_truth(std::ostream& out, const GroundTruthStream& stream) {
  if (stream.meta) {
    Json meta;
    meta["meta"]["width"] = stream.meta->width;
    meta["meta"]["height"] = stream.meta->height;
    meta["meta"]["labels"] = stream.labels.names();
    out << meta.dump() << '\n';
  }
  for (const GroundTruthFrame& frame : stream.frames) {
    Json j;
    j["frame"] = frame.frame_index;
    j["objects"] = Json::array();
    for (const GroundTruthObject& o : frame.objects) {
      Json rec;
      rec["box"] = to_json(o.box);
      rec["quality"] = stream.labels.name(o.quality);
      j["objects"].push_back(std::move(rec));
    }
    out << j.dump() << '\n';
  }
}

}  // namespace croptrack
