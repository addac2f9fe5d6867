// Python face of the library. Structured values cross the boundary as
// plain dicts/lists mirroring the JSON shapes the CLI reads and writes,
// so results are directly json.dumps-able and piping between the two
// front ends stays trivial.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <croptrack/detections.hpp>
#include <croptrack/eval.hpp>
#include <croptrack/geometry.hpp>
#include <croptrack/serialize.hpp>
#include <croptrack/simulate.hpp>
#include <croptrack/tracker.hpp>
#include <croptrack/tune.hpp>

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace py = pybind11;
using croptrack::Json;

namespace {

Json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        Json j = Json::object();
        for (const auto& item : obj.cast<py::dict>()) {
            j[item.first.cast<std::string>()] = py_to_json(item.second);
        }
        return j;
    }
    if (py::isinstance<py::sequence>(obj)) {
        Json j = Json::array();
        for (const auto& item : obj.cast<py::sequence>()) {
            j.push_back(py_to_json(item));
        }
        return j;
    }
    throw std::invalid_argument("unsupported python value in a json argument");
}

py::object json_to_py(const Json& j) {
    switch (j.type()) {
        case Json::value_t::null:
            return py::none();
        case Json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case Json::value_t::number_integer:
        case Json::value_t::number_unsigned:
            return py::int_(j.get<std::int64_t>());
        case Json::value_t::number_float:
            return py::float_(j.get<double>());
        case Json::value_t::string:
            return py::str(j.get<std::string>());
        case Json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case Json::value_t::object: {
            py::dict out;
            for (const auto& [key, value] : j.items()) {
                out[py::str(key)] = json_to_py(value);
            }
            return out;
        }
        default:
            throw std::invalid_argument("unsupported json value");
    }
}

croptrack::BoundingBox box_from(const py::sequence& s) {
    if (py::len(s) != 4) {
        throw std::invalid_argument("a box is [x_min, y_min, x_max, y_max]");
    }
    return croptrack::BoundingBox(s[0].cast<double>(), s[1].cast<double>(),
                                  s[2].cast<double>(), s[3].cast<double>());
}

croptrack::DetectionStream parse_text(const std::string& text,
                                      const std::optional<croptrack::LabelSet>& labels) {
    std::istringstream in(text);
    return croptrack::parse_stream(in, labels);
}

// stream meta overrides the configured size; everything else must come
// from the config (mirrors the CLI's resolution order)
croptrack::TrackerConfig resolve_config(const croptrack::ConfigFile& file,
                                        const croptrack::DetectionStream& stream) {
    croptrack::TrackerConfig cfg = file.config;
    if (stream.meta.has_value()) {
        cfg.geometry.width = stream.meta->width;
        cfg.geometry.height = stream.meta->height;
    } else if (!file.has_image_size) {
        throw std::invalid_argument(
            "no image size: the stream has no meta line and the config sets none");
    }
    cfg.validate();
    return cfg;
}

py::object track(const std::string& stream_text, const py::object& config,
                 bool audit) {
    const croptrack::ConfigFile file =
        croptrack::config_from_json(config.is_none() ? Json::object() : py_to_json(config));
    const auto stream = parse_text(stream_text, file.labels);
    const auto cfg = resolve_config(file, stream);

    std::vector<croptrack::FrameUpdate> updates;
    const auto report = croptrack::run_tracker(cfg, stream.labels, stream.frames,
                                               audit ? &updates : nullptr);
    py::dict out = json_to_py(croptrack::to_json(report));
    if (audit) {
        py::list frames;
        for (const auto& u : updates) frames.append(json_to_py(croptrack::to_json(u)));
        out[py::str("audit")] = frames;
    }
    return out;
}

py::object simulate(const py::dict& scene) {
    const auto cfg = croptrack::scene_config_from_json(py_to_json(scene));
    const auto out = croptrack::generate(cfg);

    std::ostringstream det_text, gt_text;
    croptrack::write_stream(det_text, out.detections);
    croptrack::write_ground_truth(gt_text, out.ground_truth);

    py::dict result;
    result[py::str("detections")] = py::str(det_text.str());
    result[py::str("ground_truth")] = py::str(gt_text.str());
    result[py::str("true_counts")] =
        json_to_py(croptrack::counts_to_json(out.true_counts, out.detections.labels));
    return result;
}

py::object pr_curve_py(const std::string& detections_text,
                       const std::string& truth_text, double iou_threshold,
                       const std::vector<double>& score_thresholds) {
    const auto stream = parse_text(detections_text, {});
    std::istringstream gt_in(truth_text);
    const auto truth = croptrack::parse_ground_truth(gt_in, stream.labels);
    const auto curve = croptrack::pr_curve(stream.frames, truth.frames,
                                           iou_threshold, score_thresholds);
    py::list out;
    for (const auto& p : curve) out.append(json_to_py(croptrack::to_json(p)));
    return out;
}

py::object f1_equal_error_py(const py::sequence& curve) {
    std::vector<croptrack::PRPoint> points;
    for (const auto& item : curve) {
        const auto t = item.cast<py::sequence>();
        if (py::len(t) != 3) {
            throw std::invalid_argument("a curve point is (threshold, precision, recall)");
        }
        points.push_back({t[0].cast<double>(), t[1].cast<double>(), t[2].cast<double>()});
    }
    return json_to_py(croptrack::to_json(croptrack::f1_equal_error(points)));
}

py::object count_percent_error_py(const std::vector<std::int64_t>& estimated,
                                  const std::vector<std::int64_t>& truth,
                                  const py::object& labels) {
    const croptrack::LabelSet set =
        labels.is_none() ? croptrack::LabelSet{}
                         : croptrack::LabelSet(labels.cast<std::vector<std::string>>());
    return json_to_py(
        croptrack::to_json(croptrack::count_percent_error(estimated, truth, set)));
}

py::object tune(const std::vector<std::string>& stream_texts,
                const py::sequence& truths, const py::dict& grid,
                const py::object& config) {
    const croptrack::ConfigFile file =
        croptrack::config_from_json(config.is_none() ? Json::object() : py_to_json(config));

    std::vector<croptrack::TuneStream> streams;
    std::optional<croptrack::LabelSet> labels = file.labels;
    std::optional<croptrack::StreamMeta> meta;
    for (const auto& text : stream_texts) {
        const auto stream = parse_text(text, labels);
        if (!labels) labels = stream.labels;
        if (!meta && stream.meta) meta = stream.meta;
        streams.push_back({stream.frames, {}});
    }
    if (streams.empty()) throw std::invalid_argument("tune needs at least one stream");
    if (py::len(truths) != streams.size()) {
        throw std::invalid_argument("one truth count list per stream");
    }
    for (std::size_t i = 0; i < streams.size(); ++i) {
        streams[i].true_counts = truths[i].cast<std::vector<std::int64_t>>();
    }

    croptrack::GridSpec spec;
    spec.base = file.config;
    if (meta) {
        spec.base.geometry.width = meta->width;
        spec.base.geometry.height = meta->height;
    } else if (!file.has_image_size) {
        throw std::invalid_argument(
            "no image size: no stream has a meta line and the config sets none");
    }
    const Json g = py_to_json(grid);
    spec.gamma_dt = g.at("gamma_dt").get<std::vector<double>>();
    spec.gamma_merge = g.at("gamma_merge").get<std::vector<double>>();
    spec.gamma_bndry = g.at("gamma_bndry").get<std::vector<double>>();

    const auto result = croptrack::grid_search(streams, *labels, spec);

    py::dict out;
    out[py::str("best")] = json_to_py(croptrack::to_json(result.best));
    py::list table;
    for (const auto& row : result.table) {
        py::dict r;
        r[py::str("gamma_dt")] = row.gamma_dt;
        r[py::str("gamma_merge")] = row.gamma_merge;
        r[py::str("gamma_bndry")] = row.gamma_bndry;
        r[py::str("stream")] = row.stream_index;
        r[py::str("counts")] = json_to_py(croptrack::counts_to_json(row.counts, *labels));
        r[py::str("total_abs_err")] = row.total_abs_err;
        r[py::str("quality_abs_err")] = row.quality_abs_err;
        table.append(r);
    }
    out[py::str("table")] = table;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "fruit counting from detection streams: geometry, tracking, "
              "evaluation, simulation, and threshold tuning";

    m.def(
        "iou",
        [](const py::sequence& a, const py::sequence& b) {
            return croptrack::iou(box_from(a), box_from(b));
        },
        py::arg("a"), py::arg("b"),
        "Intersection over union of two [x_min, y_min, x_max, y_max] boxes.");

    m.def(
        "boundary_measure",
        [](const py::sequence& track_box, const py::sequence& det_box) {
            return croptrack::boundary_measure(box_from(track_box), box_from(det_box));
        },
        py::arg("track_box"), py::arg("det_box"),
        "Fraction of the detection contained in the track box.");

    m.def("track", &track, py::arg("stream_text"), py::arg("config") = py::none(),
          py::arg("audit") = false,
          "Run the tracker over a JSON Lines detection stream and return the "
          "count report. config mirrors the CLI --config file; audit=True "
          "adds per-frame association records.");

    m.def("simulate", &simulate, py::arg("scene"),
          "Render a scene description to a detection stream, its ground "
          "truth (both as JSON Lines text), and the true counts.");

    m.def("pr_curve", &pr_curve_py, py::arg("detections_text"),
          py::arg("truth_text"), py::arg("iou_threshold"),
          py::arg("score_thresholds"),
          "Precision/recall over a strictly increasing score threshold sweep.");

    m.def("f1_equal_error", &f1_equal_error_py, py::arg("curve"),
          "Equal-error F1 from (threshold, precision, recall) points, "
          "on the 0-100 scale.");

    m.def("count_percent_error", &count_percent_error_py, py::arg("estimated"),
          py::arg("truth"), py::arg("labels") = py::none(),
          "Per-label and total percent count error; labels default to "
          "green/mixed/red.");

    m.def("tune", &tune, py::arg("streams"), py::arg("truths"), py::arg("grid"),
          py::arg("config") = py::none(),
          "Exhaustive threshold grid search over one or more streams. grid "
          "holds gamma_dt/gamma_merge/gamma_bndry value lists.");
}
