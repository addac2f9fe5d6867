// croptrack: count fruit and aggregate per-object quality from
// per-frame detection streams. Subcommands: track, evaluate, simulate, tune.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "croptrack/serialize.hpp"

namespace fs = std::filesystem;
using namespace croptrack;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open input file: " + path);
  }
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open output file: " + path.string());
  }
  return out;
}

Json load_json(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

// shortest round-trip text for a double, shared with the JSON writer
std::string fmt(double v) { return Json(v).dump(); }

/// Tracker options shared by `track` and `tune`. Flag > config file > default.
struct TrackerFlags {
  std::string config_path;
  double gamma_dt = 0.0;
  double gamma_merge = 0.0;
  double gamma_bndry = 0.0;
  double z_start = 0.0;
  double z_stop = 0.0;
  std::string direction;
  int max_misses = 0;
  int min_track_detections = 0;

  CLI::Option* o_config = nullptr;
  CLI::Option* o_dt = nullptr;
  CLI::Option* o_merge = nullptr;
  CLI::Option* o_bndry = nullptr;
  CLI::Option* o_zstart = nullptr;
  CLI::Option* o_zstop = nullptr;
  CLI::Option* o_dir = nullptr;
  CLI::Option* o_misses = nullptr;
  CLI::Option* o_mindet = nullptr;

  void attach(CLI::App* cmd) {
    o_config = cmd->add_option("--config", config_path,
                               "JSON file with tracker settings");
    o_dt = cmd->add_option("--gamma-dt", gamma_dt,
                           "stage-1 association IoU threshold (bind when IoU > it)");
    o_merge = cmd->add_option("--gamma-merge", gamma_merge,
                              "spawn suppression IoU threshold");
    o_bndry = cmd->add_option("--gamma-bndry", gamma_bndry,
                              "spawn suppression boundary threshold");
    o_zstart = cmd->add_option("--z-start", z_start,
                               "start-zone width as a fraction of image width");
    o_zstop = cmd->add_option("--z-stop", z_stop,
                              "stop-zone width as a fraction of image width");
    o_dir = cmd->add_option("--direction", direction, "object travel direction")
                ->check(CLI::IsMember({"ltr", "rtl"}));
    o_misses = cmd->add_option("--max-misses", max_misses,
                               "consecutive missed frames before retirement");
    o_mindet = cmd->add_option("--min-track-detections", min_track_detections,
                               "detections a track needs to be counted");
  }

  /// Loads the config file (when given) and layers the flags on top.
  ConfigFile resolve() const {
    ConfigFile file;
    if (o_config->count()) {
      file = config_from_json(load_json(config_path));
    }
    TrackerConfig& cfg = file.config;
    if (o_dt->count()) cfg.gamma_dt = gamma_dt;
    if (o_merge->count()) cfg.gamma_merge = gamma_merge;
    if (o_bndry->count()) cfg.gamma_bndry = gamma_bndry;
    if (o_zstart->count()) cfg.geometry.z_start = z_start;
    if (o_zstop->count()) cfg.geometry.z_stop = z_stop;
    if (o_dir->count()) cfg.geometry.direction = direction_from_string(direction);
    if (o_misses->count()) cfg.max_misses = max_misses;
    if (o_mindet->count()) cfg.min_track_detections = min_track_detections;
    return file;
  }
};

/// Fills in image width/height: stream meta wins, config file is the
/// fallback, disagreement gets a warning. No geometry at all is an error.
void resolve_geometry(TrackerConfig& cfg, bool config_has_size,
                      const std::optional<StreamMeta>& meta,
                      const std::string& stream_name) {
  if (meta) {
    if (config_has_size && (cfg.geometry.width != meta->width ||
                            cfg.geometry.height != meta->height)) {
      std::cerr << "warning: config image size " << fmt(cfg.geometry.width) << "x"
                << fmt(cfg.geometry.height) << " differs from " << stream_name
                << " meta " << fmt(meta->width) << "x" << fmt(meta->height)
                << "; using the stream meta\n";
    }
    cfg.geometry.width = meta->width;
    cfg.geometry.height = meta->height;
  } else if (!config_has_size) {
    throw std::runtime_error(
        "image geometry unknown: provide a meta line in the stream or "
        "width/height in --config");
  }
  cfg.validate();
}

void check_strictly_increasing(const std::vector<double>& values, const char* name) {
  if (values.empty()) {
    throw std::runtime_error(std::string(name) + " must not be empty");
  }
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (!(values[i] < values[i + 1])) {
      throw std::runtime_error(std::string(name) + " must be strictly increasing");
    }
  }
}

// ---------------------------------------------------------------- track

int cmd_track(const std::string& detections_path, const TrackerFlags& flags,
              const std::string& out, bool audit) {
  ConfigFile file = flags.resolve();

  std::ifstream in = open_input(detections_path);
  DetectionStream stream = parse_stream(in, file.labels);

  CountReport report;
  std::vector<FrameUpdate> updates;
  if (stream.frames.empty()) {
    // nothing to track: a zero report needs no image geometry
    report.labels = stream.labels;
    report.per_quality.assign(stream.labels.size(), 0);
  } else {
    resolve_geometry(file.config, file.has_image_size, stream.meta, detections_path);
    report = run_tracker(file.config, stream.labels, stream.frames,
                         audit ? &updates : nullptr);
  }

  const fs::path dir = prepare_out_dir(out);
  {
    std::ofstream f = open_output(dir / "count_report.json");
    f << to_json(report).dump(2) << '\n';
  }
  if (audit) {
    std::ofstream f = open_output(dir / "audit.jsonl");
    for (const FrameUpdate& u : updates) {
      f << to_json(u).dump() << '\n';
    }
  }
  return 0;
}

// ------------------------------------------------------------- evaluate

std::vector<double> default_score_thresholds(
    const std::vector<FrameDetections>& frames) {
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (const FrameDetections& frame : frames) {
    for (const Detection& d : frame.detections) {
      if (!any) {
        lo = hi = d.fg_score;
        any = true;
      } else {
        lo = std::min(lo, d.fg_score);
        hi = std::max(hi, d.fg_score);
      }
    }
  }
  if (!any || lo == hi) return {any ? lo : 0.0};
  std::vector<double> thresholds;
  thresholds.reserve(101);
  for (int i = 0; i <= 100; ++i) {
    thresholds.push_back(lo + (hi - lo) * (static_cast<double>(i) / 100.0));
  }
  return thresholds;
}

int cmd_evaluate_detections(const std::string& detections_path,
                            const std::string& gt_path,
                            std::vector<double> iou_grid,
                            std::vector<double> score_thresholds,
                            bool have_thresholds, const std::string& out) {
  check_strictly_increasing(iou_grid, "--iou-grid");
  for (double v : iou_grid) {
    if (v < 0.0 || v > 1.0) {
      throw std::runtime_error("--iou-grid values must lie in [0,1]");
    }
  }

  std::ifstream det_in = open_input(detections_path);
  DetectionStream dets = parse_stream(det_in);
  std::ifstream gt_in = open_input(gt_path);
  // pin the ground truth to the detection label set so qualities line up
  GroundTruthStream gt = parse_ground_truth(gt_in, dets.labels);

  if (have_thresholds) {
    check_strictly_increasing(score_thresholds, "--score-thresholds");
  } else {
    score_thresholds = default_score_thresholds(dets.frames);
  }

  const fs::path dir = prepare_out_dir(out);
  std::ofstream csv = open_output(dir / "pr_curves.csv");
  csv << "iou,threshold,precision,recall\n";

  Json metrics;
  metrics["iou_grid"] = iou_grid;
  metrics["score_thresholds"] = score_thresholds;
  metrics["results"] = Json::array();

  for (double iou_threshold : iou_grid) {
    const std::vector<PRPoint> curve =
        pr_curve(dets.frames, gt.frames, iou_threshold, score_thresholds);
    for (const PRPoint& p : curve) {
      csv << fmt(iou_threshold) << ',' << fmt(p.score_threshold) << ','
          << fmt(p.precision) << ',' << fmt(p.recall) << '\n';
    }

    const EqualErrorF1 eq = f1_equal_error(curve);

    // confusion is evaluated at the sampled point nearest to P == R
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (std::abs(curve[i].precision - curve[i].recall) <
          std::abs(curve[best].precision - curve[best].recall)) {
        best = i;
      }
    }
    const double operating = curve[best].score_threshold;
    const QualityConfusion confusion = quality_confusion(
        collect_label_pairs(dets.frames, gt.frames, iou_threshold, operating),
        dets.labels);

    Json entry;
    entry["iou"] = iou_threshold;
    entry["equal_error"] = to_json(eq);
    entry["confusion_score_threshold"] = operating;
    entry["confusion"] = to_json(confusion);
    metrics["results"].push_back(std::move(entry));
  }

  std::ofstream f = open_output(dir / "metrics.json");
  f << metrics.dump(2) << '\n';
  return 0;
}

int cmd_evaluate_counts(const std::string& est_path, const std::string& truth_path,
                        const std::string& out) {
  const Json est_doc = load_json(est_path);
  const Json truth_doc = load_json(truth_path);

  LabelSet labels;
  if (est_doc.is_object() && est_doc.contains("labels")) {
    labels = LabelSet(est_doc.at("labels").get<std::vector<std::string>>());
  } else if (truth_doc.is_object() && truth_doc.contains("labels")) {
    labels = LabelSet(truth_doc.at("labels").get<std::vector<std::string>>());
  }

  const std::vector<std::int64_t> est = counts_from_json(est_doc, labels);
  const std::vector<std::int64_t> truth = counts_from_json(truth_doc, labels);
  const PercentErrorReport report = count_percent_error(est, truth, labels);

  const fs::path dir = prepare_out_dir(out);
  std::ofstream f = open_output(dir / "percent_error.json");
  f << to_json(report).dump(2) << '\n';
  return 0;
}

// ------------------------------------------------------------- simulate

int cmd_simulate(const std::string& scene_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  SceneConfig cfg = scene_config_from_json(load_json(scene_path));
  if (seed) cfg.seed = *seed;

  const SceneOutput scene = generate(cfg);

  const fs::path dir = prepare_out_dir(out);
  {
    std::ofstream f = open_output(dir / "detections.jsonl");
    write_stream(f, scene.detections);
  }
  {
    std::ofstream f = open_output(dir / "ground_truth.jsonl");
    write_ground_truth(f, scene.ground_truth);
  }
  {
    std::ofstream f = open_output(dir / "true_counts.json");
    f << counts_to_json(scene.true_counts, cfg.labels).dump(2) << '\n';
  }
  return 0;
}

// ----------------------------------------------------------------- tune

int cmd_tune(const std::vector<std::string>& stream_paths,
             const std::vector<std::string>& truth_paths,
             const TrackerFlags& flags, const std::vector<double>& grid_dt,
             const std::vector<double>& grid_merge,
             const std::vector<double>& grid_bndry, const std::string& out) {
  if (stream_paths.size() != truth_paths.size()) {
    throw std::runtime_error("--stream and --truth must be given the same "
                             "number of times");
  }
  if (stream_paths.empty()) {
    throw std::runtime_error("tune needs at least one --stream/--truth pair");
  }

  ConfigFile file = flags.resolve();

  std::vector<TuneStream> streams;
  std::optional<LabelSet> labels = file.labels;
  bool geometry_resolved = false;
  for (std::size_t i = 0; i < stream_paths.size(); ++i) {
    std::ifstream in = open_input(stream_paths[i]);
    DetectionStream stream = parse_stream(in, labels);
    if (!labels) labels = stream.labels;

    if (!geometry_resolved) {
      resolve_geometry(file.config, file.has_image_size, stream.meta,
                       stream_paths[i]);
      geometry_resolved = true;
    } else if (stream.meta && (stream.meta->width != file.config.geometry.width ||
                               stream.meta->height != file.config.geometry.height)) {
      throw std::runtime_error(stream_paths[i] +
                               ": image size differs from the first stream");
    }

    TuneStream ts;
    ts.frames = std::move(stream.frames);
    ts.true_counts = counts_from_json(load_json(truth_paths[i]), *labels);
    streams.push_back(std::move(ts));
  }

  GridSpec grid;
  grid.gamma_dt = grid_dt;
  grid.gamma_merge = grid_merge;
  grid.gamma_bndry = grid_bndry;
  grid.base = file.config;

  const TuneResult result = grid_search(streams, *labels, grid);

  const fs::path dir = prepare_out_dir(out);
  {
    Json best = to_json(result.best);
    best["labels"] = labels->names();
    std::ofstream f = open_output(dir / "best_config.json");
    f << best.dump(2) << '\n';
  }
  {
    std::ofstream csv = open_output(dir / "grid_table.csv");
    csv << "gamma_dt,gamma_merge,gamma_bndry,stream";
    for (const std::string& name : labels->names()) {
      csv << ",count_" << name;
    }
    csv << ",total,total_abs_err,quality_abs_err\n";
    for (const TuneRow& row : result.table) {
      csv << fmt(row.gamma_dt) << ',' << fmt(row.gamma_merge) << ','
          << fmt(row.gamma_bndry) << ',' << row.stream_index;
      for (std::int64_t c : row.counts) {
        csv << ',' << c;
      }
      csv << ',' << row.total << ',' << row.total_abs_err << ','
          << row.quality_abs_err << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fruit counting and quality aggregation over detection streams"};
  app.require_subcommand(1);

  // track
  auto* track = app.add_subcommand("track", "run the tracker over a detection "
                                            "stream and report counts");
  std::string track_detections;
  std::string track_out = ".";
  bool track_audit = false;
  TrackerFlags track_flags;
  track->add_option("--detections", track_detections, "detection stream (JSON Lines)")
      ->required();
  track_flags.attach(track);
  track->add_option("--out", track_out, "output directory");
  track->add_flag("--audit", track_audit, "also write per-frame audit records");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "detection metrics against ground truth, or count errors");
  std::string eval_detections;
  std::string eval_gt;
  std::string eval_est_counts;
  std::string eval_true_counts;
  std::vector<double> iou_grid = {0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<double> score_thresholds;
  std::string eval_out = ".";
  auto* o_eval_det = evaluate->add_option("--detections", eval_detections,
                                          "detection stream (JSON Lines)");
  auto* o_eval_gt = evaluate->add_option("--ground-truth", eval_gt,
                                         "ground-truth stream (JSON Lines)");
  auto* o_eval_est = evaluate->add_option("--est-counts", eval_est_counts,
                                          "estimated counts (JSON)");
  auto* o_eval_truth = evaluate->add_option("--true-counts", eval_true_counts,
                                            "true counts (JSON)");
  evaluate->add_option("--iou-grid", iou_grid, "IoU thresholds to evaluate at")
      ->delimiter(',');
  auto* o_eval_thresholds =
      evaluate
          ->add_option("--score-thresholds", score_thresholds,
                       "explicit score thresholds (default: 101 evenly spaced "
                       "over the observed score range)")
          ->delimiter(',');
  evaluate->add_option("--out", eval_out, "output directory");

  // simulate
  auto* simulate = app.add_subcommand("simulate",
                                      "render a synthetic scene to stream + truth");
  std::string scene_path;
  std::uint64_t seed = 0;
  std::string sim_out = ".";
  simulate->add_option("--scene", scene_path, "scene config (JSON)")->required();
  auto* o_seed = simulate->add_option("--seed", seed, "override the scene seed");
  simulate->add_option("--out", sim_out, "output directory");

  // tune
  auto* tune = app.add_subcommand("tune", "grid-search the association thresholds");
  std::vector<std::string> tune_streams;
  std::vector<std::string> tune_truths;
  std::vector<double> grid_dt;
  std::vector<double> grid_merge;
  std::vector<double> grid_bndry;
  std::string tune_out = ".";
  TrackerFlags tune_flags;
  tune->add_option("--stream", tune_streams, "training detection stream "
                                             "(repeatable, pairs with --truth)");
  tune->add_option("--truth", tune_truths, "true counts JSON (repeatable)");
  tune->add_option("--grid-dt", grid_dt, "candidate gamma_dt values")
      ->delimiter(',')
      ->required();
  tune->add_option("--grid-merge", grid_merge, "candidate gamma_merge values")
      ->delimiter(',')
      ->required();
  tune->add_option("--grid-bndry", grid_bndry, "candidate gamma_bndry values")
      ->delimiter(',')
      ->required();
  tune_flags.attach(tune);
  tune->add_option("--out", tune_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (track->parsed()) {
      return cmd_track(track_detections, track_flags, track_out, track_audit);
    }
    if (evaluate->parsed()) {
      const bool detection_mode = o_eval_det->count() || o_eval_gt->count();
      const bool counts_mode = o_eval_est->count() || o_eval_truth->count();
      if (detection_mode == counts_mode) {
        throw std::runtime_error(
            "evaluate needs either --detections + --ground-truth or "
            "--est-counts + --true-counts");
      }
      if (detection_mode) {
        if (!o_eval_det->count() || !o_eval_gt->count()) {
          throw std::runtime_error(
              "evaluate: --detections and --ground-truth go together");
        }
        return cmd_evaluate_detections(eval_detections, eval_gt, iou_grid,
                                       score_thresholds,
                                       o_eval_thresholds->count() > 0, eval_out);
      }
      if (!o_eval_est->count() || !o_eval_truth->count()) {
        throw std::runtime_error(
            "evaluate: --est-counts and --true-counts go together");
      }
      return cmd_evaluate_counts(eval_est_counts, eval_true_counts, eval_out);
    }
    if (simulate->parsed()) {
      return cmd_simulate(scene_path,
                          o_seed->count() ? std::optional<std::uint64_t>(seed)
                                          : std::nullopt,
                          sim_out);
    }
    if (tune->parsed()) {
      return cmd_tune(tune_streams, tune_truths, tune_flags, grid_dt, grid_merge,
                      grid_bndry, tune_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
