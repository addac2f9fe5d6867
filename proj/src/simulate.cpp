#include "croptrack/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace croptrack {

namespace {

// std::mt19937_64 is bit-exact across implementations but the standard
// distributions are not, so the few transforms needed here are spelled
// out. Keeps fixture bytes stable across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Box-Muller, one spare cached
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Knuth's product method; fine for the small means used here
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::optional<BoundingBox> clip_to_image(double x0, double y0, double x1,
                                         double y1, const ImageGeometry& g) {
  const double cx0 = std::max(x0, 0.0);
  const double cy0 = std::max(y0, 0.0);
  const double cx1 = std::min(x1, g.width);
  const double cy1 = std::min(y1, g.height);
  if (!(cx0 < cx1) || !(cy0 < cy1)) return std::nullopt;
  return BoundingBox(cx0, cy0, cx1, cy1);
}

Detection make_detection(const BoundingBox& box, std::size_t label,
                         std::size_t n_labels, double fg_lo, double fg_hi,
                         Rng& rng) {
  Detection d;
  d.box = box;
  d.fg_score = rng.uniform(fg_lo, fg_hi);
  d.quality_scores.resize(n_labels);
  for (std::size_t q = 0; q < n_labels; ++q) {
    d.quality_scores[q] =
        q == label ? rng.uniform(0.60, 0.95) : rng.uniform(0.02, 0.40);
  }
  return d;
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void NoiseConfig::validate() const {
  if (!is_probability(miss_prob)) {
    throw std::invalid_argument("NoiseConfig: miss_prob must lie in [0,1]");
  }
  if (!is_probability(quality_flip_prob)) {
    throw std::invalid_argument("NoiseConfig: quality_flip_prob must lie in [0,1]");
  }
  if (!std::isfinite(jitter_std) || jitter_std < 0.0) {
    throw std::invalid_argument("NoiseConfig: jitter_std must be >= 0");
  }
  if (!std::isfinite(fp_rate) || fp_rate < 0.0) {
    throw std::invalid_argument("NoiseConfig: fp_rate must be >= 0");
  }
}

void SceneConfig::validate() const {
  geometry.validate();
  noise.validate();
  if (!std::isfinite(speed) || !(speed > 0.0)) {
    throw std::invalid_argument("SceneConfig: speed must be positive");
  }
  if (frame_count < 1) {
    throw std::invalid_argument("SceneConfig: frame_count must be >= 1");
  }
  for (std::size_t i = 0; i < fruits.size(); ++i) {
    const SceneFruit& f = fruits[i];
    if (!std::isfinite(f.x) || !std::isfinite(f.y) || !(f.width > 0.0) ||
        !(f.height > 0.0) || !std::isfinite(f.width) || !std::isfinite(f.height)) {
      throw std::invalid_argument("SceneConfig: fruit " + std::to_string(i) +
                                  " has an invalid box");
    }
    if (f.quality >= labels.size()) {
      throw std::invalid_argument("SceneConfig: fruit " + std::to_string(i) +
                                  " has quality id " + std::to_string(f.quality) +
                                  " outside the label set");
    }
  }
}

SceneOutput generate(const SceneConfig& config) {
  config.validate();

  const ImageGeometry& g = config.geometry;
  const double step =
      g.direction == Direction::RightToLeft ? -config.speed : config.speed;
  const std::size_t n_labels = config.labels.size();
  const auto frame_count = static_cast<std::size_t>(config.frame_count);

  SceneOutput out;
  out.detections.labels = config.labels;
  out.detections.meta = StreamMeta{g.width, g.height};
  out.ground_truth.labels = config.labels;
  out.ground_truth.meta = StreamMeta{g.width, g.height};
  out.true_counts.assign(n_labels, 0);

  // Truth first, before the RNG is ever touched: the ground-truth stream
  // and the counts must come out identical under any noise settings.
  std::vector<bool> seen(config.fruits.size(), false);
  std::vector<std::vector<std::pair<std::size_t, BoundingBox>>> visible(frame_count);
  for (std::size_t f = 0; f < frame_count; ++f) {
    GroundTruthFrame gt_frame;
    gt_frame.frame_index = static_cast<std::int64_t>(f);
    for (std::size_t i = 0; i < config.fruits.size(); ++i) {
      const SceneFruit& fruit = config.fruits[i];
      const double x0 = fruit.x + step * static_cast<double>(f);
      const auto box =
          clip_to_image(x0, fruit.y, x0 + fruit.width, fruit.y + fruit.height, g);
      if (!box) continue;
      gt_frame.objects.push_back(GroundTruthObject{*box, fruit.quality});
      visible[f].emplace_back(i, *box);
      seen[i] = true;
    }
    out.ground_truth.frames.push_back(std::move(gt_frame));
  }
  for (std::size_t i = 0; i < config.fruits.size(); ++i) {
    if (seen[i]) ++out.true_counts[config.fruits[i].quality];
  }

  Rng rng(config.seed);
  const NoiseConfig& noise = config.noise;
  for (std::size_t f = 0; f < frame_count; ++f) {
    FrameDetections det_frame;
    det_frame.frame_index = static_cast<std::int64_t>(f);

    for (const auto& [i, gt_box] : visible[f]) {
      if (noise.miss_prob > 0.0 && rng.uniform() < noise.miss_prob) continue;

      BoundingBox box = gt_box;
      if (noise.jitter_std > 0.0) {
        // jitter the full (unclipped) box, then clip like the detector would
        const SceneFruit& fruit = config.fruits[i];
        const double dx = rng.gaussian() * noise.jitter_std * fruit.width;
        const double dy = rng.gaussian() * noise.jitter_std * fruit.height;
        const double x0 = fruit.x + step * static_cast<double>(f) + dx;
        const double y0 = fruit.y + dy;
        const auto jittered =
            clip_to_image(x0, y0, x0 + fruit.width, y0 + fruit.height, g);
        if (!jittered) continue;  // jittered clean off the image
        box = *jittered;
      }

      std::size_t label = config.fruits[i].quality;
      if (noise.quality_flip_prob > 0.0 && n_labels > 1 &&
          rng.uniform() < noise.quality_flip_prob) {
        const std::size_t alt = rng.uniform_index(n_labels - 1);
        label = alt < label ? alt : alt + 1;  // uniform over the wrong labels
      }

      det_frame.detections.push_back(
          make_detection(box, label, n_labels, 0.55, 0.99, rng));
    }

    if (noise.fp_rate > 0.0) {
      const std::int64_t spurious = rng.poisson(noise.fp_rate);
      for (std::int64_t k = 0; k < spurious; ++k) {
        const double w = rng.uniform(0.03, 0.10) * g.width;
        const double h = rng.uniform(0.03, 0.10) * g.height;
        const double cx = rng.uniform(0.0, g.width);
        const double cy = rng.uniform(0.0, g.height);
        const auto box =
            clip_to_image(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, g);
        if (!box) continue;  // center sits on the very edge
        const std::size_t label = rng.uniform_index(n_labels);
        det_frame.detections.push_back(
            make_detection(*box, label, n_labels, 0.05, 0.70, rng));
      }
    }

    out.detections.frames.push_back(std::move(det_frame));
  }

  return out;
}

SceneOutput partial_view_fixture(const SceneConfig& config) {
  SceneConfig cfg = config;
  cfg.noise = NoiseConfig{};

  const ImageGeometry& g = cfg.geometry;
  const double s = cfg.speed;
  const double w = 0.075 * g.width;
  const double h = std::min(0.1 * g.height, g.height);
  const double q = 0.2 * std::min(s, 0.5 * w);  // first visible sliver width
  const double lead = 4.0 * s;  // dead frames before the sliver shows up

  SceneFruit fruit;
  fruit.y = 0.5 * (g.height - h);
  fruit.width = w;
  fruit.height = h;
  fruit.quality = 0;

  if (g.direction == Direction::RightToLeft) {
    fruit.x = g.width + lead - q;
    cfg.frame_count = static_cast<std::int64_t>(std::ceil((fruit.x + w) / s)) + 1;
  } else {
    fruit.x = q - w - lead;
    cfg.frame_count =
        static_cast<std::int64_t>(std::ceil((g.width - fruit.x) / s)) + 1;
  }
  cfg.fruits = {fruit};

  return generate(cfg);
}

}  // namespace croptrack
