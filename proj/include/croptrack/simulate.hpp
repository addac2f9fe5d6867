#pragma once

#include <cstdint>
#include <vector>

#include "croptrack/detections.hpp"
#include "croptrack/eval.hpp"
#include "croptrack/geometry.hpp"

namespace croptrack {

/// Detection noise applied on top of the exact scene geometry.
struct NoiseConfig {
  double miss_prob = 0.0;           // per detection per frame
  double jitter_std = 0.0;          // center jitter, as a fraction of box size
  double fp_rate = 0.0;             // expected spurious boxes per frame (Poisson)
  double quality_flip_prob = 0.0;   // chance a detection reports a wrong label

  void validate() const;
};

/// One object in the synthetic scene, placed in world coordinates at
/// frame 0. World x maps to image x at frame f by the camera motion:
/// x - speed*f for right-to-left travel, x + speed*f for left-to-right.
struct SceneFruit {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
  std::size_t quality = 0;
};

struct SceneConfig {
  ImageGeometry geometry;
  LabelSet labels;
  std::vector<SceneFruit> fruits;
  double speed = 10.0;           // pixels per frame
  std::int64_t frame_count = 1;
  NoiseConfig noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Everything the generator knows: the noisy detection stream, the exact
/// ground truth, and the true per-quality counts (objects visible in at
/// least one frame). The truth side never depends on the noise settings.
struct SceneOutput {
  DetectionStream detections;
  GroundTruthStream ground_truth;
  std::vector<std::int64_t> true_counts;
};

/// Renders the scene: every fruit's box slides across the image at the
/// camera speed, clipped to the image bounds exactly as a detector would
/// report it. Deterministic for a fixed config and seed.
SceneOutput generate(const SceneConfig& config);

/// Canonical edge-entry regression scene: a single fruit whose first
/// visible slice is a thin sliver (well under half its full area), the
/// case the start zone exists to absorb. Noise is forced off; geometry,
/// labels, and speed are taken from the supplied config.
SceneOutput partial_view_fixture(const SceneConfig& config);

}  // namespace croptrack
