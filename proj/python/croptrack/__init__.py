"""Fruit counting from per-frame detection streams.

Thin wrapper over the C++ core: tracking-by-detection with zone and
overlap gates, count/quality evaluation, a deterministic scene
simulator, and threshold grid search.
"""

from croptrack._core import (
    boundary_measure,
    count_percent_error,
    f1_equal_error,
    iou,
    pr_curve,
    simulate,
    track,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "boundary_measure",
    "count_percent_error",
    "f1_equal_error",
    "iou",
    "pr_curve",
    "simulate",
    "track",
    "tune",
    "__version__",
]
