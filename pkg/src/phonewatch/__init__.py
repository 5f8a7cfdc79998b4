"""Driver phone-use violation detection engine.

Model-agnostic single-step and two-step detection pipelines over roadside
camera streams, track-based unique-violation logging with vehicle counting,
persistent records with snapshots, a review API, and an evaluation harness
for AP at configurable IoU thresholds plus FPS benchmarks.
"""

__version__ = "0.1.0"
