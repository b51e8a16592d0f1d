"""
Stroke segmentation

A stroke runs from a local minimum of the tip-to-plane distance to the next
local maximum, on moving-average-smoothed tip positions. Candidate strokes
are gated on duration, path length, distance of both ends from the nose
center and distance prominence.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from septoskill.acquisition import Trajectory
from septoskill.geometry import (
    Plane,
    moving_average,
    point_plane_distance,
    project_to_plane,
)
from septoskill.utils import InputError, NumericError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Strokes API ===

StrokeConfig(smooth_window=None, min_duration=0.15, max_duration=3.0,
             min_length=3.0, max_center_distance=80.0, min_prominence=1.0)
    smooth_window=None resolves to max(3, round(0.25 s × rate)).

distance_signal(tips, plane, smooth_window) -> (t, distance)
detect_strokes(tips, plane, nose_center, cfg, rate=None) -> List[Stroke]
stroke_curvature(stroke) -> float >= 1
local_extrema(values) -> (minima, maxima) sample indices
"""

ZERO_CHORD_TOL = 1e-6


# =============================================================================
# Errors
# =============================================================================

class ZeroChord(NumericError):
    """Stroke ends where it started; curvature is undefined."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class StrokeConfig:
    smooth_window: Optional[int] = None
    min_duration: float = 0.15
    max_duration: float = 3.0
    min_length: float = 3.0
    max_center_distance: float = 80.0
    min_prominence: float = 1.0

    def __post_init__(self):
        if not 0 < self.min_duration < self.max_duration:
            raise InputError(
                f"StrokeConfig needs 0 < min_duration < max_duration, got "
                f"{self.min_duration} / {self.max_duration}")
        if self.min_length <= 0:
            raise InputError(f"StrokeConfig.min_length must be > 0, got {self.min_length}")
        if self.smooth_window is not None and self.smooth_window < 1:
            raise InputError(f"StrokeConfig.smooth_window must be >= 1, got {self.smooth_window}")

    def window_for(self, rate: float) -> int:
        if self.smooth_window is not None:
            return int(self.smooth_window)
        return max(3, int(round(0.25 * rate)))


@dataclass(frozen=True, eq=False)
class Stroke:
    start_idx: int
    end_idx: int
    start_t: float
    end_t: float
    path: np.ndarray
    path_length: float
    chord_length: float
    start_point_2d: np.ndarray
    peak_distance: float
    start_distance: float = 0.0

    @property
    def duration(self) -> float:
        return self.end_t - self.start_t

    @property
    def prominence(self) -> float:
        return self.peak_distance - self.start_distance

    @property
    def curvature(self) -> float:
        return stroke_curvature(self)

    def to_dict(self) -> dict:
        return {
            'start_idx': self.start_idx,
            'end_idx': self.end_idx,
            'start_t': self.start_t,
            'end_t': self.end_t,
            'duration': self.duration,
            'path_length': self.path_length,
            'chord_length': self.chord_length,
            'start_u': float(self.start_point_2d[0]),
            'start_v': float(self.start_point_2d[1]),
            'peak_distance': self.peak_distance,
        }


# =============================================================================
# Signals
# =============================================================================

def distance_signal(tips: Trajectory, plane: Plane, smooth_window: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Unsigned tip-to-plane distance after smoothing the positions."""
    smoothed = moving_average(tips.points, smooth_window)
    return tips.t, np.abs(point_plane_distance(smoothed, plane))


def local_extrema(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Indices of strict local minima and maxima. A plateau counts as one
    sample (its first). Only runs with a real neighbor on both sides
    qualify, so the ends of the signal are never extrema.
    """
    v = np.asarray(values, dtype=float)
    empty = np.array([], dtype=int)
    if len(v) < 3:
        return empty, empty

    run_starts = np.concatenate([[0], np.flatnonzero(np.diff(v) != 0) + 1])
    run_values = v[run_starts]
    if len(run_values) < 3:
        return empty, empty

    inner = run_values[1:-1]
    left, right = run_values[:-2], run_values[2:]
    minima = (inner < left) & (inner < right)
    maxima = (inner > left) & (inner > right)
    return run_starts[1:-1][minima], run_starts[1:-1][maxima]


# =============================================================================
# Detection
# =============================================================================

def _path_length(path: np.ndarray) -> float:
    if len(path) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))


def detect_strokes(tips: Trajectory, plane: Plane, nose_center, cfg: StrokeConfig,
                   rate: Optional[float] = None) -> List[Stroke]:
    """
    Segment `tips` (head frame) into gated strokes ordered by start time.

    `rate` (Hz) resolves a None smooth_window; it defaults to the median
    sample rate of `tips`.
    """
    if rate is None:
        rate = 1.0 / float(np.median(np.diff(tips.t))) if len(tips) > 1 else 1.0
    window = cfg.window_for(rate)
    if len(tips) < 2 * window:
        logger.info("stroke detection skipped: %d samples < 2 × window %d", len(tips), window)
        return []

    smoothed = moving_average(tips.points, window)
    distance = np.abs(point_plane_distance(smoothed, plane))
    minima, maxima = local_extrema(distance)
    center = np.asarray(nose_center, dtype=float)

    strokes = []
    rejected = 0
    for start in minima:
        following = maxima[maxima > start]
        if len(following) == 0:
            break
        end = int(following[0])
        start = int(start)

        duration = tips.t[end] - tips.t[start]
        path = smoothed[start:end + 1]
        length = _path_length(path)
        prominence = distance[end] - distance[start]
        near = (np.linalg.norm(smoothed[start] - center) <= cfg.max_center_distance and
                np.linalg.norm(smoothed[end] - center) <= cfg.max_center_distance)
        if not (cfg.min_duration <= duration <= cfg.max_duration and length >= cfg.min_length
                and near and prominence >= cfg.min_prominence):
            rejected += 1
            continue

        strokes.append(Stroke(
            start_idx=start,
            end_idx=end,
            start_t=float(tips.t[start]),
            end_t=float(tips.t[end]),
            path=path,
            path_length=length,
            chord_length=float(np.linalg.norm(path[-1] - path[0])),
            start_point_2d=project_to_plane(smoothed[start], plane),
            peak_distance=float(distance[end]),
            start_distance=float(distance[start]),
        ))

    logger.debug("detected %d strokes (%d candidates gated out)", len(strokes), rejected)
    return strokes


def stroke_curvature(s: Stroke) -> float:
    """Path length over chord length."""
    if s.chord_length < ZERO_CHORD_TOL:
        raise ZeroChord(
            f"Stroke at t={s.start_t:.3f} returns to its start (chord {s.chord_length:.2e} mm)")
    return s.path_length / s.chord_length


__all__ = [
    "SCHEMA",
    "ZeroChord",
    "StrokeConfig",
    "Stroke",
    "distance_signal",
    "local_extrema",
    "detect_strokes",
    "stroke_curvature",
]
