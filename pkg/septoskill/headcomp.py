"""
Head-motion compensation

Expresses the tool-tip trajectory in a head-fixed frame, either through the
reference head sensor or, when no head sensor was worn, by tracking the
septal plane as the initial plane rotated about a single neck axis.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation, Slerp

from septoskill.acquisition import PoseStream, Trajectory, Trial, register_nose
from septoskill.geometry import Plane, RigidTransform, rotation_about_axis
from septoskill.utils import InputError, NumericError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Head Compensation API ===

HeadModel(mode, axis_point, axis_direction, window=2.0, bracket_deg=15.0,
          tolerance_deg=0.01, min_window_samples=10, max_gap=0.5, neck_depth=90.0)

to_head_frame(cottle_tips, head_stream, max_gap=0.5) -> Trajectory
    Tip points in the head sensor frame at each tip timestamp.

estimate_plane_track(tips, initial_plane, model) -> PlaneTrack
    Per-sample rotation angle of the initial plane about the neck axis.

compensate(tips, track) -> Trajectory
    Undo the tracked rotation so the plane is stationary.

default_axis(plane, nose_center, override=None, anterior=None, neck_depth=90.0) -> (point, direction)
    Vertical in-plane axis, `neck_depth` mm behind the nose center when the
    anterior direction is known.

head_frame(trial, tips, mode, model) -> HeadFrameResult
    Pick sensor/estimator, register the nose and return head-frame tips.
"""

HEAD_MODES = ('sensor', 'estimate', 'auto', 'none')


# =============================================================================
# Errors
# =============================================================================

class CoverageError(NumericError):
    """A cottle sample has no head pose close enough in time."""
    pass


class InsufficientData(NumericError):
    """Too few tip samples to fit the plane angle."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True, eq=False)
class HeadModel:
    mode: str = 'estimated_1dof'
    axis_point: Optional[np.ndarray] = None
    axis_direction: Optional[np.ndarray] = None
    window: float = 2.0
    bracket_deg: float = 15.0
    tolerance_deg: float = 0.01
    min_window_samples: int = 10
    max_gap: float = 0.5
    neck_depth: float = 90.0

    def __post_init__(self):
        if self.mode not in ('reference_sensor', 'estimated_1dof'):
            raise InputError(f"HeadModel.mode must be reference_sensor or estimated_1dof, got {self.mode!r}")
        if self.window <= 0:
            raise InputError(f"HeadModel.window must be > 0, got {self.window}")
        if self.neck_depth < 0:
            raise InputError(f"HeadModel.neck_depth must be >= 0, got {self.neck_depth}")
        if self.axis_direction is not None:
            d = np.asarray(self.axis_direction, dtype=float).reshape(3)
            object.__setattr__(self, 'axis_direction', d / np.linalg.norm(d))
        if self.axis_point is not None:
            object.__setattr__(self, 'axis_point', np.asarray(self.axis_point, dtype=float).reshape(3))

    def with_axis(self, point, direction) -> 'HeadModel':
        return HeadModel(self.mode, point, direction, self.window, self.bracket_deg,
                         self.tolerance_deg, self.min_window_samples, self.max_gap, self.neck_depth)


@dataclass(frozen=True, eq=False)
class PlaneTrack:
    """Per-frame rotation angle (radians) of the initial plane about the axis."""
    t: np.ndarray
    theta: np.ndarray
    initial_plane: Plane
    axis_point: np.ndarray
    axis_direction: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def transform_at(self, i: int) -> RigidTransform:
        return rotation_about_axis(self.axis_point, self.axis_direction, float(self.theta[i]))

    def plane_at(self, i: int) -> Plane:
        return self.initial_plane.transformed(self.transform_at(i))

    def theta_at(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.t, self.theta)


@dataclass(frozen=True, eq=False)
class HeadFrameResult:
    trajectory: Trajectory
    plane: Plane
    nose_center: np.ndarray
    mode: str
    track: Optional[PlaneTrack] = None


# =============================================================================
# Reference sensor
# =============================================================================

def to_head_frame(cottle_tips: Trajectory, head_stream: PoseStream, max_gap: float = 0.5) -> Trajectory:
    """
    Express tip points in the head sensor frame. Head poses are linearly
    interpolated (slerp for orientation) between samples.

    Raises:
        CoverageError: a tip sample is more than `max_gap` s from any head sample
    """
    head_t = head_stream.t
    t = cottle_tips.t
    if len(head_t) < 2:
        raise CoverageError("Head stream needs at least 2 samples")

    right = np.clip(np.searchsorted(head_t, t), 0, len(head_t) - 1)
    left = np.clip(right - 1, 0, len(head_t) - 1)
    nearest = np.minimum(np.abs(t - head_t[left]), np.abs(head_t[right] - t))
    uncovered = nearest > max_gap
    if np.any(uncovered):
        first = int(np.argmax(uncovered))
        raise CoverageError(
            f"No head pose within {max_gap} s of cottle sample at t={t[first]:.3f} "
            f"(nearest is {nearest[first]:.3f} s away)")

    clipped = np.clip(t, head_t[0], head_t[-1])
    rotations = Slerp(head_t, head_stream.rotations())(clipped)
    positions = np.column_stack([np.interp(clipped, head_t, head_stream.positions[:, k]) for k in range(3)])

    local = rotations.inv().apply(cottle_tips.points - positions)
    return Trajectory(t, local)


# =============================================================================
# 1-DoF estimator
# =============================================================================

def default_axis(plane: Plane, nose_center, override: Optional[dict] = None,
                 anterior=None, neck_depth: float = 90.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Neck axis: the plane's long in-plane direction u, anchored `neck_depth` mm
    behind the nose center along the other in-plane direction.

    `anterior` is any vector pointing out of the face (e.g. tip to tool
    handle). Without it, or when it has no in-plane depth component, the
    axis passes through the nose center.
    """
    if override:
        return (np.asarray(override['point'], dtype=float),
                np.asarray(override['direction'], dtype=float))
    u, v = plane.in_plane_basis()
    center = np.asarray(nose_center, dtype=float)
    if anterior is None or neck_depth == 0:
        return center, u
    forward = float(np.asarray(anterior, dtype=float) @ v)
    if abs(forward) < 1e-6 * max(1.0, float(np.linalg.norm(anterior))):
        logger.warning("anterior direction is perpendicular to the septal depth axis; "
                       "anchoring the neck axis at the nose center")
        return center, u
    return center - np.sign(forward) * neck_depth * v, u


def _anterior_hint(trial: Trial, tips: Trajectory, mask: np.ndarray) -> Optional[np.ndarray]:
    # the handle stays outside the nose, so sensor minus tip points out of the face
    stream = trial.cottle_stream
    if len(stream) != len(tips) or not np.any(mask):
        return None
    return (stream.positions[mask] - tips.points[mask]).mean(axis=0)


def _rotated_normals(normal: np.ndarray, direction: np.ndarray, theta: float) -> np.ndarray:
    return Rotation.from_rotvec(direction * theta).apply(normal)


def _window_bounds(t: np.ndarray, window: float, min_samples: int) -> Tuple[np.ndarray, np.ndarray]:
    hi = np.arange(1, len(t) + 1)
    lo = np.searchsorted(t, t - window, side='left')
    short = (hi - lo) < min_samples
    lo = np.where(short, np.maximum(hi - min_samples, 0), lo)
    hi = np.maximum(hi, lo + min_samples)
    return lo, np.minimum(hi, len(t))


def estimate_plane_track(tips: Trajectory, initial_plane: Plane, model: HeadModel) -> PlaneTrack:
    """
    Fit, for every sample, the angle θ about the neck axis that minimizes the
    squared distances of the last `window` seconds of tips to the rotated
    initial plane. The search is bounded to ±bracket_deg around the previous
    frame's angle, and never returns an angle worse than the previous one.

    Raises:
        InsufficientData: fewer than `min_window_samples` tips in total
    """
    if model.mode != 'estimated_1dof':
        raise InputError("estimate_plane_track needs a HeadModel in estimated_1dof mode")
    if len(tips) < model.min_window_samples:
        raise InsufficientData(
            f"Plane tracking needs at least {model.min_window_samples} tip samples, got {len(tips)}")
    if model.axis_point is None or model.axis_direction is None:
        raise InputError("HeadModel needs an axis; see default_axis()")

    anchor = model.axis_point
    direction = model.axis_direction
    n0 = initial_plane.normal
    offset = (initial_plane.point - anchor) @ n0
    rel = tips.points - anchor
    bracket = np.radians(model.bracket_deg)
    xatol = np.radians(model.tolerance_deg)
    lo, hi = _window_bounds(tips.t, model.window, model.min_window_samples)

    theta = np.empty(len(tips))
    previous = 0.0
    for i in range(len(tips)):
        window_pts = rel[lo[i]:hi[i]]

        def residual(angle, pts=window_pts):
            d = pts @ _rotated_normals(n0, direction, angle) - offset
            return float(d @ d)

        fit = minimize_scalar(residual, bounds=(previous - bracket, previous + bracket),
                              method='bounded', options={'xatol': xatol})
        best = float(fit.x)
        if residual(previous) <= residual(best):
            best = previous
        theta[i] = previous = best

    logger.debug("plane track: %d frames, theta range [%.2f, %.2f] deg",
                 len(theta), np.degrees(theta.min()), np.degrees(theta.max()))
    return PlaneTrack(tips.t.copy(), theta, initial_plane, anchor, direction)


def compensate(tips: Trajectory, track: PlaneTrack) -> Trajectory:
    """Rotate each tip by -θ(t) about the axis so the tracked plane maps onto the initial plane."""
    theta = track.theta if np.array_equal(tips.t, track.t) else track.theta_at(tips.t)
    rot = Rotation.from_rotvec(-theta[:, None] * track.axis_direction[None, :])
    return Trajectory(tips.t, rot.apply(tips.points - track.axis_point) + track.axis_point)


# =============================================================================
# Trial-level driver
# =============================================================================

def _in_use_mask(trial: Trial, t: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(t), dtype=bool)
    for a in trial.in_use:
        mask |= (t >= a.t_start) & (t <= a.t_end)
    return mask


def head_frame(trial: Trial, tips: Trajectory, mode: str = 'auto',
               model: Optional[HeadModel] = None) -> HeadFrameResult:
    """
    Register the nose and express `tips` in a frame where the septal plane
    is stationary.

    mode: 'sensor' (requires head.csv), 'estimate' (1-DoF estimator),
          'auto' (sensor when available, else estimate), 'none' (tracker frame)
    """
    if mode not in HEAD_MODES:
        raise InputError(f"head mode must be one of {HEAD_MODES}, got {mode!r}")
    if mode == 'sensor' and trial.head_stream is None:
        raise InputError(f"Trial {trial.id} has no head.csv; use --head-mode estimate")
    if mode == 'auto':
        mode = 'sensor' if trial.head_stream is not None else 'estimate'
        logger.info("trial %s: head mode auto -> %s", trial.id, mode)

    model = model or HeadModel()
    if mode == 'sensor':
        tips = to_head_frame(tips, trial.head_stream, model.max_gap)

    in_use = _in_use_mask(trial, tips.t)
    reg = tips.between(*trial.registration_interval)
    plane, nose_center = register_nose(reg.points, tips.points[in_use])

    if mode != 'estimate':
        return HeadFrameResult(tips, plane, nose_center, mode)

    point, direction = default_axis(plane, nose_center, trial.head_axis,
                                    _anterior_hint(trial, tips, in_use), model.neck_depth)
    active = tips.select(in_use)
    track = estimate_plane_track(active, plane, model.with_axis(point, direction))
    points = tips.points.copy()
    points[in_use] = compensate(active, track).points
    return HeadFrameResult(Trajectory(tips.t, points), plane, nose_center, mode, track)


__all__ = [
    "SCHEMA",
    "HEAD_MODES",
    "CoverageError",
    "InsufficientData",
    "HeadModel",
    "PlaneTrack",
    "HeadFrameResult",
    "to_head_frame",
    "default_axis",
    "estimate_plane_track",
    "compensate",
    "head_frame",
]
