"""
Synthetic septoplasty trials

Seeded generator of trial bundles with known ground truth: pivot segments
for both Cottle tips, a nose-perimeter registration trace, and sub-trials of
strokes that lift off the septal plane (Type I) while their start points
grow a search graph on it (Type II). Optional 1-DoF head rotation about a
vertical neck axis behind the nose, and an optional head reference sensor.

Head frame: nose center at the origin, septal plane x = 0 (normal +x
lateral), z vertical (long axis of the registration trace), +y posterior.
The tool handle stays anterior and below the tip.

Every stroke is a two-leg polyline S -> C -> E with the tip parked for one
smoothing window at S, C and E. Moving-average smoothing keeps such a path
on the polyline, so noiseless trials reproduce the true curvature, duration
and start points exactly.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.transform import Rotation, Slerp

from septoskill.acquisition import (
    TIPS,
    Annotation,
    PoseStream,
    Trial,
    write_trial,
)
from septoskill.features import prefix_hull_areas
from septoskill.geometry import Plane, convex_hull, convex_hull_area
from septoskill.strokes import StrokeConfig
from septoskill.utils import InputError, write_text_file

logger = logging.getLogger(__name__)


SCHEMA = """
=== Synth API ===

SkillProfile(curvature_mean, curvature_local_jitter, duration_mean,
             duration_local_jitter, coverage_step, revisit_prob,
             stroke_amplitude, noise_sigma)
HeadMotion(kind='none'|'sinusoid', amplitude_deg, frequency_hz)
    HeadMotion.parse('none' | 'sinusoid:AMP_DEG:FREQ_HZ')
SynthConfig(rate=40, strokes_per_subtrial=20, subtrials=2, head_sensor=True, ...)

generate_trial(profile, head_motion, seed, config, ...) -> (Trial, SynthTruth)
generate_dataset(n_experts, n_novices, trials_per_surgeon, profile_pair, seed, ...)
    -> SynthCohort
write_synth_bundle(trial, truth, path) -> None      bundle + truth.json
PROFILE_PAIRS: 'clinical' (expert SCC lower, SDC higher, CR higher),
               'shared' (one profile), 'separated' (far apart)
"""

HEAD_MOTIONS = ('none', 'sinusoid')
DEFAULT_TIP_OFFSETS = {
    'tip_a': (1.5, 0.5, 95.0),
    'tip_b': (-1.0, 0.8, -95.0),
}
# shaft tilted 20 degrees up from the depth axis; tip_b active turns the tool over
TIP_BASE_ROTATIONS = {
    'tip_a': Rotation.from_euler('x', -70, degrees=True),
    'tip_b': Rotation.from_euler('x', -70, degrees=True) * Rotation.from_euler('x', 180, degrees=True),
}
PIVOT_POINTS = {
    'tip_a': (-150.0, 0.0, -100.0),
    'tip_b': (-150.0, 30.0, -100.0),
}
HEAD_MOUNT = ((0.0, 60.0, 90.0), (20.0, 0.0, 10.0))    # translation mm, xyz euler deg
REGISTRATION_EXTENT = (8.0, 3.0, 20.0)                  # lateral, depth, vertical semi-axes
BASE_OFFSET = 1.0                                       # stroke starts sit 1 mm off the plane
NECK_AXIS = ((0.0, 90.0, 0.0), (0.0, 0.0, 1.0))      # point mm, direction


# =============================================================================
# Errors
# =============================================================================

class BadProfile(InputError):
    """Skill profile parameters out of range."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class SkillProfile:
    curvature_mean: float = 1.2
    curvature_local_jitter: float = 0.05
    duration_mean: float = 1.0
    duration_local_jitter: float = 0.15
    coverage_step: float = 5.0
    revisit_prob: float = 0.3
    stroke_amplitude: float = 6.0
    noise_sigma: float = 0.2

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value) or value < 0:
                raise BadProfile(f"SkillProfile.{name} must be finite and >= 0, got {value}")
        if self.revisit_prob > 1:
            raise BadProfile(f"SkillProfile.revisit_prob must be <= 1, got {self.revisit_prob}")
        if self.curvature_mean < 1:
            raise BadProfile(f"SkillProfile.curvature_mean must be >= 1 (path/chord), got {self.curvature_mean}")
        if self.stroke_amplitude <= 0:
            raise BadProfile("SkillProfile.stroke_amplitude must be > 0")

    def jittered(self, rng: np.random.Generator, fraction: float = 0.1) -> 'SkillProfile':
        """Every parameter scaled by an independent factor in [1 - fraction, 1 + fraction]."""
        values = {k: v * (1.0 + rng.uniform(-fraction, fraction)) for k, v in asdict(self).items()}
        values['revisit_prob'] = min(values['revisit_prob'], 1.0)
        values['curvature_mean'] = max(values['curvature_mean'], 1.0)
        return SkillProfile(**values)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class HeadMotion:
    kind: str = 'none'
    amplitude_deg: float = 0.0
    frequency_hz: float = 0.0

    def __post_init__(self):
        if self.kind not in HEAD_MOTIONS:
            raise InputError(f"head motion must be one of {HEAD_MOTIONS}, got {self.kind!r}")
        if self.amplitude_deg < 0 or self.frequency_hz < 0:
            raise InputError("head motion amplitude and frequency must be >= 0")

    @classmethod
    def parse(cls, text: str) -> 'HeadMotion':
        parts = str(text).split(':')
        if parts[0] == 'none' and len(parts) == 1:
            return cls()
        if parts[0] == 'sinusoid' and len(parts) == 3:
            try:
                return cls('sinusoid', float(parts[1]), float(parts[2]))
            except ValueError:
                pass
        raise InputError(f"head motion must be 'none' or 'sinusoid:AMP_DEG:FREQ_HZ', got {text!r}")

    def theta(self, t: np.ndarray, t0: float) -> np.ndarray:
        """Head angle (radians); zero before t0."""
        t = np.asarray(t, dtype=float)
        if self.kind == 'none' or self.amplitude_deg == 0:
            return np.zeros_like(t)
        phase = 2.0 * np.pi * self.frequency_hz * (t - t0)
        return np.where(t >= t0, np.radians(self.amplitude_deg) * np.sin(phase), 0.0)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthConfig:
    rate: float = 40.0
    strokes_per_subtrial: int = 20
    subtrials: int = 2
    head_sensor: bool = True
    alternate_tips: bool = True
    dwell_samples: Optional[int] = None
    return_duration: float = 0.4
    lead_duration: float = 0.5
    pause_duration: float = 2.0
    pivot_duration: float = 4.0
    registration_duration: float = 4.0
    brush_angle_jitter_deg: float = 20.0
    handover_prob: float = 0.0
    surgeon_jitter: float = 0.1

    def __post_init__(self):
        if self.rate <= 0:
            raise InputError(f"SynthConfig.rate must be > 0, got {self.rate}")
        if self.strokes_per_subtrial < 3 or self.subtrials < 1:
            raise InputError("SynthConfig needs strokes_per_subtrial >= 3 and subtrials >= 1")
        if not 0 <= self.handover_prob <= 1:
            raise InputError(f"SynthConfig.handover_prob must be in [0, 1], got {self.handover_prob}")
        if self.dwell_samples is not None and self.dwell_samples < 1:
            raise InputError(f"SynthConfig.dwell_samples must be >= 1, got {self.dwell_samples}")

    def dwell(self) -> int:
        """Parked samples at each stroke vertex; one default smoothing window."""
        if self.dwell_samples is not None:
            return int(self.dwell_samples)
        return StrokeConfig().window_for(self.rate)

    def samples(self, seconds: float) -> int:
        return max(1, int(round(seconds * self.rate)))


@dataclass(frozen=True)
class Operator:
    operator_id: str
    operator_class: str
    profile: SkillProfile
    operator_role: Optional[str] = None


@dataclass(frozen=True, eq=False)
class TrueStroke:
    subtrial: int
    start_idx: int
    end_idx: int
    start_t: float
    end_t: float
    curvature: float
    duration: float
    start_point: np.ndarray
    start_uv: np.ndarray

    def to_dict(self) -> Dict:
        return {
            'subtrial': self.subtrial,
            'start_idx': self.start_idx,
            'end_idx': self.end_idx,
            'start_t': self.start_t,
            'end_t': self.end_t,
            'curvature': self.curvature,
            'duration': self.duration,
            'start_point': self.start_point.tolist(),
            'start_uv': self.start_uv.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SynthTruth:
    """Ground truth in the head frame (equal to the tracker frame before head motion)."""
    trial_id: str
    seed: int
    profiles: Dict[str, Dict]
    head_motion: HeadMotion
    tip_offsets: Dict[str, np.ndarray]
    pivot_points: Dict[str, np.ndarray]
    plane: Plane
    nose_center: np.ndarray
    axis_point: np.ndarray
    axis_direction: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    strokes: Tuple[TrueStroke, ...]
    hull_areas: Tuple[np.ndarray, ...]
    head_mount: Optional[Dict] = None

    def strokes_in(self, subtrial: int) -> List[TrueStroke]:
        return [s for s in self.strokes if s.subtrial == subtrial]

    def to_dict(self) -> Dict:
        return {
            'trial_id': self.trial_id,
            'seed': self.seed,
            'profiles': self.profiles,
            'head_motion': self.head_motion.to_dict(),
            'tip_offsets': {k: v.tolist() for k, v in sorted(self.tip_offsets.items())},
            'pivot_points': {k: v.tolist() for k, v in sorted(self.pivot_points.items())},
            'plane': self.plane.to_dict(),
            'nose_center': self.nose_center.tolist(),
            'axis': {'point': self.axis_point.tolist(), 'direction': self.axis_direction.tolist()},
            't': self.t.tolist(),
            'theta': self.theta.tolist(),
            'strokes': [s.to_dict() for s in self.strokes],
            'hull_areas': [a.tolist() for a in self.hull_areas],
            'head_mount': self.head_mount,
        }


@dataclass(frozen=True, eq=False)
class SynthCohort:
    trials: Tuple[Trial, ...]
    truths: Tuple[SynthTruth, ...]
    surgeons: Dict[str, Operator]

    def __len__(self) -> int:
        return len(self.trials)


def _pair(expert: SkillProfile, novice: SkillProfile) -> Dict[str, SkillProfile]:
    return {'expert': expert, 'novice': novice}


PROFILE_PAIRS = {
    'clinical': _pair(
        SkillProfile(curvature_mean=1.2, curvature_local_jitter=0.04, duration_mean=1.0,
                     duration_local_jitter=0.22, coverage_step=5.0, revisit_prob=0.25),
        SkillProfile(curvature_mean=1.2, curvature_local_jitter=0.07, duration_mean=1.0,
                     duration_local_jitter=0.13, coverage_step=3.5, revisit_prob=0.35),
    ),
    'shared': _pair(SkillProfile(), SkillProfile()),
    'separated': _pair(
        SkillProfile(curvature_local_jitter=0.01, duration_local_jitter=0.3, coverage_step=8.0,
                     revisit_prob=0.1),
        SkillProfile(curvature_local_jitter=0.15, duration_local_jitter=0.05, coverage_step=1.5,
                     revisit_prob=0.5),
    ),
}


# =============================================================================
# Timeline
# =============================================================================

@dataclass
class _Segment:
    """Tip path in the head frame with tool rotations, or a gap to interpolate."""
    n: int
    tip: Optional[np.ndarray] = None
    rotations: Optional[Rotation] = None
    active: str = 'tip_a'

    @property
    def is_gap(self) -> bool:
        return self.tip is None


def _linear(p0, p1, n: int, include_start: bool = False, include_end: bool = False) -> np.ndarray:
    """n samples along p0 -> p1 at constant speed, endpoints optional."""
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    if include_start and include_end:
        s = np.linspace(0.0, 1.0, n)
    elif include_start:
        s = np.arange(n) / n
    elif include_end:
        s = np.arange(1, n + 1) / n
    else:
        s = np.arange(1, n + 1) / (n + 1)
    return p0 + s[:, None] * (p1 - p0)


def _wobble(t: np.ndarray, base: Rotation) -> Rotation:
    """Slow hand wobble of a few degrees around the base tool orientation."""
    rotvec = np.column_stack([
        np.radians(5.0) * np.sin(2 * np.pi * 0.3 * t),
        np.radians(4.0) * np.cos(2 * np.pi * 0.2 * t),
        np.radians(3.0) * np.sin(2 * np.pi * 0.13 * t + 1.0),
    ])
    return base * Rotation.from_rotvec(rotvec)


def _pivot_segment(tip: str, n: int) -> _Segment:
    k = np.arange(n)
    psi = 2.0 * np.pi * 3.0 * k / n
    cone = np.radians(25.0) * (0.6 + 0.4 * np.sin(2.0 * np.pi * k / n))
    rotvec = np.column_stack([cone * np.cos(psi), cone * np.sin(psi), np.zeros(n)])
    rot = TIP_BASE_ROTATIONS[tip] * Rotation.from_rotvec(rotvec)
    return _Segment(n, np.tile(PIVOT_POINTS[tip], (n, 1)), rot, tip)


def _registration_points(n: int) -> np.ndarray:
    """Two laps of a nose-perimeter loop; lateral, depth and vertical terms are uncorrelated."""
    phi = 4.0 * np.pi * np.arange(n) / n
    lateral, depth, vertical = REGISTRATION_EXTENT
    return np.column_stack([lateral * np.sin(phi), depth * np.sin(2.0 * phi), vertical * np.cos(phi)])


# =============================================================================
# Search graph growth
# =============================================================================

def _grow_vertex(points: np.ndarray, step: float, rng: np.random.Generator) -> np.ndarray:
    """
    New 2-D start vertex outside the current hull that grows its area by
    exactly `step`: pushed out from the midpoint of one of the hull edges
    nearest the center, at the height found by root bracketing.
    """
    hull = convex_hull(points)
    if len(hull) < 3 or step == 0:
        return points[-1].copy()
    area = convex_hull_area(hull)
    edges = [(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))]
    order = np.argsort([np.linalg.norm((a + b) / 2.0) for a, b in edges], kind='stable')
    a, b = edges[int(order[rng.integers(min(3, len(order)))])]

    mid = (a + b) / 2.0
    edge = b - a
    outward = np.array([edge[1], -edge[0]]) / np.linalg.norm(edge)  # hull is counter-clockwise

    def gain(h):
        return convex_hull_area(np.vstack([hull, mid + h * outward])) - area - step

    hi = 2.0 * step / np.linalg.norm(edge)
    while gain(hi) < 0:
        hi *= 2.0
    h = brentq(gain, 0.0, hi, xtol=1e-12, rtol=1e-14)
    return mid + h * outward


def _inside_vertex(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    hull = convex_hull(points)
    weights = rng.dirichlet(np.ones(len(hull)))
    return weights @ hull


def _start_vertices(profile: SkillProfile, n: int, rng: np.random.Generator) -> np.ndarray:
    """(y, z) stroke starts; the first three form a triangle of area coverage_step."""
    side = np.sqrt(4.0 * profile.coverage_step / np.sqrt(3.0))
    angle0 = rng.uniform(0.0, 2.0 * np.pi)
    angles = angle0 + 2.0 * np.pi * np.arange(3) / 3.0
    radius = side / np.sqrt(3.0)
    points = [np.array([radius * np.cos(a), radius * np.sin(a)]) for a in angles]
    for _ in range(3, n):
        current = np.array(points)
        if rng.random() < profile.revisit_prob and len(convex_hull(current)) >= 3:
            points.append(_inside_vertex(current, rng))
        else:
            points.append(_grow_vertex(current, profile.coverage_step, rng))
    return np.array(points)


# =============================================================================
# Strokes
# =============================================================================

def _subtrial_segments(profile: SkillProfile, config: SynthConfig, rng: np.random.Generator,
                       tip: str) -> Tuple[List[_Segment], List[Dict]]:
    """Segments for one sub-trial and per-stroke truth with sample offsets."""
    n_strokes = config.strokes_per_subtrial
    dwell = config.dwell()
    lag = (dwell - 1) // 2
    amp = profile.stroke_amplitude
    min_samples = 2 * dwell + 2
    if config.samples(profile.duration_mean) < min_samples:
        raise BadProfile(
            f"duration_mean {profile.duration_mean} s is shorter than the stroke structure "
            f"({min_samples} samples at {config.rate} Hz)")

    starts_yz = _start_vertices(profile, n_strokes, rng)
    curvatures = np.maximum(1.0, profile.curvature_mean
                            + profile.curvature_local_jitter * rng.standard_normal(n_strokes))
    durations = profile.duration_mean + profile.duration_local_jitter * rng.standard_normal(n_strokes)
    counts = np.maximum(min_samples, np.round(durations * config.rate).astype(int))
    betas = np.pi / 2 + np.radians(config.brush_angle_jitter_deg) * rng.standard_normal(n_strokes)
    sides = rng.choice([-1.0, 1.0], size=n_strokes)

    x_hat = np.array([1.0, 0.0, 0.0])
    path: List[np.ndarray] = []
    truth = []
    cursor = 0

    def emit(points):
        nonlocal cursor
        path.append(np.asarray(points, dtype=float).reshape(-1, 3))
        cursor += len(path[-1])

    first = np.array([BASE_OFFSET, *starts_yz[0]])
    emit(_linear(first + amp * x_hat, first, config.samples(config.lead_duration), include_start=True))

    end = None
    for k in range(n_strokes):
        start = np.array([BASE_OFFSET, *starts_yz[k]])
        if end is not None:
            emit(_linear(end, start, config.samples(config.return_duration)))
        end = start + np.array([amp, amp * np.cos(betas[k]), amp * np.sin(betas[k])])
        chord = end - start
        side = np.cross(x_hat, chord)
        side /= np.linalg.norm(side)
        bulge = 0.5 * np.linalg.norm(chord) * np.sqrt(curvatures[k] ** 2 - 1.0)
        corner = start + 0.5 * chord + sides[k] * bulge * side

        motion = counts[k] - 2 * dwell
        leg1 = motion // 2
        start_idx = cursor + lag
        emit(np.tile(start, (dwell, 1)))
        emit(_linear(start, corner, leg1))
        emit(np.tile(corner, (dwell, 1)))
        emit(_linear(corner, end, motion - leg1))
        end_idx = cursor + lag
        emit(np.tile(end, (dwell, 1)))

        truth.append({
            'start_idx': start_idx,
            'end_idx': end_idx,
            'curvature': float((np.linalg.norm(corner - start) + np.linalg.norm(end - corner))
                               / np.linalg.norm(chord)),
            'start_point': start,
        })

    emit(_linear(end, end - amp * x_hat, config.samples(config.lead_duration), include_end=True))
    tip_path = np.vstack(path)
    return [_Segment(len(tip_path), tip_path, None, tip)], truth


# =============================================================================
# Assembly
# =============================================================================

def _fill_gaps(segments: List[_Segment], t: np.ndarray, positions: np.ndarray, quats: np.ndarray):
    """Interpolate sensor poses across gap segments (lerp position, slerp rotation)."""
    cursor = 0
    for seg in segments:
        if seg.is_gap:
            before, after = cursor - 1, cursor + seg.n
            key_t = t[[before, after]]
            key_rot = Rotation.from_quat(quats[[before, after]])
            inner = t[cursor:after]
            quats[cursor:after] = Slerp(key_t, key_rot)(inner).as_quat()
            for k in range(3):
                positions[cursor:after, k] = np.interp(inner, key_t, positions[[before, after], k])
        cursor += seg.n


def generate_trial(profile: SkillProfile, head_motion: Optional[HeadMotion] = None, seed: int = 0,
                   config: Optional[SynthConfig] = None, trial_id: str = 'synth',
                   operator_id: str = 'S1', operator_class: str = 'expert',
                   operator_role: Optional[str] = None,
                   handover: Optional[Operator] = None) -> Tuple[Trial, SynthTruth]:
    """
    Build one trial. Identical (profile, head_motion, seed, config) give
    bit-identical output. `handover` performs the last sub-trial when given.

    Raises:
        BadProfile
    """
    head_motion = head_motion or HeadMotion()
    config = config or SynthConfig()
    rng = np.random.default_rng(seed)
    rate = config.rate

    operators = [Operator(operator_id, operator_class, profile, operator_role)] * config.subtrials
    if handover is not None and config.subtrials > 1:
        operators[-1] = handover

    segments: List[_Segment] = [
        _pivot_segment('tip_a', config.samples(config.pivot_duration)),
        _Segment(config.samples(0.5)),
        _pivot_segment('tip_b', config.samples(config.pivot_duration)),
        _Segment(config.samples(1.0)),
    ]
    reg_start = sum(s.n for s in segments)
    reg_points = _registration_points(config.samples(config.registration_duration))
    segments.append(_Segment(len(reg_points), reg_points, None, 'tip_a'))
    reg_end = reg_start + len(reg_points) - 1
    segments.append(_Segment(config.samples(1.0)))

    stroke_truth = []
    sub_ranges = []
    for index, op in enumerate(operators):
        if index:
            segments.append(_Segment(config.samples(config.pause_duration)))
        tip = TIPS[index % 2] if config.alternate_tips else 'tip_a'
        sub_segments, truth = _subtrial_segments(op.profile, config, rng, tip)
        offset = sum(s.n for s in segments)
        for item in truth:
            item.update(subtrial=index, start_idx=item['start_idx'] + offset, end_idx=item['end_idx'] + offset)
        stroke_truth.extend(truth)
        segments.extend(sub_segments)
        sub_ranges.append((offset, offset + sub_segments[0].n - 1, op, tip))

    n = sum(s.n for s in segments)
    t = np.arange(n) / rate
    theta = head_motion.theta(t, t[reg_end])
    neck_point, neck_direction = (np.array(v) for v in NECK_AXIS)
    head_rot = Rotation.from_rotvec(theta[:, None] * neck_direction[None, :])

    offsets = {k: np.array(v) for k, v in DEFAULT_TIP_OFFSETS.items()}
    positions = np.zeros((n, 3))
    quats = np.zeros((n, 4))
    cursor = 0
    for seg in segments:
        sl = slice(cursor, cursor + seg.n)
        if not seg.is_gap:
            rot = seg.rotations if seg.rotations is not None else _wobble(t[sl], TIP_BASE_ROTATIONS[seg.active])
            world_tip = head_rot[sl].apply(seg.tip - neck_point) + neck_point
            positions[sl] = world_tip - rot.apply(offsets[seg.active])
            quats[sl] = rot.as_quat()
        cursor += seg.n
    _fill_gaps(segments, t, positions, quats)

    if profile.noise_sigma > 0:
        positions = positions + rng.normal(0.0, profile.noise_sigma, positions.shape)

    wxyz = np.column_stack([quats[:, 3:], quats[:, :3]])
    cottle = PoseStream(t, positions, wxyz, rate, 'cottle.csv')

    head_stream = None
    mount = None
    if config.head_sensor:
        mount_t, mount_euler = HEAD_MOUNT
        mount_rot = Rotation.from_euler('xyz', mount_euler, degrees=True)
        head_q = (head_rot * mount_rot).as_quat()
        head_stream = PoseStream(t, head_rot.apply(np.array(mount_t) - neck_point) + neck_point,
                                 np.column_stack([head_q[:, 3:], head_q[:, :3]]), rate, 'head.csv')
        mount = {'translation': list(mount_t), 'euler_xyz_deg': list(mount_euler)}

    annotations = []
    for first, last, op, tip in sub_ranges:
        annotations.append(Annotation(float(t[first]), float(t[last]), op.operator_id, op.operator_class,
                                      tip, True, op.operator_role))

    pivot_len = segments[0].n
    tip_b_start = pivot_len + segments[1].n
    trial = Trial(
        id=trial_id,
        cottle_stream=cottle,
        annotations=tuple(annotations),
        registration_interval=(float(t[reg_start]), float(t[reg_end])),
        head_stream=head_stream,
        pivot_intervals={
            'tip_a': (float(t[0]), float(t[pivot_len - 1])),
            'tip_b': (float(t[tip_b_start]), float(t[tip_b_start + segments[2].n - 1])),
        },
        registration_tip='tip_a',
        extra_meta={'synthetic': True, 'seed': seed},
    )

    plane = Plane(np.zeros(3), np.array([1.0, 0.0, 0.0]), (np.array([0.0, 0.0, 1.0]), np.array([0.0, -1.0, 0.0])))
    strokes = []
    for item in stroke_truth:
        start = item['start_point']
        strokes.append(TrueStroke(
            subtrial=item['subtrial'],
            start_idx=item['start_idx'],
            end_idx=item['end_idx'],
            start_t=float(t[item['start_idx']]),
            end_t=float(t[item['end_idx']]),
            curvature=item['curvature'],
            duration=float(t[item['end_idx']] - t[item['start_idx']]),
            start_point=start,
            start_uv=np.array([start[2], -start[1]]),
        ))
    hull_areas = tuple(
        prefix_hull_areas(np.array([s.start_uv for s in strokes if s.subtrial == i]))
        for i in range(len(operators)))

    truth = SynthTruth(
        trial_id=trial_id,
        seed=seed,
        profiles={op.operator_id: op.profile.to_dict() for op in operators},
        head_motion=head_motion,
        tip_offsets=offsets,
        pivot_points={k: np.array(v) for k, v in PIVOT_POINTS.items()},
        plane=plane,
        nose_center=np.zeros(3),
        axis_point=neck_point,
        axis_direction=neck_direction,
        t=t,
        theta=theta,
        strokes=tuple(strokes),
        hull_areas=hull_areas,
        head_mount=mount,
    )
    logger.debug("synthetic trial %s: %d samples, %d strokes, seed %d", trial_id, n, len(strokes), seed)
    return trial, truth


# =============================================================================
# Cohorts
# =============================================================================

def _surgeon_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def generate_dataset(n_experts: int, n_novices: int, trials_per_surgeon: Union[int, Sequence[int]],
                     profile_pair: Union[str, Dict[str, SkillProfile]] = 'clinical', seed: int = 0,
                     head_motion: Optional[HeadMotion] = None,
                     config: Optional[SynthConfig] = None) -> SynthCohort:
    """
    Cohort of surgeons E1..En (expert) and N1..Nm (novice), each with a
    profile jittered by ±surgeon_jitter from its class profile using a
    per-surgeon sub-seed. `trials_per_surgeon` is one count for everyone or
    one count per surgeon (experts first).
    """
    if n_experts < 1 or n_novices < 1:
        raise InputError("generate_dataset needs at least one expert and one novice")
    config = config or SynthConfig()
    pair = PROFILE_PAIRS[profile_pair] if isinstance(profile_pair, str) else profile_pair
    if set(pair) != {'expert', 'novice'}:
        raise InputError("profile_pair needs 'expert' and 'novice' profiles")

    n_surgeons = n_experts + n_novices
    counts = [int(trials_per_surgeon)] * n_surgeons if np.isscalar(trials_per_surgeon) \
        else [int(c) for c in trials_per_surgeon]
    if len(counts) != n_surgeons or min(counts) < 1:
        raise InputError(f"trials_per_surgeon needs {n_surgeons} counts >= 1, got {counts}")

    surgeons: Dict[str, Operator] = {}
    for i in range(n_surgeons):
        label = 'expert' if i < n_experts else 'novice'
        sid = f"E{i + 1}" if label == 'expert' else f"N{i - n_experts + 1}"
        role = 'attending' if label == 'expert' else ('fellow' if i == n_experts else 'resident')
        profile = pair[label].jittered(_surgeon_seed(seed, i), config.surgeon_jitter)
        surgeons[sid] = Operator(sid, label, profile, role)

    experts = [op for op in surgeons.values() if op.operator_class == 'expert']
    handover_rng = _surgeon_seed(seed, n_surgeons)
    trials, truths = [], []
    ordered = list(surgeons.values())
    trial_index = 0
    for i, op in enumerate(ordered):
        for _ in range(counts[i]):
            trial_seed = int(np.random.SeedSequence([seed, i, trial_index]).generate_state(1)[0])
            handover = None
            if op.operator_class == 'novice' and handover_rng.random() < config.handover_prob:
                handover = experts[int(handover_rng.integers(len(experts)))]
            trial, truth = generate_trial(op.profile, head_motion, trial_seed, config,
                                          trial_id=f"T{trial_index + 1:03d}", operator_id=op.operator_id,
                                          operator_class=op.operator_class, operator_role=op.operator_role,
                                          handover=handover)
            trials.append(trial)
            truths.append(truth)
            trial_index += 1

    logger.info("synthetic cohort: %d experts, %d novices, %d trials", n_experts, n_novices, len(trials))
    return SynthCohort(tuple(trials), tuple(truths), surgeons)


def write_synth_bundle(trial: Trial, truth: SynthTruth, path: str):
    """Standard trial bundle plus truth.json."""
    write_trial(trial, path)
    write_text_file(os.path.join(path, 'truth.json'),
                    json.dumps(truth.to_dict(), indent=2, sort_keys=True) + '\n')


__all__ = [
    "SCHEMA",
    "HEAD_MOTIONS",
    "PROFILE_PAIRS",
    "BadProfile",
    "SkillProfile",
    "HeadMotion",
    "SynthConfig",
    "Operator",
    "TrueStroke",
    "SynthTruth",
    "SynthCohort",
    "generate_trial",
    "generate_dataset",
    "write_synth_bundle",
]
