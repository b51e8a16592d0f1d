"""
Acquisition

Trial bundles on disk, the pose-stream data model, pivot calibration of the
two Cottle tips, nose registration and sub-trial segmentation.

Bundle layout:
    <bundle>/cottle.csv   t,px,py,pz,qw,qx,qy,qz  (s, mm, scalar-first quaternion)
    <bundle>/head.csv     same columns, optional
    <bundle>/meta.json    trial id, rate, calibrations, intervals, annotations
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import find_peaks
from scipy.spatial.transform import Rotation

from septoskill.geometry import (
    Plane,
    RigidTransform,
    UnitQuaternion,
    pca3,
    point_plane_distance,
)
from septoskill.utils import (
    NUMBER_FORMAT,
    InputError,
    NumericError,
    read_text_file,
    write_text_file,
)

logger = logging.getLogger(__name__)


SCHEMA = """
=== Acquisition API ===

parse_trial(path) -> Trial
    Load and validate a trial bundle directory.

write_trial(trial, path) -> None
    Write a bundle (cottle.csv, optional head.csv, meta.json).

pivot_calibration(poses) -> TipCalibration
    Linear least-squares tip offset from poses pivoting about a fixed point.

calibrate_trial(trial) -> Dict[str, TipCalibration]
    Pivot-calibrate both tips from the bundle's pivot intervals.

tip_trajectory(stream, cal) -> Trajectory
    Tip positions R·offset + p per sample.

active_tip_trajectory(trial) -> Trajectory
    Per-sample tip of whichever end the annotations mark active.

register_nose(tip_points, orient_points=None) -> (Plane, nose_center)
    Septal plane spanned by PC1 and PC3 of the registration trace.

segment_subtrials(trial, head_frame_trajectory) -> List[SubTrial]
    One sub-trial per maximal in-use interval with constant operator/tip.
"""

CSV_COLUMNS = ['t', 'px', 'py', 'pz', 'qw', 'qx', 'qy', 'qz']
TIPS = ('tip_a', 'tip_b')
OPERATOR_CLASSES = ('expert', 'novice')
OPERATOR_ROLES = ('attending', 'fellow', 'resident')
DEFAULT_ROLE = {'expert': 'attending', 'novice': 'resident'}
PIVOT_MIN_SINGULAR = 1e-6


# =============================================================================
# Errors
# =============================================================================

class ParseError(InputError):
    """Malformed row or field."""
    pass


class SchemaError(InputError):
    """Missing column, file or required meta key."""
    pass


class OrderError(InputError):
    """Timestamps are not strictly increasing."""
    def __init__(self, source: str, row: int, t_prev: float, t_row: float):
        self.source = source
        self.row = row
        super().__init__(
            f"{source}: timestamp at row {row} ({t_row!r}) does not increase "
            f"past the previous row ({t_prev!r})"
        )


class AnnotationError(InputError):
    """Overlapping or out-of-range annotation interval."""
    pass


class DegenerateMotion(NumericError):
    """Pivot poses do not rotate enough to observe the tip offset."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class PoseSample:
    t: float
    pose: RigidTransform


@dataclass(frozen=True, eq=False)
class PoseStream:
    """
    Timestamped 6-DoF sensor readings, stored column-wise.

    quaternions are scalar-first and renormalized on construction.
    """
    t: np.ndarray
    positions: np.ndarray
    quaternions: np.ndarray
    nominal_rate: float = 40.0
    source: str = 'stream'

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        quat = np.asarray(self.quaternions, dtype=float).reshape(-1, 4)
        if not (len(t) == len(pos) == len(quat)):
            raise InputError(f"{self.source}: column lengths differ")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(pos)) and np.all(np.isfinite(quat))):
            raise ParseError(f"{self.source}: non-finite values in stream")
        norms = np.linalg.norm(quat, axis=1)
        if np.any(norms == 0):
            row = int(np.argmax(norms == 0))
            raise ParseError(f"{self.source}: zero quaternion at row {row}")
        steps = np.diff(t)
        if np.any(steps <= 0):
            row = int(np.argmax(steps <= 0)) + 1
            raise OrderError(self.source, row, float(t[row - 1]), float(t[row]))
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'positions', pos)
        object.__setattr__(self, 'quaternions', quat / norms[:, None])

    @classmethod
    def from_poses(cls, t: Sequence[float], poses: Sequence[RigidTransform],
                   nominal_rate: float = 40.0, source: str = 'stream') -> 'PoseStream':
        return cls(
            t=np.asarray(t, dtype=float),
            positions=np.array([p.translation for p in poses]).reshape(-1, 3),
            quaternions=np.array([p.rotation.as_array() for p in poses]).reshape(-1, 4),
            nominal_rate=nominal_rate,
            source=source,
        )

    def __len__(self) -> int:
        return len(self.t)

    def rotations(self) -> Rotation:
        q = self.quaternions
        return Rotation.from_quat(np.column_stack([q[:, 1:], q[:, :1]]))

    def pose(self, i: int) -> RigidTransform:
        return RigidTransform(UnitQuaternion(*self.quaternions[i]), self.positions[i])

    @property
    def samples(self) -> List[PoseSample]:
        return [PoseSample(float(self.t[i]), self.pose(i)) for i in range(len(self))]

    def between(self, t_start: float, t_end: float) -> 'PoseStream':
        mask = (self.t >= t_start) & (self.t <= t_end)
        return PoseStream(self.t[mask], self.positions[mask], self.quaternions[mask],
                          self.nominal_rate, self.source)

    def transformed(self, transform: RigidTransform) -> 'PoseStream':
        """Left-multiply every pose by `transform`."""
        rot = transform.rotation.to_rotation()
        new_rot = rot * self.rotations()
        xyzw = new_rot.as_quat()
        return PoseStream(
            self.t,
            transform.apply(self.positions),
            np.column_stack([xyzw[:, 3:], xyzw[:, :3]]),
            self.nominal_rate,
            self.source,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered (t, point) samples."""
    t: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 't', np.asarray(self.t, dtype=float).reshape(-1))
        object.__setattr__(self, 'points', np.asarray(self.points, dtype=float).reshape(-1, 3))

    def __len__(self) -> int:
        return len(self.t)

    def select(self, mask) -> 'Trajectory':
        return Trajectory(self.t[mask], self.points[mask])

    def between(self, t_start: float, t_end: float) -> 'Trajectory':
        return self.select((self.t >= t_start) & (self.t <= t_end))


@dataclass(frozen=True, eq=False)
class TipCalibration:
    tip_offset: np.ndarray
    residual_rms: float = 0.0
    pivot_point: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'tip_offset', np.asarray(self.tip_offset, dtype=float).reshape(3))
        if self.residual_rms < 0:
            raise InputError(f"residual_rms must be >= 0, got {self.residual_rms}")

    def to_dict(self) -> Dict:
        data = {'offset': self.tip_offset.tolist(), 'residual_rms': float(self.residual_rms)}
        if self.pivot_point is not None:
            data['pivot_point'] = np.asarray(self.pivot_point).tolist()
        return data


@dataclass(frozen=True)
class Annotation:
    t_start: float
    t_end: float
    operator_id: str
    operator_class: str
    active_tip: str = 'tip_a'
    cottle_in_use: bool = True
    operator_role: Optional[str] = None

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise AnnotationError(
                f"Annotation [{self.t_start}, {self.t_end}] must have t_start < t_end")
        if self.operator_class not in OPERATOR_CLASSES:
            raise AnnotationError(
                f"operator_class must be one of {OPERATOR_CLASSES}, got {self.operator_class!r}")
        if self.active_tip not in TIPS:
            raise AnnotationError(f"active_tip must be one of {TIPS}, got {self.active_tip!r}")
        if self.operator_role is not None and self.operator_role not in OPERATOR_ROLES:
            raise AnnotationError(
                f"operator_role must be one of {OPERATOR_ROLES}, got {self.operator_role!r}")

    @property
    def role(self) -> str:
        return self.operator_role or DEFAULT_ROLE[self.operator_class]

    def to_dict(self) -> Dict:
        data = {
            't_start': self.t_start,
            't_end': self.t_end,
            'operator_id': self.operator_id,
            'operator_class': self.operator_class,
            'active_tip': self.active_tip,
            'cottle_in_use': self.cottle_in_use,
        }
        if self.operator_role is not None:
            data['operator_role'] = self.operator_role
        return data


@dataclass(frozen=True, eq=False)
class Trial:
    id: str
    cottle_stream: PoseStream
    annotations: Tuple[Annotation, ...]
    registration_interval: Tuple[float, float]
    calibrations: Dict[str, TipCalibration] = field(default_factory=dict)
    head_stream: Optional[PoseStream] = None
    pivot_intervals: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    registration_tip: str = 'tip_a'
    head_axis: Optional[Dict] = None
    extra_meta: Dict = field(default_factory=dict)

    @property
    def nominal_rate(self) -> float:
        return self.cottle_stream.nominal_rate

    @property
    def in_use(self) -> List[Annotation]:
        return sorted((a for a in self.annotations if a.cottle_in_use), key=lambda a: a.t_start)

    @property
    def operators(self) -> List[str]:
        return sorted({a.operator_id for a in self.in_use})

    def with_calibrations(self, calibrations: Dict[str, TipCalibration]) -> 'Trial':
        merged = dict(self.calibrations)
        merged.update(calibrations)
        return replace(self, calibrations=merged)

    def meta_dict(self) -> Dict:
        meta = dict(self.extra_meta)
        meta.update({
            'trial_id': self.id,
            'nominal_rate': self.nominal_rate,
            'registration_interval': list(self.registration_interval),
            'registration_tip': self.registration_tip,
            'annotations': [a.to_dict() for a in self.annotations],
        })
        if self.calibrations:
            meta['calibrations'] = {k: v.to_dict() for k, v in sorted(self.calibrations.items())}
        if self.pivot_intervals:
            meta['pivot_intervals'] = {k: list(v) for k, v in sorted(self.pivot_intervals.items())}
        if self.head_axis:
            meta['head_axis'] = self.head_axis
        return meta


@dataclass(frozen=True, eq=False)
class SubTrial:
    trial_id: str
    operator_id: str
    operator_class: str
    active_tip: str
    trajectory: Trajectory
    index: int = 0
    operator_role: Optional[str] = None

    @property
    def tip_trajectory(self) -> Trajectory:
        return self.trajectory

    @property
    def role(self) -> str:
        return self.operator_role or DEFAULT_ROLE[self.operator_class]


# =============================================================================
# Parsing
# =============================================================================

def _read_stream(path: str, nominal_rate: float) -> PoseStream:
    source = os.path.basename(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{source}: file is empty; expected header {','.join(CSV_COLUMNS)}")
    except pd.errors.ParserError as exc:
        raise ParseError(f"{source}: {exc}")

    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{source}: missing column(s) {', '.join(missing)}")

    values = {}
    for column in CSV_COLUMNS:
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors='coerce')
        bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"{source}: row {row}, column {column!r}: cannot parse {raw.iloc[row]!r}")
        values[column] = parsed.to_numpy(dtype=float)

    return PoseStream(
        t=values['t'],
        positions=np.column_stack([values['px'], values['py'], values['pz']]),
        quaternions=np.column_stack([values['qw'], values['qx'], values['qy'], values['qz']]),
        nominal_rate=nominal_rate,
        source=source,
    )


def _interval(value, name: str) -> Tuple[float, float]:
    try:
        t_start, t_end = (float(x) for x in value)
    except (TypeError, ValueError):
        raise ParseError(f"meta.json: {name} must be [t_start, t_end], got {value!r}")
    if not t_start < t_end:
        raise AnnotationError(f"meta.json: {name} must have t_start < t_end, got {value!r}")
    return t_start, t_end


def _parse_annotation(raw: Dict, index: int) -> Annotation:
    required = ('t_start', 't_end', 'operator_id', 'operator_class')
    missing = [k for k in required if k not in raw]
    if missing:
        raise SchemaError(f"meta.json: annotation {index} missing {', '.join(missing)}")
    try:
        t_start, t_end = float(raw['t_start']), float(raw['t_end'])
    except (TypeError, ValueError):
        raise ParseError(f"meta.json: annotation {index} has non-numeric times")
    in_use = raw.get('cottle_in_use', True)
    if not isinstance(in_use, bool):
        raise ParseError(f"meta.json: annotation {index} cottle_in_use must be true or false, got {in_use!r}")
    return Annotation(
        t_start=t_start,
        t_end=t_end,
        operator_id=str(raw['operator_id']),
        operator_class=str(raw['operator_class']),
        active_tip=str(raw.get('active_tip', 'tip_a')),
        cottle_in_use=in_use,
        operator_role=raw.get('operator_role'),
    )


def check_annotations(annotations: Sequence[Annotation], t_range: Tuple[float, float]):
    """Raise AnnotationError on overlap or on intervals outside the stream."""
    ordered = sorted(annotations, key=lambda a: a.t_start)
    for a in ordered:
        if a.t_start < t_range[0] - 1e-9 or a.t_end > t_range[1] + 1e-9:
            raise AnnotationError(
                f"Annotation [{a.t_start}, {a.t_end}] lies outside the stream "
                f"time range [{t_range[0]}, {t_range[1]}]")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.t_start < prev.t_end:
            raise AnnotationError(
                f"Annotations overlap: [{prev.t_start}, {prev.t_end}] and "
                f"[{cur.t_start}, {cur.t_end}]")


def parse_trial(path: str) -> Trial:
    """
    Load a trial bundle and enforce every Trial invariant.

    Raises:
        SchemaError, ParseError, OrderError, AnnotationError
    """
    meta_path = os.path.join(path, 'meta.json')
    cottle_path = os.path.join(path, 'cottle.csv')
    if not os.path.isfile(meta_path):
        raise SchemaError(f"{path}: missing meta.json")
    if not os.path.isfile(cottle_path):
        raise SchemaError(f"{path}: missing cottle.csv")

    try:
        meta = json.loads(read_text_file(meta_path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"meta.json: {exc}")
    if not isinstance(meta, dict):
        raise ParseError("meta.json must hold a JSON object")

    for key in ('trial_id', 'registration_interval', 'annotations'):
        if key not in meta:
            raise SchemaError(f"meta.json: missing required key {key!r}")

    try:
        rate = float(meta.get('nominal_rate', 40.0))
    except (TypeError, ValueError):
        raise ParseError(f"meta.json: nominal_rate must be a number, got {meta.get('nominal_rate')!r}")

    cottle = _read_stream(cottle_path, rate)
    head_path = os.path.join(path, 'head.csv')
    head = _read_stream(head_path, rate) if os.path.isfile(head_path) else None
    if len(cottle) < 2:
        raise SchemaError("cottle.csv: at least 2 samples are required")

    calibrations = {}
    for tip, raw in (meta.get('calibrations') or {}).items():
        if tip not in TIPS:
            raise SchemaError(f"meta.json: unknown calibration tip {tip!r}")
        if raw and raw.get('offset') is not None:
            try:
                calibrations[tip] = TipCalibration(
                    np.array(raw['offset'], dtype=float),
                    float(raw.get('residual_rms', 0.0)),
                    np.array(raw['pivot_point'], dtype=float) if raw.get('pivot_point') else None,
                )
            except (TypeError, ValueError):
                raise ParseError(f"meta.json: calibration {tip} offset must be [x, y, z]")

    pivots = {tip: _interval(v, f"pivot_intervals.{tip}")
              for tip, v in (meta.get('pivot_intervals') or {}).items()}
    for tip in TIPS:
        if tip not in calibrations and tip not in pivots:
            raise SchemaError(
                f"meta.json: {tip} has neither a calibration offset nor a pivot interval")

    if not isinstance(meta['annotations'], list):
        raise ParseError("meta.json: annotations must be a list")
    annotations = tuple(_parse_annotation(a, i) for i, a in enumerate(meta['annotations']))
    t_range = (float(cottle.t[0]), float(cottle.t[-1]))
    check_annotations(annotations, t_range)

    registration = _interval(meta['registration_interval'], 'registration_interval')
    for a in annotations:
        if a.cottle_in_use and a.t_start < registration[1]:
            raise AnnotationError(
                f"registration_interval {list(registration)} must precede in-use "
                f"annotation starting at {a.t_start}")

    known = {'trial_id', 'nominal_rate', 'calibrations', 'pivot_intervals',
             'registration_interval', 'registration_tip', 'annotations', 'head_axis'}
    return Trial(
        id=str(meta['trial_id']),
        cottle_stream=cottle,
        head_stream=head,
        annotations=annotations,
        registration_interval=registration,
        calibrations=calibrations,
        pivot_intervals=pivots,
        registration_tip=str(meta.get('registration_tip', 'tip_a')),
        head_axis=meta.get('head_axis'),
        extra_meta={k: v for k, v in meta.items() if k not in known},
    )


def stream_to_csv(stream: PoseStream) -> str:
    frame = pd.DataFrame({
        't': stream.t,
        'px': stream.positions[:, 0],
        'py': stream.positions[:, 1],
        'pz': stream.positions[:, 2],
        'qw': stream.quaternions[:, 0],
        'qx': stream.quaternions[:, 1],
        'qy': stream.quaternions[:, 2],
        'qz': stream.quaternions[:, 3],
    }, columns=CSV_COLUMNS)
    return frame.to_csv(index=False, float_format=NUMBER_FORMAT, lineterminator='\n')


def write_meta(meta: Dict, path: str):
    write_text_file(os.path.join(path, 'meta.json'),
                    json.dumps(meta, indent=2, sort_keys=True, ensure_ascii=False) + '\n')


def write_trial(trial: Trial, path: str):
    """Write `trial` as a bundle directory at `path`."""
    os.makedirs(path, exist_ok=True)
    write_text_file(os.path.join(path, 'cottle.csv'), stream_to_csv(trial.cottle_stream))
    if trial.head_stream is not None:
        write_text_file(os.path.join(path, 'head.csv'), stream_to_csv(trial.head_stream))
    write_meta(trial.meta_dict(), path)


# =============================================================================
# Calibration
# =============================================================================

def pivot_calibration(poses: Sequence[RigidTransform]) -> TipCalibration:
    """
    Solve [R_i | -I]·[offset; pivot] = -p_i in the least-squares sense.

    Raises:
        DegenerateMotion: fewer than 3 poses, or rotations too similar
    """
    if len(poses) < 3:
        raise DegenerateMotion(f"Pivot calibration needs at least 3 poses, got {len(poses)}")

    rotations = np.array([p.rotation.as_matrix() for p in poses])
    positions = np.array([p.translation for p in poses])
    n = len(poses)

    a = np.zeros((3 * n, 6))
    a[:, :3] = rotations.reshape(3 * n, 3)
    a[:, 3:] = -np.tile(np.eye(3), (n, 1))
    b = -positions.reshape(3 * n)

    singular = np.linalg.svd(a, compute_uv=False)
    if singular[-1] <= PIVOT_MIN_SINGULAR:
        raise DegenerateMotion(
            "Pivot poses do not rotate enough to observe the tip offset "
            f"(smallest singular value {singular[-1]:.3g}); pivot the tool "
            "through a wider range of orientations")

    solution, *_ = np.linalg.lstsq(a, b, rcond=None)
    residual = a @ solution - b
    rms = float(np.sqrt(np.mean(residual ** 2)))
    logger.debug("pivot calibration: %d poses, residual rms %.4f mm", n, rms)
    return TipCalibration(solution[:3], rms, solution[3:])


def calibrate_trial(trial: Trial) -> Dict[str, TipCalibration]:
    """Pivot-calibrate every tip that has an annotated pivot interval."""
    if not trial.pivot_intervals:
        raise SchemaError(
            f"Trial {trial.id} has no pivot_intervals; annotate one per tip in meta.json")
    result = {}
    for tip, (t_start, t_end) in sorted(trial.pivot_intervals.items()):
        segment = trial.cottle_stream.between(t_start, t_end)
        result[tip] = pivot_calibration([s.pose for s in segment.samples])
    return result


def tip_trajectory(stream: PoseStream, cal: TipCalibration) -> Trajectory:
    """Tip position R·offset + p for every sample."""
    return Trajectory(stream.t, stream.rotations().apply(cal.tip_offset) + stream.positions)


def active_tips(trial: Trial) -> np.ndarray:
    """Per-sample active tip name; the registration trace uses registration_tip."""
    t = trial.cottle_stream.t
    tips = np.full(len(t), 'tip_a', dtype=object)
    for a in trial.annotations:
        tips[(t >= a.t_start) & (t <= a.t_end)] = a.active_tip
    reg = trial.registration_interval
    tips[(t >= reg[0]) & (t <= reg[1])] = trial.registration_tip
    return tips


def active_tip_trajectory(trial: Trial) -> Trajectory:
    """Trajectory of whichever tip is active at each sample."""
    missing = [tip for tip in TIPS if tip not in trial.calibrations]
    if missing:
        raise SchemaError(
            f"Trial {trial.id} is not calibrated for {', '.join(missing)}; "
            "run the calibrate command first")
    tips = active_tips(trial)
    points = np.empty_like(trial.cottle_stream.positions)
    for tip in TIPS:
        mask = tips == tip
        if np.any(mask):
            points[mask] = tip_trajectory(trial.cottle_stream, trial.calibrations[tip]).points[mask]
    return Trajectory(trial.cottle_stream.t, points)


# =============================================================================
# Registration
# =============================================================================

def _local_peak_mask(values: np.ndarray) -> np.ndarray:
    # flat peaks count once (find_peaks reports the plateau middle)
    mask = np.zeros(len(values), dtype=bool)
    mask[find_peaks(values)[0]] = True
    return mask


def orient_plane(plane: Plane, points) -> Plane:
    """
    Flip the normal when most distance peaks of `points` fall on its
    negative side. Ties keep the current orientation.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        return plane
    signed = point_plane_distance(pts, plane)
    peaks = _local_peak_mask(np.abs(signed))
    positive = int(np.sum(signed[peaks] > 0))
    negative = int(np.sum(signed[peaks] < 0))
    return plane.flipped() if negative > positive else plane


def register_nose(tip_points, orient_points=None) -> Tuple[Plane, np.ndarray]:
    """
    Initial septal plane from the nose-perimeter registration trace.

    The plane is spanned by PC1 and PC3 (normal PC1 × PC3) through the trace
    centroid, which also serves as the nose center. When `orient_points`
    (later in-use motion) is given, the normal is flipped so strokes move
    to its positive side.
    """
    centroid, components, _ = pca3(tip_points)
    u, w = components[0], components[2]
    normal = np.cross(u, w)
    plane = Plane(centroid, normal, (u, w))
    if orient_points is not None:
        plane = orient_plane(plane, orient_points)
    return plane, centroid


# =============================================================================
# Sub-trials
# =============================================================================

def _merged_in_use(annotations: Sequence[Annotation]) -> List[Annotation]:
    ordered = sorted((a for a in annotations if a.cottle_in_use), key=lambda a: a.t_start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.t_start < prev.t_end:
            raise AnnotationError(
                f"Annotations overlap: [{prev.t_start}, {prev.t_end}] and "
                f"[{cur.t_start}, {cur.t_end}]")
    merged = []
    for a in ordered:
        if merged:
            last = merged[-1]
            same = (last.operator_id, last.operator_class, last.active_tip, last.operator_role) == \
                (a.operator_id, a.operator_class, a.active_tip, a.operator_role)
            if same and abs(a.t_start - last.t_end) <= 1e-9:
                merged[-1] = replace(last, t_end=a.t_end)
                continue
        merged.append(a)
    return merged


def segment_subtrials(trial: Trial, head_frame_trajectory: Trajectory) -> List[SubTrial]:
    """
    Split the head-frame trajectory into sub-trials, one per maximal
    in-use interval with a constant operator and tip. A sample on a shared
    boundary belongs to the earlier interval.
    """
    traj = head_frame_trajectory
    assigned = np.zeros(len(traj), dtype=bool)
    result = []
    for a in _merged_in_use(trial.annotations):
        mask = (traj.t >= a.t_start) & (traj.t <= a.t_end) & ~assigned
        assigned |= mask
        if not np.any(mask):
            logger.info("trial %s: in-use interval [%s, %s] holds no samples",
                        trial.id, a.t_start, a.t_end)
            continue
        result.append(SubTrial(
            trial_id=trial.id,
            operator_id=a.operator_id,
            operator_class=a.operator_class,
            active_tip=a.active_tip,
            trajectory=traj.select(mask),
            index=len(result),
            operator_role=a.operator_role,
        ))
    return result


__all__ = [
    "SCHEMA",
    "CSV_COLUMNS",
    "TIPS",
    "ParseError",
    "SchemaError",
    "OrderError",
    "AnnotationError",
    "DegenerateMotion",
    "PoseSample",
    "PoseStream",
    "Trajectory",
    "TipCalibration",
    "Annotation",
    "Trial",
    "SubTrial",
    "check_annotations",
    "parse_trial",
    "stream_to_csv",
    "write_meta",
    "write_trial",
    "pivot_calibration",
    "calibrate_trial",
    "tip_trajectory",
    "active_tips",
    "active_tip_trajectory",
    "orient_plane",
    "register_nose",
    "segment_subtrials",
]
