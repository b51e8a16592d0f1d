"""
Geometry primitives

Rigid transforms, 3-D PCA, plane distance/projection, the 2-D convex hull
and the two smoothing filters (truncated-edge median and moving average).
Everything here is a pure function over numpy arrays; points are rows.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial.transform import Rotation

from septoskill.utils import InputError, NumericError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Geometry API ===

UnitQuaternion(w, x, y, z)             renormalized on construction
RigidTransform(rotation, translation)  apply(points), inverse(), compose(other)
Plane(point, normal, basis=None)       unit normal; optional in-plane (u, v)

pca3(points) -> (centroid, components[3x3 rows], variances[3])
convex_hull(points) -> hull vertices (counter-clockwise)
convex_hull_area(points) -> float
median_filter(v, window) -> ndarray        odd window, truncated edges
moving_average(v, window) -> ndarray       centered mean, truncated edges
point_plane_distance(p, plane) -> float | ndarray (signed)
project_to_plane(p, plane, basis=None) -> (u, v) coordinates
lift_from_plane(uv, plane, basis=None) -> 3-D points on the plane
rotation_about_axis(point, direction, theta) -> RigidTransform
"""

# Cross products below this magnitude (mm²) count as collinear.
COLLINEAR_TOL = 1e-9
BASIS_TOL = 1e-6


# =============================================================================
# Errors
# =============================================================================

class DegenerateInput(NumericError):
    """Point set has no well-defined principal axes."""
    pass


class BadWindow(InputError):
    """Filter window outside its allowed range."""
    def __init__(self, window, rule: str):
        self.window = window
        super().__init__(f"Bad filter window {window!r}: {rule}")


class BadBasis(InputError):
    """In-plane basis is not orthonormal or not orthogonal to the normal."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first unit quaternion."""
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        q = np.array([self.w, self.x, self.y, self.z], dtype=float)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm == 0.0:
            raise InputError(f"Quaternion has zero or non-finite norm: {q.tolist()}")
        q = q / norm
        for name, value in zip(('w', 'x', 'y', 'z'), q):
            object.__setattr__(self, name, float(value))

    @classmethod
    def identity(cls) -> 'UnitQuaternion':
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_rotation(cls, rotation: Rotation) -> 'UnitQuaternion':
        x, y, z, w = rotation.as_quat()
        return cls(w, x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def to_rotation(self) -> Rotation:
        # scipy is scalar-last
        return Rotation.from_quat([self.x, self.y, self.z, self.w])

    def as_matrix(self) -> np.ndarray:
        return self.to_rotation().as_matrix()


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x_parent = R · x_child + translation"""
    rotation: UnitQuaternion
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise InputError(f"Translation must be finite: {t.tolist()}")
        object.__setattr__(self, 'translation', t)

    @classmethod
    def identity(cls) -> 'RigidTransform':
        return cls(UnitQuaternion.identity(), np.zeros(3))

    @classmethod
    def from_rotation(cls, rotation: Rotation, translation=None) -> 'RigidTransform':
        return cls(UnitQuaternion.from_rotation(rotation),
                   np.zeros(3) if translation is None else translation)

    def apply(self, points) -> np.ndarray:
        return self.rotation.to_rotation().apply(np.asarray(points, dtype=float)) + self.translation

    def inverse(self) -> 'RigidTransform':
        inv = self.rotation.to_rotation().inv()
        return RigidTransform.from_rotation(inv, -inv.apply(self.translation))

    def compose(self, other: 'RigidTransform') -> 'RigidTransform':
        """self ∘ other: apply `other` first."""
        r = self.rotation.to_rotation()
        return RigidTransform.from_rotation(
            r * other.rotation.to_rotation(),
            r.apply(other.translation) + self.translation,
        )

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.as_matrix()
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True, eq=False)
class Plane:
    """Point + unit normal; `basis` is an optional in-plane (u, v) frame."""
    point: np.ndarray
    normal: np.ndarray
    basis: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float).reshape(3)
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(normal)
        if not np.isfinite(norm) or norm < 1e-12:
            raise InputError(f"Plane normal must be non-zero: {normal.tolist()}")
        object.__setattr__(self, 'point', point)
        object.__setattr__(self, 'normal', normal / norm)
        if self.basis is not None:
            u, v = (np.asarray(b, dtype=float).reshape(3) for b in self.basis)
            object.__setattr__(self, 'basis', (u, v))

    def in_plane_basis(self) -> Tuple[np.ndarray, np.ndarray]:
        """Stored basis, or a deterministic one built from the normal."""
        if self.basis is not None:
            return self.basis
        n = self.normal
        helper = np.eye(3)[int(np.argmin(np.abs(n)))]
        u = np.cross(helper, n)
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)

    def flipped(self) -> 'Plane':
        basis = None
        if self.basis is not None:
            u, v = self.basis
            basis = (u, -v)
        return Plane(self.point, -self.normal, basis)

    def transformed(self, transform: RigidTransform) -> 'Plane':
        rot = transform.rotation.to_rotation()
        basis = None
        if self.basis is not None:
            basis = tuple(rot.apply(b) for b in self.basis)
        return Plane(transform.apply(self.point), rot.apply(self.normal), basis)

    def to_dict(self) -> dict:
        u, v = self.in_plane_basis()
        return {
            'point': self.point.tolist(),
            'normal': self.normal.tolist(),
            'basis': [u.tolist(), v.tolist()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Plane':
        basis = data.get('basis')
        return cls(data['point'], data['normal'], tuple(basis) if basis else None)


# =============================================================================
# PCA
# =============================================================================

def pca3(points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Principal components of a 3-D point set.

    Returns:
        (centroid, components, variances); components are rows ordered by
        descending variance, each flipped so its largest-magnitude entry is
        positive.

    Raises:
        DegenerateInput: fewer than 3 points, or all collinear
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateInput(f"PCA needs at least 3 points, got {len(pts)}")

    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    eigvals, eigvecs = np.linalg.eigh(cov)

    order = np.argsort(eigvals)[::-1]
    variances = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T

    if variances[1] <= 1e-12 * max(1.0, variances[0]):
        raise DegenerateInput("Points are collinear; second principal variance is zero")

    for i in range(3):
        if components[i, np.argmax(np.abs(components[i]))] < 0:
            components[i] = -components[i]
    return centroid, components, variances


# =============================================================================
# Convex hull
# =============================================================================

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """
    Andrew's monotone chain. Returns hull vertices counter-clockwise,
    collinear boundary points dropped. Fewer than 3 rows means degenerate.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts

    ordered = [tuple(p) for p in pts]  # np.unique sorts lexicographically

    lower = []
    for p in ordered:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= COLLINEAR_TOL:
            lower.pop()
        lower.append(p)

    upper = []
    for p in reversed(ordered):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= COLLINEAR_TOL:
            upper.pop()
        upper.append(p)

    return np.array(lower[:-1] + upper[:-1])


def convex_hull_area(points) -> float:
    """Area of the convex hull; 0 for fewer than 3 distinct or collinear points."""
    hull = convex_hull(points)
    if len(hull) < 3:
        return 0.0
    x, y = hull[:, 0], hull[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return float(area)


# =============================================================================
# Filters
# =============================================================================

def median_filter(v, window: int) -> np.ndarray:
    """
    Sliding median with an odd window; near the edges the window shrinks to
    the samples that exist. Even-count medians average the two middle values.
    """
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0:
        raise BadWindow(window, "must be an odd integer >= 1")
    values = np.asarray(v, dtype=float).reshape(-1)
    if window == 1 or len(values) == 0:
        return values.copy()

    half = window // 2
    padded = np.pad(values, half, constant_values=np.nan)
    return np.nanmedian(sliding_window_view(padded, window), axis=1)


def moving_average(v, window: int) -> np.ndarray:
    """
    Centered mean over `window` samples, truncated at the edges. Accepts a
    1-D vector or an (N, 3) array smoothed per column.
    """
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise BadWindow(window, "must be an integer >= 1")
    values = np.asarray(v, dtype=float)
    if window == 1 or len(values) == 0:
        return values.copy()

    left = (window - 1) // 2
    right = window // 2
    n = len(values)
    csum = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(values, axis=0)])
    idx = np.arange(n)
    lo = np.clip(idx - left, 0, n)
    hi = np.clip(idx + right + 1, 0, n)
    counts = (hi - lo).reshape((-1,) + (1,) * (values.ndim - 1))
    return (csum[hi] - csum[lo]) / counts


# =============================================================================
# Planes
# =============================================================================

def point_plane_distance(p, plane: Plane):
    """Signed perpendicular distance, positive on the normal side."""
    pts = np.asarray(p, dtype=float)
    d = (pts - plane.point) @ plane.normal
    return float(d) if np.ndim(d) == 0 else d


def _checked_basis(plane: Plane, basis) -> Tuple[np.ndarray, np.ndarray]:
    u, v = plane.in_plane_basis() if basis is None else (
        np.asarray(b, dtype=float).reshape(3) for b in basis)
    gram = np.array([
        [u @ u, u @ v, u @ plane.normal],
        [v @ u, v @ v, v @ plane.normal],
    ])
    expected = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    if np.max(np.abs(gram - expected)) > BASIS_TOL:
        raise BadBasis(
            "Basis must be orthonormal and orthogonal to the plane normal "
            f"(max deviation {np.max(np.abs(gram - expected)):.3g})"
        )
    return u, v


def project_to_plane(p, plane: Plane, basis: Optional[Sequence] = None) -> np.ndarray:
    """(u, v) coordinates of the orthogonal projection, origin at plane.point."""
    u, v = _checked_basis(plane, basis)
    rel = np.asarray(p, dtype=float) - plane.point
    return np.stack([rel @ u, rel @ v], axis=-1)


def lift_from_plane(uv, plane: Plane, basis: Optional[Sequence] = None) -> np.ndarray:
    """Inverse of project_to_plane for points on the plane."""
    u, v = _checked_basis(plane, basis)
    coords = np.asarray(uv, dtype=float)
    return plane.point + coords[..., :1] * u + coords[..., 1:2] * v


def rotation_about_axis(point, direction, theta: float) -> RigidTransform:
    """Rotation by `theta` radians about the line through `point` along `direction`."""
    axis = np.asarray(direction, dtype=float)
    axis = axis / np.linalg.norm(axis)
    anchor = np.asarray(point, dtype=float)
    rot = Rotation.from_rotvec(axis * theta)
    return RigidTransform.from_rotation(rot, anchor - rot.apply(anchor))


__all__ = [
    "SCHEMA",
    "COLLINEAR_TOL",
    "DegenerateInput",
    "BadWindow",
    "BadBasis",
    "UnitQuaternion",
    "RigidTransform",
    "Plane",
    "pca3",
    "convex_hull",
    "convex_hull_area",
    "median_filter",
    "moving_average",
    "point_plane_distance",
    "project_to_plane",
    "lift_from_plane",
    "rotation_about_axis",
]
