"""
Stroke features

SCC and SDC measure local consistency of stroke curvature and duration: the
median squared deviation of a per-stroke vector from its median-filtered
version. CR is the median per-stroke growth of the convex hull of the
search graph (stroke start points projected on the septal plane).

Sub-trials with fewer than `min_strokes` strokes are excluded, not failed.
Trial-level features are component-wise medians over sub-trials.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import mannwhitneyu

from septoskill.acquisition import SubTrial
from septoskill.geometry import Plane, convex_hull, convex_hull_area, median_filter
from septoskill.strokes import Stroke, StrokeConfig, detect_strokes, stroke_curvature
from septoskill.utils import EmptyResultError, InputError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Features API ===

FeatureConfig(strokes=StrokeConfig(), median_window=5, min_strokes=7)

scc(curvatures, window=5) -> float
sdc(durations, window=5) -> float
build_search_graph(strokes) -> SearchGraph
prefix_hull_areas(vertices) -> ndarray  [AC(3) .. AC(N)]
coverage_rate(graph) -> float
analyze_subtrial(sub, plane, nose_center, cfg, rate=None) -> SubtrialAnalysis
subtrial_features(sub, plane, nose_center, cfg, rate=None) -> FeatureVector | Excluded
trial_features(subvectors) -> FeatureVector
stroke_observations(strokes, graph) -> ndarray (N, 3)  per-stroke HMM observations
compare_classes(rows) -> Dict   per-feature class medians + Mann-Whitney U
"""

FEATURE_NAMES = ('scc', 'sdc', 'cr')


# =============================================================================
# Errors
# =============================================================================

class TooFewStrokes(EmptyResultError):
    """Not enough strokes for the requested feature."""
    def __init__(self, feature: str, needed: int, got: int):
        self.feature = feature
        super().__init__(f"{feature} needs at least {needed} strokes, got {got}")


class AllExcluded(EmptyResultError):
    """Every sub-trial of a trial was excluded."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class FeatureConfig:
    strokes: StrokeConfig = field(default_factory=StrokeConfig)
    median_window: int = 5
    min_strokes: int = 7

    def __post_init__(self):
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise InputError(f"median_window must be odd and >= 1, got {self.median_window}")
        if self.min_strokes < 4:
            raise InputError(f"min_strokes must be >= 4 (CR needs four vertices), got {self.min_strokes}")


@dataclass(frozen=True, eq=False)
class SearchGraph:
    """Stroke start vertices with the hull area of every prefix of length >= 3."""
    vertices: np.ndarray
    lengths: np.ndarray
    hull_areas: np.ndarray

    def __len__(self) -> int:
        return len(self.vertices)

    def area(self, i: int) -> float:
        """AC(i), 1-based; zero below three vertices."""
        return 0.0 if i < 3 else float(self.hull_areas[i - 3])

    def increments(self) -> np.ndarray:
        """AC(i) - AC(i-1) for i = 4..N."""
        return np.diff(self.hull_areas)

    def hull(self) -> np.ndarray:
        return convex_hull(self.vertices)


@dataclass(frozen=True)
class FeatureVector:
    scc: float
    sdc: float
    cr: float
    n_strokes: int

    def __post_init__(self):
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InputError(f"FeatureVector.{name} must be finite and >= 0, got {value}")

    def values(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([getattr(self, n) for n in names], dtype=float)

    def to_dict(self) -> Dict:
        return {'scc': self.scc, 'sdc': self.sdc, 'cr': self.cr, 'n_strokes': self.n_strokes}


@dataclass(frozen=True)
class Excluded:
    """Sub-trial left out of aggregation (too few strokes)."""
    n_strokes: int
    reason: str = 'too_few_strokes'


@dataclass(frozen=True, eq=False)
class SubtrialAnalysis:
    sub: SubTrial
    strokes: List[Stroke]
    graph: Optional[SearchGraph]
    result: Union[FeatureVector, Excluded]

    @property
    def excluded(self) -> bool:
        return isinstance(self.result, Excluded)


# =============================================================================
# Consistency features
# =============================================================================

def _local_consistency(values, window: int, feature: str) -> float:
    v = np.asarray(values, dtype=float).reshape(-1)
    if len(v) < 3:
        raise TooFewStrokes(feature, 3, len(v))
    return float(np.median((v - median_filter(v, window)) ** 2))


def scc(curvatures, window: int = 5) -> float:
    """Stroke curvature consistency."""
    return _local_consistency(curvatures, window, 'SCC')


def sdc(durations, window: int = 5) -> float:
    """Stroke duration consistency (s²)."""
    return _local_consistency(durations, window, 'SDC')


# =============================================================================
# Coverage
# =============================================================================

def prefix_hull_areas(vertices) -> np.ndarray:
    """
    [AC(3), ..., AC(N)] for 2-D vertices in order. Each prefix hull is the
    hull of the previous hull plus one vertex.
    """
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    areas = []
    hull = pts[:2]
    for i in range(2, len(pts)):
        hull = convex_hull(np.vstack([hull, pts[i:i + 1]]))
        areas.append(convex_hull_area(hull))
    # collinearity tolerance may shave ~1e-9 mm² off a prefix
    return np.maximum.accumulate(np.array(areas)) if areas else np.empty(0)


def build_search_graph(strokes: Sequence[Stroke]) -> SearchGraph:
    """Search graph over stroke starts, in stroke order."""
    if len(strokes) < 3:
        raise TooFewStrokes('search graph', 3, len(strokes))
    vertices = np.array([s.start_point_2d for s in strokes], dtype=float).reshape(-1, 2)
    lengths = np.array([s.path_length for s in strokes], dtype=float)
    return SearchGraph(vertices, lengths, prefix_hull_areas(vertices))


def coverage_rate(g: SearchGraph) -> float:
    """Median hull-area increment per stroke (mm²/stroke)."""
    if len(g) < 4:
        raise TooFewStrokes('CR', 4, len(g))
    return float(np.median(g.increments()))


# =============================================================================
# Sub-trial / trial aggregation
# =============================================================================

def analyze_subtrial(sub: SubTrial, plane: Plane, nose_center, cfg: FeatureConfig,
                     rate: Optional[float] = None) -> SubtrialAnalysis:
    """Detect strokes and compute SCC/SDC/CR, or mark the sub-trial excluded."""
    strokes = detect_strokes(sub.trajectory, plane, nose_center, cfg.strokes, rate)
    if len(strokes) < cfg.min_strokes:
        logger.info("trial %s sub-trial %d (%s): excluded, %d strokes < %d",
                    sub.trial_id, sub.index, sub.operator_id, len(strokes), cfg.min_strokes)
        graph = build_search_graph(strokes) if len(strokes) >= 3 else None
        return SubtrialAnalysis(sub, strokes, graph, Excluded(len(strokes)))

    graph = build_search_graph(strokes)
    vector = FeatureVector(
        scc=scc([stroke_curvature(s) for s in strokes], cfg.median_window),
        sdc=sdc([s.duration for s in strokes], cfg.median_window),
        cr=coverage_rate(graph),
        n_strokes=len(strokes),
    )
    return SubtrialAnalysis(sub, strokes, graph, vector)


def subtrial_features(sub: SubTrial, plane: Plane, nose_center, cfg: FeatureConfig,
                      rate: Optional[float] = None) -> Union[FeatureVector, Excluded]:
    return analyze_subtrial(sub, plane, nose_center, cfg, rate).result


def trial_features(subvectors: Sequence[Union[FeatureVector, Excluded]]) -> FeatureVector:
    """
    Component-wise median of the non-excluded sub-trial vectors; n_strokes
    is their sum.

    Raises:
        AllExcluded: nothing left to aggregate
    """
    kept = [v for v in subvectors if isinstance(v, FeatureVector)]
    if not kept:
        raise AllExcluded(
            f"All {len(subvectors)} sub-trial(s) were excluded (fewer strokes than required)")
    matrix = np.array([v.values() for v in kept])
    scc_m, sdc_m, cr_m = np.median(matrix, axis=0)
    return FeatureVector(float(scc_m), float(sdc_m), float(cr_m), int(sum(v.n_strokes for v in kept)))


def stroke_observations(strokes: Sequence[Stroke], graph: Optional[SearchGraph] = None) -> np.ndarray:
    """Per-stroke (curvature, duration, hull-area increment) rows."""
    if not strokes:
        return np.empty((0, 3))
    if graph is None and len(strokes) >= 3:
        graph = build_search_graph(strokes)
    areas = np.array([graph.area(i) if graph is not None else 0.0 for i in range(1, len(strokes) + 1)])
    increments = np.diff(np.concatenate([[0.0], areas]))
    return np.column_stack([
        [stroke_curvature(s) for s in strokes],
        [s.duration for s in strokes],
        increments,
    ])


def compare_classes(rows: Sequence[Tuple[str, FeatureVector]]) -> Dict:
    """
    Exploratory comparison of each feature between experts and novices:
    class medians and a two-sided Mann-Whitney U p-value.
    """
    result = {}
    for name in FEATURE_NAMES:
        groups = {label: [getattr(fv, name) for lab, fv in rows if lab == label]
                  for label in ('expert', 'novice')}
        entry = {
            f'median_{label}': float(np.median(values)) if values else None
            for label, values in groups.items()
        }
        entry.update({f'n_{label}': len(values) for label, values in groups.items()})
        if groups['expert'] and groups['novice']:
            stat, p_value = mannwhitneyu(groups['expert'], groups['novice'], alternative='two-sided')
            entry['u_statistic'] = float(stat)
            entry['p_value'] = float(p_value)
        else:
            entry['u_statistic'] = entry['p_value'] = None
        result[name] = entry
    return result


__all__ = [
    "SCHEMA",
    "FEATURE_NAMES",
    "TooFewStrokes",
    "AllExcluded",
    "FeatureConfig",
    "SearchGraph",
    "FeatureVector",
    "Excluded",
    "SubtrialAnalysis",
    "scc",
    "sdc",
    "prefix_hull_areas",
    "build_search_graph",
    "coverage_rate",
    "analyze_subtrial",
    "subtrial_features",
    "trial_features",
    "stroke_observations",
    "compare_classes",
]
