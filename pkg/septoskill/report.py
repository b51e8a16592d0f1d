"""
Figures and curve tables

Search-graph drawings (stroke starts on the septal plane, colored by time,
sized by stroke length, with the convex-hull outline) and cumulative-area
curves AC(i) vs stroke index, grouped by operator role. SVG output is
byte-identical across reruns.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from septoskill.acquisition import OPERATOR_ROLES
from septoskill.features import SearchGraph, prefix_hull_areas
from septoskill.utils import NUMBER_FORMAT, EmptyResultError, InputError, write_text_file

logger = logging.getLogger(__name__)


SCHEMA = """
=== Report API ===

AreaCurve(trial_id, operator_id, operator_class, operator_role, subtrial, areas)
    areas = [AC(3) .. AC(N)]

graph_from_rows(rows) -> SearchGraph          rows: strokes.csv frame of one sub-trial
curves_from_strokes(strokes_df, single_operator_only=True) -> List[AreaCurve]
cumulative_area_table(curves) -> DataFrame
cumulative_area_curves(curves) -> Dict[role, List[AreaCurve]]
write_cumulative_area_csv(curves, path) -> None
plot_search_graph(graphs, path, titles=None) -> None
plot_cumulative_areas(curves, path) -> None
"""

SVG_SETTINGS = {
    'svg.hashsalt': 'septoskill',
    'svg.fonttype': 'none',
    'figure.dpi': 100,
    'font.size': 9,
}
ROLE_COLORS = {'attending': '#1f77b4', 'fellow': '#2ca02c', 'resident': '#d62728'}
GRAPH_COLUMNS = ('start_u', 'start_v', 'path_length')


@dataclass(frozen=True, eq=False)
class AreaCurve:
    trial_id: str
    operator_id: str
    operator_class: str
    operator_role: str
    subtrial: int
    areas: np.ndarray

    @property
    def label(self) -> str:
        return f"{self.trial_id}/{self.operator_id}#{self.subtrial}"


# =============================================================================
# Tables
# =============================================================================

def graph_from_rows(rows: pd.DataFrame) -> SearchGraph:
    """Rebuild a search graph from the strokes.csv rows of one sub-trial."""
    missing = [c for c in GRAPH_COLUMNS if c not in rows.columns]
    if missing:
        raise InputError(f"strokes table is missing columns: {', '.join(missing)}")
    ordered = rows.sort_values('stroke') if 'stroke' in rows.columns else rows
    vertices = ordered[['start_u', 'start_v']].to_numpy(dtype=float)
    return SearchGraph(vertices, ordered['path_length'].to_numpy(dtype=float), prefix_hull_areas(vertices))


def curves_from_strokes(strokes: pd.DataFrame, single_operator_only: bool = True) -> List[AreaCurve]:
    """One curve per sub-trial with at least three strokes."""
    curves = []
    if strokes.empty:
        return curves
    operators_per_trial = strokes.groupby('trial_id')['operator_id'].nunique()
    for (trial, op, sub), rows in strokes.groupby(['trial_id', 'operator_id', 'subtrial'], sort=True):
        if single_operator_only and operators_per_trial[trial] > 1:
            continue
        if len(rows) < 3:
            continue
        first = rows.iloc[0]
        label = str(first.get('operator_class', 'expert'))
        role = first.get('operator_role')
        if not isinstance(role, str) or role not in OPERATOR_ROLES:
            role = 'attending' if label == 'expert' else 'resident'
        curves.append(AreaCurve(str(trial), str(op), label, role, int(sub), graph_from_rows(rows).hull_areas))
    return curves


def cumulative_area_table(curves: Sequence[AreaCurve]) -> pd.DataFrame:
    records = []
    for curve in curves:
        for offset, area in enumerate(curve.areas):
            records.append({
                'trial_id': curve.trial_id,
                'operator_id': curve.operator_id,
                'operator_class': curve.operator_class,
                'operator_role': curve.operator_role,
                'subtrial': curve.subtrial,
                'stroke': offset + 3,
                'cumulative_area': float(area),
            })
    columns = ['trial_id', 'operator_id', 'operator_class', 'operator_role', 'subtrial',
               'stroke', 'cumulative_area']
    return pd.DataFrame.from_records(records, columns=columns)


def cumulative_area_curves(curves: Sequence[AreaCurve]) -> Dict[str, List[AreaCurve]]:
    """Curves grouped by operator role, in role order; empty roles omitted."""
    grouped = {role: [c for c in curves if c.operator_role == role] for role in OPERATOR_ROLES}
    return {role: items for role, items in grouped.items() if items}


def write_cumulative_area_csv(curves: Sequence[AreaCurve], path: str):
    frame = cumulative_area_table(curves)
    write_text_file(path, frame.to_csv(index=False, float_format=NUMBER_FORMAT, lineterminator='\n'))


# =============================================================================
# Figures
# =============================================================================

def _save_svg(fig, path: str):
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)


def _draw_graph(ax, graph: SearchGraph, title: str):
    pts = graph.vertices
    order = np.arange(len(pts))
    lengths = graph.lengths
    sizes = 20.0 + 80.0 * lengths / lengths.max() if len(lengths) and lengths.max() > 0 else 20.0

    ax.plot(pts[:, 0], pts[:, 1], color='0.75', linewidth=0.8, zorder=1)
    ax.scatter(pts[:, 0], pts[:, 1], c=order, cmap='viridis', s=sizes, zorder=2, edgecolors='none')
    if len(pts) >= 3:
        hull = graph.hull()
        if len(hull) >= 3:
            closed = np.vstack([hull, hull[:1]])
            ax.plot(closed[:, 0], closed[:, 1], color='black', linewidth=1.2, zorder=3)
        elif len(hull) == 2:
            # collinear starts: the hull is a segment
            ax.plot(hull[:, 0], hull[:, 1], color='black', linewidth=1.2, zorder=3)
    ax.set_title(title)
    ax.set_xlabel('u (mm)')
    ax.set_ylabel('v (mm)')
    ax.set_aspect('equal', adjustable='datalim')


def plot_search_graph(graphs: Sequence[SearchGraph], path: str, titles: Optional[Sequence[str]] = None):
    """One panel per graph (usually one per sub-trial)."""
    if not graphs:
        raise EmptyResultError("No search graph to draw (no sub-trial has three strokes)")
    titles = list(titles or [f"sub-trial {i}" for i in range(len(graphs))])
    with plt.rc_context(SVG_SETTINGS):
        fig, axes = plt.subplots(1, len(graphs), figsize=(4.5 * len(graphs), 4.5), squeeze=False)
        for ax, graph, title in zip(axes[0], graphs, titles):
            _draw_graph(ax, graph, title)
        fig.tight_layout()
        _save_svg(fig, path)


def plot_cumulative_areas(curves: Sequence[AreaCurve], path: str):
    """AC(i) against stroke index, one line per sub-trial, colored by role."""
    with plt.rc_context(SVG_SETTINGS):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for role, items in cumulative_area_curves(curves).items():
            for k, curve in enumerate(items):
                x = np.arange(3, 3 + len(curve.areas))
                ax.plot(x, curve.areas, color=ROLE_COLORS[role], linewidth=1.0,
                        label=role if k == 0 else None)
        ax.set_xlabel('stroke index')
        ax.set_ylabel('cumulative hull area (mm²)')
        if curves:
            ax.legend(frameon=False)
        fig.tight_layout()
        _save_svg(fig, path)
    logger.debug("cumulative area figure: %d curves -> %s", len(curves), path)


__all__ = [
    "SCHEMA",
    "AreaCurve",
    "graph_from_rows",
    "curves_from_strokes",
    "cumulative_area_table",
    "cumulative_area_curves",
    "write_cumulative_area_csv",
    "plot_search_graph",
    "plot_cumulative_areas",
]
