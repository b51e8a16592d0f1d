"""
Figure and cumulative-area table tests.
"""

import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest


def _rows(trial_id, operator_id, starts, subtrial=0, operator_class='expert', role='attending'):
    return pd.DataFrame({
        'trial_id': trial_id,
        'operator_id': operator_id,
        'operator_class': operator_class,
        'operator_role': role,
        'subtrial': subtrial,
        'stroke': np.arange(1, len(starts) + 1),
        'start_u': [p[0] for p in starts],
        'start_v': [p[1] for p in starts],
        'path_length': 6.0,
    })


SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


class TestTables:

    def test_graph_from_rows(self):
        from septoskill.report import graph_from_rows

        rows = _rows('T001', 'E1', SQUARE).iloc[::-1]
        graph = graph_from_rows(rows)
        np.testing.assert_array_equal(graph.vertices, np.array(SQUARE, dtype=float))
        np.testing.assert_allclose(graph.hull_areas, [0.5, 1.0])

    def test_missing_columns(self):
        from septoskill.report import graph_from_rows
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='start_v'):
            graph_from_rows(_rows('T001', 'E1', SQUARE).drop(columns=['start_v']))

    def test_collinear_curve_is_zero(self):
        from septoskill.report import curves_from_strokes

        curves = curves_from_strokes(_rows('T001', 'E1', [(k, 2 * k) for k in range(5)]))
        assert len(curves) == 1
        np.testing.assert_array_equal(curves[0].areas, np.zeros(3))

    def test_curves_skip_shared_trials(self):
        from septoskill.report import curves_from_strokes

        strokes = pd.concat([
            _rows('T001', 'E1', SQUARE),
            _rows('T002', 'N1', SQUARE, 0, 'novice', 'resident'),
            _rows('T002', 'E2', SQUARE, 1),
            _rows('T003', 'N2', SQUARE[:2], 0, 'novice', 'fellow'),
        ])
        assert [c.trial_id for c in curves_from_strokes(strokes)] == ['T001']
        assert len(curves_from_strokes(strokes, single_operator_only=False)) == 3

    def test_missing_role_falls_back_to_class(self):
        from septoskill.report import curves_from_strokes

        rows = _rows('T001', 'N1', SQUARE, 0, 'novice', None)
        assert curves_from_strokes(rows)[0].operator_role == 'resident'

    def test_cumulative_table(self, tmp_path):
        from septoskill.report import curves_from_strokes, cumulative_area_table, write_cumulative_area_csv

        curves = curves_from_strokes(_rows('T001', 'E1', SQUARE))
        table = cumulative_area_table(curves)
        assert table['stroke'].tolist() == [3, 4]
        assert table['cumulative_area'].tolist() == [0.5, 1.0]

        path = tmp_path / 'cumulative_area.csv'
        write_cumulative_area_csv(curves, str(path))
        assert path.read_text(encoding='utf-8').splitlines()[1] == 'T001,E1,expert,attending,0,3,0.5'

    def test_curves_grouped_by_role(self):
        from septoskill.report import cumulative_area_curves, curves_from_strokes

        strokes = pd.concat([
            _rows('T002', 'N1', SQUARE, 0, 'novice', 'resident'),
            _rows('T001', 'E1', SQUARE),
        ])
        grouped = cumulative_area_curves(curves_from_strokes(strokes))
        assert list(grouped) == ['attending', 'resident']


class TestFigures:

    def test_search_graph_svg(self, tmp_path):
        from septoskill.report import graph_from_rows, plot_search_graph

        path = tmp_path / 'search_graph.svg'
        plot_search_graph([graph_from_rows(_rows('T001', 'E1', SQUARE + [(0.5, 0.5)]))], str(path))
        root = ET.parse(str(path)).getroot()
        assert root.tag.endswith('svg')

    def test_svg_is_reproducible(self, tmp_path):
        from septoskill.report import curves_from_strokes, plot_cumulative_areas

        curves = curves_from_strokes(_rows('T001', 'E1', SQUARE))
        a, b = tmp_path / 'a.svg', tmp_path / 'b.svg'
        plot_cumulative_areas(curves, str(a))
        plot_cumulative_areas(curves, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_collinear_graph_draws(self, tmp_path):
        from septoskill.report import graph_from_rows, plot_search_graph

        path = tmp_path / 'line.svg'
        plot_search_graph([graph_from_rows(_rows('T001', 'E1', [(k, k) for k in range(4)]))], str(path))
        assert path.stat().st_size > 0

    def test_no_graph(self, tmp_path):
        from septoskill.report import plot_search_graph
        from septoskill.utils import EmptyResultError

        with pytest.raises(EmptyResultError):
            plot_search_graph([], str(tmp_path / 'none.svg'))
