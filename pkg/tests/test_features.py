"""
Feature tests: SCC, SDC, CR and their aggregation.
"""

import numpy as np
import pytest


def _hull_area_naive(points):
    from septoskill.geometry import convex_hull_area

    return convex_hull_area(points)


def _stroke_at(u, v, duration=1.0, length=6.0):
    from septoskill.strokes import Stroke

    path = np.array([[0.0, 0.0, 0.0], [length, 0.0, 0.0]])
    return Stroke(0, 1, 0.0, duration, path, length, length, np.array([u, v]), length)


def _zigzag_subtrial(cycles):
    """
    Sub-trial of `cycles` clean 1-s strokes after a short approach; starts
    step 3 mm along z and alternate y by 2 mm.
    """
    from septoskill.acquisition import SubTrial, Trajectory

    points = [(x, 0.0, 0.0) for x in np.linspace(3.0, 1.0, 9)[:-1]]
    for k in range(cycles):
        points.extend((x, 2.0 * (k % 2), 3.0 * k) for x in np.linspace(1.0, 7.0, 41)[:-1])
        down = np.linspace(7.0, 1.0, 17)[:-1]
        z = np.linspace(3.0 * k, 3.0 * (k + 1), 17)[:-1]
        y = np.linspace(2.0 * (k % 2), 2.0 * ((k + 1) % 2), 17)[:-1]
        points.extend(zip(down, y, z))
    points.append((1.0, 2.0 * (cycles % 2), 3.0 * cycles))
    points = np.array(points, dtype=float)
    traj = Trajectory(np.arange(len(points)) / 40.0, points)
    return SubTrial('T1', 'E1', 'expert', 'tip_a', traj)


def _plane():
    from septoskill.geometry import Plane

    return Plane(np.zeros(3), [1.0, 0.0, 0.0], ([0.0, 0.0, 1.0], [0.0, -1.0, 0.0]))


# =============================================================================
# Consistency
# =============================================================================

class TestConsistency:

    def test_constant_curvature(self):
        from septoskill.features import scc

        assert scc([1.3] * 9) == 0.0

    def test_single_outlier_is_ignored(self):
        from septoskill.features import scc

        assert scc([1, 1, 1, 5, 1, 1, 1], window=3) == 0.0

    def test_alternating_durations(self):
        from septoskill.features import sdc

        assert sdc([0.2, 0.6] * 10, window=3) == pytest.approx(0.16)

    def test_sdc_scales_quadratically(self, rng):
        from septoskill.features import sdc

        durations = rng.uniform(0.5, 1.5, 25)
        assert sdc(3.0 * durations) == pytest.approx(9.0 * sdc(durations))

    def test_too_few_strokes(self):
        from septoskill.features import TooFewStrokes, scc

        with pytest.raises(TooFewStrokes):
            scc([1.0, 1.2])

    def test_matches_naive_definition(self, rng):
        from septoskill.features import scc

        c = 1.0 + rng.random(15)
        filtered = []
        for i in range(len(c)):
            chunk = np.sort(c[max(0, i - 2):i + 3])
            n = len(chunk)
            filtered.append(chunk[n // 2] if n % 2 else 0.5 * (chunk[n // 2 - 1] + chunk[n // 2]))
        expected = np.median((c - np.array(filtered)) ** 2)
        assert scc(c, 5) == pytest.approx(expected, rel=1e-12)


# =============================================================================
# Coverage
# =============================================================================

class TestCoverage:

    def test_unit_square_curve(self):
        from septoskill.features import prefix_hull_areas

        np.testing.assert_allclose(prefix_hull_areas([(0, 0), (1, 0), (1, 1), (0, 1)]), [0.5, 1.0])

    def test_collinear_starts(self):
        from septoskill.features import build_search_graph, coverage_rate

        graph = build_search_graph([_stroke_at(k, 2 * k) for k in range(6)])
        np.testing.assert_array_equal(graph.hull_areas, np.zeros(4))
        assert graph.area(2) == 0.0
        assert coverage_rate(graph) == 0.0

    def test_unit_square_rate(self):
        from septoskill.features import build_search_graph, coverage_rate

        graph = build_search_graph([_stroke_at(*p) for p in [(0, 0), (1, 0), (1, 1), (0, 1)]])
        assert graph.area(3) == pytest.approx(0.5)
        assert graph.area(4) == pytest.approx(1.0)
        np.testing.assert_allclose(graph.increments(), [0.5])
        assert coverage_rate(graph) == pytest.approx(0.5)

    def test_revisits_give_zero_rate(self):
        from septoskill.features import build_search_graph, coverage_rate

        corners = [(0, 0), (4, 0), (4, 4), (0, 4)]
        inside = [(1, 1), (2, 2), (3, 1), (1, 3), (2, 1)]
        graph = build_search_graph([_stroke_at(*p) for p in corners + inside])
        assert coverage_rate(graph) == 0.0

    def test_prefix_areas_match_hull_of_each_prefix(self, rng):
        from septoskill.features import prefix_hull_areas

        pts = rng.normal(size=(25, 2)) * 5
        expected = [_hull_area_naive(pts[:k]) for k in range(3, 26)]
        np.testing.assert_allclose(prefix_hull_areas(pts), expected, rtol=1e-9, atol=1e-9)

    def test_rate_needs_four_vertices(self):
        from septoskill.features import TooFewStrokes, build_search_graph, coverage_rate

        graph = build_search_graph([_stroke_at(*p) for p in [(0, 0), (1, 0), (1, 1)]])
        with pytest.raises(TooFewStrokes):
            coverage_rate(graph)

    def test_graph_needs_three_strokes(self):
        from septoskill.features import TooFewStrokes, build_search_graph

        with pytest.raises(TooFewStrokes):
            build_search_graph([_stroke_at(0, 0), _stroke_at(1, 1)])


# =============================================================================
# Aggregation
# =============================================================================

class TestAggregation:

    def test_six_strokes_excluded(self):
        from septoskill.features import Excluded, FeatureConfig, subtrial_features
        from septoskill.strokes import StrokeConfig

        cfg = FeatureConfig(strokes=StrokeConfig(smooth_window=1))
        result = subtrial_features(_zigzag_subtrial(6), _plane(), np.zeros(3), cfg, 40.0)
        assert isinstance(result, Excluded)
        assert result.n_strokes == 6

    def test_seven_strokes_kept(self):
        from septoskill.features import FeatureConfig, FeatureVector, analyze_subtrial
        from septoskill.strokes import StrokeConfig

        cfg = FeatureConfig(strokes=StrokeConfig(smooth_window=1))
        analysis = analyze_subtrial(_zigzag_subtrial(9), _plane(), np.zeros(3), cfg, 40.0)

        assert not analysis.excluded
        assert isinstance(analysis.result, FeatureVector)
        assert analysis.result.n_strokes == 9
        assert analysis.result.scc == pytest.approx(0.0, abs=1e-12)
        assert analysis.result.sdc == pytest.approx(0.0, abs=1e-12)
        # starts alternate between two lines 2 mm apart; each one stretches a side by 6 mm
        assert analysis.result.cr == pytest.approx(6.0)

    def test_single_subtrial_is_identity(self):
        from septoskill.features import FeatureVector, trial_features

        fv = FeatureVector(0.01, 0.02, 3.5, 12)
        assert trial_features([fv]) == fv

    def test_median_of_three(self):
        from septoskill.features import Excluded, FeatureVector, trial_features

        vectors = [FeatureVector(0.1, 0.2, cr, 10) for cr in (1.0, 2.0, 9.0)]
        result = trial_features(vectors + [Excluded(3)])
        assert result.cr == 2.0
        assert result.n_strokes == 30

    def test_all_excluded(self):
        from septoskill.features import AllExcluded, Excluded, trial_features
        from septoskill.utils import EXIT_EMPTY

        with pytest.raises(AllExcluded) as exc:
            trial_features([Excluded(2), Excluded(5)])
        assert exc.value.exit_code == EXIT_EMPTY

    def test_feature_vector_rejects_negative(self):
        from septoskill.features import FeatureVector
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            FeatureVector(-0.1, 0.0, 0.0, 7)

    def test_stroke_observations(self):
        from septoskill.features import stroke_observations

        strokes = [_stroke_at(*p, duration=d) for p, d in
                   zip([(0, 0), (1, 0), (1, 1), (0, 1)], [0.8, 0.9, 1.0, 1.1])]
        obs = stroke_observations(strokes)
        assert obs.shape == (4, 3)
        np.testing.assert_allclose(obs[:, 0], 1.0)
        np.testing.assert_allclose(obs[:, 1], [0.8, 0.9, 1.0, 1.1])
        np.testing.assert_allclose(obs[:, 2], [0.0, 0.0, 0.5, 0.5])

    def test_compare_classes(self):
        from septoskill.features import FeatureVector, compare_classes

        rows = [('expert', FeatureVector(0.01, 0.2, 5.0 + k, 10)) for k in range(5)]
        rows += [('novice', FeatureVector(0.05, 0.1, 1.0 + k, 10)) for k in range(5)]
        result = compare_classes(rows)

        assert result['cr']['median_expert'] == 7.0
        assert result['cr']['median_novice'] == 3.0
        assert result['cr']['n_expert'] == 5
        assert 0.0 < result['cr']['p_value'] < 0.05
