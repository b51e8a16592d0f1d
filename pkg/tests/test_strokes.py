"""
Stroke segmentation tests on hand-built zigzag trajectories.
"""

import numpy as np
import pytest

RATE = 40.0


def _sagittal_plane():
    from septoskill.geometry import Plane

    return Plane(np.zeros(3), [1.0, 0.0, 0.0], ([0.0, 0.0, 1.0], [0.0, -1.0, 0.0]))


def _zigzag(cycles=5):
    """
    An 8-sample approach from x = 3, then x rises 1 -> 7 over 40 samples
    (one stroke of 1 s) and falls back over 16 samples while z steps by
    3 mm, so every stroke starts somewhere new.
    """
    from septoskill.acquisition import Trajectory

    points = [(x, 0.0, 0.0) for x in np.linspace(3.0, 1.0, 9)[:-1]]
    for k in range(cycles):
        up = np.linspace(1.0, 7.0, 41)[:-1]
        points.extend((x, 0.0, 3.0 * k) for x in up)
        down = np.linspace(7.0, 1.0, 17)[:-1]
        z = np.linspace(3.0 * k, 3.0 * (k + 1), 17)[:-1]
        points.extend((x, 0.0, zz) for x, zz in zip(down, z))
    points.append((1.0, 0.0, 3.0 * cycles))
    points = np.array(points)
    return Trajectory(np.arange(len(points)) / RATE, points)


class TestLocalExtrema:

    def test_plateaus_count_once(self):
        from septoskill.strokes import local_extrema

        minima, maxima = local_extrema([0, 1, 0, 2, 2, 1, 3])
        assert minima.tolist() == [2, 5]
        assert maxima.tolist() == [1, 3]

    @pytest.mark.parametrize("values", [[1, 2, 3, 4, 5], [5, 5, 4, 3, 3], [2, 2, 3, 3, 3]])
    def test_monotone_signal_has_none(self, values):
        from septoskill.strokes import local_extrema

        minima, maxima = local_extrema(values)
        assert len(minima) == 0 and len(maxima) == 0

    def test_constant_signal_has_none(self):
        from septoskill.strokes import local_extrema

        minima, maxima = local_extrema([4.0] * 6)
        assert len(minima) == 0 and len(maxima) == 0

    def test_short_signal(self):
        from septoskill.strokes import local_extrema

        minima, maxima = local_extrema([1.0])
        assert len(minima) == 0 and len(maxima) == 0


class TestDetectStrokes:

    def test_zigzag_strokes(self):
        from septoskill.strokes import StrokeConfig, detect_strokes

        strokes = detect_strokes(_zigzag(), _sagittal_plane(), np.zeros(3), StrokeConfig(smooth_window=1), RATE)

        assert len(strokes) == 5
        assert [s.start_idx for s in strokes] == [8, 64, 120, 176, 232]
        assert [s.end_idx for s in strokes] == [48, 104, 160, 216, 272]
        for k, s in enumerate(strokes):
            assert s.duration == pytest.approx(1.0)
            assert s.path_length == pytest.approx(6.0)
            assert s.curvature == pytest.approx(1.0)
            assert s.prominence == pytest.approx(6.0)
            np.testing.assert_allclose(s.start_point_2d, [3.0 * k, 0.0], atol=1e-12)

    def test_strokes_ordered_and_disjoint(self):
        from septoskill.strokes import StrokeConfig, detect_strokes

        strokes = detect_strokes(_zigzag(), _sagittal_plane(), np.zeros(3), StrokeConfig(), RATE)
        assert strokes
        for a, b in zip(strokes, strokes[1:]):
            assert a.end_idx <= b.start_idx

    def test_rate_inferred_from_timestamps(self):
        from septoskill.strokes import StrokeConfig, detect_strokes

        cfg = StrokeConfig(smooth_window=1)
        explicit = detect_strokes(_zigzag(), _sagittal_plane(), np.zeros(3), cfg, RATE)
        inferred = detect_strokes(_zigzag(), _sagittal_plane(), np.zeros(3), cfg)
        assert [s.start_idx for s in inferred] == [s.start_idx for s in explicit]

    @pytest.mark.parametrize("override", [
        {'min_length': 7.0},
        {'max_center_distance': 5.0},
        {'min_prominence': 6.5},
        {'min_duration': 1.1, 'max_duration': 3.0},
        {'min_duration': 0.1, 'max_duration': 0.9},
    ])
    def test_gates_reject(self, override):
        from septoskill.strokes import StrokeConfig, detect_strokes

        cfg = StrokeConfig(smooth_window=1, **override)
        assert detect_strokes(_zigzag(), _sagittal_plane(), np.zeros(3), cfg, RATE) == []

    def test_short_trajectory_yields_nothing(self):
        from septoskill.acquisition import Trajectory
        from septoskill.strokes import StrokeConfig, detect_strokes

        tips = Trajectory(np.arange(5) / RATE, np.zeros((5, 3)))
        assert detect_strokes(tips, _sagittal_plane(), np.zeros(3), StrokeConfig(), RATE) == []

    def test_monotone_lift_yields_nothing(self):
        from septoskill.acquisition import Trajectory
        from septoskill.strokes import StrokeConfig, detect_strokes

        x = np.linspace(1.0, 7.0, 41)
        tips = Trajectory(np.arange(41) / RATE, np.column_stack([x, np.zeros(41), np.zeros(41)]))
        assert detect_strokes(tips, _sagittal_plane(), np.zeros(3), StrokeConfig(), RATE) == []

    def test_default_window(self):
        from septoskill.strokes import StrokeConfig

        assert StrokeConfig().window_for(40.0) == 10
        assert StrokeConfig().window_for(4.0) == 3
        assert StrokeConfig(smooth_window=5).window_for(40.0) == 5

    def test_bad_config(self):
        from septoskill.strokes import StrokeConfig
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            StrokeConfig(min_duration=2.0, max_duration=1.0)


class TestCurvature:

    def _stroke(self, path):
        from septoskill.strokes import Stroke

        path = np.asarray(path, dtype=float)
        length = float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))
        return Stroke(0, len(path) - 1, 0.0, 1.0, path, length,
                      float(np.linalg.norm(path[-1] - path[0])), np.zeros(2), 1.0)

    def test_v_shaped_path(self):
        from septoskill.strokes import stroke_curvature

        s = self._stroke([(0, 0, 0), (3, 4, 0), (6, 0, 0)])
        assert stroke_curvature(s) == pytest.approx(10.0 / 6.0)
        assert s.curvature == stroke_curvature(s)

    def test_straight_path_is_one(self):
        s = self._stroke([(0, 0, 0), (1, 1, 1), (2, 2, 2)])
        assert s.curvature == pytest.approx(1.0)

    def test_closed_path_has_no_curvature(self):
        from septoskill.strokes import ZeroChord

        s = self._stroke([(0, 0, 0), (3, 4, 0), (0, 0, 0)])
        with pytest.raises(ZeroChord):
            s.curvature

    def test_distance_signal_is_unsigned(self):
        from septoskill.acquisition import Trajectory
        from septoskill.strokes import distance_signal

        tips = Trajectory([0.0, 1.0, 2.0], [(-2, 0, 0), (0, 5, 0), (3, 0, 1)])
        _, d = distance_signal(tips, _sagittal_plane())
        np.testing.assert_allclose(d, [2.0, 0.0, 3.0])
