"""
Synthetic trial generator tests: determinism, ground truth and cohorts.
"""

import json
import os

import numpy as np
import pytest


class TestGenerateTrial:

    def test_same_seed_same_trial(self, noiseless_profile, small_synth_config):
        from septoskill.synth import generate_trial

        a, truth_a = generate_trial(noiseless_profile, None, 3, small_synth_config)
        b, truth_b = generate_trial(noiseless_profile, None, 3, small_synth_config)

        np.testing.assert_array_equal(a.cottle_stream.positions, b.cottle_stream.positions)
        np.testing.assert_array_equal(a.cottle_stream.quaternions, b.cottle_stream.quaternions)
        assert truth_a.to_dict() == truth_b.to_dict()

    def test_seed_changes_trial(self, noiseless_profile, small_synth_config):
        from septoskill.synth import generate_trial

        a, _ = generate_trial(noiseless_profile, None, 3, small_synth_config)
        b, _ = generate_trial(noiseless_profile, None, 4, small_synth_config)
        assert not np.array_equal(a.cottle_stream.positions, b.cottle_stream.positions)

    def test_subtrials_alternate_tips(self, noiseless_trial):
        trial, truth = noiseless_trial

        assert [a.active_tip for a in trial.annotations] == ['tip_a', 'tip_b']
        assert {a.operator_id for a in trial.annotations} == {'E1'}
        assert len(truth.strokes_in(0)) == len(truth.strokes_in(1)) == 12
        assert set(trial.pivot_intervals) == {'tip_a', 'tip_b'}
        assert trial.calibrations == {}

    def test_registration_precedes_subtrials(self, noiseless_trial):
        trial, _ = noiseless_trial

        assert trial.registration_interval[1] < trial.annotations[0].t_start

    def test_true_curvature_without_jitter(self, small_synth_config):
        from septoskill.synth import SkillProfile, generate_trial

        profile = SkillProfile(curvature_mean=1.3, curvature_local_jitter=0.0, noise_sigma=0.0)
        _, truth = generate_trial(profile, None, 2, small_synth_config)
        np.testing.assert_allclose([s.curvature for s in truth.strokes], 1.3, rtol=1e-12)

    def test_hull_grows_by_coverage_step(self, small_synth_config):
        from septoskill.synth import SkillProfile, generate_trial

        profile = SkillProfile(coverage_step=5.0, revisit_prob=0.0, noise_sigma=0.0)
        _, truth = generate_trial(profile, None, 8, small_synth_config)

        for areas in truth.hull_areas:
            np.testing.assert_allclose(areas, 5.0 * np.arange(1, 11), rtol=1e-8)

    def test_truth_strokes_are_ordered(self, noiseless_trial):
        from septoskill.synth import SynthConfig

        _, truth = noiseless_trial
        rate = SynthConfig().rate
        for a, b in zip(truth.strokes, truth.strokes[1:]):
            assert a.end_idx < b.start_idx
        for s in truth.strokes:
            assert s.duration == pytest.approx((s.end_idx - s.start_idx) / rate)
            # starts sit 1 mm off the septal plane; start_uv is (z, -y)
            assert s.start_point[0] == pytest.approx(1.0)
            np.testing.assert_allclose(s.start_uv, [s.start_point[2], -s.start_point[1]])

    def test_head_motion_starts_after_registration(self, noiseless_profile, small_synth_config):
        from septoskill.synth import HeadMotion, generate_trial

        trial, truth = generate_trial(noiseless_profile, HeadMotion('sinusoid', 8.0, 0.1), 7,
                                      small_synth_config)
        before = truth.t <= trial.registration_interval[1]
        assert np.all(truth.theta[before] == 0.0)
        assert np.max(np.abs(truth.theta)) == pytest.approx(np.radians(8.0), rel=0.01)

    def test_no_head_sensor(self, noiseless_profile):
        from septoskill.synth import SynthConfig, generate_trial

        trial, truth = generate_trial(noiseless_profile, None, 1,
                                      SynthConfig(strokes_per_subtrial=5, subtrials=1, head_sensor=False))
        assert trial.head_stream is None
        assert truth.head_mount is None

    def test_handover_adds_operator(self, noiseless_profile, small_synth_config):
        from septoskill.synth import Operator, SkillProfile, generate_trial

        other = Operator('E9', 'expert', SkillProfile(noise_sigma=0.0), 'attending')
        trial, truth = generate_trial(noiseless_profile, None, 1, small_synth_config,
                                      operator_id='N1', operator_class='novice', handover=other)
        assert [a.operator_id for a in trial.annotations] == ['N1', 'E9']
        assert set(truth.profiles) == {'N1', 'E9'}

    def test_short_strokes_rejected(self, small_synth_config):
        from septoskill.synth import BadProfile, SkillProfile, generate_trial

        with pytest.raises(BadProfile):
            generate_trial(SkillProfile(duration_mean=0.2), None, 0, small_synth_config)


class TestProfiles:

    @pytest.mark.parametrize("kwargs", [
        {'curvature_mean': 0.9},
        {'noise_sigma': -0.1},
        {'revisit_prob': 1.5},
        {'stroke_amplitude': 0.0},
        {'coverage_step': float('nan')},
    ])
    def test_bad_profile(self, kwargs):
        from septoskill.synth import BadProfile, SkillProfile

        with pytest.raises(BadProfile):
            SkillProfile(**kwargs)

    def test_jitter_stays_valid(self, rng):
        from septoskill.synth import SkillProfile

        base = SkillProfile(curvature_mean=1.0, revisit_prob=1.0)
        for _ in range(20):
            jittered = base.jittered(rng, 0.1)
            assert jittered.curvature_mean >= 1.0
            assert jittered.revisit_prob <= 1.0

    def test_head_motion_parse(self):
        from septoskill.synth import HeadMotion

        assert HeadMotion.parse('none') == HeadMotion()
        assert HeadMotion.parse('sinusoid:8:0.1') == HeadMotion('sinusoid', 8.0, 0.1)

    @pytest.mark.parametrize("text", ['sinusoid', 'sinusoid:8', 'sinusoid:x:0.1', 'wobble:1:1', 'none:1'])
    def test_head_motion_parse_rejects(self, text):
        from septoskill.synth import HeadMotion
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            HeadMotion.parse(text)


class TestCohort:

    def test_cohort_shape(self):
        from septoskill.synth import SynthConfig, generate_dataset

        config = SynthConfig(strokes_per_subtrial=3, subtrials=1)
        counts = [5, 5, 5, 5, 4, 4, 4, 4, 4, 4, 4]
        cohort = generate_dataset(4, 7, counts, 'clinical', seed=1, config=config)

        assert len(cohort) == 48
        assert list(cohort.surgeons) == ['E1', 'E2', 'E3', 'E4'] + [f'N{i}' for i in range(1, 8)]
        assert [t.id for t in cohort.trials] == [f'T{i:03d}' for i in range(1, 49)]
        per_surgeon = {}
        for trial in cohort.trials:
            op = trial.annotations[0].operator_id
            per_surgeon[op] = per_surgeon.get(op, 0) + 1
        assert [per_surgeon[sid] for sid in cohort.surgeons] == counts

    def test_roles(self):
        from septoskill.synth import SynthConfig, generate_dataset

        cohort = generate_dataset(1, 3, 1, 'shared', seed=0,
                                  config=SynthConfig(strokes_per_subtrial=3, subtrials=1))
        roles = {sid: op.operator_role for sid, op in cohort.surgeons.items()}
        assert roles == {'E1': 'attending', 'N1': 'fellow', 'N2': 'resident', 'N3': 'resident'}

    def test_cohort_is_seeded(self):
        from septoskill.synth import SynthConfig, generate_dataset

        config = SynthConfig(strokes_per_subtrial=3, subtrials=1)
        a = generate_dataset(1, 1, 2, 'separated', seed=4, config=config)
        b = generate_dataset(1, 1, 2, 'separated', seed=4, config=config)
        for ta, tb in zip(a.trials, b.trials):
            np.testing.assert_array_equal(ta.cottle_stream.positions, tb.cottle_stream.positions)

    def test_full_handover(self):
        from septoskill.synth import SynthConfig, generate_dataset

        config = SynthConfig(strokes_per_subtrial=3, subtrials=2, handover_prob=1.0)
        cohort = generate_dataset(1, 1, 1, 'shared', seed=2, config=config)
        novice_trial = cohort.trials[1]
        assert [a.operator_id for a in novice_trial.annotations] == ['N1', 'E1']

    @pytest.mark.parametrize("counts", [[1, 2, 3], [1, 0]])
    def test_bad_counts(self, counts):
        from septoskill.synth import SynthConfig, generate_dataset
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            generate_dataset(1, 1, counts, config=SynthConfig(strokes_per_subtrial=3, subtrials=1))


def test_bundle_round_trip(trial_bundle, noiseless_trial):
    from septoskill.acquisition import parse_trial

    trial, truth = noiseless_trial
    parsed = parse_trial(trial_bundle)

    assert parsed.id == trial.id
    assert len(parsed.cottle_stream) == len(trial.cottle_stream)
    assert parsed.head_stream is not None
    with open(os.path.join(trial_bundle, 'truth.json'), encoding='utf-8') as f:
        stored = json.load(f)
    assert len(stored['strokes']) == len(truth.strokes)
    assert stored['seed'] == 7
