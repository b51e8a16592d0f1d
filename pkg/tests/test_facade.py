"""
Facade API Tests

End-to-end runs over synthetic bundles:
- process_trial(): one trial from poses to features
- calibrate_bundle() / register_bundle(): meta.json updates
- run_features() / run_classify() / run_report() / simulate(): cohort outputs
"""

import json
import os
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest


def _meta(path):
    with open(os.path.join(path, 'meta.json'), encoding='utf-8') as f:
        return json.load(f)


def _starve(path, seconds=1.5):
    """Cut every in-use interval to a few seconds, too short for the stroke minimum."""
    meta = _meta(path)
    for annotation in meta['annotations']:
        annotation['t_end'] = annotation['t_start'] + seconds
    with open(os.path.join(path, 'meta.json'), 'w', encoding='utf-8') as f:
        json.dump(meta, f)


@pytest.fixture
def features_dir(tmp_path, cohort_bundles):
    from septoskill.facade import run_features

    out = str(tmp_path / 'out')
    run_features(cohort_bundles, out)
    return out


# =============================================================================
# Single trial
# =============================================================================

class TestProcessTrial:

    def test_noiseless_trial(self, noiseless_trial):
        from septoskill.facade import process_trial

        trial, _ = noiseless_trial
        analysis = process_trial(trial)

        assert analysis.calibrated_on_the_fly
        assert analysis.head.mode == 'sensor'
        assert len(analysis.subtrials) == 2
        rows = analysis.operator_rows()
        assert len(rows) == 1
        assert rows[0].operator_id == 'E1'
        assert rows[0].operator_role == 'attending'
        assert rows[0].n_subtrials == 2
        assert rows[0].n_excluded == 0
        assert rows[0].features.n_strokes == 24

    def test_explicit_head_mode(self, noiseless_trial):
        from septoskill.facade import process_trial

        trial, _ = noiseless_trial
        assert process_trial(trial, head_mode='none').head.mode == 'none'

    def test_errors_carry_trial_id(self, noiseless_trial):
        from septoskill.facade import process_trial
        from septoskill.utils import EXIT_INPUT, TrialError

        trial, _ = noiseless_trial
        with pytest.raises(TrialError) as exc:
            process_trial(replace(trial, pivot_intervals={}))
        assert exc.value.trial_id == 'T001'
        assert exc.value.exit_code == EXIT_INPUT
        assert str(exc.value).startswith('[T001]')

    def test_excluded_subtrial_counted(self, noiseless_trial):
        from septoskill.facade import process_trial
        from septoskill.features import Excluded

        trial, _ = noiseless_trial
        analysis = process_trial(trial)
        starved = replace(analysis.subtrials[1], result=Excluded(5))
        analysis = replace(analysis, subtrials=[analysis.subtrials[0], starved])

        row = analysis.operator_rows()[0]
        assert (row.n_subtrials, row.n_excluded) == (2, 1)
        assert row.features.n_strokes == 12
        assert row.to_dict()['n_excluded'] == 1

    def test_all_excluded(self, noiseless_trial):
        from septoskill.config import PipelineConfig
        from septoskill.facade import process_trial
        from septoskill.features import AllExcluded, FeatureConfig

        trial, _ = noiseless_trial
        analysis = process_trial(trial, PipelineConfig(features=FeatureConfig(min_strokes=13)))
        assert all(item.excluded for item in analysis.subtrials)
        with pytest.raises(AllExcluded):
            analysis.operator_rows()

    def test_compare_head_modes(self, noiseless_trial):
        from septoskill.facade import compare_head_modes

        trial, _ = noiseless_trial
        result = compare_head_modes(trial)

        assert result['trial_id'] == 'T001'
        assert result['plane_error']['frames'] > 0
        assert np.isfinite(result['plane_error']['mean_angle_deg'])
        assert set(result['feature_change']['E1']) == {'scc', 'sdc', 'cr'}

    def test_compare_head_modes_needs_sensor(self, noiseless_trial):
        from septoskill.facade import compare_head_modes
        from septoskill.utils import InputError

        trial, _ = noiseless_trial
        with pytest.raises(InputError, match='head.csv'):
            compare_head_modes(replace(trial, head_stream=None))


class TestBundles:

    def test_calibrate_bundle(self, trial_bundle):
        from septoskill.facade import calibrate_bundle
        from septoskill.synth import DEFAULT_TIP_OFFSETS

        result = calibrate_bundle(trial_bundle)

        stored = _meta(trial_bundle)['calibrations']
        assert stored == result['calibrations']
        for tip, offset in DEFAULT_TIP_OFFSETS.items():
            np.testing.assert_allclose(stored[tip]['offset'], offset, atol=1e-6)

    def test_calibrated_bundle_skips_pivot(self, trial_bundle):
        from septoskill.acquisition import parse_trial
        from septoskill.facade import calibrate_bundle, process_trial

        calibrate_bundle(trial_bundle)
        analysis = process_trial(parse_trial(trial_bundle))
        assert not analysis.calibrated_on_the_fly

    def test_register_bundle(self, trial_bundle):
        from septoskill.facade import register_bundle

        result = register_bundle(trial_bundle)

        registration = _meta(trial_bundle)['registration']
        assert registration['head_mode'] == 'sensor'
        assert np.linalg.norm(registration['plane']['normal']) == pytest.approx(1.0)
        assert result['registration'] == registration


# =============================================================================
# Cohort
# =============================================================================

class TestRunFeatures:

    def test_tables(self, features_dir):
        from septoskill.facade import FEATURE_COLUMNS, STROKE_COLUMNS

        features = pd.read_csv(os.path.join(features_dir, 'features.csv'), dtype={'trial_id': str})
        strokes = pd.read_csv(os.path.join(features_dir, 'strokes.csv'))
        subtrials = pd.read_csv(os.path.join(features_dir, 'subtrial_features.csv'))

        assert list(features.columns) == FEATURE_COLUMNS
        assert list(strokes.columns) == STROKE_COLUMNS
        assert features['trial_id'].tolist() == [f'T{i:03d}' for i in range(1, 9)]
        assert features['operator_class'].tolist() == ['expert'] * 4 + ['novice'] * 4
        assert len(subtrials) == 16
        assert (features['n_subtrials'] == 2).all()
        assert (features['n_excluded'] == 0).all()
        assert (features[['scc', 'sdc', 'cr']] >= 0).all().all()

    def test_worker_count_does_not_change_output(self, tmp_path, cohort_bundles, features_dir):
        from septoskill.config import PipelineConfig, RunConfig
        from septoskill.facade import run_features

        out = str(tmp_path / 'parallel')
        run_features(list(reversed(cohort_bundles)), out, PipelineConfig(run=RunConfig(workers=3)))
        for name in ('features.csv', 'strokes.csv', 'subtrial_features.csv'):
            with open(os.path.join(features_dir, name), 'rb') as a, open(os.path.join(out, name), 'rb') as b:
                assert a.read() == b.read()

    def test_duplicate_trial_ids(self, tmp_path, trial_bundle):
        from septoskill.facade import run_features
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='Duplicate'):
            run_features([trial_bundle, trial_bundle], str(tmp_path / 'dup'))

    def test_all_excluded_bundle(self, tmp_path, trial_bundle):
        from septoskill.config import PipelineConfig
        from septoskill.facade import run_features
        from septoskill.features import FeatureConfig
        from septoskill.features import AllExcluded
        from septoskill.utils import EXIT_EMPTY

        config = PipelineConfig(features=FeatureConfig(min_strokes=13))
        with pytest.raises(AllExcluded) as exc:
            run_features([trial_bundle], str(tmp_path / 'none'), config)
        assert exc.value.exit_code == EXIT_EMPTY

    def test_starved_trial_is_skipped(self, tmp_path, cohort_bundles):
        from septoskill.facade import run_features

        _starve(cohort_bundles[0])
        out = str(tmp_path / 'starved')
        summary = run_features(cohort_bundles, out)

        assert summary['trials'] == 8
        assert summary['skipped_trials'] == ['T001']
        features = pd.read_csv(os.path.join(out, 'features.csv'), dtype={'trial_id': str})
        assert features['trial_id'].tolist() == [f'T{i:03d}' for i in range(2, 9)]
        subtrials = pd.read_csv(os.path.join(out, 'subtrial_features.csv'), dtype={'trial_id': str})
        assert subtrials.loc[subtrials['trial_id'] == 'T001', 'excluded'].all()

    def test_head_comparison_file(self, tmp_path, trial_bundle):
        from septoskill.facade import run_features

        summary = run_features([trial_bundle], str(tmp_path / 'cmp'), compare_head=True)
        with open(summary['outputs']['head_comparison'], encoding='utf-8') as f:
            comparisons = json.load(f)
        assert [c['trial_id'] for c in comparisons] == ['T001']


class TestRunClassify:

    def test_report(self, tmp_path, features_dir):
        from septoskill.facade import run_classify, summarize_tables

        out = str(tmp_path / 'report.json')
        report = run_classify(os.path.join(features_dir, 'features.csv'), out,
                              os.path.join(features_dir, 'strokes.csv'))

        with open(out, encoding='utf-8') as f:
            assert json.load(f) == json.loads(json.dumps(report))
        assert report['dataset']['rows'] == 8
        assert report['dataset']['class_counts'] == {'expert': 4, 'novice': 4}
        assert set(report['tables']) == {'TO', 'UO'}
        assert set(report['tables']['TO']) == {'svm', 'hmm'}
        assert 'overall' in report['tables']['UO']['svm']
        assert 'sequence' in report['tables']['UO']['hmm']
        assert set(report['exploratory']) == {'scc', 'sdc', 'cr'}
        for _, _, _, micro, macro in summarize_tables(report):
            assert 0.0 <= micro <= 100.0 and 0.0 <= macro <= 100.0

    def test_without_strokes_runs_svm_only(self, tmp_path, features_dir):
        from septoskill.facade import run_classify

        report = run_classify(os.path.join(features_dir, 'features.csv'), str(tmp_path / 'r.json'))
        assert set(report['tables']['TO']) == {'svm'}

    def test_from_bundles(self, tmp_path, cohort_bundles, features_dir):
        from septoskill.facade import run_classify

        from_bundles = run_classify(cohort_bundles, str(tmp_path / 'bundles.json'), schemes=('TO',))
        from_tables = run_classify(os.path.join(features_dir, 'features.csv'), str(tmp_path / 'tables.json'),
                                   os.path.join(features_dir, 'strokes.csv'), schemes=('TO',))

        assert from_bundles['dataset'] == from_tables['dataset']
        assert set(from_bundles['tables']['TO']) == {'svm', 'hmm'}
        assert os.path.isfile(tmp_path / 'bundles.json')

    def test_bundles_with_strokes_file(self, tmp_path, cohort_bundles, features_dir):
        from septoskill.facade import run_classify
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='derived from the bundles'):
            run_classify(cohort_bundles, str(tmp_path / 'r.json'), os.path.join(features_dir, 'strokes.csv'))

    def test_mixed_inputs(self, tmp_path, cohort_bundles, features_dir):
        from septoskill.facade import run_classify
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='one features.csv'):
            run_classify([os.path.join(features_dir, 'features.csv'), cohort_bundles[0]],
                         str(tmp_path / 'r.json'))

    def test_unknown_scheme(self, tmp_path, features_dir):
        from septoskill.facade import run_classify
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            run_classify(os.path.join(features_dir, 'features.csv'), str(tmp_path / 'r.json'),
                         schemes=('LOSO',))

    def test_missing_file(self, tmp_path):
        from septoskill.facade import run_classify
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='not found'):
            run_classify(str(tmp_path / 'features.csv'), str(tmp_path / 'r.json'))


class TestRunReport:

    def test_figures(self, tmp_path, features_dir):
        from septoskill.facade import run_report

        result = run_report(os.path.join(features_dir, 'strokes.csv'), str(tmp_path / 'fig'))

        assert result['trial_id'] == 'T001'
        assert result['graphs'] == 2
        assert result['curves'] == 16
        for path in result['outputs'].values():
            assert os.path.getsize(path) > 0

    def test_unknown_trial(self, tmp_path, features_dir):
        from septoskill.facade import run_report
        from septoskill.utils import InputError

        with pytest.raises(InputError, match='T999'):
            run_report(os.path.join(features_dir, 'strokes.csv'), str(tmp_path / 'fig'), 'T999')


class TestSimulate:

    def test_bundles_and_evaluation(self, tmp_path):
        from septoskill.config import PipelineConfig
        from septoskill.facade import simulate
        from septoskill.synth import SynthConfig

        config = PipelineConfig(synth=SynthConfig(strokes_per_subtrial=8, subtrials=2))
        out = str(tmp_path / 'sim')
        summary = simulate(out, 1, 1, 1, 'separated', seed=3, config=config, evaluate=True)

        assert summary['trials'] == 2
        assert summary['surgeons'] == {'E1': {'class': 'expert', 'role': 'attending'},
                                       'N1': {'class': 'novice', 'role': 'fellow'}}
        for path in summary['bundles']:
            for name in ('cottle.csv', 'head.csv', 'meta.json', 'truth.json'):
                assert os.path.isfile(os.path.join(path, name))
        assert os.path.isfile(os.path.join(out, 'evaluation.json'))
        assert summary['evaluation']['total'] == 2

    def test_unknown_profile_pair(self, tmp_path):
        from septoskill.facade import simulate
        from septoskill.utils import InputError

        with pytest.raises(InputError):
            simulate(str(tmp_path), 1, 1, 1, 'imaginary')
