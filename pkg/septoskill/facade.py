"""
septoskill Facade

One-stop API for the command line: every subcommand is one function here,
composing the library modules stage by stage and writing the output files.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from septoskill import tracing
from septoskill.acquisition import (
    TIPS, Trial, Trajectory, active_tip_trajectory, calibrate_trial, parse_trial,
    segment_subtrials, write_meta,
)
from septoskill.classify import CLASSIFIERS, SCHEMES, Dataset, subset_table
from septoskill.config import PipelineConfig
from septoskill.features import (
    FEATURE_NAMES, AllExcluded, FeatureVector, SubtrialAnalysis, analyze_subtrial,
    compare_classes, stroke_observations, trial_features,
)
from septoskill.headcomp import HeadFrameResult, head_frame
from septoskill.report import (
    curves_from_strokes, graph_from_rows, plot_cumulative_areas, plot_search_graph,
    write_cumulative_area_csv,
)
from septoskill.strokes import stroke_curvature
from septoskill.synth import PROFILE_PAIRS, HeadMotion, generate_dataset, write_synth_bundle
from septoskill.utils import (
    NUMBER_FORMAT, EmptyResultError, InputError, SeptoskillError, TrialError,
    read_text_file, write_text_file,
)

logger = logging.getLogger(__name__)


SCHEMA = """
=== septoskill Facade ===

## Single trial

process_trial(trial, config=None, head_mode=None, trace_id=None) -> TrialAnalysis
    calibrate (when meta.json has no offsets) -> active tip -> head frame
    -> sub-trials -> strokes + features

calibrate_bundle(path, trace_id=None) -> Dict
    Pivot-calibrate both tips and write offsets into meta.json (idempotent).

register_bundle(path, config=None, head_mode=None, trace_id=None) -> Dict
    Register the septal plane; writes meta.json 'registration'.

compare_head_modes(trial, config=None) -> Dict
    Reference sensor vs 1-DoF estimator: plane error and feature change.

## Cohort

run_features(bundles, out_dir, config=None, head_mode=None, compare_head=False,
             trace_id=None) -> Dict
    features.csv, strokes.csv, subtrial_features.csv (+ head_comparison.json)

run_classify(features, out_path, strokes_csv=None, config=None,
             schemes=SCHEMES, classifiers=CLASSIFIERS, trace_id=None, head_mode=None) -> Dict
    report.json with per-subset accuracy columns for every scheme and classifier;
    features is features.csv or trial bundle directories (features run in memory)

run_report(strokes_csv, out_dir, trial_id=None, trace_id=None) -> Dict
    search_graph.svg, cumulative_area.csv, cumulative_area.svg

simulate(out_dir, n_experts, n_novices, trials_per_surgeon, profile_pair='clinical',
         seed=0, head_motion=None, config=None, evaluate=False, trace_id=None) -> Dict
    Synthetic bundles + truth.json (+ evaluation.json)
"""

FEATURE_COLUMNS = ['trial_id', 'operator_id', 'operator_class', 'operator_role',
                   'scc', 'sdc', 'cr', 'n_strokes', 'n_subtrials', 'n_excluded', 'head_mode']
SUBTRIAL_COLUMNS = ['trial_id', 'subtrial', 'operator_id', 'operator_class', 'operator_role',
                    'active_tip', 'n_strokes', 'excluded', 'scc', 'sdc', 'cr']
STROKE_COLUMNS = ['trial_id', 'operator_id', 'operator_class', 'operator_role', 'subtrial',
                  'stroke', 'start_t', 'end_t', 'duration', 'path_length', 'chord_length',
                  'curvature', 'start_u', 'start_v', 'peak_distance', 'hull_area', 'area_increment']


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class OperatorRow:
    """Trial-level features of one operator in one trial (a classifier row)."""
    trial_id: str
    operator_id: str
    operator_class: str
    operator_role: str
    features: FeatureVector
    n_subtrials: int
    n_excluded: int = 0

    def to_dict(self) -> Dict:
        data = {
            'trial_id': self.trial_id,
            'operator_id': self.operator_id,
            'operator_class': self.operator_class,
            'operator_role': self.operator_role,
            'n_subtrials': self.n_subtrials,
            'n_excluded': self.n_excluded,
        }
        data.update(self.features.to_dict())
        return data


@dataclass(frozen=True, eq=False)
class TrialAnalysis:
    trial: Trial
    tips: Trajectory
    head: HeadFrameResult
    subtrials: List[SubtrialAnalysis] = field(default_factory=list)
    calibrated_on_the_fly: bool = False

    def operator_rows(self) -> List[OperatorRow]:
        """
        One row per operator, aggregated over that operator's kept
        sub-trials. n_subtrials counts all of the operator's sub-trials,
        n_excluded those below the stroke minimum. Operators whose
        sub-trials are all excluded yield no row.

        Raises:
            AllExcluded: no operator has a kept sub-trial
        """
        rows = []
        by_operator: Dict[str, List[SubtrialAnalysis]] = {}
        for item in self.subtrials:
            by_operator.setdefault(item.sub.operator_id, []).append(item)
        for operator_id in sorted(by_operator):
            items = by_operator[operator_id]
            try:
                fv = trial_features([i.result for i in items])
            except AllExcluded:
                logger.warning("trial %s: every sub-trial of operator %s was excluded",
                               self.trial.id, operator_id)
                continue
            first = items[0].sub
            rows.append(OperatorRow(self.trial.id, operator_id, first.operator_class, first.role,
                                    fv, len(items), sum(1 for i in items if i.excluded)))
        if not rows:
            raise AllExcluded(
                f"All {len(self.subtrials)} sub-trial(s) have fewer strokes than required")
        return rows


# =============================================================================
# Single trial
# =============================================================================

def _wrap(trial_id: str, exc: SeptoskillError) -> TrialError:
    return exc if isinstance(exc, TrialError) else TrialError(trial_id, exc)


def process_trial(trial: Trial, config: Optional[PipelineConfig] = None,
                  head_mode: Optional[str] = None, trace_id: Optional[str] = None) -> TrialAnalysis:
    """
    Run one trial from poses to sub-trial features.

    Raises:
        TrialError: any pipeline error, prefixed with the trial id
    """
    config = config or PipelineConfig()
    mode = head_mode or config.head.mode
    try:
        on_the_fly = False
        missing = [tip for tip in TIPS if tip not in trial.calibrations]
        if missing:
            with tracing.span(trace_id, 'calibrate', 'calibrate', trial_id=trial.id) as out:
                trial = trial.with_calibrations(calibrate_trial(trial))
                out['residual_rms'] = {k: v.residual_rms for k, v in trial.calibrations.items()}
            on_the_fly = True
            logger.info("trial %s: calibrated %s on the fly", trial.id, ', '.join(missing))

        with tracing.span(trace_id, 'headcomp', 'headcomp', trial_id=trial.id, input={'mode': mode}) as out:
            tips = active_tip_trajectory(trial)
            head = head_frame(trial, tips, mode, config.head_model())
            out['mode'] = head.mode

        with tracing.span(trace_id, 'strokes', 'strokes', trial_id=trial.id) as out:
            subs = segment_subtrials(trial, head.trajectory)
            analyses = [analyze_subtrial(sub, head.plane, head.nose_center, config.features, trial.nominal_rate)
                        for sub in subs]
            out['subtrials'] = len(analyses)
            out['strokes'] = sum(len(a.strokes) for a in analyses)
    except SeptoskillError as exc:
        raise _wrap(trial.id, exc)

    return TrialAnalysis(trial, tips, head, analyses, on_the_fly)


def _load(path: str, trace_id: Optional[str]) -> Trial:
    with tracing.span(trace_id, 'parse', 'parse', input={'path': path}) as out:
        try:
            trial = parse_trial(path)
        except SeptoskillError as exc:
            raise _wrap(os.path.basename(os.path.normpath(path)), exc)
        out['trial_id'] = trial.id
        out['samples'] = len(trial.cottle_stream)
    return trial


def _read_meta(path: str) -> Dict:
    return json.loads(read_text_file(os.path.join(path, 'meta.json')))


def calibrate_bundle(path: str, trace_id: Optional[str] = None) -> Dict:
    """Write fresh pivot calibrations for both tips into the bundle's meta.json."""
    trial = _load(path, trace_id)
    with tracing.span(trace_id, 'calibrate', 'calibrate', trial_id=trial.id) as out:
        try:
            calibrations = calibrate_trial(trial)
        except SeptoskillError as exc:
            raise _wrap(trial.id, exc)
        out['tips'] = sorted(calibrations)
    meta = _read_meta(path)
    meta['calibrations'] = {tip: cal.to_dict() for tip, cal in sorted(calibrations.items())}
    write_meta(meta, path)
    return {'trial_id': trial.id, 'calibrations': meta['calibrations']}


def register_bundle(path: str, config: Optional[PipelineConfig] = None,
                    head_mode: Optional[str] = None, trace_id: Optional[str] = None) -> Dict:
    """Register the septal plane and nose center; stored under meta.json 'registration'."""
    config = config or PipelineConfig()
    trial = _load(path, trace_id)
    mode = head_mode or config.head.mode
    with tracing.span(trace_id, 'register', 'register', trial_id=trial.id) as out:
        try:
            if any(tip not in trial.calibrations for tip in TIPS):
                trial = trial.with_calibrations(calibrate_trial(trial))
            head = head_frame(trial, active_tip_trajectory(trial), mode, config.head_model())
        except SeptoskillError as exc:
            raise _wrap(trial.id, exc)
        out['mode'] = head.mode

    registration = {
        'head_mode': head.mode,
        'plane': head.plane.to_dict(),
        'nose_center': np.asarray(head.nose_center).tolist(),
    }
    meta = _read_meta(path)
    meta['registration'] = registration
    write_meta(meta, path)
    return {'trial_id': trial.id, 'registration': registration}


def _relative_change(reference: FeatureVector, other: FeatureVector) -> Dict[str, Optional[float]]:
    change = {}
    for name in FEATURE_NAMES:
        ref = getattr(reference, name)
        change[name] = abs(getattr(other, name) - ref) / abs(ref) if ref != 0 else None
    return change


def compare_head_modes(trial: Trial, config: Optional[PipelineConfig] = None) -> Dict:
    """
    Process the trial with the reference sensor and with the estimator.
    Reports the estimator's plane error relative to the sensor-derived plane
    and the relative change of each operator's features.
    """
    from septoskill.evals import plane_track_error

    if trial.head_stream is None:
        raise InputError(f"Trial {trial.id} has no head.csv; head modes cannot be compared")
    config = config or PipelineConfig()
    sensor = process_trial(trial, config, 'sensor')
    estimate = process_trial(trial, config, 'estimate')

    track = estimate.head.track
    result: Dict = {'trial_id': trial.id}
    if track is not None and len(track):
        # sensor-derived truth: head rotation since the end of registration
        head = trial.head_stream
        i0 = min(int(np.searchsorted(head.t, trial.registration_interval[1])), len(head) - 1)
        rel = head.rotations() * head.rotations()[i0].inv()
        axis_dir = track.axis_direction
        angles = np.array([np.dot(r, axis_dir) for r in rel.as_rotvec()])
        thetas = np.interp(track.t, head.t, angles)
        tip_points = np.column_stack([np.interp(track.t, estimate.tips.t, estimate.tips.points[:, k])
                                  for k in range(3)])
        result['plane_error'] = plane_track_error(
            track, thetas, (track.axis_point, axis_dir), tip_points, track.initial_plane)

    sensor_rows = {r.operator_id: r for r in sensor.operator_rows()}
    estimate_rows = {r.operator_id: r for r in estimate.operator_rows()}
    result['feature_change'] = {
        op: _relative_change(sensor_rows[op].features, estimate_rows[op].features)
        for op in sorted(set(sensor_rows) & set(estimate_rows))
    }
    return result


# =============================================================================
# Cohort: features
# =============================================================================

def _stroke_records(analysis: TrialAnalysis) -> List[Dict]:
    records = []
    for item in analysis.subtrials:
        if not item.strokes:
            continue
        obs = stroke_observations(item.strokes, item.graph)
        sub = item.sub
        for k, stroke in enumerate(item.strokes):
            records.append({
                'trial_id': sub.trial_id,
                'operator_id': sub.operator_id,
                'operator_class': sub.operator_class,
                'operator_role': sub.role,
                'subtrial': sub.index,
                'stroke': k + 1,
                'start_t': stroke.start_t,
                'end_t': stroke.end_t,
                'duration': stroke.duration,
                'path_length': stroke.path_length,
                'chord_length': stroke.chord_length,
                'curvature': stroke_curvature(stroke),
                'start_u': float(stroke.start_point_2d[0]),
                'start_v': float(stroke.start_point_2d[1]),
                'peak_distance': stroke.peak_distance,
                'hull_area': item.graph.area(k + 1) if item.graph is not None else 0.0,
                'area_increment': float(obs[k, 2]),
            })
    return records


def _subtrial_records(analysis: TrialAnalysis) -> List[Dict]:
    records = []
    for item in analysis.subtrials:
        sub = item.sub
        row = {
            'trial_id': sub.trial_id,
            'subtrial': sub.index,
            'operator_id': sub.operator_id,
            'operator_class': sub.operator_class,
            'operator_role': sub.role,
            'active_tip': sub.active_tip,
            'n_strokes': len(item.strokes),
            'excluded': item.excluded,
        }
        for name in FEATURE_NAMES:
            row[name] = None if item.excluded else getattr(item.result, name)
        records.append(row)
    return records


def _to_csv(records: List[Dict], columns: List[str], path: str):
    frame = pd.DataFrame.from_records(records, columns=columns)
    write_text_file(path, frame.to_csv(index=False, float_format=NUMBER_FORMAT, lineterminator='\n'))


def _analyze_bundle(path: str, config: PipelineConfig, head_mode: Optional[str],
                    trace_id: Optional[str]) -> Tuple[TrialAnalysis, List[OperatorRow]]:
    trial = _load(path, trace_id)
    analysis = process_trial(trial, config, head_mode, trace_id)
    with tracing.span(trace_id, 'features', 'features', trial_id=trial.id) as out:
        try:
            rows = analysis.operator_rows()
        except AllExcluded as exc:
            logger.warning("trial %s: skipped, %s", trial.id, exc)
            rows = []
        except SeptoskillError as exc:
            raise _wrap(trial.id, exc)
        out['rows'] = len(rows)
    return analysis, rows


def _feature_tables(bundles: Sequence[str], config: PipelineConfig, head_mode: Optional[str],
                    trace_id: Optional[str]) -> Tuple[List[TrialAnalysis], List[Dict], List[Dict], List[Dict]]:
    """
    Analyze bundles (in parallel when run.workers > 1) into feature, stroke
    and sub-trial records, sorted by trial so the worker count does not
    change them. A trial whose sub-trials are all excluded contributes no
    feature row.

    Raises:
        AllExcluded: no trial kept a single sub-trial
    """
    if not bundles:
        raise InputError("No trial bundles given")
    workers = config.run.workers

    def job(path):
        return _analyze_bundle(path, config, head_mode, trace_id)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, bundles))
    else:
        results = [job(path) for path in bundles]

    ids = [a.trial.id for a, _ in results]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise InputError(f"Duplicate trial_id(s): {', '.join(duplicates)}")
    results.sort(key=lambda item: item[0].trial.id)

    feature_records, stroke_records, subtrial_records = [], [], []
    for analysis, rows in results:
        for row in rows:
            record = row.to_dict()
            record['head_mode'] = analysis.head.mode
            feature_records.append(record)
        stroke_records.extend(_stroke_records(analysis))
        subtrial_records.extend(_subtrial_records(analysis))
    if not feature_records:
        raise AllExcluded(f"Every sub-trial of all {len(results)} trial(s) has fewer strokes than required")
    return [a for a, _ in results], feature_records, stroke_records, subtrial_records


def run_features(bundles: Sequence[str], out_dir: str, config: Optional[PipelineConfig] = None,
                 head_mode: Optional[str] = None, compare_head: bool = False,
                 trace_id: Optional[str] = None) -> Dict:
    """
    Process bundles and write the tables. Rows are emitted by this single
    writer, so output does not depend on the worker count. Trials with no
    kept sub-trial are logged and skipped.
    """
    config = config or PipelineConfig()
    analyses, feature_records, stroke_records, subtrial_records = _feature_tables(
        bundles, config, head_mode, trace_id)

    os.makedirs(out_dir, exist_ok=True)
    outputs = {
        'features': os.path.join(out_dir, 'features.csv'),
        'strokes': os.path.join(out_dir, 'strokes.csv'),
        'subtrial_features': os.path.join(out_dir, 'subtrial_features.csv'),
    }
    _to_csv(feature_records, FEATURE_COLUMNS, outputs['features'])
    _to_csv(stroke_records, STROKE_COLUMNS, outputs['strokes'])
    _to_csv(subtrial_records, SUBTRIAL_COLUMNS, outputs['subtrial_features'])

    summary = {
        'trials': len(analyses),
        'rows': len(feature_records),
        'strokes': len(stroke_records),
        'excluded_subtrials': sum(1 for r in subtrial_records if r['excluded']),
        'skipped_trials': sorted({a.trial.id for a in analyses}
                                 - {r['trial_id'] for r in feature_records}),
        'outputs': outputs,
    }

    if compare_head:
        comparisons = []
        for analysis in analyses:
            if analysis.trial.id in summary['skipped_trials']:
                continue
            if analysis.trial.head_stream is None:
                logger.info("trial %s: no head.csv, skipped in head comparison", analysis.trial.id)
                continue
            comparisons.append(compare_head_modes(analysis.trial, config))
        outputs['head_comparison'] = os.path.join(out_dir, 'head_comparison.json')
        write_text_file(outputs['head_comparison'],
                        json.dumps(comparisons, indent=2, sort_keys=True) + '\n')
        summary['head_comparisons'] = len(comparisons)

    logger.info("features: %d trials, %d rows", summary['trials'], summary['rows'])
    return summary


# =============================================================================
# Cohort: classification
# =============================================================================

def _read_csv(path: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise InputError(f"File not found: {path}")
    return pd.read_csv(path, dtype={'trial_id': str, 'operator_id': str})


def _exploratory(ds: Dataset) -> Dict:
    return compare_classes([(row.label, row.features) for row in ds.rows])


def _classify_frames(inputs: Sequence[str], strokes_csv: Optional[str], config: PipelineConfig,
                     head_mode: Optional[str],
                     trace_id: Optional[str]) -> Tuple[pd.DataFrame, Optional[pd.DataFrame]]:
    """features.csv (+ strokes.csv), or the same tables built from bundle directories."""
    if inputs and all(os.path.isdir(p) for p in inputs):
        if strokes_csv:
            raise InputError("strokes.csv is derived from the bundles; do not pass it with bundle inputs")
        _, feature_records, stroke_records, _ = _feature_tables(inputs, config, head_mode, trace_id)
        return (pd.DataFrame.from_records(feature_records, columns=FEATURE_COLUMNS),
                pd.DataFrame.from_records(stroke_records, columns=STROKE_COLUMNS))
    if len(inputs) != 1:
        raise InputError("classify takes one features.csv or one or more trial bundle directories")
    return _read_csv(inputs[0]), (_read_csv(strokes_csv) if strokes_csv else None)


def run_classify(features: Union[str, Sequence[str]], out_path: str, strokes_csv: Optional[str] = None,
                 config: Optional[PipelineConfig] = None, schemes: Sequence[str] = SCHEMES,
                 classifiers: Sequence[str] = CLASSIFIERS, trace_id: Optional[str] = None,
                 head_mode: Optional[str] = None) -> Dict:
    """
    Cross-validate every (scheme, classifier) pair and write report.json.

    features is a features.csv path, or trial bundle directories that are
    run through the feature stage in memory first. The HMM needs stroke
    observations; a features.csv without strokes.csv runs the SVM only.
    """
    config = config or PipelineConfig()
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise InputError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    for name in classifiers:
        if name not in CLASSIFIERS:
            raise InputError(f"classifier must be one of {CLASSIFIERS}, got {name!r}")

    inputs = [features] if isinstance(features, str) else list(features)
    with tracing.span(trace_id, 'parse', 'parse', input={'features': inputs, 'strokes': strokes_csv}):
        feature_frame, strokes = _classify_frames(inputs, strokes_csv, config, head_mode, trace_id)
        ds = Dataset.from_frames(feature_frame, strokes)

    if 'hmm' in classifiers and strokes is None:
        logger.warning("no strokes.csv given; skipping the HMM baseline")
        classifiers = [c for c in classifiers if c != 'hmm']

    tables: Dict[str, Dict] = {}
    with tracing.span(trace_id, 'classify', 'classify', input={'rows': len(ds)}) as out:
        for scheme in schemes:
            tables[scheme] = {}
            for name in classifiers:
                tables[scheme][name] = subset_table(ds, scheme, name, config.svm, config.hmm,
                                                    config.run.workers)
        out['tables'] = {s: sorted(t) for s, t in tables.items()}

    report = {
        'config': config.to_dict(),
        'dataset': {
            'rows': len(ds),
            'trials': len({r.trial_id for r in ds.rows}),
            'operators': ds.operators,
            'class_counts': {label: int(sum(1 for r in ds.rows if r.label == label))
                             for label in ('expert', 'novice')},
        },
        'tables': tables,
        'exploratory': _exploratory(ds),
    }
    with tracing.span(trace_id, 'report', 'report', input={'path': out_path}):
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        write_text_file(out_path, json.dumps(report, indent=2, sort_keys=True) + '\n')
    return report


def summarize_tables(report: Dict) -> List[Tuple[str, str, str, float, float]]:
    """(scheme, classifier, subset, micro, macro) for printing."""
    lines = []
    for scheme, by_classifier in sorted(report['tables'].items()):
        for name, columns in sorted(by_classifier.items()):
            for subset, column in columns.items():
                lines.append((scheme, name, subset, column['micro'], column['macro']))
    return lines


# =============================================================================
# Figures
# =============================================================================

def run_report(strokes_csv: str, out_dir: str, trial_id: Optional[str] = None,
               trace_id: Optional[str] = None) -> Dict:
    """
    search_graph.svg for one trial (default: the first trial id) and the
    cumulative-area curves of every single-operator trial.
    """
    strokes = _read_csv(strokes_csv)
    if strokes.empty:
        raise EmptyResultError(f"{strokes_csv} holds no strokes")
    trials = sorted(strokes['trial_id'].unique())
    trial_id = trial_id or trials[0]
    if trial_id not in trials:
        raise InputError(f"trial {trial_id!r} not in {strokes_csv}; available: {', '.join(trials)}")

    os.makedirs(out_dir, exist_ok=True)
    outputs = {
        'search_graph': os.path.join(out_dir, 'search_graph.svg'),
        'cumulative_area_csv': os.path.join(out_dir, 'cumulative_area.csv'),
        'cumulative_area_svg': os.path.join(out_dir, 'cumulative_area.svg'),
    }
    with tracing.span(trace_id, 'report', 'report', trial_id=trial_id) as out:
        rows = strokes[strokes['trial_id'] == trial_id]
        graphs, titles = [], []
        for (sub, op), group in rows.groupby(['subtrial', 'operator_id'], sort=True):
            if len(group) < 3:
                continue
            graphs.append(graph_from_rows(group))
            titles.append(f"{trial_id} sub-trial {sub} ({op}, {group.iloc[0]['operator_class']})")
        plot_search_graph(graphs, outputs['search_graph'], titles)

        curves = curves_from_strokes(strokes)
        write_cumulative_area_csv(curves, outputs['cumulative_area_csv'])
        plot_cumulative_areas(curves, outputs['cumulative_area_svg'])
        out['curves'] = len(curves)
    return {'trial_id': trial_id, 'graphs': len(graphs), 'curves': len(curves), 'outputs': outputs}


# =============================================================================
# Synthetic data
# =============================================================================

def simulate(out_dir: str, n_experts: int, n_novices: int, trials_per_surgeon,
             profile_pair: str = 'clinical', seed: int = 0, head_motion: Optional[HeadMotion] = None,
             config: Optional[PipelineConfig] = None, evaluate: bool = False,
             trace_id: Optional[str] = None) -> Dict:
    """Write one bundle per synthetic trial under out_dir/<trial_id>/."""
    from septoskill.evals import evaluate_trial

    config = config or PipelineConfig()
    if profile_pair not in PROFILE_PAIRS:
        raise InputError(f"profile pair must be one of {sorted(PROFILE_PAIRS)}, got {profile_pair!r}")
    with tracing.span(trace_id, 'simulate', 'simulate', input={'seed': seed}) as out:
        cohort = generate_dataset(n_experts, n_novices, trials_per_surgeon, profile_pair, seed,
                                  head_motion, config.synth)
        paths = []
        for trial, truth in zip(cohort.trials, cohort.truths):
            path = os.path.join(out_dir, trial.id)
            write_synth_bundle(trial, truth, path)
            paths.append(path)
        out['trials'] = len(paths)

    summary = {
        'trials': len(paths),
        'surgeons': {sid: {'class': op.operator_class, 'role': op.operator_role}
                     for sid, op in cohort.surgeons.items()},
        'bundles': paths,
    }
    if evaluate:
        results = []
        with tracing.span(trace_id, 'evaluate', 'evaluate') as out:
            for trial, truth in zip(cohort.trials, cohort.truths):
                results.append(evaluate_trial(process_trial(trial, config, trace_id=trace_id), truth))
            out['passed'] = sum(1 for r in results if r['strokes']['passed'])
        write_text_file(os.path.join(out_dir, 'evaluation.json'),
                        json.dumps(results, indent=2, sort_keys=True) + '\n')
        summary['evaluation'] = {
            'passed': sum(1 for r in results if r['strokes']['passed']),
            'total': len(results),
            'recall': float(np.mean([r['strokes']['recall'] for r in results])),
            'precision': float(np.mean([r['strokes']['precision'] for r in results])),
        }
    return summary


__all__ = [
    "SCHEMA",
    "FEATURE_COLUMNS",
    "SUBTRIAL_COLUMNS",
    "STROKE_COLUMNS",
    "OperatorRow",
    "TrialAnalysis",
    "process_trial",
    "calibrate_bundle",
    "register_bundle",
    "compare_head_modes",
    "run_features",
    "run_classify",
    "summarize_tables",
    "run_report",
    "simulate",
]
