"""
Ground-truth evaluation against synthetic trials.

These evaluators score pipeline output against SynthTruth: stroke
boundaries, the tracked septal plane and the measured features. They run
in CI on seeded trials; nothing here is needed to process real data.
"""

import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from septoskill.geometry import Plane, point_plane_distance, rotation_about_axis
from septoskill.headcomp import PlaneTrack
from septoskill.synth import HeadMotion, SkillProfile, SynthConfig, SynthTruth, generate_trial
from septoskill.utils import InputError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Evals API ===

evaluate_strokes(detected, truth, tolerance_s=0.05, match_window_s=0.25) -> Dict
    Greedy start-time matching of detected strokes to true strokes.
    {passed, recall, precision, matches, missing, extra, boundary_errors}

plane_track_error(track, truth_thetas, axis, reference_points, truth_plane=None) -> Dict
    Mean angular (deg) and positional (mm) error of the tracked plane.

evaluate_trial(analysis, truth, tolerance_s=0.05) -> Dict
    Strokes + plane track + feature truth for one processed synthetic trial.

run_synth_suite(seeds, profile, head_motion=None, config=None, synth_config=None,
                tolerance_s=0.05) -> Dict
    Generate, process and score one trial per seed; aggregate recall/precision.
"""

MIN_RECALL = 0.95
MAX_SPURIOUS = 0.05


# =============================================================================
# Strokes
# =============================================================================

def _bounds(strokes: Iterable[Any]) -> np.ndarray:
    rows = [(float(s.start_t), float(s.end_t)) for s in strokes]
    return np.array(rows, dtype=float).reshape(-1, 2)


def evaluate_strokes(
    detected: Sequence[Any],
    truth: Sequence[Any],
    tolerance_s: float = 0.05,
    match_window_s: float = 0.25,
) -> Dict:
    """
    Pair detected and true strokes by start time, closest pairs first.

    A true stroke counts as recovered when its pair has start and end errors
    below `tolerance_s`. Detected strokes with no partner within
    `match_window_s` are spurious.
    """
    if tolerance_s <= 0 or match_window_s <= 0:
        raise InputError("tolerance_s and match_window_s must be > 0")
    det = _bounds(detected)
    true = _bounds(truth)

    candidates = []
    for i, (t_start, _) in enumerate(true):
        for j, (d_start, _) in enumerate(det):
            gap = abs(d_start - t_start)
            if gap <= match_window_s:
                candidates.append((gap, i, j))
    candidates.sort()

    pair_of_true: Dict[int, int] = {}
    used = set()
    for _, i, j in candidates:
        if i in pair_of_true or j in used:
            continue
        pair_of_true[i] = j
        used.add(j)

    matches = []
    boundary_errors = []
    recovered = 0
    for i in range(len(true)):
        j = pair_of_true.get(i)
        if j is None:
            continue
        start_err = float(det[j, 0] - true[i, 0])
        end_err = float(det[j, 1] - true[i, 1])
        within = abs(start_err) < tolerance_s and abs(end_err) < tolerance_s
        recovered += int(within)
        boundary_errors.append(max(abs(start_err), abs(end_err)))
        matches.append({
            "true_index": i,
            "detected_index": j,
            "start_error": start_err,
            "end_error": end_err,
            "within_tolerance": within,
        })

    missing = [i for i in range(len(true)) if i not in pair_of_true]
    extra = [j for j in range(len(det)) if j not in used]
    recall = recovered / len(true) if len(true) else 1.0
    precision = len(used) / len(det) if len(det) else 1.0
    spurious = len(extra) / len(det) if len(det) else 0.0

    return {
        "passed": recall >= MIN_RECALL and spurious <= MAX_SPURIOUS,
        "recall": round(recall, 4),
        "precision": round(precision, 4),
        "n_true": len(true),
        "n_detected": len(det),
        "matches": matches,
        "missing": missing,
        "extra": extra,
        "boundary_errors": boundary_errors,
    }


# =============================================================================
# Plane track
# =============================================================================

def plane_track_error(
    track: PlaneTrack,
    truth_thetas,
    axis: Tuple[Any, Any],
    reference_points,
    truth_plane: Optional[Plane] = None,
) -> Dict:
    """
    Compare the tracked plane with the true plane, frame by frame.

    truth_thetas: true rotation (rad) at each track frame
    axis: (point, direction) of the true rotation axis
    reference_points: one tracker-frame point per frame (usually the tip)

    Angular error is the angle between the normals, sign-free. Positional
    error is the distance from the tracked plane of the reference point
    projected onto the true plane.
    """
    thetas = np.asarray(truth_thetas, dtype=float).reshape(-1)
    refs = np.asarray(reference_points, dtype=float).reshape(-1, 3)
    if not (len(thetas) == len(refs) == len(track)):
        raise InputError(
            f"plane_track_error needs one truth angle and reference point per frame "
            f"({len(track)} frames, got {len(thetas)} / {len(refs)})")
    if len(track) == 0:
        raise InputError("plane_track_error: empty track")

    base = truth_plane or track.initial_plane
    point, direction = axis
    angles = np.empty(len(track))
    offsets = np.empty(len(track))
    for i in range(len(track)):
        true_plane = base.transformed(rotation_about_axis(point, direction, thetas[i]))
        est_plane = track.plane_at(i)
        cosine = min(1.0, abs(float(np.dot(true_plane.normal, est_plane.normal))))
        angles[i] = np.degrees(np.arccos(cosine))
        foot = refs[i] - point_plane_distance(refs[i], true_plane) * true_plane.normal
        offsets[i] = abs(point_plane_distance(foot, est_plane))

    return {
        "frames": len(track),
        "mean_angle_deg": float(np.mean(angles)),
        "max_angle_deg": float(np.max(angles)),
        "mean_offset_mm": float(np.mean(offsets)),
        "max_offset_mm": float(np.max(offsets)),
    }


# =============================================================================
# Trials and suites
# =============================================================================

def _feature_truth(analysis, truth: SynthTruth) -> List[Dict]:
    rows = []
    for item in analysis.subtrials:
        expected = truth.strokes_in(item.sub.index)
        measured = [s.curvature for s in item.strokes]
        row = {
            "subtrial": item.sub.index,
            "n_true": len(expected),
            "n_detected": len(item.strokes),
        }
        if len(expected) == len(measured) and expected:
            row["max_curvature_error"] = float(np.max(np.abs(
                np.array(measured) - np.array([s.curvature for s in expected]))))
            row["max_duration_error"] = float(np.max(np.abs(
                np.array([s.duration for s in item.strokes]) - np.array([s.duration for s in expected]))))
        rows.append(row)
    return rows


def evaluate_trial(analysis, truth: SynthTruth, tolerance_s: float = 0.05) -> Dict:
    """Score one processed trial (facade.TrialAnalysis) against its truth."""
    detected = [s for item in analysis.subtrials for s in item.strokes]
    result = {
        "trial_id": truth.trial_id,
        "seed": truth.seed,
        "strokes": evaluate_strokes(detected, truth.strokes, tolerance_s),
        "features": _feature_truth(analysis, truth),
    }
    track = analysis.head.track
    if track is not None:
        thetas = np.interp(track.t, truth.t, truth.theta)
        tips = analysis.tips
        refs = np.column_stack([np.interp(track.t, tips.t, tips.points[:, k]) for k in range(3)])
        result["plane_track"] = plane_track_error(
            track, thetas, (truth.axis_point, truth.axis_direction), refs, truth.plane)
    return result


def run_synth_suite(
    seeds: Iterable[int],
    profile: SkillProfile,
    head_motion: Optional[HeadMotion] = None,
    config=None,
    synth_config: Optional[SynthConfig] = None,
    tolerance_s: float = 0.05,
) -> Dict:
    """Generate one trial per seed, run the pipeline on it and aggregate the scores."""
    from septoskill.facade import process_trial

    results = []
    for seed in seeds:
        trial, truth = generate_trial(profile, head_motion, int(seed), synth_config,
                                      trial_id=f"S{int(seed):04d}")
        analysis = process_trial(trial, config)
        results.append(evaluate_trial(analysis, truth, tolerance_s))

    n_true = sum(r["strokes"]["n_true"] for r in results)
    n_detected = sum(r["strokes"]["n_detected"] for r in results)
    recovered = sum(sum(1 for m in r["strokes"]["matches"] if m["within_tolerance"]) for r in results)
    paired = sum(len(r["strokes"]["matches"]) for r in results)
    passed = sum(1 for r in results if r["strokes"]["passed"])
    summary = {
        "passed": passed == len(results),
        "total": len(results),
        "passed_count": passed,
        "failed_count": len(results) - passed,
        "recall": round(recovered / n_true, 4) if n_true else 1.0,
        "precision": round(paired / n_detected, 4) if n_detected else 1.0,
        "results": results,
    }
    tracks = [r["plane_track"] for r in results if "plane_track" in r]
    if tracks:
        summary["mean_angle_deg"] = float(np.mean([p["mean_angle_deg"] for p in tracks]))
        summary["mean_offset_mm"] = float(np.mean([p["mean_offset_mm"] for p in tracks]))
    logger.info("synth suite: %d/%d trials passed, recall %.3f", passed, len(results), summary["recall"])
    return summary


__all__ = [
    "SCHEMA",
    "MIN_RECALL",
    "MAX_SPURIOUS",
    "evaluate_strokes",
    "plane_track_error",
    "evaluate_trial",
    "run_synth_suite",
]
