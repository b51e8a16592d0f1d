"""
Pytest fixtures for septoskill tests

Provides:
- a seeded random generator
- small synthetic trials (noiseless and noisy) with their ground truth
- trial bundles written under tmp_path
"""

import os
import sys

import numpy as np
import pytest

# Resolve the repository root
_BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _BASE_DIR)


# =============================================================================
# Randomness
# =============================================================================

@pytest.fixture
def rng():
    """Seeded generator; every test gets the same stream."""
    return np.random.default_rng(20240917)


@pytest.fixture(autouse=True)
def clean_traces():
    """Traces are process-global; start every test empty."""
    from septoskill import tracing

    tracing.reset()
    yield
    tracing.reset()


# =============================================================================
# Synthetic trials
# =============================================================================

@pytest.fixture
def small_synth_config():
    """Two sub-trials of twelve strokes: enough for every feature, fast to process."""
    from septoskill.synth import SynthConfig

    return SynthConfig(strokes_per_subtrial=12, subtrials=2)


@pytest.fixture
def noiseless_profile():
    from septoskill.synth import SkillProfile

    return SkillProfile(noise_sigma=0.0)


@pytest.fixture
def noiseless_trial(noiseless_profile, small_synth_config):
    """(Trial, SynthTruth) without noise or head motion."""
    from septoskill.synth import generate_trial

    return generate_trial(noiseless_profile, None, seed=7, config=small_synth_config,
                          trial_id='T001', operator_id='E1', operator_class='expert')


@pytest.fixture
def noisy_trial(small_synth_config):
    """(Trial, SynthTruth) with 0.2 mm tracker noise."""
    from septoskill.synth import SkillProfile, generate_trial

    return generate_trial(SkillProfile(noise_sigma=0.2), None, seed=11, config=small_synth_config,
                          trial_id='T002', operator_id='N1', operator_class='novice')


@pytest.fixture
def trial_bundle(tmp_path, noiseless_trial):
    """Path of a written synthetic bundle (cottle.csv, head.csv, meta.json, truth.json)."""
    from septoskill.synth import write_synth_bundle

    trial, truth = noiseless_trial
    path = str(tmp_path / trial.id)
    write_synth_bundle(trial, truth, path)
    return path


@pytest.fixture
def cohort_bundles(tmp_path, small_synth_config):
    """Bundles of a separated 2-expert / 2-novice cohort, two trials each."""
    from septoskill.synth import generate_dataset, write_synth_bundle

    cohort = generate_dataset(2, 2, 2, 'separated', seed=5, config=small_synth_config)
    paths = []
    for trial, truth in zip(cohort.trials, cohort.truths):
        path = str(tmp_path / 'bundles' / trial.id)
        write_synth_bundle(trial, truth, path)
        paths.append(path)
    return paths
