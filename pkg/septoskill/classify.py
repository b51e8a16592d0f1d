"""
Skill classification

Kernel SVM on trial-level (SCC, SDC, CR) vectors, a per-class Gaussian HMM
baseline on per-stroke observation sequences, and the leave-one-trial-out
(TO) / leave-one-user-out (UO) cross-validation harness with micro/macro
accuracy.

A dataset row is one (trial_id, operator_id) pair: a trial with two
operators contributes two rows.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import LeaveOneGroupOut
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC

from septoskill.features import FEATURE_NAMES, FeatureVector
from septoskill.hmm import GaussianHMM
from septoskill.utils import EmptyResultError, InputError

logger = logging.getLogger(__name__)


SCHEMA = """
=== Classify API ===

Dataset(rows)                       rows: DatasetRow(trial_id, operator_id, label, features, sequences)
Dataset.from_frames(features_df, strokes_df=None) -> Dataset

train_svm(train, features, cfg=SvmConfig()) -> SvmModel
predict_svm(model, fv) -> Prediction(label, margin)
train_hmm(sequences_by_class, cfg=HmmConfig()) -> HmmModel
predict_hmm(model, sequences) -> Prediction(label, margin)

cross_validate(ds, scheme, classifier, features, svm_cfg, hmm_cfg, workers=1) -> CrossValidation
metrics(cm) -> (micro %, macro %)
subset_table(ds, scheme, classifier, svm_cfg, hmm_cfg, workers=1) -> Dict
"""

CLASSES = ('expert', 'novice')
SCHEMES = ('TO', 'UO')
CLASSIFIERS = ('svm', 'hmm')
FEATURE_SUBSETS = {
    'only_scc': ('scc',),
    'only_sdc': ('sdc',),
    'only_cr': ('cr',),
    'overall': FEATURE_NAMES,
}
TIE_TOL = 1e-12
VARIANCE_TOL = 1e-12
MIN_SEQUENCE_LENGTH = 3


# =============================================================================
# Errors
# =============================================================================

class SingleClass(EmptyResultError):
    """Training data holds only one class."""
    pass


class EmptyClass(EmptyResultError):
    """Too few usable HMM sequences for a class."""
    pass


class InsufficientFolds(EmptyResultError):
    """The cross-validation scheme cannot form two folds."""
    pass


class EmptyMatrix(EmptyResultError):
    """Confusion matrix with a zero total."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    gamma: Optional[float] = None
    class_weight: Optional[str] = 'balanced'
    tol: float = 1e-6

    def __post_init__(self):
        if self.C <= 0:
            raise InputError(f"SvmConfig.C must be > 0, got {self.C}")
        if self.gamma is not None and self.gamma <= 0:
            raise InputError(f"SvmConfig.gamma must be > 0 or null, got {self.gamma}")
        if self.class_weight not in ('balanced', None):
            raise InputError(f"SvmConfig.class_weight must be 'balanced' or null, got {self.class_weight!r}")


@dataclass(frozen=True)
class HmmConfig:
    n_states: int = 3
    max_iter: int = 200
    tol: float = 1e-6
    var_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.max_iter < 1:
            raise InputError("HmmConfig needs n_states >= 1 and max_iter >= 1")
        if self.var_floor <= 0:
            raise InputError(f"HmmConfig.var_floor must be > 0, got {self.var_floor}")


@dataclass(frozen=True, eq=False)
class DatasetRow:
    trial_id: str
    operator_id: str
    label: str
    features: FeatureVector
    sequences: Tuple[np.ndarray, ...] = ()
    role: Optional[str] = None

    @property
    def key(self) -> Tuple[str, str]:
        return (self.trial_id, self.operator_id)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows sorted by (trial_id, operator_id)."""
    rows: Tuple[DatasetRow, ...]

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: r.key))
        if not rows:
            raise InputError("Dataset is empty")
        keys = [r.key for r in rows]
        if len(set(keys)) != len(keys):
            dup = next(k for k in keys if keys.count(k) > 1)
            raise InputError(f"Dataset has duplicate row for trial {dup[0]!r} operator {dup[1]!r}")
        for r in rows:
            if r.label not in CLASSES:
                raise InputError(f"Row {r.key}: label must be one of {CLASSES}, got {r.label!r}")
        object.__setattr__(self, 'rows', rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows])

    @property
    def operators(self) -> List[str]:
        return sorted({r.operator_id for r in self.rows})

    def matrix(self, features: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([r.features.values(features) for r in self.rows]).reshape(len(self), -1)

    def subset(self, indices) -> 'Dataset':
        return Dataset(tuple(self.rows[i] for i in indices))

    def groups(self, scheme: str) -> np.ndarray:
        """Integer group per row: one per row for TO, one per operator for UO."""
        if scheme == 'TO':
            return np.arange(len(self))
        if scheme == 'UO':
            index = {op: i for i, op in enumerate(self.operators)}
            return np.array([index[r.operator_id] for r in self.rows])
        raise InputError(f"scheme must be one of {SCHEMES}, got {scheme!r}")

    @classmethod
    def from_frames(cls, features: pd.DataFrame, strokes: Optional[pd.DataFrame] = None) -> 'Dataset':
        """
        Build a dataset from features.csv rows (trial-level rows only) and,
        for the HMM, strokes.csv per-stroke observations.
        """
        required = {'trial_id', 'operator_id', 'operator_class', *FEATURE_NAMES, 'n_strokes'}
        missing = required - set(features.columns)
        if missing:
            raise InputError(f"features table is missing columns: {', '.join(sorted(missing))}")

        sequences: Dict[Tuple[str, str], List[np.ndarray]] = {}
        if strokes is not None and len(strokes):
            for (trial, op, sub), group in strokes.groupby(['trial_id', 'operator_id', 'subtrial'], sort=True):
                group = group.sort_values('stroke')
                seq = group[['curvature', 'duration', 'area_increment']].to_numpy(dtype=float)
                sequences.setdefault((str(trial), str(op)), []).append(seq)

        rows = []
        for rec in features.to_dict('records'):
            key = (str(rec['trial_id']), str(rec['operator_id']))
            rows.append(DatasetRow(
                trial_id=key[0],
                operator_id=key[1],
                label=str(rec['operator_class']),
                features=FeatureVector(float(rec['scc']), float(rec['sdc']), float(rec['cr']),
                                       int(rec['n_strokes'])),
                sequences=tuple(sequences.get(key, ())),
                role=rec.get('operator_role') if isinstance(rec.get('operator_role'), str) else None,
            ))
        return cls(tuple(rows))


@dataclass(frozen=True)
class Prediction:
    label: str
    margin: float


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Standardizer + RBF SVC over the non-degenerate feature dimensions."""
    features: Tuple[str, ...]
    kept: Tuple[str, ...]
    dropped: Tuple[str, ...]
    scaler: Optional[StandardScaler]
    svc: Optional[SVC]
    gamma: float
    config: SvmConfig
    fallback_label: str = 'expert'

    def decision(self, x) -> np.ndarray:
        """Decision values for rows of `x` (columns in `features` order); > 0 is expert."""
        x = np.asarray(x, dtype=float).reshape(-1, len(self.features))
        if self.svc is None:
            return np.zeros(len(x))
        cols = [self.features.index(name) for name in self.kept]
        return self.svc.decision_function(self.scaler.transform(x[:, cols]))

    def predict(self, x) -> List[Prediction]:
        values = self.decision(x)
        if self.svc is None:
            return [Prediction(self.fallback_label, 0.0) for _ in values]
        return [Prediction(_label_for(v), float(v)) for v in values]

    @property
    def support_vectors(self) -> np.ndarray:
        return self.svc.support_vectors_

    @property
    def dual_coef(self) -> np.ndarray:
        """y_i · alpha_i of the support vectors (+1 = expert)."""
        return self.svc.dual_coef_.reshape(-1)

    @property
    def intercept(self) -> float:
        return float(self.svc.intercept_[0])

    def to_dict(self) -> Dict:
        return {
            'kernel': 'rbf',
            'C': self.config.C,
            'gamma': self.gamma,
            'class_weight': self.config.class_weight,
            'tol': self.config.tol,
            'features': list(self.features),
            'dropped': list(self.dropped),
        }


@dataclass(frozen=True, eq=False)
class HmmModel:
    models: Dict[str, GaussianHMM]
    config: HmmConfig

    def scores(self, sequences: Sequence[np.ndarray]) -> Dict[str, float]:
        """Length-normalized log-likelihood of the concatenated evidence."""
        total = sum(len(s) for s in sequences)
        return {label: sum(m.score(s) for s in sequences) / total
                for label, m in self.models.items()}


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[predicted][actual], class order (expert, novice). Counts may be rates."""
    counts: Tuple[Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=float)
        if arr.shape != (2, 2):
            raise InputError(f"ConfusionMatrix needs a 2x2 table, got shape {arr.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InputError("ConfusionMatrix counts must be finite and >= 0")
        object.__setattr__(self, 'counts', tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def from_predictions(cls, actual: Sequence[str], predicted: Sequence[str]) -> 'ConfusionMatrix':
        table = np.zeros((2, 2))
        for a, p in zip(actual, predicted):
            table[CLASSES.index(p), CLASSES.index(a)] += 1
        return cls(table)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts)

    @property
    def total(self) -> float:
        return float(self.as_array().sum())

    def rates(self) -> np.ndarray:
        """Column percentages (each ground-truth column sums to 100, or 0 if empty)."""
        arr = self.as_array()
        col = arr.sum(axis=0)
        return np.where(col > 0, 100.0 * arr / np.where(col > 0, col, 1.0), 0.0)

    def to_dict(self) -> Dict:
        return {
            'order': list(CLASSES),
            'counts': [list(r) for r in self.counts],
            'rates': self.rates().tolist(),
        }


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_keys: Tuple[Tuple[str, str], ...]
    train_keys: Tuple[Tuple[str, str], ...]
    actual: Tuple[str, ...]
    predicted: Tuple[str, ...]
    margins: Tuple[float, ...]

    def to_dict(self) -> Dict:
        return {
            'fold': self.fold,
            'predictions': [
                {'trial_id': k[0], 'operator_id': k[1], 'actual': a, 'predicted': p, 'margin': m}
                for k, a, p, m in zip(self.test_keys, self.actual, self.predicted, self.margins)
            ],
        }


@dataclass(frozen=True)
class CrossValidation:
    scheme: str
    classifier: str
    features: Tuple[str, ...]
    confusion: ConfusionMatrix
    folds: Tuple[FoldResult, ...]

    def to_dict(self) -> Dict:
        micro, macro = metrics(self.confusion)
        data = {'features': list(self.features), 'micro': micro, 'macro': macro}
        data.update(self.confusion.to_dict())
        data['folds'] = [f.to_dict() for f in self.folds]
        return data


# =============================================================================
# SVM
# =============================================================================

def _label_for(value: float) -> str:
    """Sign of a decision value; |value| < 1e-12 resolves to expert."""
    if abs(value) < TIE_TOL:
        return 'expert'
    return 'expert' if value > 0 else 'novice'


def _encode(labels: Sequence[str]) -> np.ndarray:
    return np.where(np.asarray(labels) == 'expert', 1, -1)


def train_svm(train: Dataset, features: Sequence[str] = FEATURE_NAMES,
              cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """
    Standardize on `train` only and fit an RBF SVC (libsvm SMO, tolerance
    cfg.tol). Zero-variance feature dimensions are dropped with a warning.
    gamma defaults to 1 / (d · mean variance of the standardized data).

    Raises:
        SingleClass: `train` holds one class only
    """
    features = tuple(features)
    unknown = [f for f in features if f not in FEATURE_NAMES]
    if not features or unknown:
        raise InputError(f"features must be a non-empty subset of {FEATURE_NAMES}, got {features}")
    labels = train.labels
    present = sorted(set(labels))
    if len(present) < 2:
        raise SingleClass(
            f"SVM training needs both classes; training fold has only {present[0]!r} "
            f"({len(train)} rows)")

    x = train.matrix(features)
    variance = x.var(axis=0)
    keep = variance > VARIANCE_TOL * np.maximum(1.0, np.abs(x).max(axis=0)) ** 2
    dropped = tuple(f for f, k in zip(features, keep) if not k)
    kept = tuple(f for f, k in zip(features, keep) if k)
    for name in dropped:
        logger.warning("feature %s has zero variance in the training data; dropped", name)

    if not kept:
        counts = {c: int(np.sum(labels == c)) for c in CLASSES}
        majority = 'expert' if counts['expert'] >= counts['novice'] else 'novice'
        logger.warning("every feature is constant in the training data; predicting %s", majority)
        return SvmModel(features, kept, dropped, None, None, 0.0, cfg, majority)

    scaler = StandardScaler().fit(x[:, keep])
    z = scaler.transform(x[:, keep])
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / (z.shape[1] * float(z.var(axis=0).mean()))
    svc = SVC(kernel='rbf', C=cfg.C, gamma=gamma, class_weight=cfg.class_weight,
              tol=cfg.tol, shrinking=True)
    svc.fit(z, _encode(labels))
    logger.debug("SVM: %d rows, %d support vectors, gamma %.4g", len(train), len(svc.support_), gamma)
    return SvmModel(features, kept, dropped, scaler, svc, float(gamma), cfg)


def predict_svm(model: SvmModel, fv: FeatureVector) -> Prediction:
    return model.predict(fv.values(model.features)[None, :])[0]


# =============================================================================
# HMM baseline
# =============================================================================

class HmmClassifier(BaseEstimator, ClassifierMixin):
    """One GaussianHMM per class; X is a list of per-row sequence lists."""

    def __init__(self, n_states: int = 3, max_iter: int = 200, tol: float = 1e-6,
                 var_floor: float = 1e-6, seed: int = 0):
        self.n_states = n_states
        self.max_iter = max_iter
        self.tol = tol
        self.var_floor = var_floor
        self.seed = seed

    def fit(self, X, y):
        by_class: Dict[str, List[np.ndarray]] = {c: [] for c in CLASSES}
        for sequences, label in zip(X, y):
            by_class[label].extend(sequences)
        cfg = HmmConfig(self.n_states, self.max_iter, self.tol, self.var_floor, self.seed)
        self.model_ = train_hmm(by_class, cfg)
        self.classes_ = np.array(CLASSES)
        return self

    def predict(self, X):
        return np.array([predict_hmm(self.model_, sequences).label for sequences in X])


def train_hmm(sequences_by_class: Dict[str, Sequence[np.ndarray]], cfg: HmmConfig = HmmConfig()) -> HmmModel:
    """
    Fit one HMM per class by Baum-Welch. Sequences shorter than three
    observations are skipped.

    Raises:
        EmptyClass: a class has fewer than 2 usable sequences
    """
    models = {}
    for label in CLASSES:
        raw = sequences_by_class.get(label, ())
        usable = [np.asarray(s, dtype=float) for s in raw if len(s) >= MIN_SEQUENCE_LENGTH]
        if len(raw) != len(usable):
            logger.info("HMM %s: skipped %d sequence(s) shorter than %d",
                        label, len(raw) - len(usable), MIN_SEQUENCE_LENGTH)
        if len(usable) < 2:
            raise EmptyClass(
                f"HMM training needs >= 2 sequences of length >= {MIN_SEQUENCE_LENGTH} "
                f"for class {label!r}, got {len(usable)}")
        models[label] = GaussianHMM(cfg.n_states, cfg.max_iter, cfg.tol, cfg.var_floor, cfg.seed).fit(usable)
    return HmmModel(models, cfg)


def predict_hmm(model: HmmModel, sequences) -> Prediction:
    """
    Class with the higher length-normalized log-likelihood; equal scores
    resolve to expert. `sequences` is one (T, d) array or a list of them.
    Margin is expert score minus novice score.
    """
    if isinstance(sequences, np.ndarray) and sequences.ndim == 2:
        sequences = [sequences]
    sequences = [np.asarray(s, dtype=float) for s in sequences if len(s)]
    if not sequences:
        return Prediction('expert', 0.0)
    scores = model.scores(sequences)
    margin = scores['expert'] - scores['novice']
    return Prediction(_label_for(margin), float(margin))


# =============================================================================
# Cross-validation
# =============================================================================

def _check_fold(ds: Dataset, scheme: str, train_idx, test_idx):
    """Raise AssertionError when a held-out trial or operator leaks into training."""
    if set(train_idx) & set(test_idx):
        raise AssertionError("train and test rows overlap")
    if scheme == 'TO':
        held = {ds.rows[i].key for i in test_idx}
        leaked = held & {ds.rows[i].key for i in train_idx}
    else:
        held = {ds.rows[i].operator_id for i in test_idx}
        leaked = held & {ds.rows[i].operator_id for i in train_idx}
    if leaked:
        raise AssertionError(f"{scheme} fold leaks held-out {sorted(leaked)} into training")


def folds(ds: Dataset, scheme: str) -> List[Tuple[np.ndarray, np.ndarray]]:
    """(train_idx, test_idx) per fold in group order; checks coverage and leakage."""
    groups = ds.groups(scheme)
    n_groups = len(np.unique(groups))
    if n_groups < 2:
        what = 'trials' if scheme == 'TO' else 'operators'
        raise InsufficientFolds(f"{scheme} cross-validation needs >= 2 {what}, got {n_groups}")
    splits = list(LeaveOneGroupOut().split(np.zeros(len(ds)), groups=groups))
    seen = np.zeros(len(ds), dtype=int)
    for train_idx, test_idx in splits:
        _check_fold(ds, scheme, train_idx, test_idx)
        seen[test_idx] += 1
    if not np.all(seen == 1):
        raise AssertionError("cross-validation test rows do not cover the dataset exactly once")
    return splits


def _run_fold(ds: Dataset, classifier: str, features: Tuple[str, ...], svm_cfg: SvmConfig,
              hmm_cfg: HmmConfig, fold: int, train_idx, test_idx) -> FoldResult:
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    if classifier == 'svm':
        model = train_svm(train, features, svm_cfg)
        preds = model.predict(test.matrix(features))
    else:
        clf = HmmClassifier(hmm_cfg.n_states, hmm_cfg.max_iter, hmm_cfg.tol, hmm_cfg.var_floor, hmm_cfg.seed)
        clf.fit([r.sequences for r in train.rows], train.labels)
        preds = [predict_hmm(clf.model_, list(r.sequences)) for r in test.rows]
    return FoldResult(
        fold=fold,
        test_keys=tuple(r.key for r in test.rows),
        train_keys=tuple(r.key for r in train.rows),
        actual=tuple(r.label for r in test.rows),
        predicted=tuple(p.label for p in preds),
        margins=tuple(p.margin for p in preds),
    )


def cross_validate(ds: Dataset, scheme: str, classifier: str = 'svm',
                   features: Sequence[str] = FEATURE_NAMES, svm_cfg: SvmConfig = SvmConfig(),
                   hmm_cfg: HmmConfig = HmmConfig(), workers: int = 1) -> CrossValidation:
    """
    TO holds out one row (trial, operator) per fold; UO holds out every row
    of one operator. Standardization and training run inside each fold.
    Folds may run in parallel and are merged in fold order.

    Raises:
        InsufficientFolds, SingleClass, EmptyClass
    """
    if scheme not in SCHEMES:
        raise InputError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if classifier not in CLASSIFIERS:
        raise InputError(f"classifier must be one of {CLASSIFIERS}, got {classifier!r}")
    features = tuple(features)
    splits = folds(ds, scheme)

    jobs = [(i, tr, te) for i, (tr, te) in enumerate(splits)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda job: _run_fold(ds, classifier, features, svm_cfg, hmm_cfg, *job), jobs))
    else:
        results = [_run_fold(ds, classifier, features, svm_cfg, hmm_cfg, *job) for job in jobs]

    actual = [a for r in results for a in r.actual]
    predicted = [p for r in results for p in r.predicted]
    cm = ConfusionMatrix.from_predictions(actual, predicted)
    logger.info("%s/%s %s: %d folds, micro %.1f%%", scheme, classifier, '+'.join(features),
                len(results), metrics(cm)[0])
    return CrossValidation(scheme, classifier, features, cm, tuple(results))


# =============================================================================
# Metrics
# =============================================================================

def metrics(cm: ConfusionMatrix) -> Tuple[float, float]:
    """
    (micro %, macro %). Micro is the diagonal over the total; macro is the
    mean per-class true-positive rate over classes with support.

    Raises:
        EmptyMatrix: total is zero
    """
    arr = cm.as_array()
    total = arr.sum()
    if total <= 0:
        raise EmptyMatrix("Confusion matrix is empty; nothing was classified")
    micro = 100.0 * np.trace(arr) / total
    support = arr.sum(axis=0)
    present = support > 0
    if not np.all(present):
        logger.warning("macro accuracy over %d class(es) with support only", int(present.sum()))
    tpr = np.diag(arr)[present] / support[present]
    return float(micro), float(100.0 * tpr.mean())


def subset_table(ds: Dataset, scheme: str, classifier: str = 'svm', svm_cfg: SvmConfig = SvmConfig(),
                 hmm_cfg: HmmConfig = HmmConfig(), workers: int = 1) -> Dict:
    """
    One column per feature subset (Only SCC, Only SDC, Only CR, Overall) for
    the SVM; the HMM works on stroke sequences and yields a single column.
    """
    if classifier == 'hmm':
        return {'sequence': cross_validate(ds, scheme, 'hmm', FEATURE_NAMES, svm_cfg, hmm_cfg, workers).to_dict()}
    return {name: cross_validate(ds, scheme, 'svm', subset, svm_cfg, hmm_cfg, workers).to_dict()
            for name, subset in FEATURE_SUBSETS.items()}


__all__ = [
    "SCHEMA",
    "CLASSES",
    "SCHEMES",
    "CLASSIFIERS",
    "FEATURE_SUBSETS",
    "SingleClass",
    "EmptyClass",
    "InsufficientFolds",
    "EmptyMatrix",
    "SvmConfig",
    "HmmConfig",
    "DatasetRow",
    "Dataset",
    "Prediction",
    "SvmModel",
    "HmmModel",
    "ConfusionMatrix",
    "FoldResult",
    "CrossValidation",
    "HmmClassifier",
    "train_svm",
    "predict_svm",
    "train_hmm",
    "predict_hmm",
    "folds",
    "cross_validate",
    "metrics",
    "subset_table",
]
