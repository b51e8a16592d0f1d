"""
Pipeline configuration

One declarative document holds every module default. Layers, lowest to
highest precedence: assets/default_config.json, command-line overrides,
the user's config file.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional

from septoskill import DEFAULT_CONFIG_PATH
from septoskill.classify import HmmConfig, SvmConfig
from septoskill.features import FeatureConfig
from septoskill.headcomp import HEAD_MODES, HeadModel
from septoskill.strokes import StrokeConfig
from septoskill.synth import SynthConfig
from septoskill.utils import InputError, SeptoskillError, read_text_file

logger = logging.getLogger(__name__)


SCHEMA = """
=== Config API ===

load_config(path=None, overrides=None) -> PipelineConfig
    path: JSON config file (wins over everything)
    overrides: {'head.mode': 'estimate', 'run.seed': 3, ...}

PipelineConfig.validate() -> None        raises ConfigError
PipelineConfig.to_dict() -> Dict
PipelineConfig.head_model() -> HeadModel
"""


# =============================================================================
# Errors
# =============================================================================

class ConfigError(InputError):
    """Unknown key or value outside a module's preconditions."""
    pass


# =============================================================================
# Data Models
# =============================================================================

@dataclass(frozen=True)
class HeadConfig:
    mode: str = 'auto'
    window: float = 2.0
    bracket_deg: float = 15.0
    tolerance_deg: float = 0.01
    min_window_samples: int = 10
    max_gap: float = 0.5
    neck_depth: float = 90.0

    def __post_init__(self):
        if self.mode not in HEAD_MODES:
            raise InputError(f"mode must be one of {HEAD_MODES}, got {self.mode!r}")
        if self.bracket_deg <= 0 or self.tolerance_deg <= 0:
            raise InputError("bracket_deg and tolerance_deg must be > 0")
        if self.min_window_samples < 2:
            raise InputError(f"min_window_samples must be >= 2, got {self.min_window_samples}")
        if self.max_gap <= 0:
            raise InputError(f"max_gap must be > 0, got {self.max_gap}")
        if self.neck_depth < 0:
            raise InputError(f"neck_depth must be >= 0, got {self.neck_depth}")

    def model(self) -> HeadModel:
        return HeadModel('estimated_1dof', None, None, self.window, self.bracket_deg,
                         self.tolerance_deg, self.min_window_samples, self.max_gap, self.neck_depth)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class PipelineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    hmm: HmmConfig = field(default_factory=HmmConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def strokes(self) -> StrokeConfig:
        return self.features.strokes

    def validate(self):
        """Re-run every section's checks; dataclass construction already enforces them."""
        _build(PipelineConfig, self.to_dict(), '')

    def head_model(self) -> HeadModel:
        return self.head.model()

    def to_dict(self) -> Dict:
        return asdict(self)


# =============================================================================
# Loading
# =============================================================================

def _build(cls, data: Any, path: str):
    """Construct dataclass `cls` from nested dicts, naming the offending key on failure."""
    where = path or 'config'
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")

    kwargs = {}
    for name, value in data.items():
        key = f"{path}.{name}" if path else name
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value, key) if sub is not None else value
    try:
        return cls(**kwargs)
    except SeptoskillError as exc:
        raise ConfigError(f"{where}: {exc}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}")


_NESTED = {
    (PipelineConfig, 'features'): FeatureConfig,
    (PipelineConfig, 'head'): HeadConfig,
    (PipelineConfig, 'svm'): SvmConfig,
    (PipelineConfig, 'hmm'): HmmConfig,
    (PipelineConfig, 'synth'): SynthConfig,
    (PipelineConfig, 'run'): RunConfig,
    (FeatureConfig, 'strokes'): StrokeConfig,
}


def _merge(base: Dict, update: Dict) -> Dict:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _dotted(overrides: Dict[str, Any]) -> Dict:
    """{'head.mode': 'x'} -> {'head': {'mode': 'x'}}; None values are skipped."""
    nested: Dict = {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = nested
        parts = dotted.split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return nested


def _read_json(path: str) -> Dict:
    try:
        data = json.loads(read_text_file(path))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Build the effective configuration.

    Raises:
        ConfigError: unreadable file, unknown key or invalid value
    """
    data = asdict(PipelineConfig())
    try:
        data = _merge(data, _read_json(DEFAULT_CONFIG_PATH))
    except ConfigError as exc:
        logger.warning("default config unavailable (%s); using built-in defaults", exc)
    data = _merge(data, _dotted(overrides))
    if path:
        data = _merge(data, _read_json(path))
        logger.info("loaded config file %s", path)
    return _build(PipelineConfig, data, '')


__all__ = [
    "SCHEMA",
    "ConfigError",
    "HeadConfig",
    "RunConfig",
    "PipelineConfig",
    "load_config",
]
