"""Experiment configuration: per-experiment parameter dataclasses, TOML files and CLI overrides"""

import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Type, Union, get_args, get_origin

from ..core.errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class PointwiseValidationParams:
    n: int = 100
    datasets: int = 100
    m_values: Tuple[int, ...] = (1, 2)
    grid_resolution: Tuple[int, ...] = (41, 41)


@dataclass(frozen=True)
class PhaseTransitionParams:
    n: int = 100
    datasets: int = 100
    m_values: Tuple[int, ...] = (1, 2, 3, 4)
    grid_resolution: Tuple[int, ...] = (41, 41)
    tolerance: float = 1e-10


@dataclass(frozen=True)
class CauchyDecayParams:
    n: int = 100
    datasets: int = 100
    m_values: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    grid_points: int = 121


@dataclass(frozen=True)
class TrainGmmParams:
    n: int = 1000
    data_dim: int = 10
    embed_dim: int = 16
    mean_scale: float = 2.0
    pool_size: int = 50
    pool_scale: float = 0.3
    objective: str = "lr_pair"
    iterations: int = 10000
    learning_rate: float = 1e-3
    theta_batch: int = 16
    checkpoint_every: int = 500
    activation: str = "tanh"
    encoder_hidden: Tuple[int, ...] = (64, 64)
    decoder_hidden: Tuple[int, ...] = (128, 64)


@dataclass(frozen=True)
class ClinicalTrialParams:
    sites: int = 5
    n_per_site: int = 200
    beta_grid: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    sigma: float = 1.0
    n_sims: int = 500
    alpha: float = 0.05


EXPERIMENTS: Dict[str, Type[Any]] = {
    "pointwise_validation": PointwiseValidationParams,
    "phase_transition": PhaseTransitionParams,
    "cauchy_decay": CauchyDecayParams,
    "train_gmm": TrainGmmParams,
    "clinical_trial": ClinicalTrialParams,
}

ExperimentParams = Union[
    PointwiseValidationParams, PhaseTransitionParams, CauchyDecayParams, TrainGmmParams, ClinicalTrialParams
]


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved experiment run"""

    experiment: str
    seed: int
    out_dir: Path
    params: ExperimentParams

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "params": asdict(self.params),
        }


_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _coerce_scalar(key: str, value: Any, target: type) -> Any:
    try:
        if target is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if target is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(f"not an integer: {value!r}")
            return int(value)
        if target is float:
            if isinstance(value, bool):
                raise ValueError(f"not a number: {value!r}")
            return float(value)
        if target is str:
            if not isinstance(value, str):
                raise ValueError(f"not a string: {value!r}")
            return value
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from e
    raise ConfigError(f"{key}: unsupported type {target}")


def coerce_value(key: str, value: Any, target: Any) -> Any:
    """
    Convert a TOML or command-line value to a parameter field's type

    Tuples accept a list or a comma/space separated string.
    """
    if get_origin(target) is tuple:
        element = get_args(target)[0]
        if isinstance(value, str):
            items: Sequence[Any] = [part for part in value.replace(",", " ").split() if part]
        elif isinstance(value, (list, tuple)):
            items = value
        else:
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return tuple(_coerce_scalar(key, item, element) for item in items)
    return _coerce_scalar(key, value, target)


def apply_overrides(params: Any, overrides: Mapping[str, Any]) -> Any:
    """Return params with overrides applied; unknown keys raise ConfigError"""
    types = {f.name: f.type for f in fields(params)}
    changes = {}
    for raw_key, value in overrides.items():
        key = raw_key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"unknown parameter '{raw_key}' for {type(params).__name__}; known: {sorted(types)}")
        changes[key] = coerce_value(key, value, types[key])
    return replace(params, **changes)


def load_toml(path: Union[str, Path]) -> Dict[str, Any]:
    """Read the single [experiment] table of a TOML file"""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    extra = sorted(k for k in doc if k != "experiment")
    if extra:
        raise ConfigError(f"{path}: only an [experiment] table is allowed, found {extra}")
    table = doc.get("experiment")
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: missing [experiment] table")
    return table


def parse_override_args(args: List[str]) -> Dict[str, str]:
    """Turn ['--key', 'value', '--other=1'] into {'key': 'value', 'other': '1'}"""
    overrides: Dict[str, str] = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--") or len(arg) <= 2:
            raise ConfigError(f"unexpected argument {arg!r}")
        if "=" in arg:
            key, value = arg[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(args):
                raise ConfigError(f"missing value for {arg}")
            key, value = arg[2:], args[i + 1]
            i += 2
        overrides[key] = value
    return overrides


def load_experiment_config(
    experiment: str,
    seed: int,
    out_dir: Union[str, Path],
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Resolve an experiment's parameters: defaults, then the TOML file, then overrides

    Args:
        experiment: Experiment name
        seed: Master seed
        out_dir: Output directory
        config_path: Optional TOML file with an [experiment] table
        overrides: Optional key/value overrides (command line)

    Returns:
        ExperimentConfig
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
    params = EXPERIMENTS[experiment]()
    if config_path is not None:
        table = load_toml(config_path)
        if "seed" in table:
            raise ConfigError(f"{config_path}: the seed is set with --seed on the command line, not in the config file")
        params = apply_overrides(params, table)
    if overrides:
        params = apply_overrides(params, overrides)
    return ExperimentConfig(experiment, int(seed), Path(out_dir), params)
