"""Experiment configuration loaded from JSON.

A config names the model, where the data come from (a file or a simulation
block), the relaxation schedule, the annealing knobs, the stopping rule, the
solver seed and the output directory. Unknown keys are errors.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from .engine import RelaxationSchedule, StoppingRule
from .solvers import AnnealingConfig

MODELS = ("competing_risks", "gaussian_mixture")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CompetingRisksSimulation:
    m: int
    N: int
    pi: tuple
    p: tuple
    q: tuple
    seed: int = 0
    sacrifice_fraction: float = 0.2


@dataclass(frozen=True)
class MixtureSimulation:
    n: int
    weights: tuple
    means: tuple
    variance: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "competing_risks"
    data_path: Optional[str] = None
    simulate: Optional[Union[CompetingRisksSimulation, MixtureSimulation]] = None
    schedule: RelaxationSchedule = RelaxationSchedule()
    solver: AnnealingConfig = AnnealingConfig()
    stop: StoppingRule = StoppingRule()
    seed: int = 0
    output_dir: str = "output"
    augmented: bool = True
    n_components: int = 2
    known_variance: float = 1.0
    initial_point: Optional[tuple] = None
    betas: tuple = (100.0, 1.0, 0.01)
    seeds: tuple = tuple(range(1, 11))

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if (self.data_path is None) == (self.simulate is None):
            raise ConfigError("exactly one of data_path and simulate must be given")
        want = CompetingRisksSimulation if self.model == "competing_risks" else MixtureSimulation
        if self.simulate is not None and not isinstance(self.simulate, want):
            raise ConfigError(f"simulate block does not match model {self.model!r}")
        if self.data_path is not None and not Path(self.data_path).is_file():
            raise ConfigError(f"data file not found: {self.data_path}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.betas or not self.seeds:
            raise ConfigError("betas and seeds must be nonempty")
        if any(not b >= 0 for b in self.betas):
            raise ConfigError("betas must be nonnegative")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["solver"].pop("seed")
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in out.items()}


def _build(cls, block, where: str, exclude=()):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in block.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    """Build a config; relative ``data_path`` values resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    kw = dict(raw)
    model = kw.get("model", "competing_risks")
    if kw.get("simulate") is not None:
        sim_cls = CompetingRisksSimulation if model == "competing_risks" else MixtureSimulation
        kw["simulate"] = _build(sim_cls, kw["simulate"], "simulate")
    for key, cls, exclude in (("schedule", RelaxationSchedule, ()),
                              ("solver", AnnealingConfig, ("seed",)),
                              ("stop", StoppingRule, ())):
        if key in kw:
            kw[key] = _build(cls, kw[key], key, exclude)
    for key in ("initial_point", "betas", "seeds"):
        if isinstance(kw.get(key), list):
            kw[key] = tuple(kw[key])
    if kw.get("data_path") is not None and base_dir is not None:
        kw["data_path"] = str(Path(base_dir) / kw["data_path"])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return config_from_dict(raw, base_dir=path.parent)


def save_config(path, config: ExperimentConfig):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
