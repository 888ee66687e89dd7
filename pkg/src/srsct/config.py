"""Solver and experiment configuration objects."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class SolverConfig:
    """All weights, penalties, tolerances and iteration caps in one place.

    Weights: `data_weight` multiplies the sinogram misfit, `tv_weight` the
    total variation of each membership column, `tikhonov_weight` the squared
    gradient of the reconstruction (the model-16 variant; model-9 forces it
    to zero). `tv_split_penalty` and `simplex_split_penalty` are the two
    quadratic penalties of the membership ADMM. All stopping rules are
    relative-change tests in the Frobenius norm over the full iterate.
    """

    data_weight: float = 1.0
    tv_weight: float = 1.0
    tikhonov_weight: float = 0.0
    tv_split_penalty: float = 1.0
    simplex_split_penalty: float = 1.0
    simplex_floor: float = 1e-4
    outer_tol: float = 1e-4
    outer_max: int = 200
    cgls_tol: float = 1e-4
    cgls_max: int = 100
    admm_tol: float = 1e-4
    admm_max: int = 50
    bregman_tol: float = 1e-2
    bregman_max: int = 200
    bregman_penalty_scale: float = 2.0

    def __post_init__(self):
        if self.data_weight <= 0:
            raise ValueError("data_weight must be positive")
        for name in ("tv_weight", "tikhonov_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("tv_split_penalty", "simplex_split_penalty", "simplex_floor",
                     "outer_tol", "cgls_tol", "admm_tol", "bregman_tol",
                     "bregman_penalty_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("outer_max", "cgls_max", "admm_max", "bregman_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    def without_tikhonov(self) -> "SolverConfig":
        return replace(self, tikhonov_weight=0.0)


@dataclass
class ClassPrior:
    """Per-class Gaussian prior: means and strictly positive standard deviations."""

    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        self.means = np.atleast_1d(np.asarray(self.means, dtype=np.float64))
        self.std_devs = np.atleast_1d(np.asarray(self.std_devs, dtype=np.float64))
        if self.means.shape != self.std_devs.shape:
            raise ValueError("means and std_devs must have equal length")
        if np.any(self.std_devs <= 0):
            raise ValueError("standard deviations must be positive")

    @property
    def n_classes(self) -> int:
        return len(self.means)


VARIANTS = ("model-9", "model-16")

# Parameter sets that reproduce the reference experiments at 64x64.
_PIECEWISE_DEFAULTS = dict(
    noise_level=0.05, prior_sigma=0.1,
    data_weight=0.2, tv_weight=1.0, tikhonov_weight=1.0,
    tv_split_penalty=1.0, simplex_split_penalty=2.0,
)
_SMOOTH_DEFAULTS = dict(
    noise_level=0.01, prior_sigma=0.05,
    data_weight=123.0, tv_weight=0.55, tikhonov_weight=35.0,
    tv_split_penalty=0.6, simplex_split_penalty=0.6,
)


@dataclass
class ExperimentConfig:
    """One experiment: phantom, scan geometry, noise, trials and solver knobs."""

    phantom: str = "piecewise"
    grid_side: int = 64
    detector_pixels: int = 91
    angles: str = "6:6:180"
    noise_level: float = 0.05
    trials: int = 1
    seed: int = 0
    variant: str = "model-16"
    out_dir: str | None = None
    prior_sigma: float = 0.1
    pgm_binary: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.phantom not in ("piecewise", "smooth"):
            raise ValueError(f"unknown phantom kind {self.phantom!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        if len(parse_angles(self.angles)) < 1:
            raise ValueError(f"angle spec {self.angles!r} yields no angles")

    def angle_list(self) -> list[float]:
        return parse_angles(self.angles)


def parse_angles(spec: str) -> list[float]:
    """Expand a `start:step:stop` degree spec into an inclusive angle list."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise ValueError(f"angle spec {spec!r} must be start:step:stop")
    start, step, stop = (float(x) for x in parts)
    if step <= 0:
        raise ValueError("angle step must be positive")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise ValueError(f"angle spec {spec!r} yields no angles")
    return [start + step * k for k in range(count)]


_BOOL_KEYS = {"pgm_binary"}
_INT_KEYS = {"grid_side", "detector_pixels", "trials", "seed",
             "outer_max", "cgls_max", "admm_max", "bregman_max"}
_FLOAT_KEYS = {"noise_level", "prior_sigma", "data_weight", "tv_weight",
               "tikhonov_weight", "tv_split_penalty", "simplex_split_penalty",
               "simplex_floor", "outer_tol", "cgls_tol", "admm_tol",
               "bregman_tol", "bregman_penalty_scale"}
_STR_KEYS = {"phantom", "angles", "variant", "out_dir"}
_SOLVER_KEYS = {
    "data_weight", "tv_weight", "tikhonov_weight", "tv_split_penalty",
    "simplex_split_penalty", "simplex_floor", "outer_tol", "outer_max",
    "cgls_tol", "cgls_max", "admm_tol", "admm_max", "bregman_tol",
    "bregman_max", "bregman_penalty_scale",
}


def parse_config_file(path) -> dict:
    """Read a flat `key = value` file with `#` comments into a raw dict."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {line.strip()!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            raw[key] = value
    return raw


def _convert(key: str, value):
    if isinstance(value, str):
        if key in _BOOL_KEYS:
            return value.lower() in ("1", "true", "yes", "on")
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _STR_KEYS:
            return value
        raise ValueError(f"unknown config key {key!r}")
    return value


def build_experiment_config(file_values: dict | None = None,
                            overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, config-file values and CLI overrides, in that order.

    Phantom-specific defaults (noise, prior sigma, solver weights) apply
    unless explicitly set in the file or on the command line.
    """
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            merged[_check_key(key)] = _convert(key, value)

    phantom = merged.get("phantom", "piecewise")
    defaults = _PIECEWISE_DEFAULTS if phantom == "piecewise" else _SMOOTH_DEFAULTS
    for key, value in defaults.items():
        merged.setdefault(key, value)

    solver_kwargs = {k: merged.pop(k) for k in list(merged) if k in _SOLVER_KEYS}
    solver = SolverConfig(**solver_kwargs)
    return ExperimentConfig(solver=solver, **merged)


def _check_key(key: str) -> str:
    if key not in (_BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS):
        raise ValueError(f"unknown config key {key!r}")
    return key
