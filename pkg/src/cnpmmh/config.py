"""Experiment configuration: a flat ``key = value`` text format.

Values are JSON literals (numbers, lists, ``true``/``false``, quoted
strings); an unquoted value that is not valid JSON is read as a string.
Lines starting with ``#`` are comments. Keys not given take the defaults of
the experiment kind.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .models import (INIT_AS_PRINTED, INIT_STATIONARY, IS_SCALES, LEVERAGE_CORRELATION,
                     LEVERAGE_COVARIANCE, VARIANCE_AS_PRINTED)
from .peskun import SIGMA_PHI_GRID, SIGMA_Z_GRID

KINDS = ("peskun_scan", "iid_corr_scan", "iid_heatmap", "sv_posterior")


class ConfigError(ValueError):
    pass


def _grid(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


SV_COV_SHAPE = [[384, 3, -5, -16], [3, 1, -3, -2], [-5, -3, 12, 3], [-16, -2, 3, 65]]
SV_PROPOSAL_COV = (2.562 ** 2 / 4 * 1e-4 * np.array(SV_COV_SHAPE, dtype=float)).tolist()


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    replicates: int = 32
    workers: int = 1
    out_dir: str = "results"

    # data and model
    T: int = 10
    true_theta: list = field(default_factory=lambda: [0.5, 0.3, 0.1])
    data_path: str = ""
    n_particles: int = 10
    is_scale: str = VARIANCE_AS_PRINTED
    mu_prior_low: float = -1.0
    mu_prior_high: float = 1.0
    init_variance: str = INIT_AS_PRINTED
    leverage: str = LEVERAGE_CORRELATION

    # sampler
    n_iter: int = 10000
    burn_in: int = 1000
    theta0: list = field(default_factory=lambda: [0.5])
    proposal_cov: list = field(default_factory=lambda: [[0.01]])
    sigma_u: float = 0.5
    alpha: float = 0.0
    init_retries: int = 100
    store_u: bool = False

    # scans
    sigma_u_grid: list = field(default_factory=list)
    alpha_grid: list = field(default_factory=list)
    n_pairs: int = 2000
    n_std_draws: int = 5000
    sigma_phi_grid: list = field(default_factory=lambda: list(SIGMA_PHI_GRID))
    sigma_z_grid: list = field(default_factory=lambda: list(SIGMA_Z_GRID))
    z_min: float = -4.0
    z_margin: float = 4.0
    L: int = 1000

    def __post_init__(self):
        self.validate()

    @classmethod
    def defaults(cls, kind: str, **overrides) -> "ExperimentConfig":
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        values = dict(KIND_DEFAULTS[kind])
        values.update(overrides)
        return cls(kind=kind, **values)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for name, lo in (("replicates", 1), ("workers", 1), ("T", 1), ("n_particles", 1),
                         ("n_iter", 1), ("init_retries", 1), ("n_pairs", 3),
                         ("n_std_draws", 2), ("L", 2)):
            if getattr(self, name) < lo:
                raise ConfigError(f"{name} must be >= {lo}")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("burn_in must lie in [0, n_iter)")
        if self.is_scale not in IS_SCALES:
            raise ConfigError(f"is_scale must be one of {IS_SCALES}")
        if self.init_variance not in (INIT_AS_PRINTED, INIT_STATIONARY):
            raise ConfigError("init_variance must be 'as_printed' or 'stationary'")
        if self.leverage not in (LEVERAGE_CORRELATION, LEVERAGE_COVARIANCE):
            raise ConfigError("leverage must be 'correlation' or 'covariance'")
        for name in ("sigma_u", "alpha"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        for name in ("sigma_u_grid", "alpha_grid"):
            if any(not 0.0 <= v <= 1.0 for v in getattr(self, name)):
                raise ConfigError(f"{name} values must lie in [0, 1]")
        if any(not 0.0 < v <= 1.0 for v in self.sigma_z_grid):
            raise ConfigError("sigma_z_grid values must lie in (0, 1]")
        if any(v < 0.0 for v in self.sigma_phi_grid):
            raise ConfigError("sigma_phi_grid values must be non-negative")
        if not self.mu_prior_low < self.mu_prior_high:
            raise ConfigError("mu_prior_low must be below mu_prior_high")
        cov = np.asarray(self.proposal_cov, dtype=float)
        if cov.shape != (len(self.theta0), len(self.theta0)):
            raise ConfigError("proposal_cov must be a p x p matrix matching theta0")
        if self.data_path and not os.path.isfile(self.data_path):
            raise ConfigError(f"data_path {self.data_path!r} does not exist")

    # -- text round trip ---------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{f.name} = {json.dumps(getattr(self, f.name))}"
                 for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, kind: str | None = None) -> "ExperimentConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = _parse_value(value)
        file_kind = raw.pop("kind", None)
        if kind and file_kind and file_kind != kind:
            raise ConfigError(f"config is for {file_kind!r}, not {kind!r}")
        kind = kind or file_kind
        if kind is None:
            raise ConfigError("config does not name an experiment kind")
        return cls.defaults(kind, **_coerce(raw))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("'\"")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            out[key] = _coerce_one(kind, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


def _coerce_one(kind: str, value):
    if kind == "bool":
        if not isinstance(value, bool):
            raise TypeError(f"expected true/false, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not float(value).is_integer():
            raise TypeError(f"expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not math.isfinite(float(value)):
            raise TypeError(f"expected a finite number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value
    if kind == "list":
        if not isinstance(value, list):
            raise TypeError(f"expected a list, got {value!r}")
        return value
    raise TypeError(f"unsupported field type {kind}")


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_text(fh.read(), kind)


KIND_DEFAULTS = {
    "peskun_scan": {},
    "iid_corr_scan": {"sigma_u_grid": _grid(0.0, 1.0, 0.05)},
    "iid_heatmap": {
        "sigma_u_grid": _grid(0.0, 1.0, 0.025),
        "alpha_grid": _grid(0.0, 1.0, 0.025),
    },
    "sv_posterior": {
        "T": 747,
        "true_theta": [0.19, 0.98, 0.18, -0.70],
        "n_particles": 50,
        "theta0": [0.23, 0.98, 0.18, -0.72],
        "proposal_cov": SV_PROPOSAL_COV,
        "sigma_u": 0.55,
    },
}
