"""Experiment configuration files (TOML).

Layout::

    kind = "moment"          # optional, must match the subcommand
    seed = 7                 # optional, overridden by --seed

    [params]
    beta = 2.0
    d = 2
    p = 1
    sigma = 1.0
    z = [0.0, 0.0]           # optional

    [budget]                 # all optional
    n_samples = 10000        # replicates or samples (N)
    n_steps = 1024           # time cells per path
    K = 512                  # radial grid points of the variational solver
    restarts = 4             # optimizer restarts

    [moment]                 # options of the selected kind, see KIND_OPTIONS
    orders = [1, 2]
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .params import ModelParams, validate_params

__all__ = ["KINDS", "KIND_OPTIONS", "Budget", "ExperimentConfig", "load_config", "parse_config"]

KINDS = ("simulate", "moment", "variational", "tail", "scaling-test", "sobolev-check")

_POS_INT = "positive integer"
_NONNEG_INT = "nonnegative integer"
_POS_REAL = "positive real"
_REAL = "real"
_BOOL = "boolean"
_STR = "string"
_INT_LIST = "list of positive integers"
_STR_LIST = "list of strings"
_REAL_LIST = "list of reals"
_OPT_POS_REAL = "positive real or absent"

# Option name -> (type tag, default) for each kind; table name in brackets.
KIND_OPTIONS: Dict[str, Dict[str, tuple]] = {
    "simulate": {
        "horizon": (_POS_REAL, 1.0),
        "bin_width": (_POS_REAL, 0.05),
        "search_radius": (_POS_REAL, 1.0),
        "coarse_step": (_POS_REAL, 0.1),
    },
    "moment": {
        "orders": (_INT_LIST, [1, 2]),
        "methods": (_STR_LIST, ["fourier", "path"]),
        "fourier_samples": (_POS_INT, 200_000),
    },
    "variational": {
        "theta": (_POS_REAL, 1.0),
        "duality": (_BOOL, True),
        "n_basis": (_POS_INT, 40),
        "n_freq": (_POS_INT, 600),
    },
    "tail": {
        "rho": (_OPT_POS_REAL, None),
        "rho_file": (_STR, ""),
        "tolerance_factor": (_POS_REAL, 2.0),
        "eps_ratio": (_POS_REAL, 0.5),
        "moment_orders": (_NONNEG_INT, 3),
        "moment_samples": (_POS_INT, 200_000),
    },
    "scaling-test": {
        "t_factor": (_POS_REAL, 4.0),
        "exponent_shift": (_REAL, 0.0),
        "repetitions": (_POS_INT, 1),
    },
    "sobolev-check": {
        "trials": (_POS_INT, 100),
        "n": (_POS_INT, 64),
        "half_width": (_POS_REAL, 1.0),
    },
}

_TABLE = {"scaling-test": "scaling", "sobolev-check": "sobolev"}


def table_name(kind: str) -> str:
    return _TABLE.get(kind, kind)


@dataclass(frozen=True)
class Budget:
    n_samples: int = 10_000
    n_steps: int = 1024
    K: int = 512
    restarts: int = 4

    def to_record(self) -> dict:
        return {"n_samples": self.n_samples, "n_steps": self.n_steps, "K": self.K,
                "restarts": self.restarts}


@dataclass
class ExperimentConfig:
    """Validated configuration of one run."""

    kind: str
    params: ModelParams
    budget: Budget = field(default_factory=Budget)
    seed: int = 0
    options: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_record(),
            "budget": self.budget.to_record(),
            "seed": self.seed,
            "options": copy.deepcopy(self.options),
        }


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check(path: str, tag: str, v):
    ok = {
        _POS_INT: lambda x: _is_int(x) and x > 0,
        _NONNEG_INT: lambda x: _is_int(x) and x >= 0,
        _POS_REAL: lambda x: _is_real(x) and x > 0,
        _REAL: _is_real,
        _BOOL: lambda x: isinstance(x, bool),
        _STR: lambda x: isinstance(x, str),
        _INT_LIST: lambda x: isinstance(x, list) and len(x) > 0 and all(_is_int(e) and e > 0 for e in x),
        _STR_LIST: lambda x: isinstance(x, list) and all(isinstance(e, str) for e in x),
        _REAL_LIST: lambda x: isinstance(x, list) and all(_is_real(e) for e in x),
        _OPT_POS_REAL: lambda x: x is None or (_is_real(x) and x > 0),
    }[tag](v)
    if not ok:
        raise ConfigError(f"{path}: expected {tag}, got {v!r}")
    if _is_real(v) and tag in (_POS_REAL, _REAL, _OPT_POS_REAL):
        return float(v)
    return v


def parse_config(data: Dict[str, Any], kind: Optional[str] = None, seed: Optional[int] = None,
                 source: Optional[str] = None) -> ExperimentConfig:
    """Validate a decoded config mapping.

    Raises
    ------
    ConfigError
        With the dotted path of the offending field.
    """
    data = dict(data)
    file_kind = data.pop("kind", None)
    if file_kind is not None and file_kind not in KINDS:
        raise ConfigError(f"kind: unknown experiment kind {file_kind!r}")
    if kind is None:
        kind = file_kind
    if kind is None:
        raise ConfigError("kind: missing")
    if kind not in KINDS:
        raise ConfigError(f"kind: unknown experiment kind {kind!r}")
    if file_kind is not None and file_kind != kind:
        raise ConfigError(f"kind: file declares {file_kind!r} but {kind!r} was requested")

    file_seed = data.pop("seed", 0)
    if not (_is_int(file_seed) and file_seed >= 0):
        raise ConfigError(f"seed: expected nonnegative integer, got {file_seed!r}")
    seed = file_seed if seed is None else seed
    if not (_is_int(seed) and seed >= 0):
        raise ConfigError(f"seed: expected nonnegative integer, got {seed!r}")

    raw_p = data.pop("params", None)
    if not isinstance(raw_p, dict):
        raise ConfigError("params: missing table")
    for key in ("beta", "d", "p", "sigma"):
        if key not in raw_p:
            raise ConfigError(f"params.{key}: missing")
    extra = set(raw_p) - {"beta", "d", "p", "sigma", "z"}
    if extra:
        raise ConfigError(f"params.{sorted(extra)[0]}: unknown key")
    for key in ("beta", "sigma"):
        _check(f"params.{key}", _REAL, raw_p[key])
    for key in ("d", "p"):
        _check(f"params.{key}", _POS_INT, raw_p[key])
    if "z" in raw_p:
        _check("params.z", _REAL_LIST, raw_p["z"])
    try:
        params = validate_params(raw_p["beta"], raw_p["d"], raw_p["p"], raw_p["sigma"], raw_p.get("z"))
    except ConfigError as exc:
        raise ConfigError(f"params: {exc}") from None

    raw_b = data.pop("budget", {})
    if not isinstance(raw_b, dict):
        raise ConfigError("budget: expected a table")
    bvals = Budget().to_record()
    for key, v in raw_b.items():
        if key not in bvals:
            raise ConfigError(f"budget.{key}: unknown key")
        bvals[key] = _check(f"budget.{key}", _POS_INT, v)
    budget = Budget(**bvals)

    spec = KIND_OPTIONS[kind]
    tname = table_name(kind)
    raw_o = data.pop(tname, {})
    if not isinstance(raw_o, dict):
        raise ConfigError(f"{tname}: expected a table")
    options = {k: copy.deepcopy(dflt) for k, (_, dflt) in spec.items()}
    for key, v in raw_o.items():
        if key not in spec:
            raise ConfigError(f"{tname}.{key}: unknown key")
        options[key] = _check(f"{tname}.{key}", spec[key][0], v)
    for other in KIND_OPTIONS:
        data.pop(table_name(other), None)
    if data:
        raise ConfigError(f"{sorted(data)[0]}: unknown key")
    if kind == "moment":
        bad = [m for m in options["methods"] if m not in ("fourier", "path")]
        if bad:
            raise ConfigError(f"moment.methods: unknown method {bad[0]!r}")
        if max(options["orders"]) > 8:
            raise ConfigError("moment.orders: orders above 8 are not supported")
    if budget.n_samples < 2:
        raise ConfigError("budget.n_samples: expected at least 2")
    return ExperimentConfig(kind, params, budget, int(seed), options, source)


def load_config(path, kind: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Read and validate a TOML config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{p}: invalid TOML: {exc}") from None
    return parse_config(data, kind, seed, str(p))
