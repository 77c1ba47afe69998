"""Experiment configuration: flat ``key = <json value>`` files."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .resolvent import DEFAULT_C_PRIME, GridSpec
from .symbols import PolynomialSymbol, load_symbol


@dataclass(frozen=True)
class ExperimentConfig:
    symbol: Any = None  # inline symbol document or path to a JSON file
    h: Optional[float] = None
    h_list: tuple = ()
    gamma: float = 0.1
    C_prime: float = DEFAULT_C_PRIME
    allow_preasymptotic: bool = False
    grid: Optional[dict] = None  # {"re": [lo, hi], "im": [lo, hi], "n": [n_re, n_im]}
    N: int = 64
    N_max: int = 1024
    doubling_tol: float = 1e-3
    eig_tol: float = 1e-6
    count: int = 10
    z_path: Any = "admissible"
    angle: float = math.pi / 4
    expect: Optional[str] = None
    windows: int = 3
    slope_tol: float = 0.3
    trials: int = 200
    det_trials: int = 1000
    zero_trials: int = 1000
    quad_base: int = 64
    quad_tol: float = 1e-8
    seed: int = 0
    out: str = "semispec_out"
    base_dir: str = field(default=".", compare=False)

    def validate(self) -> "ExperimentConfig":
        if not 0 < self.gamma < 1 / 8:
            raise ConfigError(f"gamma={self.gamma} outside (0, 1/8)")
        if self.C_prime <= 0:
            raise ConfigError("C_prime must be positive")
        hl = list(self.h_list)
        if any(h <= 0 for h in hl) or any(a <= b for a, b in zip(hl, hl[1:])):
            raise ConfigError("h_list must be positive and strictly decreasing")
        if self.h is not None and self.h <= 0:
            raise ConfigError("h must be positive")
        for name in ("doubling_tol", "eig_tol", "slope_tol", "quad_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.N < 2 or self.N_max < self.N:
            raise ConfigError("need 2 <= N <= N_max")
        if self.count < 1 or self.trials < 1 or self.windows < 1:
            raise ConfigError("count, trials and windows must be positive")
        if self.expect not in (None, "polynomial", "superpolynomial"):
            raise ConfigError(f"unknown expectation {self.expect!r}")
        if self.grid is not None:
            self.grid_spec()
        return self

    def load_symbol(self) -> PolynomialSymbol:
        if self.symbol is None:
            raise ConfigError("no symbol given")
        src = self.symbol
        if isinstance(src, str) and not src.strip().startswith("{"):
            p = Path(src)
            if not p.is_absolute():
                p = Path(self.base_dir) / p
            src = p
        return load_symbol(src)

    def grid_spec(self) -> GridSpec:
        g = self.grid or {}
        try:
            (r0, r1), (i0, i1), (nr, ni) = g["re"], g["im"], g["n"]
            return GridSpec(float(r0), float(r1), float(i0), float(i1), int(nr), int(ni))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed grid specification: {exc}") from exc

    def canonical(self) -> dict:
        doc = asdict(self)
        doc.pop("base_dir")
        doc["h_list"] = list(self.h_list)
        try:
            doc["symbol"] = self.load_symbol().to_dict()
        except (ConfigError, OSError, ValueError):
            pass
        return doc

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


_FIELDS = {f.name for f in fields(ExperimentConfig)} - {"base_dir"}


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = json.loads(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: value for {key!r} is not valid JSON ({exc.msg})") from exc
    if "h_list" in values:
        values["h_list"] = tuple(float(h) for h in values["h_list"])
    return ExperimentConfig(base_dir=base_dir, **values)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p.parent))
