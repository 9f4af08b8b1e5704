"""Run configuration: every pipeline hyperparameter with validated defaults and
a flat ``key = value`` file format that round-trips exactly."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

DEFAULT_CB_SWEEP = (0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0)


@dataclass
class RunConfig:
    c_p: float = 1.0
    c_n: float = 0.5
    c_b: float = 0.1
    r: float = 0.5
    ps_ns_ratio: float = 10.0
    weight_fn: str = "log"
    kernel: str = "linear"
    rbf_bandwidth: float = 1.0
    path_cap: int = 6
    k_max: int = 0                 # 0 = auto from qualifying-pair floor
    min_pairs_per_k: int = 30
    seed: int = 7
    max_unlabeled: int = 1000
    eval_extra_missing: int = 20000
    spath_lengths: tuple = (2, 3)
    cb_sweep_values: tuple = DEFAULT_CB_SWEEP
    rating_threshold: int | None = None
    threads: int = 1
    solver_tol: float = 1e-5
    max_sweeps: int = 10000
    figures: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.c_p <= 0:
            raise ValueError("c_p must be positive")
        if self.c_n < 0 or self.c_b < 0:
            raise ValueError("c_n and c_b must be nonnegative")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.ps_ns_ratio < 1.0:
            raise ValueError("ps_ns_ratio must be >= 1")
        if self.weight_fn not in ("log", "uniform"):
            raise ValueError(f"unknown weight_fn {self.weight_fn!r}")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.rbf_bandwidth <= 0:
            raise ValueError("rbf_bandwidth must be positive")
        if self.path_cap < 1:
            raise ValueError("path_cap must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.max_unlabeled < 0 or self.eval_extra_missing < 0:
            raise ValueError("sample caps must be nonnegative")
        if self.solver_tol <= 0 or self.max_sweeps < 1:
            raise ValueError("solver controls must be positive")
        self.spath_lengths = tuple(int(v) for v in self.spath_lengths)
        self.cb_sweep_values = tuple(float(v) for v in self.cb_sweep_values)
        if any(v < 1 for v in self.spath_lengths):
            raise ValueError("spath lengths must be >= 1")
        if any(v < 0 for v in self.cb_sweep_values):
            raise ValueError("cb sweep values must be nonnegative")

    def replace(self, **kwargs) -> "RunConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kwargs)
        return RunConfig(**vals)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        vals = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            vals[key] = _parse(key, value)
        return cls(**vals)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


_TUPLE_KEYS = {"spath_lengths", "cb_sweep_values"}
_INT_KEYS = {
    "path_cap", "k_max", "min_pairs_per_k", "seed", "max_unlabeled",
    "eval_extra_missing", "threads", "max_sweeps",
}
_STR_KEYS = {"weight_fn", "kernel"}
_BOOL_KEYS = {"figures"}
_OPT_INT_KEYS = {"rating_threshold"}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(key, value):
    if key in _TUPLE_KEYS:
        parts = [p for p in value.split(",") if p.strip()]
        return tuple(float(p) if key == "cb_sweep_values" else int(p) for p in parts)
    if key in _OPT_INT_KEYS:
        return None if value.lower() == "none" else int(value)
    if key in _BOOL_KEYS:
        if value.lower() not in ("true", "false"):
            raise ValueError(f"{key} must be true or false")
        return value.lower() == "true"
    if key in _INT_KEYS:
        return int(value)
    if key in _STR_KEYS:
        return value
    return float(value)
