"""Run configuration: flat ``key = value`` files with ``#`` comments."""

from __future__ import annotations

import dataclasses
import math


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line, self.key = line, key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


SCHEMES = ("backward_euler", "crank_nicolson")
DRAG_MODES = ("semi_implicit_lag", "explicit", "off", "linear")
FORCINGS = ("zero", "pattern", "random")
INITS = ("zero", "random", "uniform")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    nx: int
    ny: int
    nz_a: int
    nz_o: int
    dt: float
    t_end: float
    p_s: float = 1.0
    lam: float = 0.0
    scheme: str = "backward_euler"
    picard_tol: float = 1e-11
    picard_max: int = 25
    drag_mode: str = "semi_implicit_lag"
    forcing: str = "zero"
    forcing_amplitude: float = 0.0
    forcing_seed: int = 0
    init: str = "random"
    init_amplitude: float = 1.0
    init_seed: int = 0
    output_every: int = 1
    out_dir: str = "out"

    def to_text(self) -> str:
        """Canonical config text; parse_config(to_text()) == self."""
        lines = []
        for f in dataclasses.fields(self):
            key = _KEY_OF.get(f.name, f.name)
            val = getattr(self, f.name)
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
        return "\n".join(lines) + "\n"


# file key -> field name; "lambda" is a Python keyword
_FIELD_OF = {"lambda": "lam"}
_KEY_OF = {v: k for k, v in _FIELD_OF.items()}
REQUIRED = ("nx", "ny", "nz_a", "nz_o", "dt", "t_end")


def _even4(v):
    return None if v >= 4 and v % 2 == 0 else "must be even, ≥ 4"


def _positive(v):
    return None if v > 0 and math.isfinite(v) else "must be positive"


def _nonneg(v):
    return None if v >= 0 and math.isfinite(v) else "must be ≥ 0"


def _at_least(n):
    return lambda v: None if v >= n else f"must be ≥ {n}"


def _choice(options):
    return lambda v: None if v in options else "must be one of " + ", ".join(options)


_RULES = {
    "nx": (int, _even4), "ny": (int, _even4),
    "nz_a": (int, _at_least(3)), "nz_o": (int, _at_least(3)),
    "dt": (float, _positive), "t_end": (float, _nonneg),
    "p_s": (float, _positive), "lam": (float, _nonneg),
    "scheme": (str, _choice(SCHEMES)),
    "picard_tol": (float, _positive), "picard_max": (int, _at_least(1)),
    "drag_mode": (str, _choice(DRAG_MODES)),
    "forcing": (str, _choice(FORCINGS)), "forcing_amplitude": (float, _nonneg), "forcing_seed": (int, _nonneg),
    "init": (str, _choice(INITS)), "init_amplitude": (float, _nonneg), "init_seed": (int, _nonneg),
    "output_every": (int, _at_least(1)), "out_dir": (str, lambda v: None if v else "must not be empty"),
}


def _convert(kind, raw: str):
    if kind is int:
        return int(raw, 10)
    if kind is float:
        return float(raw)
    return raw


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    lines = text.splitlines()
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        name = _FIELD_OF.get(key, key)
        if name not in _RULES or key in _KEY_OF:
            raise ConfigError(f"unknown key {key!r}", lineno, key)
        if name in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, key)
        kind, rule = _RULES[name]
        try:
            val = _convert(kind, raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}", lineno, key) from None
        msg = rule(val)
        if msg:
            raise ConfigError(f"{key} {msg} (got {raw})", lineno, key)
        values[name] = val
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", len(lines) + 1, key)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
