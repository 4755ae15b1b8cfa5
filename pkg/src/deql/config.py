"""Run configuration: flat ``key=value`` files merged under command-line flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import DEQLError

SPEC_VERSION = "1.0"


class ConfigError(DEQLError):
    pass


def _floats(s):
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s in (None, "", "none") else int(s)


def _opt_float(s):
    return None if s in (None, "", "none") else float(s)


def _opt_str(s):
    return None if s in (None, "") else str(s)


@dataclass(frozen=True)
class RunConfig:
    # data
    input: str | None = None
    data: str | None = None
    model: str | None = None
    out: str = "out"
    seed: int = 0
    mode: str = "strong"
    test_fraction: float = 0.2
    holdout_fraction: float = 0.2
    drop_zero_items: bool = False
    # model
    variant: str = "l2"
    a: float = 1.0
    b: float = 0.5
    p: float = 0.3
    lam: float = 0.0
    rank_k: int | None = None
    solver: str = "auto"
    # evaluation
    k: tuple[int, ...] = (20,)
    with_mse: bool = False
    hist_bins: int = 20
    hist_range: tuple[float, ...] = (-0.1, 0.3)
    # grid search; a stays fixed
    b_grid: tuple[float, ...] = ()
    lambda_grid: tuple[float, ...] = ()
    p_grid: tuple[float, ...] = ()
    validation_fraction: float | None = None
    # verify
    n: int = 30
    m: int = 50
    mc_samples: int = 20_000
    inject_fault: bool = False
    # bench
    n_list: tuple[int, ...] = (100, 200, 400)
    density: float | None = None
    m_factor: float = 2.0
    repeats: int = 3

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            name = key.replace("-", "_")
            name = "lam" if name == "lambda" else name
            if name not in names:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kwargs[name] = _CONVERTERS[name](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        cfg = cls(**kwargs)
        if any(k < 1 for k in cfg.k):
            raise ConfigError("K values must be >= 1")
        if cfg.solver not in ("direct", "fast", "auto"):
            raise ConfigError(f"solver must be direct, fast or auto, got {cfg.solver!r}")
        if len(cfg.hist_range) != 2:
            raise ConfigError("hist_range needs two values")
        return cfg


_CONVERTERS = {
    "input": _opt_str, "data": _opt_str, "model": _opt_str, "out": str, "seed": int,
    "mode": str, "test_fraction": float, "holdout_fraction": float, "drop_zero_items": _bool,
    "variant": str, "a": float, "b": float, "p": float, "lam": float, "rank_k": _opt_int,
    "solver": str, "k": _ints, "with_mse": _bool, "hist_bins": int, "hist_range": _floats,
    "b_grid": _floats, "lambda_grid": _floats, "p_grid": _floats,
    "validation_fraction": _opt_float, "n": int, "m": int, "mc_samples": int,
    "inject_fault": _bool, "n_list": _ints, "density": _opt_float, "m_factor": float, "repeats": int,
}


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma-separated."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out
