"""The learned item-item matrix and its on-disk format."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError

MAGIC = b"DEQLW001"
SOLVERS = ("direct", "fast", "closed_form")


@dataclass(frozen=True)
class Provenance:
    variant: str
    a: float
    b: float
    p: float
    lam: float
    solver: str
    rank_k: int | None = None
    fallback_columns: tuple[int, ...] = ()

    def to_json(self) -> dict:
        d = {
            "variant": self.variant,
            "a": self.a,
            "b": self.b,
            "p": self.p,
            "lambda": self.lam,
            "solver": self.solver,
            "fallback_columns": list(self.fallback_columns),
        }
        if self.rank_k is not None:
            d["rank_k"] = self.rank_k
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Provenance":
        return cls(d["variant"], d["a"], d["b"], d["p"], d["lambda"], d["solver"],
                   d.get("rank_k"), tuple(d.get("fallback_columns", ())))


@dataclass(frozen=True)
class WeightMatrix:
    w: np.ndarray
    provenance: Provenance
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]


def save_weights(path, model: WeightMatrix) -> None:
    """Write magic, n (u64 LE), n*n float64 LE row-major, JSON trailer, trailer length (u64 LE)."""
    w = np.ascontiguousarray(model.w, dtype="<f8")
    n = w.shape[0]
    if w.shape != (n, n):
        raise ModelFormatError("weight matrix must be square")
    trailer = json.dumps(model.provenance.to_json(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(w.tobytes(order="C"))
        fh.write(trailer)
        fh.write(struct.pack("<Q", len(trailer)))


def load_weights(path) -> WeightMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24 or blob[:8] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic")
    (n,) = struct.unpack_from("<Q", blob, 8)
    (tlen,) = struct.unpack_from("<Q", blob, len(blob) - 8)
    body = 16 + 8 * n * n
    if body + tlen + 8 != len(blob):
        raise ModelFormatError(f"{path}: size mismatch for n={n}, trailer={tlen}")
    w = np.frombuffer(blob, dtype="<f8", count=n * n, offset=16).reshape(n, n).astype(np.float64)
    try:
        meta = json.loads(blob[body:body + tlen].decode("utf-8"))
    except ValueError as exc:
        raise ModelFormatError(f"{path}: unreadable trailer") from exc
    return WeightMatrix(w, Provenance.from_json(meta))
