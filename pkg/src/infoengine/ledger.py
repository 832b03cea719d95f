"""Per-round log-capital (or per-cycle work) records and their serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class Ledger:
    """Sequence of per-round increments in nats (equivalently k_B T units).

    ``cumulative[i]`` is the log of the capital after round ``i + 1`` starting
    from one dollar, so an empty ledger corresponds to ``S_0 = 1``.
    """

    increments: np.ndarray
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float).reshape(-1)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def rounds(self) -> int:
        return self.increments.size

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    @property
    def total(self) -> float:
        return float(self.increments.sum()) if self.rounds else 0.0

    def mean(self) -> float:
        return float(self.increments.mean()) if self.rounds else 0.0

    def std_error(self) -> float:
        if self.rounds < 2:
            return math.inf
        return float(self.increments.std(ddof=1) / math.sqrt(self.rounds))

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "increment_nats", "cumulative_nats"])
            for i, (inc, cum) in enumerate(zip(self.increments, self.cumulative), start=1):
                w.writerow([i, format_float(inc), format_float(cum)])
        return path

    def write_metadata(self, path, **extra) -> Path:
        path = Path(path)
        meta = {"seed": self.seed, "rounds": self.rounds, **self.metadata, **extra}
        path.write_text(dumps_json(meta) + "\n")
        return path

    @classmethod
    def read_csv(cls, path, seed=None) -> "Ledger":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["increment_nats"]) for r in rows]), seed=seed)


def format_float(v) -> str:
    # repr round-trips and spells infinities as 'inf' / '-inf'
    return repr(float(v))


def encode_json(obj):
    """Replace non-finite floats with ``None`` plus an ``<key>_infinite`` flag."""
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                out[k] = None
                out[f"{k}_infinite"] = "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
            else:
                out[k] = encode_json(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [encode_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_json(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(encode_json(obj), indent=2, sort_keys=True, allow_nan=False)


def draw_pairs(joint_mass: np.ndarray, rounds: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``rounds`` i.i.d. index pairs ``(x, y)`` from a 2-D mass table."""
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    rng = np.random.default_rng(seed)
    flat = np.asarray(joint_mass, dtype=float).ravel()
    idx = rng.choice(flat.size, size=rounds, p=flat / flat.sum())
    return np.unravel_index(idx, joint_mass.shape)


def log_payoffs(table: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(table)
