"""Rank-based discretization of continuous targets onto a 0.0-9.9 scale.

A fitted scale has 101 boundaries and 100 representative values (per-bin
medians of the fitting data). Fitting rank r of n sorted values lands in
bin floor(100*r/n): equal counts when 100 divides n, extras spread
evenly otherwise, and fits with fewer values than bins degenerate by
rank with duplicated boundaries. Boundary values always assign to the
lower bin; out-of-range values clamp to 0.0 / 9.9.
"""

from __future__ import annotations

import json
import math
import statistics
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path

from .errors import NonFinite, TooFewValues

N_BINS = 100


@dataclass(frozen=True)
class BinLabel:
    """A one-decimal answer label in [0.0, 9.9]."""
    value: float

    def __post_init__(self):
        scaled = self.value * 10.0
        nearest = round(scaled)
        if not math.isfinite(scaled) or abs(scaled - nearest) > 1e-9 or not 0 <= nearest <= 99:
            raise ValueError(f"invalid bin label {self.value!r}")
        object.__setattr__(self, "value", nearest / 10.0)

    @property
    def index(self) -> int:
        return int(round(self.value * 10.0))

    def __str__(self) -> str:
        return f"{self.value:.1f}"


@dataclass(frozen=True)
class BinScale:
    task: str
    boundaries: tuple[float, ...]      # 101 ascending thresholds over [min, max]
    representatives: tuple[float, ...]  # 100 per-bin fitting medians
    n_fit: int

    def __post_init__(self):
        if len(self.boundaries) != N_BINS + 1 or len(self.representatives) != N_BINS:
            raise ValueError("malformed bin scale")
        for lo, hi in zip(self.boundaries, self.boundaries[1:]):
            if lo > hi:
                raise ValueError("boundaries not ascending")
        for i, rep in enumerate(self.representatives):
            if not self.boundaries[i] <= rep <= self.boundaries[i + 1]:
                raise ValueError(f"representative {rep} outside bin {i}")

    def as_dict(self) -> dict:
        return {"task": self.task, "boundaries": list(self.boundaries),
                "representatives": list(self.representatives), "n_fit": self.n_fit}

    @classmethod
    def from_dict(cls, d: dict) -> "BinScale":
        return cls(task=d["task"], boundaries=tuple(d["boundaries"]),
                   representatives=tuple(d["representatives"]), n_fit=d["n_fit"])


def fit_bin_scale(values: list[float], task: str, min_values: int = 100) -> BinScale:
    """Fit the 100-bin rank scale to the given values.

    Raises TooFewValues below min_values and NonFinite on NaN/inf input.
    """
    vals = [float(v) for v in values]
    for v in vals:
        if not math.isfinite(v):
            raise NonFinite(f"non-finite fitting value {v!r} for task {task}")
    if len(vals) < max(1, min_values):
        raise TooFewValues(
            f"task {task}: {len(vals)} fitting values, need at least {min_values}")

    s = sorted(vals)
    n = len(s)
    # cuts[i] = first sorted rank belonging to bin >= i, i.e. ceil(n*i/100).
    cuts = [(n * i + N_BINS - 1) // N_BINS for i in range(N_BINS + 1)]

    boundaries = [0.0] * (N_BINS + 1)
    boundaries[0] = s[0]
    boundaries[N_BINS] = s[-1]
    for i in range(1, N_BINS):
        k = cuts[i]
        if k <= 0:
            boundaries[i] = s[0]
        elif k >= n:
            boundaries[i] = s[-1]
        else:
            boundaries[i] = (s[k - 1] + s[k]) / 2.0

    representatives = [0.0] * N_BINS
    for i in range(N_BINS):
        members = s[cuts[i]:cuts[i + 1]]
        if members:
            rep = float(statistics.median(members))
            # Medians of interpolated pairs can exit a degenerate interval
            # only through float rounding; clamp keeps the invariant exact.
            rep = min(max(rep, boundaries[i]), boundaries[i + 1])
        else:
            rep = boundaries[i]
        representatives[i] = rep

    return BinScale(task=task, boundaries=tuple(boundaries),
                    representatives=tuple(representatives), n_fit=n)


def to_bin(scale: BinScale, value: float) -> BinLabel:
    """Map a value to its bin label; monotone, clamping outside [min, max]."""
    v = float(value)
    if not math.isfinite(v):
        raise NonFinite(f"cannot bin non-finite value {value!r}")
    b = scale.boundaries
    if v <= b[0]:
        idx = 0
    elif v > b[N_BINS]:
        idx = N_BINS - 1
    else:
        idx = bisect_left(b, v) - 1
        idx = min(max(idx, 0), N_BINS - 1)
    return BinLabel(idx / 10.0)


def from_bin(scale: BinScale, label: BinLabel | float) -> float:
    """Representative ground-truth value for a bin label."""
    if not isinstance(label, BinLabel):
        label = BinLabel(float(label))
    return scale.representatives[label.index]


def nearest_label(value: float) -> BinLabel:
    """Clamp an arbitrary real to the nearest valid bin label."""
    if not math.isfinite(value):
        raise NonFinite(f"cannot clamp non-finite value {value!r}")
    idx = min(max(int(round(value * 10.0)), 0), 99)
    return BinLabel(idx / 10.0)


def save_scales(scales: dict[str, BinScale], path: Path) -> None:
    payload = {"schema": "svllm-scales/1",
               "scales": {k: sc.as_dict() for k, sc in sorted(scales.items())}}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_scales(path: Path) -> dict[str, BinScale]:
    payload = json.loads(Path(path).read_text())
    return {k: BinScale.from_dict(d) for k, d in payload["scales"].items()}
