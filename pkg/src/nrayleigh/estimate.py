"""Empirical LCR, AFD and CDF from sampled envelopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from nrayleigh.simulate import SamplePath


class Source(str, Enum):
    EXACT = "exact"
    APPROX = "approx"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ThresholdGrid:
    """Absolute amplitude thresholds plus the reference used for dB labels."""

    values: tuple[float, ...]
    normalization: float = 1.0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("threshold grid is empty")
        if any(not v > 0 for v in vals):
            raise ValueError("thresholds must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("thresholds must be strictly ascending")
        if not self.normalization > 0:
            raise ValueError("normalization must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_db(cls, db_values: Sequence[float], normalization: float = 1.0) -> ThresholdGrid:
        return cls(tuple(normalization * 10.0 ** (d / 20.0) for d in db_values), normalization)

    @classmethod
    def default(cls, normalization: float = 1.0) -> ThresholdGrid:
        return cls.from_db(np.linspace(-20.0, 10.0, 31), normalization)

    def __len__(self):
        return len(self.values)

    @property
    def db(self) -> np.ndarray:
        return 20.0 * np.log10(np.asarray(self.values) / self.normalization)


@dataclass
class SecondOrderStats:
    """Per-threshold LCR (1/s), AFD (s; NaN where undefined) and CDF.

    Empirical stats also carry the raw totals needed to pool trials.
    """

    thresholds: ThresholdGrid
    source: Source
    lcr: np.ndarray | None = None
    afd: np.ndarray | None = None
    cdf: np.ndarray | None = None
    crossing_counts: np.ndarray | None = None
    time_below: np.ndarray | None = None
    duration: float | None = None
    lcr_stderr: np.ndarray | None = None
    trials: int = 1


def _check_path(path: SamplePath) -> np.ndarray:
    x = path.samples
    if x.size < 2:
        raise ValueError("sample path needs at least two samples")
    return x


def _downward_crossings(x: np.ndarray, y: float) -> int:
    return int(np.count_nonzero((x[:-1] >= y) & (x[1:] < y)))


def _time_below(x: np.ndarray, y: float, fs: float) -> float:
    a, b = x[:-1], x[1:]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    frac = np.where(hi < y, 1.0, 0.0)
    straddle = (lo < y) & (hi >= y)
    frac[straddle] = (y - lo[straddle]) / (hi[straddle] - lo[straddle])
    return math.fsum(frac) / fs


def empirical_lcr(path: SamplePath, grid: ThresholdGrid) -> SecondOrderStats:
    x = _check_path(path)
    counts = np.array([_downward_crossings(x, y) for y in grid.values])
    return SecondOrderStats(
        grid, Source.EMPIRICAL, lcr=counts / path.duration, crossing_counts=counts,
        duration=path.duration,
    )


def empirical_afd(path: SamplePath, grid: ThresholdGrid) -> SecondOrderStats:
    """Time below each level (linear interpolation between samples) per
    downward crossing. Undefined (NaN) where no crossing is observed."""
    x = _check_path(path)
    counts = np.array([_downward_crossings(x, y) for y in grid.values])
    below = np.array([_time_below(x, y, path.sample_rate) for y in grid.values])
    return SecondOrderStats(
        grid, Source.EMPIRICAL, afd=_safe_ratio(below, counts), crossing_counts=counts,
        time_below=below, duration=path.duration,
    )


def empirical_cdf(path: SamplePath, grid: ThresholdGrid) -> SecondOrderStats:
    x = path.samples
    if x.size == 0:
        raise ValueError("empty sample path")
    xs = np.sort(x)
    cdf = np.searchsorted(xs, np.asarray(grid.values), side="right") / x.size
    return SecondOrderStats(grid, Source.EMPIRICAL, cdf=cdf, duration=path.duration)


def empirical_stats(path: SamplePath, grid: ThresholdGrid) -> SecondOrderStats:
    """LCR, AFD and CDF in one pass over the grid."""
    lcr = empirical_lcr(path, grid)
    afd = empirical_afd(path, grid)
    cdf = empirical_cdf(path, grid)
    return SecondOrderStats(
        grid, Source.EMPIRICAL, lcr=lcr.lcr, afd=afd.afd, cdf=cdf.cdf,
        crossing_counts=lcr.crossing_counts, time_below=afd.time_below, duration=path.duration,
    )


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(num.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def aggregate_trials(stats: Sequence[SecondOrderStats]) -> SecondOrderStats:
    """Pool independent trials: LCR and CDF duration-weighted, AFD as total
    time below over total crossings, LCR standard error across trials."""
    stats = list(stats)
    if not stats:
        raise ValueError("nothing to aggregate")
    grid, source = stats[0].thresholds, stats[0].source
    for s in stats[1:]:
        if s.thresholds != grid:
            raise ValueError("trials use different threshold grids")
        if s.source != source:
            raise ValueError("trials come from different sources")
    if any(s.duration is None for s in stats):
        raise ValueError("aggregation needs per-trial durations")
    if len(stats) == 1:
        return stats[0]

    m = len(grid)
    durations = [s.duration for s in stats]
    total = math.fsum(durations)

    def pooled(attr):
        if any(getattr(s, attr) is None for s in stats):
            return None
        return np.array([math.fsum(getattr(s, attr)[j] for s in stats) for j in range(m)])

    counts = pooled("crossing_counts")
    below = pooled("time_below")
    lcr = cdf = afd = err = None
    if counts is not None:
        lcr = counts / total
        per_trial = np.array([s.crossing_counts / s.duration for s in stats])
        err = per_trial.std(axis=0, ddof=1) / math.sqrt(len(stats))
        counts = counts.astype(np.int64)
    if all(s.cdf is not None for s in stats):
        cdf = np.array([math.fsum(s.cdf[j] * s.duration for s in stats) / total for j in range(m)])
    if below is not None and counts is not None:
        afd = _safe_ratio(below, counts)
    return SecondOrderStats(
        grid, source, lcr=lcr, afd=afd, cdf=cdf, crossing_counts=counts, time_below=below,
        duration=total, lcr_stderr=err, trials=sum(s.trials for s in stats),
    )
