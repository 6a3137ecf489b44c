"""Photon propagation from emitter to detector clicks.

Each emitted photon picks an output port from the circuit's single-photon
distribution, survives the loss budget, and is timestamped with Gaussian
jitter. Dark clicks are homogeneous Poisson processes. The emission stream is
cut into fixed time blocks, each with its own RNG substream, so blocks can be
processed in any order (or in parallel) with identical results.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import OutputDistribution
from .emitter import EmissionStream
from .errors import DomainError, ModelError

DEFAULT_BLOCK_NS = 1.0e7
DEFAULT_DEAD_TIME_NS = 50.0
DETECTORS = ("e", "f", "g", "h")

PHOTON, DARK = 0, 1
_TRUTH_NAMES = ("photon", "dark")


def _per_detector(value, n, name):
    if np.ndim(value) == 0:
        vals = (float(value),) * n
    else:
        vals = tuple(float(v) for v in value)
        if len(vals) != n:
            raise DomainError(f"{name} needs {n} values, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class ChannelParams:
    source_to_chip_efficiency: float = 1.0
    chip_transmission: float = 1.0
    detector_efficiency: tuple = (1.0, 1.0, 1.0, 1.0)
    jitter_sigma_ns: tuple = (0.0, 0.0, 0.0, 0.0)
    dark_rate_per_ns: tuple = (0.0, 0.0, 0.0, 0.0)
    dead_time_ns: tuple = (0.0, 0.0, 0.0, 0.0)
    n_detectors: int = 4

    def __post_init__(self):
        n = self.n_detectors
        for name in ("detector_efficiency", "jitter_sigma_ns", "dark_rate_per_ns", "dead_time_ns"):
            object.__setattr__(self, name, _per_detector(getattr(self, name), n, name))
        for name in ("source_to_chip_efficiency", "chip_transmission"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v!r}")
        if any(not 0.0 <= v <= 1.0 for v in self.detector_efficiency):
            raise DomainError(f"detector_efficiency must be in [0, 1], got {self.detector_efficiency}")
        for name in ("jitter_sigma_ns", "dark_rate_per_ns", "dead_time_ns"):
            if any(not (math.isfinite(v) and v >= 0) for v in getattr(self, name)):
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def common_survival(self) -> float:
        return self.source_to_chip_efficiency * self.chip_transmission


@dataclass(frozen=True, eq=False)
class DetectorRecord:
    detector_id: str
    clicks_ns: np.ndarray
    truth: np.ndarray = field(default=None)
    # Index of the emission that caused each click; -1 for dark clicks.
    source: np.ndarray = field(default=None)

    def __post_init__(self):
        clicks = np.asarray(self.clicks_ns, dtype=float)
        n = clicks.size
        truth = np.full(n, PHOTON, dtype=np.int8) if self.truth is None else np.asarray(self.truth, dtype=np.int8)
        source = np.full(n, -1, dtype=np.int64) if self.source is None else np.asarray(self.source, dtype=np.int64)
        for a in (clicks, truth, source):
            a.setflags(write=False)
        object.__setattr__(self, "clicks_ns", clicks)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "source", source)

    def __len__(self):
        return self.clicks_ns.size

    @property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.clicks_ns) >= 0))


def apply_dead_time(times: np.ndarray, dead_time_ns: float) -> np.ndarray:
    """Indices of clicks kept by a non-paralysable detector with the given dead time."""
    if dead_time_ns <= 0 or times.size == 0:
        return np.arange(times.size)
    keep = []
    next_ok = -np.inf
    for i, t in enumerate(times.tolist()):
        if t >= next_ok:
            keep.append(i)
            next_ok = t + dead_time_ns
    return np.asarray(keep, dtype=np.int64)


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


def _propagate_block(block, t_lo, t_hi, times, first_index, cum, ch, seed):
    rng = _block_rng(seed, block)
    n_det = len(cum)
    out = []
    ports = np.searchsorted(cum, rng.random(times.size), side="right")
    survive = rng.random(times.size)
    jitter = rng.standard_normal(times.size)
    eff = np.asarray(ch.detector_efficiency + (0.0,))  # port == n_det means lost
    alive = survive < ch.common_survival * eff[ports]
    for d in range(n_det):
        sel = np.flatnonzero(alive & (ports == d))
        t = times[sel] + ch.jitter_sigma_ns[d] * jitter[sel]
        n_dark = rng.poisson(ch.dark_rate_per_ns[d] * (t_hi - t_lo))
        dark = t_lo + (t_hi - t_lo) * rng.random(n_dark)
        out.append((
            np.concatenate([t, dark]),
            np.concatenate([np.full(sel.size, PHOTON, np.int8), np.full(n_dark, DARK, np.int8)]),
            np.concatenate([sel + first_index, np.full(n_dark, -1, np.int64)]),
        ))
    return out


def propagate(emissions: EmissionStream, dist: OutputDistribution, ch: ChannelParams, seed: int,
              block_ns: float = DEFAULT_BLOCK_NS, labels: Sequence[str] | None = None,
              workers: int = 1) -> list:
    """Turn emissions into per-detector click records.

    Results depend only on ``(seed, block_ns)``; ``workers`` changes speed only.
    """
    probs = np.asarray(dist.probabilities, dtype=float)
    if probs.sum() > 1.0 + 1e-9:
        raise ModelError(f"output probabilities sum to {probs.sum():.12g} > 1")
    if probs.size != ch.n_detectors:
        raise ModelError(f"distribution has {probs.size} modes but channel has {ch.n_detectors} detectors")
    if labels is None:
        labels = dist.labels if len(dist.labels) == probs.size else DETECTORS[: probs.size]
    if not block_ns > 0:
        raise DomainError("block_ns must be > 0")

    cum = np.cumsum(probs)
    times = np.asarray(emissions.times_ns)
    duration = emissions.duration_ns
    n_blocks = max(1, math.ceil(duration / block_ns))
    bounds = np.searchsorted(times, block_ns * np.arange(n_blocks + 1), side="left")
    bounds[-1] = times.size

    def run(b):
        lo, hi = bounds[b], bounds[b + 1]
        t_hi = min(duration, (b + 1) * block_ns)
        return _propagate_block(b, b * block_ns, t_hi, times[lo:hi], lo, cum, ch, seed)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]

    records = []
    for d, label in enumerate(labels):
        t = np.concatenate([p[d][0] for p in parts])
        truth = np.concatenate([p[d][1] for p in parts])
        src = np.concatenate([p[d][2] for p in parts])
        order = np.argsort(t, kind="stable")
        t, truth, src = t[order], truth[order], src[order]
        keep = apply_dead_time(t, ch.dead_time_ns[d])
        records.append(DetectorRecord(label, t[keep], truth[keep], src[keep]))
    return records


def click_rate(records: Sequence[DetectorRecord], window_ns: float, start_ns: float = 0.0) -> dict:
    """Clicks per ns for each detector, counting clicks in ``[start, start + window)``."""
    if not window_ns > 0:
        raise DomainError("window_ns must be > 0")
    rates = {}
    for rec in records:
        c = rec.clicks_ns
        n = np.searchsorted(c, start_ns + window_ns, side="left") - np.searchsorted(c, start_ns, side="left")
        rates[rec.detector_id] = n / window_ns
    return rates


def records_to_csv(records: Sequence[DetectorRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["detector", "click_ns", "truth"])
        for rec in records:
            for t, tag in zip(rec.clicks_ns.tolist(), rec.truth.tolist()):
                w.writerow([rec.detector_id, repr(t), _TRUTH_NAMES[tag]])
