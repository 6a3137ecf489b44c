"""Coincidence histograms, g2 estimation, fringe fitting and visibility."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StructuralError

NORMALIZATIONS = ("poisson", "plateau")


def _as_times(x):
    if hasattr(x, "clicks_ns"):
        return np.asarray(x.clicks_ns, dtype=float)
    return np.asarray(x, dtype=float)


def histogram_edges(bin_width_ns: float, max_tau_ns: float) -> np.ndarray:
    if not (bin_width_ns > 0 and max_tau_ns > 0):
        raise DomainError("bin width and max tau must be positive")
    ratio = max_tau_ns / bin_width_ns
    n_half = round(ratio)
    if n_half < 1 or abs(ratio - n_half) > 1e-9 * max(1.0, ratio):
        raise DomainError(f"max_tau {max_tau_ns} is not a multiple of bin width {bin_width_ns}")
    return bin_width_ns * np.arange(-n_half, n_half + 1, dtype=float)


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    """Coincidences binned by delay ``t_stop - t_start`` over ``[-T, T)``."""

    edges: np.ndarray
    counts: np.ndarray
    n_start: int
    n_stop: int
    duration_ns: float
    normalization: str = "poisson"

    @property
    def bin_width_ns(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def max_tau_ns(self) -> float:
        return float(self.edges[-1])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def valid(self) -> bool:
        """False when normalisation is undefined (an empty input stream)."""
        return self.n_start > 0 and self.n_stop > 0 and self.duration_ns > 0

    @property
    def accidental_level(self) -> float:
        """Expected counts per bin for uncorrelated streams with the same rates."""
        return self.n_start * self.n_stop * self.bin_width_ns / self.duration_ns

    @property
    def normalized(self) -> np.ndarray:
        if not self.valid:
            return np.full(self.counts.shape, np.nan)
        if self.normalization == "plateau":
            return self.counts / plateau_level(self)
        return self.counts / self.accidental_level

    def g2_zero(self) -> float:
        """g2 averaged over the two bins flanking zero delay."""
        mid = self.counts.size // 2
        return float(self.normalized[mid - 1: mid + 1].mean())

    def g2_zero_error(self) -> float:
        """Poisson standard error of ``g2_zero``; at least one count is assumed so it never reads 0."""
        if not self.valid:
            return math.nan
        mid = self.counts.size // 2
        level = plateau_level(self) if self.normalization == "plateau" else self.accidental_level
        return math.sqrt(max(int(self.counts[mid - 1: mid + 1].sum()), 1)) / (2 * level)

    def mirrored(self) -> "CorrelationHistogram":
        return replace(self, counts=self.counts[::-1].copy(), n_start=self.n_stop, n_stop=self.n_start)

    def merge(self, other: "CorrelationHistogram") -> "CorrelationHistogram":
        """Combine histograms of consecutive, non-overlapping acquisition segments."""
        if not np.array_equal(self.edges, other.edges):
            raise StructuralError("cannot merge histograms with different binning")
        return replace(self, counts=self.counts + other.counts, n_start=self.n_start + other.n_start,
                       n_stop=self.n_stop + other.n_stop, duration_ns=self.duration_ns + other.duration_ns)

    def to_csv(self, path):
        g2 = self.normalized
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_ns", "counts", "g2"])
            for tau, c, g in zip(self.centers.tolist(), self.counts.tolist(), g2.tolist()):
                w.writerow([repr(tau), c, "nan" if math.isnan(g) else repr(g)])


def plateau_level(hist: CorrelationHistogram, outer_fraction: float = 0.25) -> float:
    """Mean counts in the outermost bins, where the correlation has decayed."""
    n = hist.counts.size
    k = max(1, int(n * outer_fraction / 2))
    level = np.concatenate([hist.counts[:k], hist.counts[-k:]]).mean()
    return level if level > 0 else np.nan


def _check_sorted(t, name):
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise StructuralError(f"{name} timestamps are not sorted")


def _pair_counts(a, b, edges):
    # One bin of slack: a +/- T can round differently from b - a, and dt decides below.
    t_max = edges[-1] + (edges[1] - edges[0])
    lo = np.searchsorted(b, a - t_max, side="left")
    hi = np.searchsorted(b, a + t_max, side="right")
    n_pairs = hi - lo
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    total = int(n_pairs.sum())
    if total == 0:
        return counts
    start_idx = np.repeat(np.arange(a.size), n_pairs)
    # Position of each pair within its start's run, then the stop index.
    offset = np.arange(total) - np.repeat(np.cumsum(n_pairs) - n_pairs, n_pairs)
    dt = b[lo[start_idx] + offset] - a[start_idx]
    k = np.searchsorted(edges, dt, side="right") - 1
    k = k[(k >= 0) & (k < counts.size)]
    np.add.at(counts, k, 1)
    return counts


def cross_correlate(a, b, bin_width_ns: float, max_tau_ns: float, duration_ns: float | None = None,
                    normalization: str = "poisson", chunk: int = 200_000) -> CorrelationHistogram:
    """Full (all-pairs) cross-correlation of two sorted click streams.

    ``a`` and ``b`` are DetectorRecords or arrays of timestamps. Without
    ``duration_ns`` the acquisition span is taken from the first to the last
    click of either stream.
    """
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"normalization must be one of {NORMALIZATIONS}")
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "start")
    _check_sorted(tb, "stop")
    edges = histogram_edges(bin_width_ns, max_tau_ns)
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    for i in range(0, ta.size, chunk):
        counts += _pair_counts(ta[i:i + chunk], tb, edges)
    if duration_ns is None:
        both = np.concatenate([ta[:1], ta[-1:], tb[:1], tb[-1:]])
        duration_ns = float(both.max() - both.min()) if both.size else 0.0
    return CorrelationHistogram(edges, counts, int(ta.size), int(tb.size), float(duration_ns), normalization)


def cross_correlate_segments(a, b, bin_width_ns, max_tau_ns, segment_ns, duration_ns,
                             normalization="poisson") -> CorrelationHistogram:
    """Segment-wise correlation merged bin by bin.

    Start clicks are split into time segments of ``segment_ns`` over
    ``[0, duration_ns)`` (the first and last segments are open-ended); each
    segment sees stop clicks up to ``max_tau`` beyond its edges, so the merged
    result equals the one-shot histogram exactly.
    """
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "start")
    _check_sorted(tb, "stop")
    edges = histogram_edges(bin_width_ns, max_tau_ns)
    n_seg = max(1, math.ceil(duration_ns / segment_ns))
    cuts = segment_ns * np.arange(n_seg + 1, dtype=float)
    cuts[0], cuts[-1] = -np.inf, np.inf
    total = None
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        i0, i1 = np.searchsorted(ta, [s0, s1], side="left")
        j0, j1 = np.searchsorted(tb, [s0 - max_tau_ns, s1 + max_tau_ns], side="left")
        k0, k1 = np.searchsorted(tb, [s0, s1], side="left")
        seg_len = min(s1, duration_ns) - max(s0, 0.0)
        part = CorrelationHistogram(edges, _pair_counts(ta[i0:i1], tb[j0:j1], edges), int(i1 - i0),
                                    int(k1 - k0), float(seg_len), normalization)
        total = part if total is None else total.merge(part)
    return total


def gaussian_convolve(g2: Callable, sigma_ns: float, tau_grid, n_kernel: int = 2401) -> np.ndarray:
    """Convolve ``g2`` with a unit-area Gaussian of width ``sigma_ns``.

    Trapezoidal quadrature on a kernel truncated at +-6 sigma; the discrete
    kernel is renormalised so constants pass through unchanged.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if sigma_ns < 0:
        raise DomainError("sigma must be >= 0")
    if sigma_ns == 0:
        return np.asarray(g2(tau), dtype=float) * np.ones_like(tau)
    s = np.linspace(-6.0 * sigma_ns, 6.0 * sigma_ns, n_kernel)
    w = np.exp(-0.5 * (s / sigma_ns) ** 2)
    w /= np.trapezoid(w, s)
    vals = np.asarray(g2(tau[..., None] - s), dtype=float)
    return np.trapezoid(vals * w, s, axis=-1)


def jitter_convolve_oracle(g2: Callable, sigma_pair_ns: float, tau_grid) -> np.ndarray:
    """Detector-jitter-blurred g2 on ``tau_grid``.

    ``sigma_pair_ns`` is the jitter of the click *difference*, i.e.
    ``sqrt(s1**2 + s2**2)`` for two detectors with RMS jitters ``s1``, ``s2``.
    """
    return gaussian_convolve(g2, sigma_pair_ns, tau_grid)


def pair_sigma(sigma_a: float, sigma_b: float) -> float:
    return math.hypot(sigma_a, sigma_b)


def bin_average(fn: Callable, edges, samples: int = 64) -> np.ndarray:
    """Average of ``fn`` over each bin (midpoint rule)."""
    edges = np.asarray(edges, dtype=float)
    frac = (np.arange(samples) + 0.5) / samples
    pts = edges[:-1, None] + np.diff(edges)[:, None] * frac
    return np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape).mean(axis=1)


def visibility(i_max: float, i_min: float) -> float:
    """Fringe visibility ``(I_max - I_min) / (I_max + I_min)``; NaN when both are zero."""
    if i_min < 0 or i_max < i_min:
        raise DomainError(f"need i_max >= i_min >= 0, got ({i_max}, {i_min})")
    if i_max + i_min == 0:
        return math.nan
    return (i_max - i_min) / (i_max + i_min)


def mzi_visibility(eta1: float, eta2: float, port: str = "dark") -> float:
    """Visibility of a Mach-Zehnder output port for splitter reflectivities eta1, eta2.

    The "dark" port (dark at zero phase for balanced splitters) mixes the
    reflect-reflect and cross-cross paths; the "bright" port mixes the two
    reflect-cross paths.
    """
    r1, r2, t1, t2 = eta1, eta2, 1.0 - eta1, 1.0 - eta2
    cross = 2.0 * math.sqrt(r1 * r2 * t1 * t2)
    if port == "dark":
        return cross / (r1 * r2 + t1 * t2)
    if port == "bright":
        return cross / (r1 * t2 + r2 * t1)
    raise DomainError(f"port must be 'dark' or 'bright', got {port!r}")


@dataclass(frozen=True)
class FringeFit:
    amplitude: float
    offset: float
    phase_origin: float
    visibility: float
    residual_norm: float


def fit_fringe(phis, rates) -> FringeFit:
    """Least-squares fit of ``offset + amplitude * cos(phi - phase_origin)``."""
    phis = np.asarray(phis, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if phis.shape != rates.shape:
        raise StructuralError("phis and rates differ in length")
    distinct = np.unique(np.round(np.mod(phis, 2 * np.pi), 12))
    if distinct.size < 3 or phis.size < 4:
        raise DomainError("fringe fit needs at least 4 samples over 3 distinct phases")
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    coef, _, rank, _ = np.linalg.lstsq(design, rates, rcond=None)
    if rank < 3:
        raise DomainError("degenerate fringe design matrix")
    offset, c, s = coef
    amplitude = math.hypot(c, s)
    origin = math.atan2(s, c)
    vis = min(1.0, max(0.0, amplitude / offset)) if offset > 0 else 0.0
    resid = float(np.linalg.norm(design @ coef - rates))
    return FringeFit(amplitude, float(offset), origin, vis, resid)


@dataclass(frozen=True, eq=False)
class FringeResult:
    phis: np.ndarray
    rates: dict  # detector -> rates per phi
    fits: dict = None

    def extrema(self, det):
        r = np.asarray(self.rates[det])
        return float(r.max()), float(r.min())

    def visibility(self, det) -> float:
        return visibility(*self.extrema(det))

    def fitted_visibility(self, det) -> float:
        return self.fits[det].visibility

    def to_csv(self, path, detectors: Sequence[str] = ("e", "f", "g", "h")):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi_rad"] + [f"rate_{d}" for d in detectors])
            for i, phi in enumerate(self.phis.tolist()):
                w.writerow([repr(phi)] + [repr(float(self.rates[d][i])) for d in detectors])
