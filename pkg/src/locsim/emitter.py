"""Two-level single-photon emitter under continuous-wave pumping.

Each emission cycle is an excitation wait ~ Exp(pump_rate) followed by a
radiative decay wait ~ Exp(1/lifetime). The emitter is therefore empty right
after every photon, which is what produces antibunching.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Rate sum (pump + decay) that puts the g2 dip's half-maximum at |tau| = 2 ns,
# i.e. a 4 ns FWHM dip. Lifetime is a calibration choice, not a measured value;
# it must exceed 1/FWHM_4NS_RATE_SUM (about 2.89 ns) for the pump rate to stay >= 0.
FWHM_4NS_RATE_SUM = math.log(2.0) / 2.0
DEFAULT_LIFETIME_NS = 3.0
DEFAULT_PUMP_RATE = FWHM_4NS_RATE_SUM - 1.0 / DEFAULT_LIFETIME_NS

_CHUNK = 1 << 18


@dataclass(frozen=True)
class EmitterParams:
    lifetime_ns: float = DEFAULT_LIFETIME_NS
    pump_rate_per_ns: float = DEFAULT_PUMP_RATE
    blink_on_rate_per_ns: float = 0.0
    blink_off_rate_per_ns: float = 0.0
    collection_efficiency: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lifetime_ns) and self.lifetime_ns > 0):
            raise DomainError(f"lifetime_ns must be > 0, got {self.lifetime_ns!r}")
        for name in ("pump_rate_per_ns", "blink_on_rate_per_ns", "blink_off_rate_per_ns"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be >= 0, got {v!r}")
        if not 0.0 <= self.collection_efficiency <= 1.0:
            raise DomainError(f"collection_efficiency must be in [0, 1], got {self.collection_efficiency!r}")
        if (self.blink_on_rate_per_ns > 0) != (self.blink_off_rate_per_ns > 0):
            raise DomainError("blinking needs both on and off rates, or neither")

    @property
    def decay_rate(self) -> float:
        return 1.0 / self.lifetime_ns

    @property
    def rate_sum(self) -> float:
        return self.pump_rate_per_ns + self.decay_rate

    @property
    def blinking(self) -> bool:
        return self.blink_on_rate_per_ns > 0

    @property
    def duty_cycle(self) -> float:
        if not self.blinking:
            return 1.0
        on, off = self.blink_on_rate_per_ns, self.blink_off_rate_per_ns
        return on / (on + off)

    def emission_rate(self) -> float:
        """Steady-state rate of collected photons per ns."""
        if self.pump_rate_per_ns == 0:
            return 0.0
        return self.pump_rate_per_ns * self.decay_rate / self.rate_sum * self.collection_efficiency * self.duty_cycle

    @classmethod
    def for_dip_fwhm(cls, fwhm_ns: float, lifetime_ns: float, **kw) -> "EmitterParams":
        """Choose the pump rate so the antibunching dip has the requested FWHM."""
        rate_sum = 2.0 * math.log(2.0) / fwhm_ns
        pump = rate_sum - 1.0 / lifetime_ns
        if pump < 0:
            raise DomainError(
                f"a {fwhm_ns} ns dip needs lifetime >= {1.0 / rate_sum:.4g} ns, got {lifetime_ns}")
        return cls(lifetime_ns=lifetime_ns, pump_rate_per_ns=pump, **kw)


@dataclass(frozen=True, eq=False)
class EmissionStream:
    times_ns: np.ndarray
    duration_ns: float
    seed: int

    def __len__(self):
        return len(self.times_ns)

    @property
    def rate(self) -> float:
        return len(self.times_ns) / self.duration_ns

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["emission_ns"])
            w.writerows([repr(float(t))] for t in self.times_ns)


def _positive_exponential(rng, scale, n):
    x = rng.exponential(scale, n)
    # Exp draws can underflow to exactly zero; keep gaps strictly positive.
    return np.where(x > 0, x, np.finfo(float).tiny)


def _collected_times(p: EmitterParams, duration_ns: float, rng) -> np.ndarray:
    """Times of collected photons.

    With collection efficiency ``c`` the gap between collected photons spans
    K ~ Geometric(c) emission cycles, so it is Gamma(K, 1/pump) + Gamma(K, lifetime);
    drawing that directly is exact and avoids simulating discarded photons.
    """
    if p.pump_rate_per_ns == 0 or p.collection_efficiency == 0:
        return np.empty(0)
    eff = p.collection_efficiency
    mean_gap = (1.0 / p.pump_rate_per_ns + p.lifetime_ns) / eff
    chunks = []
    t0 = 0.0
    while True:
        n = int(min(_CHUNK, max(1024, 1.2 * (duration_ns - t0) / mean_gap + 64)))
        if eff == 1.0:
            gaps = _positive_exponential(rng, 1.0 / p.pump_rate_per_ns, n)
            gaps += _positive_exponential(rng, p.lifetime_ns, n)
        else:
            cycles = rng.geometric(eff, n)
            gaps = rng.gamma(cycles, 1.0 / p.pump_rate_per_ns) + rng.gamma(cycles, p.lifetime_ns)
            gaps = np.where(gaps > 0, gaps, np.finfo(float).tiny)
        times = t0 + np.cumsum(gaps)
        if times[-1] > duration_ns:
            chunks.append(times[times <= duration_ns])
            break
        chunks.append(times)
        t0 = times[-1]
    return np.concatenate(chunks)


def telegraph_on_intervals(on_rate, off_rate, duration_ns, rng) -> np.ndarray:
    """ON intervals ``[[start, stop], ...]`` of a stationary two-state telegraph process."""
    on = rng.random() < on_rate / (on_rate + off_rate)
    edges = [0.0]
    states = [on]
    t = 0.0
    while t < duration_ns:
        t += rng.exponential(1.0 / (off_rate if on else on_rate))
        on = not on
        edges.append(min(t, duration_ns))
        states.append(on)
    edges = np.asarray(edges)
    starts = edges[:-1][np.asarray(states[:-1])]
    stops = edges[1:][np.asarray(states[:-1])]
    return np.column_stack([starts, stops])


def emit_stream(p: EmitterParams, duration_ns: float, seed: int) -> EmissionStream:
    if not (math.isfinite(duration_ns) and duration_ns > 0):
        raise DomainError(f"duration_ns must be > 0, got {duration_ns!r}")
    rng = np.random.default_rng(seed)
    times = _collected_times(p, duration_ns, rng)
    if p.blinking and times.size:
        on = telegraph_on_intervals(p.blink_on_rate_per_ns, p.blink_off_rate_per_ns, duration_ns, rng)
        idx = np.searchsorted(on[:, 0], times, side="right") - 1
        keep = (idx >= 0) & (times < on[np.maximum(idx, 0), 1])
        times = times[keep]
    times.setflags(write=False)
    return EmissionStream(times, float(duration_ns), seed)


def g2_analytic(tau_ns, p: EmitterParams):
    """Normalised intensity correlation of the emitter at delay ``tau_ns``.

    Blinking multiplies the antibunching term by the telegraph bunching factor
    ``1 + (off/on) exp(-(on + off)|tau|)``.
    """
    tau = np.abs(np.asarray(tau_ns, dtype=float))
    g2 = -np.expm1(-p.rate_sum * tau)
    if p.blinking:
        on, off = p.blink_on_rate_per_ns, p.blink_off_rate_per_ns
        g2 = g2 * (1.0 + off / on * np.exp(-(on + off) * tau))
    return g2 if g2.ndim else float(g2)


def dip_fwhm(p: EmitterParams) -> float:
    """Full width of the non-blinking dip at g2 = 1/2."""
    return 2.0 * math.log(2.0) / p.rate_sum
