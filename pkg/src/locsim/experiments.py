"""The chip experiments: phase-scanned fringes, HBT correlation, and the duality check."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (CorrelationHistogram, FringeResult, bin_average, cross_correlate, fit_fringe,
                       jitter_convolve_oracle, pair_sigma)
from .circuit import output_distribution
from .config import ExperimentConfig
from .detection import click_rate, propagate
from .emitter import EmissionStream, emit_stream, g2_analytic
from .errors import ConfigError
from .netlist import CircuitSpec, elaborate, load_chip, load_netlist

# Tags separating the RNG substreams derived from one master seed.
_EMIT, _DETECT = 0, 1


def substream_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1, np.uint64)[0])


def load_circuit(cfg: ExperimentConfig) -> CircuitSpec:
    return load_netlist(cfg.netlist_path) if cfg.netlist_path else load_chip()


def _bind(spec: CircuitSpec, phi: float) -> dict:
    if len(spec.phase_params) > 1:
        raise ConfigError(f"phase scans need at most one phase parameter, netlist has {spec.phase_params}")
    return {name: phi for name in spec.phase_params}


def distribution(spec: CircuitSpec, input_mode: str, phi: float):
    u = elaborate(spec, _bind(spec, phi))
    return output_distribution(u, spec.input_index(input_mode), spec.output_labels)


def _check_detectors(spec, labels):
    for d in labels:
        if d not in spec.output_labels:
            raise ConfigError(f"unknown detector {d!r}; netlist outputs are {', '.join(spec.output_labels)}")


@dataclass
class Run:
    """One propagated acquisition at a fixed phase."""

    phi: float
    emissions: EmissionStream
    records: list
    rates: dict

    def record(self, label):
        return next(r for r in self.records if r.detector_id == label)


def acquire(cfg: ExperimentConfig, spec: CircuitSpec, phi: float, duration_ns: float, index: int = 0) -> Run:
    dist = distribution(spec, cfg.input_mode, phi)
    emissions = emit_stream(cfg.emitter, duration_ns, substream_seed(cfg.seed, _EMIT, index))
    records = propagate(emissions, dist, cfg.channel, substream_seed(cfg.seed, _DETECT, index),
                        block_ns=cfg.block_ns, labels=spec.output_labels)
    return Run(phi, emissions, records, click_rate(records, duration_ns))


def run_fringe(cfg: ExperimentConfig, spec: CircuitSpec | None = None) -> FringeResult:
    spec = spec or load_circuit(cfg)
    duration = cfg.duration_for(cfg.photons_per_point, cfg.fringe_duration_ns)

    def point(i):
        return acquire(cfg, spec, cfg.phis[i], duration, index=i).rates

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            per_phi = list(pool.map(point, range(len(cfg.phis))))
    else:
        per_phi = [point(i) for i in range(len(cfg.phis))]

    phis = np.asarray(cfg.phis, dtype=float)
    rates = {d: np.array([r[d] for r in per_phi]) for d in spec.output_labels}
    fits = {}
    if np.unique(np.round(np.mod(phis, 2 * np.pi), 12)).size >= 3 and phis.size >= 4:
        fits = {d: fit_fringe(phis, rates[d]) for d in spec.output_labels}
    return FringeResult(phis, rates, fits)


@dataclass
class CorrelationRun:
    pair: tuple
    phi: float
    histogram: CorrelationHistogram
    rates: dict
    oracle: np.ndarray = field(default=None)
    flags: list = field(default_factory=list)

    @property
    def g2_zero(self) -> float:
        return self.histogram.g2_zero()

    @property
    def oracle_g2_zero(self) -> float:
        mid = self.oracle.size // 2
        return float(self.oracle[mid - 1: mid + 1].mean())


def oracle_curve(cfg: ExperimentConfig, spec: CircuitSpec, pair, edges) -> np.ndarray:
    """Bin-averaged analytic g2 blurred by the pair's combined detector jitter."""
    idx = [spec.output_labels.index(d) for d in pair]
    sigma = pair_sigma(*(cfg.channel.jitter_sigma_ns[i] for i in idx))

    def blurred(tau):
        return jitter_convolve_oracle(lambda t: g2_analytic(t, cfg.emitter), sigma, tau)

    return bin_average(blurred, edges, samples=8)


def _correlate(cfg, spec, settings, phi, index) -> CorrelationRun:
    pair = settings["pair"]
    _check_detectors(spec, pair)
    duration = cfg.duration_for(settings.get("n_emissions"), settings.get("duration_ns"))
    run = acquire(cfg, spec, phi, duration, index=index)
    a, b = run.record(pair[0]), run.record(pair[1])
    hist = cross_correlate(a, b, settings["bin_width_ns"], settings["max_tau_ns"], duration_ns=duration,
                           normalization=settings["normalization"])
    flags = [f"detector {d} recorded no clicks" for d, rec in zip(pair, (a, b)) if len(rec) == 0]
    return CorrelationRun(pair, phi, hist, run.rates, oracle_curve(cfg, spec, pair, hist.edges), flags)


def run_hbt(cfg: ExperimentConfig, pair=None, spec: CircuitSpec | None = None) -> CorrelationRun:
    spec = spec or load_circuit(cfg)
    settings = dict(cfg.hbt)
    if pair is not None:
        settings["pair"] = tuple(pair)
    if len(settings["pair"]) != 2 or settings["pair"][0] == settings["pair"][1]:
        raise ConfigError(f"HBT needs two distinct detectors, got {settings['pair']}")
    return _correlate(cfg, spec, settings, settings["phi"], index=0)


@dataclass
class DualityRun:
    correlation: CorrelationRun
    suppressed: str
    reference: str

    @property
    def suppression_ratio(self) -> float:
        r = self.correlation.rates
        ref = r[self.reference]
        return r[self.suppressed] / ref if ref > 0 else math.nan

    @property
    def g2_zero(self) -> float:
        return self.correlation.g2_zero


def run_duality(cfg: ExperimentConfig, spec: CircuitSpec | None = None,
                suppressed: str = "g", reference: str = "h") -> DualityRun:
    """Destructive-interference suppression and antibunching from one acquisition at phi = 0."""
    spec = spec or load_circuit(cfg)
    _check_detectors(spec, (suppressed, reference))
    corr = _correlate(cfg, spec, cfg.duality, 0.0, index=0)
    return DualityRun(corr, suppressed, reference)


def run_simulate(cfg: ExperimentConfig, spec: CircuitSpec | None = None) -> Run:
    spec = spec or load_circuit(cfg)
    s = cfg.simulate
    duration = cfg.duration_for(s.get("n_emissions"), s.get("duration_ns"))
    return acquire(cfg, spec, s["phi"], duration)
