"""Experiment configuration: INI file with one section per module.

Physical defaults live in ``DEFAULTS`` and are versioned so a report always
states which calibration it ran with. Values there are calibration choices
(the emitter is tuned to a 4 ns dip and ~1e5 detected counts/s, the channel
to 60 % transmission and 0.5 ns RMS jitter), not measured constants.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detection import DEFAULT_BLOCK_NS, DEFAULT_DEAD_TIME_NS, ChannelParams
from .emitter import DEFAULT_LIFETIME_NS, EmitterParams
from .errors import ConfigError, DomainError
from .netlist import parse_number

DEFAULTS_VERSION = "1"

# Collection efficiency that brings the default emitter to ~1e5 detected counts/s.
_DEFAULT_EMITTER = EmitterParams()
_DEFAULT_COLLECTION = 1.0e-4 / (_DEFAULT_EMITTER.emission_rate())

DEFAULTS = {
    "experiment": {
        "input_mode": "a",
        "seed": "1",
        "n_emissions": "1000000",
        "block_ns": repr(DEFAULT_BLOCK_NS),
        "workers": "1",
    },
    "emitter": {
        "lifetime_ns": repr(DEFAULT_LIFETIME_NS),
        "dip_fwhm_ns": "4.0",
        "blink_on_rate_per_ns": "0",
        "blink_off_rate_per_ns": "0",
        "collection_efficiency": f"{_DEFAULT_COLLECTION:.6g}",
    },
    "channel": {
        "source_to_chip_efficiency": "1.0",
        "chip_transmission": "0.6",
        "detector_efficiency": "1.0",
        "jitter_sigma_ns": "0.5",
        "dark_rate_per_ns": "0",
        "dead_time_ns": repr(DEFAULT_DEAD_TIME_NS),
    },
    "fringe": {
        "phi_points": "32",
        "photons_per_point": "100000",
    },
    "hbt": {
        "pair": "e,f",
        "phi": "0",
        "bin_width_ns": "0.25",
        "max_tau_ns": "20",
        "normalization": "poisson",
    },
    "duality": {
        "pair": "h,f",
        "bin_width_ns": "0.25",
        "max_tau_ns": "20",
        "normalization": "poisson",
    },
    "simulate": {
        "phi": "0",
    },
    "report": {
        "figures": "yes",
    },
}

_KNOWN = {sec: set(keys) for sec, keys in DEFAULTS.items()}
_KNOWN["experiment"] |= {"netlist", "duration_ns"}
_KNOWN["emitter"] |= {"pump_rate_per_ns"}
_KNOWN["fringe"] |= {"phis", "duration_ns_per_point"}
_KNOWN["hbt"] |= {"duration_ns", "n_emissions"}
_KNOWN["duality"] |= {"duration_ns", "n_emissions"}
_KNOWN["simulate"] |= {"duration_ns", "n_emissions"}

_CONSTANTS = {"pi": math.pi, "2pi": 2 * math.pi}


def _number(tok: str) -> float:
    """Float literal, ``p/q``, or a multiple of pi such as ``pi/2`` or ``3pi/2``."""
    tok = tok.strip()
    if tok in _CONSTANTS:
        return _CONSTANTS[tok]
    if "pi" in tok:
        head, _, tail = tok.partition("pi")
        mult = float(head) if head not in ("", "-") else (-1.0 if head == "-" else 1.0)
        div = float(tail[1:]) if tail.startswith("/") else (1.0 if not tail else math.nan)
        value = mult * math.pi / div
        if not math.isfinite(value):
            raise ValueError(tok)
        return value
    return parse_number(tok)


def _numbers(text: str) -> tuple:
    return tuple(_number(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    netlist_path: str | None
    input_mode: str
    emitter: EmitterParams
    channel: ChannelParams
    seed: int
    n_emissions: int | None = None
    duration_ns: float | None = None
    block_ns: float = DEFAULT_BLOCK_NS
    workers: int = 1
    phis: tuple = ()
    fringe_duration_ns: float | None = None
    photons_per_point: int | None = None
    hbt: dict = field(default_factory=dict)
    duality: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    figures: bool = True
    source: str = "<defaults>"

    def duration_for(self, n_emissions=None, duration_ns=None) -> float:
        """Acquisition time giving ``n_emissions`` expected collected photons."""
        if duration_ns is not None:
            return float(duration_ns)
        n = n_emissions if n_emissions is not None else self.n_emissions
        if n is None:
            if self.duration_ns is None:
                raise ConfigError("set n_emissions or duration_ns")
            return float(self.duration_ns)
        rate = self.emitter.emission_rate()
        if rate <= 0:
            raise ConfigError("emitter has zero emission rate; set duration_ns explicitly")
        return float(n) / rate


def _parser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    return cp


def read_config(path=None, text: str | None = None) -> ExperimentConfig:
    cp = _parser()
    source = "<defaults>"
    try:
        if path is not None:
            source = str(path)
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh, source=source)
        elif text is not None:
            source = "<string>"
            cp.read_string(text, source=source)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return _build(cp, source, Path(path).parent if path else None)


def _build(cp, source, base_dir) -> ExperimentConfig:
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _KNOWN[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")

    def get(sec, key, conv=str, default=None):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{source}: bad value for [{sec}] {key} = {raw!r}") from exc

    try:
        em = cp["emitter"]
        lifetime = get("emitter", "lifetime_ns", _number)
        common = dict(
            blink_on_rate_per_ns=get("emitter", "blink_on_rate_per_ns", _number),
            blink_off_rate_per_ns=get("emitter", "blink_off_rate_per_ns", _number),
            collection_efficiency=get("emitter", "collection_efficiency", _number),
        )
        if "pump_rate_per_ns" in em:
            emitter = EmitterParams(lifetime, get("emitter", "pump_rate_per_ns", _number), **common)
        else:
            emitter = EmitterParams.for_dip_fwhm(get("emitter", "dip_fwhm_ns", _number), lifetime, **common)

        def per_det(key):
            vals = get("channel", key, _numbers)
            return vals[0] if len(vals) == 1 else vals

        channel = ChannelParams(
            source_to_chip_efficiency=get("channel", "source_to_chip_efficiency", _number),
            chip_transmission=get("channel", "chip_transmission", _number),
            detector_efficiency=per_det("detector_efficiency"),
            jitter_sigma_ns=per_det("jitter_sigma_ns"),
            dark_rate_per_ns=per_det("dark_rate_per_ns"),
            dead_time_ns=per_det("dead_time_ns"),
        )
    except DomainError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    netlist = get("experiment", "netlist")
    if netlist and base_dir is not None and not Path(netlist).is_absolute():
        netlist = str(base_dir / netlist)

    if cp.has_option("fringe", "phis"):
        phis = get("fringe", "phis", _numbers)
    else:
        n = get("fringe", "phi_points", int)
        if n < 1:
            raise ConfigError(f"{source}: [fringe] phi_points must be >= 1")
        phis = tuple(np.linspace(0.0, 2 * np.pi, n, endpoint=False).tolist())
    if not phis:
        raise ConfigError(f"{source}: [fringe] phase grid is empty")

    def pair(sec):
        labels = tuple(x.strip() for x in get(sec, "pair").split(","))
        if len(labels) != 2 or labels[0] == labels[1]:
            raise ConfigError(f"{source}: [{sec}] pair needs two distinct detectors, got {labels}")
        return labels

    def corr(sec):
        out = {
            "pair": pair(sec),
            "bin_width_ns": get(sec, "bin_width_ns", _number),
            "max_tau_ns": get(sec, "max_tau_ns", _number),
            "normalization": get(sec, "normalization"),
            "n_emissions": get(sec, "n_emissions", lambda x: int(float(x))),
            "duration_ns": get(sec, "duration_ns", _number),
        }
        if out["normalization"] not in ("poisson", "plateau"):
            raise ConfigError(f"{source}: [{sec}] normalization must be poisson or plateau")
        ratio = out["max_tau_ns"] / out["bin_width_ns"]
        if out["bin_width_ns"] <= 0 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or ratio < 1:
            raise ConfigError(f"{source}: [{sec}] max_tau_ns must be a positive multiple of bin_width_ns")
        return out

    hbt = corr("hbt")
    hbt["phi"] = get("hbt", "phi", _number)
    duality = corr("duality")
    simulate = {
        "phi": get("simulate", "phi", _number),
        "n_emissions": get("simulate", "n_emissions", lambda x: int(float(x))),
        "duration_ns": get("simulate", "duration_ns", _number),
    }

    cfg = ExperimentConfig(
        netlist_path=netlist,
        input_mode=get("experiment", "input_mode"),
        emitter=emitter,
        channel=channel,
        seed=get("experiment", "seed", int),
        n_emissions=get("experiment", "n_emissions", lambda x: int(float(x))),
        duration_ns=get("experiment", "duration_ns", _number),
        block_ns=get("experiment", "block_ns", _number),
        workers=get("experiment", "workers", int),
        phis=tuple(phis),
        fringe_duration_ns=get("fringe", "duration_ns_per_point", _number),
        photons_per_point=get("fringe", "photons_per_point", lambda x: int(float(x))),
        hbt=hbt,
        duality=duality,
        simulate=simulate,
        figures=cp.getboolean("report", "figures"),
        source=source,
    )
    if cfg.seed < 0:
        raise ConfigError(f"{source}: seed must be non-negative")
    if cfg.block_ns <= 0 or cfg.workers < 1:
        raise ConfigError(f"{source}: block_ns must be > 0 and workers >= 1")
    return cfg


def defaults_text() -> str:
    """The versioned defaults block, as INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    lines = [f"# locsim defaults, version {DEFAULTS_VERSION}"]
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
        lines.append("")
    return "\n".join(lines)
