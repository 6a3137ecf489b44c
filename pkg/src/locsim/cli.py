"""Command-line entry point: ``locsim <subcommand> [--config FILE] ...``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import DEFAULTS_VERSION, ExperimentConfig, read_config
from .detection import records_to_csv
from .errors import ConfigError, LocsimError, NetlistError
from .experiments import load_circuit, run_duality, run_fringe, run_hbt, run_simulate

log = logging.getLogger("locsim")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_NETLIST = 4
EXIT_MODEL = 5


def _fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.6g}"


class Report:
    def __init__(self, command, cfg: ExperimentConfig):
        self.lines = [
            f"locsim {__version__} {command}",
            f"config: {cfg.source}",
            f"defaults_version: {DEFAULTS_VERSION}",
            f"seed: {cfg.seed}",
        ]

    def add(self, key, value):
        self.lines.append(f"{key}: {value if isinstance(value, str) else _fmt(value)}")

    def write(self, out: Path):
        text = "\n".join(self.lines) + "\n"
        (out / "report.txt").write_text(text)
        sys.stdout.write(text)


def _load(args) -> ExperimentConfig:
    cfg = read_config(args.config) if args.config else read_config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.netlist is not None:
        overrides["netlist_path"] = args.netlist
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    return replace(cfg, **overrides) if overrides else cfg


def _correlation_report(report, run, prefix=""):
    a, b = run.pair
    report.add(f"{prefix}pair", f"{a},{b}")
    report.add(f"{prefix}phi_rad", run.phi)
    report.add(f"{prefix}clicks_{a}", run.histogram.n_start)
    report.add(f"{prefix}clicks_{b}", run.histogram.n_stop)
    report.add(f"{prefix}bin_width_ns", run.histogram.bin_width_ns)
    report.add(f"{prefix}g2_0", run.g2_zero)
    report.add(f"{prefix}g2_0_stderr", run.histogram.g2_zero_error())
    report.add(f"{prefix}accidentals_per_bin", run.histogram.accidental_level)
    if run.histogram.valid and run.histogram.accidental_level < 10:
        log.warning("only %.3g accidental coincidences per bin; g2(0) is dominated by counting noise "
                    "(raise n_emissions or collection_efficiency)", run.histogram.accidental_level)
    report.add(f"{prefix}g2_0_oracle", run.oracle_g2_zero)
    for flag in run.flags:
        report.add("flag", flag)


def cmd_fringe(args, cfg, out):
    result = run_fringe(cfg)
    result.to_csv(out / "fringe.csv", detectors=tuple(result.rates))
    report = Report("fringe", cfg)
    report.add("phi_points", len(result.phis))
    for d in result.rates:
        i_max, i_min = result.extrema(d)
        report.add(f"visibility_{d}", result.visibility(d))
        if result.fits:
            report.add(f"fitted_visibility_{d}", result.fitted_visibility(d))
    report.write(out)
    if cfg.figures and result.fits:
        from .plots import plot_fringe
        plot_fringe(result, out / "fringe.png")


def _write_correlation(run, cfg, out):
    name = f"g2_{run.pair[0]}{run.pair[1]}"
    run.histogram.to_csv(out / f"{name}.csv")
    if cfg.figures:
        from .plots import plot_g2
        plot_g2(run, out / f"{name}.png")


def cmd_hbt(args, cfg, out):
    pair = tuple(args.pair.split(",")) if args.pair else None
    run = run_hbt(cfg, pair=pair)
    _write_correlation(run, cfg, out)
    report = Report("hbt", cfg)
    _correlation_report(report, run)
    report.write(out)


def cmd_duality(args, cfg, out):
    res = run_duality(cfg)
    _write_correlation(res.correlation, cfg, out)
    report = Report("duality", cfg)
    report.add(f"rate_{res.suppressed}_per_ns", res.correlation.rates[res.suppressed])
    report.add(f"rate_{res.reference}_per_ns", res.correlation.rates[res.reference])
    report.add("suppression_ratio", res.suppression_ratio)
    _correlation_report(report, res.correlation)
    report.write(out)


def cmd_simulate(args, cfg, out):
    run = run_simulate(cfg)
    run.emissions.to_csv(out / "emissions.csv")
    records_to_csv(run.records, out / "clicks.csv")
    report = Report("simulate", cfg)
    report.add("phi_rad", run.phi)
    report.add("emissions", len(run.emissions))
    for rec in run.records:
        report.add(f"clicks_{rec.detector_id}", len(rec))
    report.write(out)


def cmd_validate(args, cfg, out):
    spec = load_circuit(cfg)
    if cfg.input_mode not in spec.input_labels:
        raise ConfigError(f"input_mode {cfg.input_mode!r} is not an input of the netlist "
                          f"({', '.join(spec.input_labels)})")
    for sec in (cfg.hbt, cfg.duality):
        for d in sec["pair"]:
            if d not in spec.output_labels:
                raise ConfigError(f"detector {d!r} is not an output of the netlist")
    if cfg.channel.n_detectors != spec.mode_count:
        raise ConfigError(f"channel models {cfg.channel.n_detectors} detectors, netlist has {spec.mode_count} modes")
    print(f"netlist: {cfg.netlist_path or 'bundled chip.lo'} ({spec.name or 'unnamed'}), "
          f"{spec.mode_count} modes, {len(spec.elements)} elements, parameters: {', '.join(spec.phase_params) or '-'}")
    print(f"config: {cfg.source} OK")


COMMANDS = {
    "fringe": cmd_fringe,
    "hbt": cmd_hbt,
    "dualty-check": cmd_duality,
    "duality": cmd_duality,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment configuration")
    common.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--netlist", help="netlist .lo file (overrides config)")
    common.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="locsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"locsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fringe", parents=[common], help="phase scan, fringe.csv and visibilities")
    hbt = sub.add_parser("hbt", parents=[common], help="g2 between two detectors")
    hbt.add_argument("--pair", help="detector pair, e.g. e,f (overrides config)")
    sub.add_parser("dualty-check", aliases=["duality"], parents=[common],
                   help="suppression at g and h/f antibunching at phi = 0")
    sub.add_parser("simulate", parents=[common], help="raw emission and click streams")
    sub.add_parser("validate", parents=[common], help="lint netlist and config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        out = Path(args.out)
        if args.command != "validate":
            out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetlistError as exc:
        print(f"netlist error: {exc}", file=sys.stderr)
        return EXIT_NETLIST
    except LocsimError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
