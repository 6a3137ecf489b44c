"""Line-oriented netlist format (``.lo``) for linear optical circuits.

Grammar, one directive per line, ``#`` starts a comment::

    MODES <n>                 exactly once, before anything else
    NAME <label>              optional circuit label
    INPUTS <l0> ... <ln-1>    optional input port labels, one per mode
    OUTPUTS <l0> ... <ln-1>   optional output port labels, one per mode
    DC <m1> <m2> <eta>        directional coupler, eta decimal or p/q
    PS <m> <phase>            phase shifter, literal radians or $name

``$name`` declares a phase parameter (or refers to one already declared);
a bare name is accepted only if it was declared earlier.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Mapping, Union

from .circuit import TransitionMatrix, compose, coupler_matrix, embed, phase_matrix
from .errors import BindingError, DomainError, NetlistError

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_LABEL = re.compile(r"[A-Za-z0-9_.-]+\Z")


@dataclass(frozen=True)
class Element:
    kind: str  # "coupler" or "phase"
    modes: tuple
    value: Union[float, str]  # literal, or parameter name
    lineno: int = field(default=0, compare=False)

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.value, str)


@dataclass(frozen=True)
class CircuitSpec:
    mode_count: int
    elements: tuple = ()
    phase_params: tuple = ()
    name: str = ""
    inputs: tuple = ()
    outputs: tuple = ()

    @property
    def input_labels(self) -> tuple:
        return self.inputs or tuple(str(i) for i in range(self.mode_count))

    @property
    def output_labels(self) -> tuple:
        return self.outputs or tuple(str(i) for i in range(self.mode_count))

    def input_index(self, label) -> int:
        labels = self.input_labels
        if label in labels:
            return labels.index(label)
        raise BindingError(f"unknown input port {label!r}; known: {', '.join(labels)}")


def parse_number(token: str) -> float:
    """Decimal or ``p/q`` literal. Raises ValueError on anything else."""
    if "/" in token:
        num, _, den = token.partition("/")
        value = float(Fraction(int(num), int(den)))
    else:
        value = float(token)
    if not math.isfinite(value):
        raise ValueError(f"non-finite literal {token!r}")
    return value


def parse_netlist(text: str, source: str | None = None) -> CircuitSpec:
    mode_count = None
    name = ""
    inputs: tuple = ()
    outputs: tuple = ()
    elements = []
    params: list = []
    lineno = 0

    def fail(msg):
        raise NetlistError(msg, lineno, source)

    def mode_index(tok):
        try:
            m = int(tok)
        except ValueError:
            fail(f"mode index must be an integer, got {tok!r}")
        if m < 0 or m >= mode_count:
            fail(f"mode {m} out of range for MODES {mode_count}")
        return m

    def port_labels(directive, toks):
        if len(toks) != mode_count:
            fail(f"{directive} needs {mode_count} labels, got {len(toks)}")
        if len(set(toks)) != len(toks):
            fail(f"{directive} labels must be unique")
        for t in toks:
            if not _LABEL.match(t):
                fail(f"bad port label {t!r}")
        return tuple(toks)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        directive, *args = line.split()

        if directive == "MODES":
            if mode_count is not None:
                fail("duplicate MODES directive")
            if len(args) != 1:
                fail("MODES takes exactly one argument")
            try:
                mode_count = int(args[0])
            except ValueError:
                fail(f"MODES expects an integer, got {args[0]!r}")
            if mode_count <= 0:
                fail("MODES must be positive")
            continue

        if directive not in ("NAME", "INPUTS", "OUTPUTS", "DC", "PS"):
            fail(f"unknown directive {directive!r}")
        if mode_count is None:
            fail("MODES must be the first directive")

        if directive == "NAME":
            if name:
                fail("duplicate NAME directive")
            if len(args) != 1:
                fail("NAME takes exactly one label")
            name = args[0]
        elif directive == "INPUTS":
            if inputs:
                fail("duplicate INPUTS directive")
            inputs = port_labels(directive, args)
        elif directive == "OUTPUTS":
            if outputs:
                fail("duplicate OUTPUTS directive")
            outputs = port_labels(directive, args)
        elif directive == "DC":
            if len(args) != 3:
                fail("DC takes <m1> <m2> <eta>")
            m1, m2 = mode_index(args[0]), mode_index(args[1])
            if m1 == m2:
                fail("DC needs two distinct modes")
            try:
                eta = parse_number(args[2])
            except (ValueError, ZeroDivisionError):
                fail(f"bad reflectivity {args[2]!r}")
            if not 0.0 <= eta <= 1.0:
                fail(f"reflectivity {args[2]} outside [0, 1]")
            elements.append(Element("coupler", (m1, m2), eta, lineno))
        else:  # PS
            if len(args) != 2:
                fail("PS takes <m> <phase>")
            m = mode_index(args[0])
            tok = args[1]
            if tok.startswith("$"):
                pname = tok[1:]
                if not _NAME.match(pname):
                    fail(f"bad parameter name {tok!r}")
                if pname not in params:
                    params.append(pname)
                value = pname
            elif _NAME.match(tok) and tok not in ("nan", "inf", "infinity"):
                if tok not in params:
                    fail(f"undeclared parameter {tok!r} (declare with ${tok})")
                value = tok
            else:
                try:
                    value = parse_number(tok)
                except (ValueError, ZeroDivisionError):
                    fail(f"bad phase {tok!r}")
            elements.append(Element("phase", (m,), value, lineno))

    if mode_count is None:
        lineno = max(lineno, 1)
        fail("missing MODES directive")

    return CircuitSpec(mode_count, tuple(elements), tuple(params), name, inputs, outputs)


def load_netlist(path) -> CircuitSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read(), source=str(path))


def _fmt(value) -> str:
    if isinstance(value, str):
        return "$" + value
    return repr(float(value))


def format_netlist(spec: CircuitSpec) -> str:
    """Render ``spec`` back to netlist text; parsing the result gives an equal spec."""
    lines = [f"MODES {spec.mode_count}"]
    if spec.name:
        lines.append(f"NAME {spec.name}")
    if spec.inputs:
        lines.append("INPUTS " + " ".join(spec.inputs))
    if spec.outputs:
        lines.append("OUTPUTS " + " ".join(spec.outputs))
    for el in spec.elements:
        word = "DC" if el.kind == "coupler" else "PS"
        lines.append(" ".join([word, *map(str, el.modes), _fmt(el.value)]))
    return "\n".join(lines) + "\n"


def elaborate(spec: CircuitSpec, binding: Mapping[str, float] | None = None) -> TransitionMatrix:
    binding = dict(binding or {})
    missing = [p for p in spec.phase_params if p not in binding]
    extra = [p for p in binding if p not in spec.phase_params]
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing " + ", ".join(missing))
        if extra:
            parts.append("unexpected " + ", ".join(extra))
        raise BindingError("parameter binding mismatch: " + "; ".join(parts))
    for k, v in binding.items():
        if not math.isfinite(v):
            raise DomainError(f"parameter {k} must be finite, got {v!r}")

    mats = [TransitionMatrix.identity(spec.mode_count)]
    for el in spec.elements:
        value = binding[el.value] if el.is_symbolic else el.value
        elem = coupler_matrix(value) if el.kind == "coupler" else phase_matrix(value)
        mats.append(embed(elem, el.modes, spec.mode_count))
    return compose(mats)


def chip_netlist(etas=("1/2", "1/2", "1/3", "1/3"), name="chip") -> str:
    """Netlist text for the four-mode chip with the given DC1..DC4 reflectivities."""
    eta1, eta2, eta3, eta4 = (str(e) for e in etas)
    return (
        "# Four-mode chip: Mach-Zehnder (DC1, heater, DC2) with a tap on each arm.\n"
        "# Matrix index order; input a enters mode 2, heater sits on the d arm.\n"
        "MODES 4\n"
        f"NAME {name}\n"
        "INPUTS b c a d\n"
        "OUTPUTS e f g h\n"
        f"DC 2 3 {eta1}   # DC1\n"
        "PS 3 $phi\n"
        f"DC 2 0 {eta3}   # DC3, tap onto e\n"
        f"DC 3 1 {eta4}   # DC4, tap onto f\n"
        f"DC 2 3 {eta2}   # DC2\n"
    )


def bundled_chip_path():
    return resources.files("locsim") / "data" / "chip.lo"


def load_chip() -> CircuitSpec:
    return parse_netlist(bundled_chip_path().read_text(encoding="utf-8"), source="chip.lo")
