"""Transition matrices for linear optical circuits.

Matrices act on mode creation operators: row = output mode, column = input
mode, so a photon entering mode ``j`` leaves in superposition ``U[:, j]``.
Circuits are composed in the order light traverses them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError

UNITARY_TOL = 1e-10

# Port labels of the four-mode chip. Index order is the matrix index order.
CHIP_INPUTS = ("b", "c", "a", "d")
CHIP_OUTPUTS = ("e", "f", "g", "h")
DESIGN_ETAS = (0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0)


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Dense complex mode-transformation matrix (immutable)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
            raise StructuralError(f"transition matrix must be square and non-empty, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise DomainError("transition matrix has non-finite entries")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def unitarity_error(self) -> float:
        """Max-abs deviation of U^dagger U from the identity."""
        u = self.entries
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.dim))))

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return self.unitarity_error() < tol

    def dagger(self) -> "TransitionMatrix":
        return TransitionMatrix(self.entries.conj().T)

    def allclose(self, other: "TransitionMatrix", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.entries, other.entries, rtol=0, atol=atol))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @classmethod
    def identity(cls, dim: int) -> "TransitionMatrix":
        return cls(np.eye(dim, dtype=complex))


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Single-photon output amplitudes and detection probabilities per mode."""

    amplitudes: np.ndarray
    probabilities: np.ndarray
    labels: tuple = ()

    def __getitem__(self, label):
        return float(self.probabilities[self.labels.index(label)])

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())


def _check_eta(eta):
    if not math.isfinite(eta) or not 0.0 <= eta <= 1.0:
        raise DomainError(f"coupler reflectivity must lie in [0, 1], got {eta!r}")


def coupler_matrix(eta: float) -> TransitionMatrix:
    """2x2 directional coupler with reflectivity ``eta`` (same-waveguide power fraction)."""
    _check_eta(eta)
    r = math.sqrt(eta)
    t = 1j * math.sqrt(1.0 - eta)
    return TransitionMatrix([[r, t], [t, r]])


def phase_matrix(phi: float) -> TransitionMatrix:
    if not math.isfinite(phi):
        raise DomainError(f"phase must be finite, got {phi!r}")
    return TransitionMatrix([[complex(math.cos(phi), math.sin(phi))]])


def embed(elem: TransitionMatrix, modes: Sequence[int], dim: int) -> TransitionMatrix:
    """Lift ``elem`` acting on ``modes`` into a ``dim``-mode identity."""
    modes = [int(m) for m in modes]
    if len(modes) != elem.dim:
        raise StructuralError(f"element acts on {elem.dim} modes but {len(modes)} were given")
    if len(set(modes)) != len(modes):
        raise StructuralError(f"mode indices collide: {modes}")
    if any(m < 0 or m >= dim for m in modes):
        raise StructuralError(f"mode index out of range for {dim} modes: {modes}")
    out = np.eye(dim, dtype=complex)
    out[np.ix_(modes, modes)] = elem.entries
    return TransitionMatrix(out)


def compose(elements: Sequence[TransitionMatrix]) -> TransitionMatrix:
    """Product of ``elements``; the first element is the first one light meets."""
    if not elements:
        raise StructuralError("cannot compose an empty element list")
    dim = elements[0].dim
    out = np.eye(dim, dtype=complex)
    for elem in elements:
        if elem.dim != dim:
            raise StructuralError(f"dimension mismatch in compose: {elem.dim} != {dim}")
        out = elem.entries @ out
    return TransitionMatrix(out)


def chip_unitary(phi: float, etas: Sequence[float] = DESIGN_ETAS) -> TransitionMatrix:
    """Four-mode chip: a Mach-Zehnder (DC1, heater, DC2) with a tap on each arm.

    ``etas`` are the reflectivities of DC1..DC4. Wiring by matrix index
    (input labels ``CHIP_INPUTS``, output labels ``CHIP_OUTPUTS``)::

        DC1 on (2, 3)   input a enters mode 2, arms are modes 2 and 3
        PS  on 3        heater on the arm fed from waveguide d
        DC3 on (2, 0)   taps the phase-free arm onto e
        DC4 on (3, 1)   taps the heated arm onto f
        DC2 on (2, 3)   recombines the arms onto g and h
    """
    if len(etas) != 4:
        raise StructuralError(f"chip needs four coupler reflectivities, got {len(etas)}")
    for eta in etas:
        _check_eta(eta)
    eta1, eta2, eta3, eta4 = etas
    return compose([
        embed(coupler_matrix(eta1), [2, 3], 4),
        embed(phase_matrix(phi), [3], 4),
        embed(coupler_matrix(eta3), [2, 0], 4),
        embed(coupler_matrix(eta4), [3, 1], 4),
        embed(coupler_matrix(eta2), [2, 3], 4),
    ])


def chip_amplitudes(phi: float) -> dict:
    """Closed-form output amplitudes for a photon entering waveguide a of the ideal chip."""
    half = np.exp(0.5j * phi)
    pref = 1j / math.sqrt(3.0)
    return {
        "e": pref,
        "f": pref * 1j * np.exp(1j * phi),
        "g": -pref * half * math.sin(phi / 2),
        "h": pref * half * math.cos(phi / 2),
    }


def output_distribution(u: TransitionMatrix, input_mode: int, labels: Sequence[str] = ()) -> OutputDistribution:
    if not 0 <= input_mode < u.dim:
        raise StructuralError(f"input mode {input_mode} out of range for {u.dim} modes")
    amps = _frozen(u.entries[:, input_mode])
    probs = np.abs(amps) ** 2
    probs.setflags(write=False)
    labels = tuple(labels) if labels else tuple(str(i) for i in range(u.dim))
    if len(labels) != u.dim:
        raise StructuralError(f"{len(labels)} labels for {u.dim} modes")
    return OutputDistribution(amps, probs, labels)
