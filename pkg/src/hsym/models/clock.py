"""Disordered four-state clock chain driven by global cyclic kicks.

The kicked drive realizes Z4 > Z2 > E: the interaction and X^2 terms keep
the full cyclic symmetry, the Z^2 on-site term leaves only its square, and
the parallel field removes that too.  Because every kick is the same global
shift, four periods unroll into a kick-free sequence whose generators are
phase-twisted copies of the originals; the effective expansion then runs
through the ordinary exponential-segment machinery.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..operators import CLOCK, OperatorExpr, clock_label, clock_term
from ..sequences import DriveSequence, Segment, build_kicked
from ..symmetry import SymmetryGroup, SymmetryLadder
from .spin import chain_bonds


@dataclass(frozen=True)
class ClockParams:
    """Disorder windows and chirality couplings for the clock chain."""

    L: int
    j_range: tuple = (0.5, 1.5)
    g_range: tuple = (0.0, 0.3)
    h_range: tuple = (0.0, 0.6)
    b_range: tuple = (0.0, 2.5)
    eta: float = 0.35
    phi: float = math.pi / 3
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("need at least one site")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        for lo, hi in (self.j_range, self.g_range, self.h_range, self.b_range):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError("disorder ranges must be finite ordered pairs")

    @property
    def bonds(self):
        return chain_bonds(self.L, self.boundary)


@dataclass(frozen=True)
class ClockDisorder:
    """Realized couplings, kept alongside results so runs can be rebuilt."""

    j: tuple
    g: tuple
    h: tuple
    b: tuple

    def to_json_dict(self):
        return {"j": list(self.j), "g": list(self.g), "h": list(self.h), "b": list(self.b)}

    @classmethod
    def from_json_dict(cls, data):
        return cls(tuple(data["j"]), tuple(data["g"]), tuple(data["h"]), tuple(data["b"]))


def sample_disorder(p, rng):
    """Draw one coupling realization; intervals are half-open [lo, hi)."""
    n_bonds = len(p.bonds)
    return ClockDisorder(
        j=tuple(rng.uniform(p.j_range[0], p.j_range[1], size=n_bonds)),
        g=tuple(rng.uniform(p.g_range[0], p.g_range[1], size=p.L)),
        h=tuple(rng.uniform(p.h_range[0], p.h_range[1], size=p.L)),
        b=tuple(rng.uniform(p.b_range[0], p.b_range[1], size=p.L)),
    )


def clock_generators(p, rng=None, disorder=None):
    """Build {H0, H1} for one disorder realization.

    Pass either an rng (a realization is drawn and returned) or a stored
    ClockDisorder record; the realized record always comes back with the
    operators.
    """
    if disorder is None:
        if rng is None:
            raise ValueError("need an rng or a disorder record")
        disorder = sample_disorder(p, rng)
    L = p.L
    h0 = OperatorExpr.zero(CLOCK, L)
    for i, b in enumerate(disorder.b):
        h0 = h0 + clock_term(L, b, {i: (1, 0)}) + clock_term(L, b, {i: (3, 0)})

    h1 = OperatorExpr.zero(CLOCK, L)
    chi = p.eta * complex(math.cos(p.phi), math.sin(p.phi))
    for (i, j), J in zip(p.bonds, disorder.j):
        h1 = h1 + clock_term(L, J, {i: (2, 0), j: (2, 0)})
        h1 = h1 - clock_term(L, J * chi, {i: (3, 0), j: (1, 0)})
        h1 = h1 - clock_term(L, J * chi.conjugate(), {i: (1, 0), j: (3, 0)})
    for i, h in enumerate(disorder.h):
        h1 = h1 + clock_term(L, h, {i: (2, 0)})
        h1 = h1 - clock_term(L, 0.5 * h, {i: (0, 1)})
        h1 = h1 - clock_term(L, 0.5 * h, {i: (0, 3)})
    for i, g in enumerate(disorder.g):
        h1 = h1 + clock_term(L, g, {i: (0, 2)})
    return {"H0": h0, "H1": h1}, disorder


def global_shift(L, power=1):
    """prod_i X_i^power as an operator expression."""
    return OperatorExpr.from_sites(
        CLOCK, L, 1.0, {i: clock_label(0, power) for i in range(L)}
    )


def clock_ladder(L):
    return SymmetryLadder((
        SymmetryGroup("Z4", (global_shift(L, 1),)),
        SymmetryGroup("Z2", (global_shift(L, 2),)),
        SymmetryGroup("E"),
    ))


def build_clock_kicked(p, T, rng=None, disorder=None):
    """Quarter-period kicked drive; returns (sequence, disorder record)."""
    gens, disorder = clock_generators(p, rng=rng, disorder=disorder)
    seq = build_kicked(
        [
            ("H0", gens["H0"], -1),
            ("H1", gens["H1"], 1),
            ("H0", gens["H0"], 1),
            ("H1", gens["H1"], 1),
        ],
        ("PX", global_shift(p.L, 1)),
        T,
        "clock-kicked",
        ladder=clock_ladder(p.L),
    )
    return seq, disorder


def shift_conjugated(op, q):
    """prod X^q . op . prod X^-q; each Z^a string picks up (-i)^(a q)."""
    terms = {}
    for key, coeff in op.terms.items():
        a_total = sum(label % 4 for label in op.key_labels(key).values())
        terms[key] = coeff * (-1j) ** ((a_total * q) % 4)
    return op.copy_with(terms)


def unroll_clock_four_periods(seq):
    """Fold the kicks of four consecutive periods into twisted generators.

    The kick is a global shift with fourth power one, so pushing all kicks
    to the right leaves the product of the four exponential blocks, each
    conjugated by one more power of the shift.  The result has no kick
    segments and its expansion is normalized over the four-period window.
    """
    exp_segs = [s for s in seq.segments if not s.is_kick]
    kicks = [s for s in seq.segments if s.is_kick]
    if len(kicks) != 1 or seq.segments[-1] != kicks[0]:
        raise ValueError("expected exactly one trailing kick segment")
    table = {}
    segments = []
    for q in range(4):
        for seg in exp_segs:
            name = f"{seg.generator}@{q}"
            if name not in table:
                table[name] = shift_conjugated(seq.generator(seg.generator), q)
            segments.append(Segment(name, seg.sign_coeff, seg.duration_fraction))
    return DriveSequence(
        label=f"{seq.label}-x4",
        period=seq.period,
        segments=tuple(segments),
        generators=table,
        ladder=seq.ladder,
    )
