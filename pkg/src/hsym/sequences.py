"""Drive-protocol construction.

A DriveSequence is a product of segments, each either an exponential
exp(-i * sign * H * fraction * T) of a named generator or a zero-duration
unitary kick applied verbatim.  Segments are stored in product order:
segments[0] is the leftmost factor of U_F, i.e. the last one applied to a
state.  All builders here are structural; they know nothing about
propagation or effective-Hamiltonian extraction.

The per-sequence normalization time q_duration defines the effective
generator through U_F = exp(-i * q_duration * Q).  By default it is the
summed segment duration; protocols whose defining relation normalizes
differently carry an explicit override.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import (
    AlgebraMismatch,
    ConditionViolated,
    DimensionMismatch,
    EmptyGenerators,
    LeadingOrderMismatch,
)
from .operators import OperatorExpr
from .symmetry import SymmetryLadder, relative_commutator_norm

CONDITION_TOL = 1e-10


def sequence_length(n):
    """Segment count of the level-n recursive protocol."""
    if n < 0:
        raise ValueError("level must be >= 0")
    return 3 * 2 ** n - 2


@dataclass(frozen=True)
class Segment:
    """One factor of the drive product.

    ``sign_coeff`` multiplies the generator in the exponent; kicks ignore
    it except for its sign, which selects the unitary or its adjoint.
    """

    generator: str
    sign_coeff: float
    duration_fraction: Fraction
    is_kick: bool = False

    def __post_init__(self):
        frac = Fraction(self.duration_fraction)
        object.__setattr__(self, "duration_fraction", frac)
        if self.is_kick:
            if frac != 0:
                raise ValueError("kick segments carry zero duration")
        elif frac <= 0:
            raise ValueError("duration_fraction must be positive")

    def conjugated(self):
        return replace(self, sign_coeff=-self.sign_coeff)


def _generator_space(table):
    """(kind, signature) shared by every generator, for compatibility checks."""
    sig = None
    for name, op in table.items():
        if isinstance(op, OperatorExpr):
            this = ("expr", op.algebra.kind, op.n_sites)
        else:
            arr = np.asarray(op)
            this = ("dense", arr.shape)
        if sig is None:
            sig = this
        elif sig != this:
            raise AlgebraMismatch(f"generator {name!r} lives in {this}, expected {sig}")
    return sig


@dataclass(frozen=True)
class DriveSequence:
    label: str
    period: float
    segments: tuple
    generators: dict
    ladder: SymmetryLadder = None
    q_duration_periods: Fraction = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "generators", dict(self.generators))
        _generator_space(self.generators)
        for seg in self.segments:
            if seg.generator not in self.generators:
                raise KeyError(f"segment references unknown generator {seg.generator!r}")
        if self.q_duration_periods is not None:
            object.__setattr__(
                self, "q_duration_periods", Fraction(self.q_duration_periods)
            )

    @property
    def n_segments(self):
        return len(self.segments)

    @property
    def total_fraction(self):
        return sum((s.duration_fraction for s in self.segments), Fraction(0))

    @property
    def q_periods(self):
        if self.q_duration_periods is not None:
            return self.q_duration_periods
        return self.total_fraction

    @property
    def q_duration(self):
        """Normalization time in U_F = exp(-i q_duration Q)."""
        return float(self.q_periods) * self.period

    def generator(self, name):
        return self.generators[name]

    def with_period(self, period):
        return replace(self, period=period)

    def relabel(self, label):
        return replace(self, label=label)

    # ------------------------------------------------------------------
    def leading_order(self):
        """Duration-weighted signed generator sum, divided by q_periods.

        This is the zeroth-order effective generator; it needs no BCH.
        Kick segments are outside this notion.
        """
        if any(s.is_kick for s in self.segments):
            raise ValueError("leading_order undefined for sequences with kicks")
        acc = None
        for seg in self.segments:
            w = seg.sign_coeff * float(seg.duration_fraction)
            term = self.generators[seg.generator] * w
            acc = term if acc is None else acc + term
        if acc is None:
            raise EmptyGenerators("sequence has no segments")
        return acc * (1.0 / float(self.q_periods))

    # ------------------------------------------------------------------
    def to_json_dict(self, include_generators=True):
        gens = None
        if include_generators:
            gens = {}
            for name, op in self.generators.items():
                if isinstance(op, OperatorExpr):
                    gens[name] = op.to_json_dict()
                else:
                    gens = None  # dense generators are not portable
                    break
        return {
            "label": self.label,
            "period": self.period,
            "q_duration_periods": (
                None if self.q_duration_periods is None else str(self.q_duration_periods)
            ),
            "segments": [
                {
                    "generator": s.generator,
                    "sign": s.sign_coeff,
                    "fraction": str(s.duration_fraction),
                    "kick": s.is_kick,
                }
                for s in self.segments
            ],
            "generators": gens,
        }

    @classmethod
    def from_json_dict(cls, data, generators=None):
        if generators is None:
            if data.get("generators") is None:
                raise ValueError("serialized sequence carries no generator table")
            generators = {
                name: OperatorExpr.from_json_dict(op)
                for name, op in data["generators"].items()
            }
        segs = tuple(
            Segment(
                s["generator"],
                s["sign"],
                Fraction(s["fraction"]),
                s.get("kick", False),
            )
            for s in data["segments"]
        )
        q = data.get("q_duration_periods")
        return cls(
            label=data["label"],
            period=data["period"],
            segments=segs,
            generators=generators,
            q_duration_periods=None if q is None else Fraction(q),
        )

    def dumps(self):
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def loads(cls, text, generators=None):
        return cls.from_json_dict(json.loads(text), generators=generators)


@dataclass(frozen=True)
class RandomDrive:
    """Branch set for a randomly ordered drive (one branch drawn per period)."""

    branches: tuple
    seed: int
    label: str = "random-drive"

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise EmptyGenerators("random drive needs at least one branch")
        first = self.branches[0]
        for br in self.branches[1:]:
            if br.period != first.period:
                raise ValueError("branches must share the period")
            if _generator_space(br.generators) != _generator_space(first.generators):
                raise DimensionMismatch("branches must act on the same space")

    @property
    def period(self):
        return self.branches[0].period


def reverse_conjugate(seq):
    """Time-reversed sequence: reversed order, conjugated segments."""
    return replace(
        seq,
        segments=tuple(s.conjugated() for s in reversed(seq.segments)),
        label=f"{seq.label}^dagger",
    )


# ----------------------------------------------------------------------
# condition validation
# ----------------------------------------------------------------------

def validate_condition(a, b, what, tol=CONDITION_TOL):
    """Require [a, b] = 0 within tol (relative Frobenius, dense instance)."""
    norm = relative_commutator_norm(a, b)
    if norm > tol:
        raise ConditionViolated(f"required [{what}] = 0 fails", norm)
    return norm


def _leading_mismatch_norm(a, b):
    if isinstance(a, OperatorExpr) and isinstance(b, OperatorExpr):
        scale = max(a.coeff_norm(), b.coeff_norm(), 1e-300)
        return (a - b).coeff_norm() / scale
    ad, bd = np.asarray(a), np.asarray(b)
    scale = max(np.linalg.norm(ad), np.linalg.norm(bd), 1e-300)
    return float(np.linalg.norm(ad - bd)) / scale


# ----------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------

def _seg(name, sign, frac=1):
    return Segment(name, sign, Fraction(frac))


def segments_from_dseq(dseq, fraction=1):
    """Segments from (name, sign) pairs read off a printed product."""
    f = Fraction(fraction)
    return tuple(Segment(name, float(sign), f) for name, sign in dseq)


def build_recursive(generators, T, label=None, ladder=None):
    """Level-n echo recursion over generators ordered bottom (H_0) up.

    Level 0 is the single segment exp(-i H_0 T); each level wraps the
    previous sequence S as S, exp(-i H_n T), conj-reversed S, exp(-i H_n T).
    """
    gens = list(generators)
    if not gens:
        raise EmptyGenerators("need at least H_0")
    table = dict(gens)
    if len(table) != len(gens):
        raise ValueError("generator names must be unique")
    segs = [_seg(gens[0][0], 1.0)]
    for name, _ in gens[1:]:
        rc = [s.conjugated() for s in reversed(segs)]
        segs = segs + [_seg(name, 1.0)] + rc + [_seg(name, 1.0)]
    n = len(gens) - 1
    return DriveSequence(
        label=label or f"recursive-level-{n}",
        period=T,
        segments=tuple(segs),
        generators=table,
        ladder=ladder,
    )


def build_shortened_level2(h0, h1, h2, T, validate=True, probes=None, ladder=None):
    """Six full-T segments exploiting [H0, H1+H2] = 0.

    Product order: exp(-iH0 T) exp(-iH1 T) exp(-iH2 T)
    exp(+iH0 T) exp(+iH1 T) exp(-iH2 T).  The defining relation for this
    protocol normalizes by a single period.
    """
    if validate:
        a, b = probes if probes is not None else (h0, h1 + h2)
        validate_condition(a, b, "H0, H1+H2")
    table = {"H0": h0, "H1": h1, "H2": h2}
    dseq = [("H0", 1), ("H1", 1), ("H2", 1), ("H0", -1), ("H1", -1), ("H2", 1)]
    return DriveSequence(
        label="shortened-level-2",
        period=T,
        segments=segments_from_dseq(dseq),
        generators=table,
        ladder=ladder,
        q_duration_periods=Fraction(1),
    )


def build_shortened_level3(h0, h1, h2, h3, T, validate=True, probes=None, ladder=None):
    """Eight full-T segments; needs [H0,H3] = [H0,H2] = [H1,H2+H3] = 0."""
    if validate:
        pairs = probes if probes is not None else [
            (h0, h3, "H0, H3"),
            (h0, h2, "H0, H2"),
            (h1, h2 + h3, "H1, H2+H3"),
        ]
        for a, b, what in pairs:
            validate_condition(a, b, what)
    table = {"H0": h0, "H1": h1, "H2": h2, "H3": h3}
    dseq = [
        ("H0", 1), ("H1", 1), ("H2", 1), ("H3", 1),
        ("H1", -1), ("H2", -1), ("H0", -1), ("H3", 1),
    ]
    return DriveSequence(
        label="shortened-level-3",
        period=T,
        segments=segments_from_dseq(dseq),
        generators=table,
        ladder=ladder,
    )


def build_two_block_14(h0, h1, h2, h3, T, label, ladder=None):
    """The 14-segment level-3 drive.

    A shortened level-2 block carrying the field h0 with flipped sign, one
    top-generator segment, the conjugate reverse of the block, and a second
    top-generator segment; every segment runs for T/14.
    """
    table = {"H0": h0, "H1": h1, "H2": h2, "H3": h3}
    dseq = [
        ("H0", -1), ("H1", 1), ("H2", 1), ("H0", 1), ("H1", -1), ("H2", 1), ("H3", 1),
        ("H2", -1), ("H1", 1), ("H0", -1), ("H2", -1), ("H1", -1), ("H0", 1), ("H3", 1),
    ]
    return DriveSequence(
        label=label,
        period=T,
        segments=segments_from_dseq(dseq, Fraction(1, 14)),
        generators=table,
        ladder=ladder,
    )


def build_kicked(named_exponents, kick, T, label, ladder=None, fraction=Fraction(1, 4)):
    """Exponential segments followed by one zero-duration unitary kick."""
    table = {}
    segs = []
    for name, op, sign in named_exponents:
        table[name] = op
        segs.append(Segment(name, float(sign), Fraction(fraction)))
    kick_name, kick_op = kick
    table[kick_name] = kick_op
    segs.append(Segment(kick_name, 1.0, Fraction(0), is_kick=True))
    return DriveSequence(
        label=label, period=T, segments=tuple(segs), generators=table, ladder=ladder
    )


def build_generalization1(prev, p_factors, p_prime_factors, T=None, label=None):
    """Wrap a previous sequence around two Trotterized symmetric blocks.

    Each factor list [(name, op), ...] realizes exp(-iPT) as the product of
    exp(-i H_i T/p) over its entries.  Single-entry lists reduce this to the
    plain recursion step.
    """
    if not p_factors or not p_prime_factors:
        raise EmptyGenerators("both factor lists must be nonempty")
    T = prev.period if T is None else T
    table = dict(prev.generators)
    for name, op in list(p_factors) + list(p_prime_factors):
        if name in table and table[name] is not op and not _same_generator(table[name], op):
            raise ValueError(f"conflicting definitions for generator {name!r}")
        table[name] = op
    _generator_space(table)

    def trotter(factors):
        p = len(factors)
        return [Segment(name, 1.0, Fraction(1, p)) for name, _ in factors]

    rc = [s.conjugated() for s in reversed(prev.segments)]
    segs = list(prev.segments) + trotter(p_factors) + rc + trotter(p_prime_factors)
    return DriveSequence(
        label=label or f"{prev.label}+trotter-block",
        period=T,
        segments=tuple(segs),
        generators=table,
        ladder=prev.ladder,
    )


def _same_generator(a, b):
    if isinstance(a, OperatorExpr) and isinstance(b, OperatorExpr):
        return a.allclose(b)
    if isinstance(a, OperatorExpr) or isinstance(b, OperatorExpr):
        return False
    return np.array_equal(np.asarray(a), np.asarray(b))


def build_generalization2(u_prev, u_prev_prime, r_name, r_op, T=None,
                          label=None, tol=CONDITION_TOL, r_fraction=Fraction(1)):
    """U = U_prev exp(-ifTR) U_prev'^dagger exp(-ifTR).

    Requires the two inner drives to share their leading-order effective
    generator; the mismatch norm is reported on failure.
    """
    norm = _leading_mismatch_norm(u_prev.leading_order(), u_prev_prime.leading_order())
    if norm > tol:
        raise LeadingOrderMismatch(
            "inner sequences have different leading-order generators", norm
        )
    T = u_prev.period if T is None else T
    table = dict(u_prev.generators)
    for name, op in u_prev_prime.generators.items():
        if name in table and not _same_generator(table[name], op):
            raise ValueError(f"conflicting definitions for generator {name!r}")
        table[name] = op
    table[r_name] = r_op
    _generator_space(table)
    rc = [s.conjugated() for s in reversed(u_prev_prime.segments)]
    r_seg = Segment(r_name, 1.0, Fraction(r_fraction))
    segs = list(u_prev.segments) + [r_seg] + rc + [r_seg]
    return DriveSequence(
        label=label or f"{u_prev.label}+echo-{r_name}",
        period=T,
        segments=tuple(segs),
        generators=table,
        ladder=u_prev.ladder,
    )


def _cancel_adjacent_inverses(segments):
    """Drop neighboring exp(-icHfT) exp(+icHfT) pairs until stable."""
    segs = list(segments)
    changed = True
    while changed:
        changed = False
        for i in range(len(segs) - 1):
            a, b = segs[i], segs[i + 1]
            if (
                not a.is_kick
                and not b.is_kick
                and a.generator == b.generator
                and a.duration_fraction == b.duration_fraction
                and a.sign_coeff == -b.sign_coeff
            ):
                del segs[i : i + 2]
                changed = True
                break
    return segs


def build_arbitrary_order(prev, repeat_level, simplify=True):
    """Repeat the echo step with the top generator to push its breaking
    to higher order.

    Each application doubles the sequence around two more top-generator
    segments; adjacent mutually inverse segments are then cancelled, which
    reproduces the printed doubled form.  The normalization q_duration
    keeps the uncancelled length (the defining relation is unchanged by the
    cancellation).
    """
    if repeat_level < 0:
        raise ValueError("repeat_level must be >= 0")
    seq = prev
    for _ in range(repeat_level):
        top = seq.segments[-1]
        if top.is_kick:
            raise ValueError("cannot double a kick-terminated sequence")
        q_prev = seq.q_periods
        rc = [s.conjugated() for s in reversed(seq.segments)]
        segs = list(seq.segments) + [top] + rc + [top]
        if simplify:
            segs = _cancel_adjacent_inverses(segs)
        seq = DriveSequence(
            label=f"{seq.label}+doubled",
            period=seq.period,
            segments=tuple(segs),
            generators=dict(seq.generators),
            ladder=seq.ladder,
            q_duration_periods=2 * q_prev + 2 * top.duration_fraction,
        )
    return seq
