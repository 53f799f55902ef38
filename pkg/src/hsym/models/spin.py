"""Spin-chain generator families and their echoed drive protocols.

Two related families live here.  The deeper one stacks four generators so
the drive imprints a rotation ladder SU(2) > U(1) > Z2 > E; the shallower
one drops the top generator and realizes U(1) > Z2 > E with a six-segment
echo, either periodically or with a random sign drawn each period.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from ..operators import PAULI, OperatorExpr, pauli_sum
from ..sequences import DriveSequence, RandomDrive, build_two_block_14, segments_from_dseq
from ..symmetry import SymmetryGroup, SymmetryLadder


@dataclass(frozen=True)
class SpinChainParams:
    """Couplings for the spin chains, in units of the Heisenberg scale."""

    L: int
    J: float = 1.0
    J_prime: float = 5.0
    delta_x: float = 10.0
    epsilon: float = 6.0
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least two sites")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        for value in (self.J, self.J_prime, self.delta_x, self.epsilon):
            if not math.isfinite(value):
                raise ValueError("couplings must be finite")


def chain_bonds(L, boundary):
    bonds = [(i, i + 1) for i in range(L - 1)]
    # periodic wrap would duplicate the single bond at L=2
    if boundary == "periodic" and L > 2:
        bonds.append((L - 1, 0))
    return bonds


def _bond_sum(L, bonds, weights):
    terms = []
    for i, j in bonds:
        for axes, coeff in weights.items():
            terms.append((coeff, {i: axes[0], j: axes[1]}))
    return pauli_sum(L, terms)


def _x_field(L, amplitude):
    return pauli_sum(L, [(amplitude, {i: "x"}) for i in range(L)])


def total_spin(L, axis):
    """Collective operator sum_i sigma_i^axis."""
    return pauli_sum(L, [(1.0, {i: axis}) for i in range(L)])


def parity_z(L):
    """Global spin-flip parity prod_i sigma_i^z."""
    return OperatorExpr.from_sites(PAULI, L, 1.0, {i: "z" for i in range(L)})


def su2_ladder(L):
    return SymmetryLadder((
        SymmetryGroup("SU(2)", (total_spin(L, "x"), total_spin(L, "y"), total_spin(L, "z"))),
        SymmetryGroup("U(1)", (total_spin(L, "z"),)),
        SymmetryGroup("Z2", (parity_z(L),)),
        SymmetryGroup("E"),
    ))


def u1_ladder(L):
    return SymmetryLadder((
        SymmetryGroup("U(1)", (total_spin(L, "z"),)),
        SymmetryGroup("Z2", (parity_z(L),)),
        SymmetryGroup("E"),
    ))


def spin_generators(p):
    """Four-generator set {H3, H2, H1, H0+, H0-} for the rotation ladder.

    H3 is the Heisenberg interaction, H2 keeps only the z-rotation
    invariance, H1 only the spin-flip parity, and the two field terms H0+-
    break everything; their shared property [H0, H1 + H2] = 0 is what lets
    the echoed drive cancel them at leading order.
    """
    bonds = chain_bonds(p.L, p.boundary)
    h3 = _bond_sum(p.L, bonds, {"xx": p.J, "yy": p.J, "zz": p.J})
    h2 = _bond_sum(p.L, bonds, {"xx": p.J_prime, "yy": p.J_prime, "zz": -p.J_prime})
    h1 = _bond_sum(p.L, bonds, {"yy": -p.J_prime, "zz": p.J_prime})
    return {
        "H3": h3,
        "H2": h2,
        "H1": h1,
        "H0+": _x_field(p.L, p.delta_x + p.epsilon),
        "H0-": _x_field(p.L, p.delta_x - p.epsilon),
    }


def u1_generators(p):
    """Three-generator set for the magnetization ladder, plus field variants.

    Same bond structure as the deeper family but every interaction carries
    the single scale J; the x-field enters with amplitude -delta_x for the
    periodic drive and delta_x +- epsilon for the random one.
    """
    bonds = chain_bonds(p.L, p.boundary)
    h2 = _bond_sum(p.L, bonds, {"xx": p.J, "yy": p.J, "zz": -p.J})
    h1 = _bond_sum(p.L, bonds, {"yy": -p.J, "zz": p.J})
    return {
        "H2": h2,
        "H1": h1,
        "H0": _x_field(p.L, -p.delta_x),
        "H0+": _x_field(p.L, p.delta_x + p.epsilon),
        "H0-": _x_field(p.L, p.delta_x - p.epsilon),
    }


def build_su2_branch(p, T, branch="+"):
    """One 14-segment drive; branch picks which field amplitude it carries."""
    if branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")
    gens = spin_generators(p)
    return build_two_block_14(
        gens["H0" + branch], gens["H1"], gens["H2"], gens["H3"],
        T, f"su2-ladder{branch}", ladder=su2_ladder(p.L),
    )


def build_su2_random(p, T, seed):
    """Random drive drawing one of the two field branches each period."""
    return RandomDrive(
        branches=(build_su2_branch(p, T, "+"), build_su2_branch(p, T, "-")),
        seed=seed,
        label="su2-ladder-random",
    )


# Six-segment echo in product order; the echoed first half cancels H0 and
# H1 at leading order and fixes the sign of the H0 commutator at third.
_U1_DSEQ = (
    ("H0", 1), ("H1", 1), ("H2", 1),
    ("H0", -1), ("H1", -1), ("H2", 1),
)


def _u1_sequence(h0, h1, h2, T, label, ladder):
    return DriveSequence(
        label=label,
        period=T,
        segments=segments_from_dseq(_U1_DSEQ, Fraction(1, 6)),
        generators={"H0": h0, "H1": h1, "H2": h2},
        ladder=ladder,
    )


def build_u1_floquet(p, T):
    """Periodic six-segment drive with leading order H2 / 3."""
    gens = u1_generators(p)
    return _u1_sequence(gens["H0"], gens["H1"], gens["H2"], T,
                        "u1-floquet", u1_ladder(p.L))


def build_u1_random(p, T, seed):
    """Random drive whose field amplitude flips between delta_x +- epsilon."""
    gens = u1_generators(p)
    ladder = u1_ladder(p.L)
    return RandomDrive(
        branches=(
            _u1_sequence(gens["H0+"], gens["H1"], gens["H2"], T, "u1-random+", ladder),
            _u1_sequence(gens["H0-"], gens["H1"], gens["H2"], T, "u1-random-", ladder),
        ),
        seed=seed,
        label="u1-random",
    )
