"""Single-particle lattice model whose drive turns edge modes into corner modes.

Generators are 4-band Bloch blocks over orbital (tau) and spin (sigma)
degrees of freedom, with real-space matrices on an open L x L lattice.  The
drive cancels the time-reversal-breaking field at leading order, so the
zeroth order keeps the gapless edge spectrum while the first order opens a
gap that leaves two states pinned at opposite corners.  A "broken" variant
replaces the on-site terms so the first order spoils inversion as well.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..sequences import DriveSequence, Segment

SIGMA = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def tau_sigma(tau, sigma):
    """kron(tau, sigma) on the (orbital x spin) internal space."""
    return np.kron(SIGMA[tau], SIGMA[sigma])


@dataclass(frozen=True)
class HotiParams:
    """Mass, hopping, and the three on-site field strengths."""

    L: int
    M: float = 1.0
    J: float = 1.0
    delta0: float = 1.0
    delta1: float = 7.0
    delta2: float = 12.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least a 2x2 lattice")

    @property
    def dim(self):
        """Single-particle dimension: 4 internal labels per unit cell."""
        return 4 * self.L * self.L


def cell_index(L, x, y):
    """Flat cell index for unit cell (x, y)."""
    if not (0 <= x < L and 0 <= y < L):
        raise ValueError(f"cell ({x}, {y}) outside {L}x{L} lattice")
    return x + L * y


def edge_cells(L):
    """All boundary cells of the L x L lattice."""
    return [
        (x, y)
        for y in range(L)
        for x in range(L)
        if x in (0, L - 1) or y in (0, L - 1)
    ]


def corner_cells(L):
    """The two opposite corners entering the corner-density average."""
    return [(0, 0), (L - 1, L - 1)]


def edge_run_cells(L):
    """Central run of the y=0 edge used for the edge-density average."""
    lo, hi = round(L / 4), round(3 * L / 4)
    return [(x, 0) for x in range(lo, hi + 1)]


def _onsite_blocks(p, broken=False):
    if broken:
        h1 = p.delta1 * (tau_sigma("x", "x") + tau_sigma("x", "y"))
        h1p = p.delta1 * tau_sigma("0", "z")
    else:
        h1 = p.delta1 * (tau_sigma("z", "x") + tau_sigma("z", "y"))
        h1p = p.delta1 * tau_sigma("z", "z")
    h0 = p.delta2 * tau_sigma("x", "y")
    return h1, h1p, h0


def hoti_bloch_blocks(p, broken=False):
    """Momentum-space blocks as callables of (kx, ky)."""
    h1, h1p, h0 = _onsite_blocks(p, broken)
    tz0 = tau_sigma("z", "0")
    txx = tau_sigma("x", "x")
    txy = tau_sigma("x", "y")

    def h2(kx, ky):
        return (
            (p.M + p.J * (math.cos(kx) + math.cos(ky))) * tz0
            - p.delta0 * (math.sin(kx) * txx + math.sin(ky) * txy)
        )

    return {
        "H2": h2,
        "H1": lambda kx, ky: h1,
        "H1p": lambda kx, ky: h1p,
        "H0": lambda kx, ky: h0,
    }


def _hop_pairs(L, periodic):
    """(cell, neighbor, direction) for +x and +y hops."""
    pairs = []
    for y in range(L):
        for x in range(L):
            here = cell_index(L, x, y)
            if x + 1 < L:
                pairs.append((here, cell_index(L, x + 1, y), "x"))
            elif periodic:
                pairs.append((here, cell_index(L, 0, y), "x"))
            if y + 1 < L:
                pairs.append((here, cell_index(L, x, y + 1), "y"))
            elif periodic:
                pairs.append((here, cell_index(L, x, 0), "y"))
    return pairs


def hoti_generators(p, broken=False, periodic=False):
    """Real-space single-particle matrices {H2, H1, H1p, H0}.

    H2 carries the mass term, hopping J/2 per direction, and the
    direction-locked spin hop delta0/2i, each with its conjugate; the other
    three are uniform on-site blocks.
    """
    L, n = p.L, p.L * p.L
    h1b, h1pb, h0b = _onsite_blocks(p, broken)
    eye_cells = np.eye(n)
    out = {
        "H1": np.kron(eye_cells, h1b),
        "H1p": np.kron(eye_cells, h1pb),
        "H0": np.kron(eye_cells, h0b),
    }

    h2 = np.kron(eye_cells, p.M * tau_sigma("z", "0"))
    hop = 0.5 * p.J * tau_sigma("z", "0")
    so = {"x": p.delta0 / 2j * tau_sigma("x", "x"),
          "y": p.delta0 / 2j * tau_sigma("x", "y")}
    for here, there, direction in _hop_pairs(L, periodic):
        block = hop + so[direction]
        h2[4 * there:4 * there + 4, 4 * here:4 * here + 4] += block
        h2[4 * here:4 * here + 4, 4 * there:4 * there + 4] += block.conj().T
    out["H2"] = h2
    return out


def default_k_grid(n=21):
    ks = np.linspace(-math.pi, math.pi, n, endpoint=False)
    return [(kx, ky) for kx in ks for ky in ks]


def hoti_symmetry_check(block_fn, op, k_grid=None):
    """Largest violation of time reversal ("T") or inversion ("I") on a grid.

    Time reversal conjugates the block and flips momentum; inversion only
    flips momentum.  Returns max_k of the Frobenius norm of the mismatch.
    """
    if k_grid is None:
        k_grid = default_k_grid()
    if op == "T":
        u = 1j * tau_sigma("0", "y")
        transform = lambda h: u @ h.conj() @ u.conj().T
    elif op == "I":
        u = tau_sigma("z", "0")
        transform = lambda h: u @ h @ u.conj().T
    else:
        raise ValueError(f"op must be 'T' or 'I', got {op!r}")
    worst = 0.0
    for kx, ky in k_grid:
        diff = transform(np.asarray(block_fn(kx, ky))) - np.asarray(block_fn(-kx, -ky))
        worst = max(worst, float(np.linalg.norm(diff)))
    return worst


# Two seven-segment blocks at T/10; the half-weight on-site segments carry
# fraction 1/20 so the whole period normalizes to one.
_HOTI_DSEQ = (
    ("H0", 1), ("H1", 1), ("H1p", 1), ("H0", -1), ("H1", 1), ("H1p", 1), ("H2", 1),
    ("H1", -1), ("H1p", -1), ("H0", 1), ("H1", -1), ("H1p", -1), ("H0", -1), ("H2", 1),
)
_HOTI_FRACTIONS = {
    "H0": Fraction(1, 10),
    "H2": Fraction(1, 10),
    "H1": Fraction(1, 20),
    "H1p": Fraction(1, 20),
}


def _hoti_segments():
    return tuple(
        Segment(name, float(sign), _HOTI_FRACTIONS[name])
        for name, sign in _HOTI_DSEQ
    )


def build_hoti(p, T, broken=False):
    """Fourteen-segment drive with leading order H2 / 5."""
    gens = hoti_generators(p, broken=broken)
    return DriveSequence(
        label="hoti-broken" if broken else "hoti",
        period=T,
        segments=_hoti_segments(),
        generators=gens,
    )


def hoti_bloch_sequence(p, T, kx, ky, broken=False):
    """The same fourteen segments acting on one 4x4 momentum block.

    Per-momentum sequences let the symmetry ladder be certified in k space,
    where time reversal acts by conjugation; real-space certification of
    antiunitary generators is not available.
    """
    blocks = hoti_bloch_blocks(p, broken=broken)
    gens = {name: np.asarray(fn(kx, ky)) for name, fn in blocks.items()}
    return DriveSequence(
        label=f"hoti-bloch({kx:+.3f},{ky:+.3f})",
        period=T,
        segments=_hoti_segments(),
        generators=gens,
    )


def densities_by_cell(p, orbitals):
    """Per-cell occupation summed over internal labels and orbital columns.

    orbitals: (dim, n_occupied) matrix of orthonormal single-particle
    states; a bare vector counts as one occupied orbital.
    """
    phi = np.asarray(orbitals)
    if phi.ndim == 1:
        phi = phi[:, None]
    weights = np.abs(phi) ** 2
    return weights.sum(axis=1).reshape(p.L * p.L, 4).sum(axis=1)


def corner_density(p, cell_densities):
    return float(sum(cell_densities[cell_index(p.L, x, y)] for x, y in corner_cells(p.L)) / 2.0)


def edge_density(p, cell_densities):
    run = edge_run_cells(p.L)
    return float(2.0 * sum(cell_densities[cell_index(p.L, x, y)] for x, y in run) / p.L)


def boundary_density(p, cell_densities):
    """Mean per-cell density over the whole lattice boundary."""
    cells = edge_cells(p.L)
    total = sum(cell_densities[cell_index(p.L, x, y)] for x, y in cells)
    return float(total / len(cells))
