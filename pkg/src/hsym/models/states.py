"""Initial-state preparation for the three model families."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SectorEmpty
from .hoti import HotiParams, cell_index, edge_cells, hoti_generators


@dataclass(frozen=True)
class HaarInSector:
    """Haar-random state in one magnetization sector, then tilted.

    n_down counts flipped spins; the tilt is the product of single-site
    x-rotations by theta applied after sampling inside the sector.
    """

    n_down: int
    theta: float = math.pi / 16
    seed: int = None


@dataclass(frozen=True)
class ClockProduct:
    """|n>^(x L) in the clock basis."""

    n: int


@dataclass(frozen=True)
class HotiEdgeProduct:
    """One particle in internal label (down, 1) on every boundary cell."""


@dataclass(frozen=True)
class HotiEigenstate:
    """Selected eigenvector of the dense leading-order generator.

    index counts from the bottom of the sorted spectrum; None picks the
    eigenvalue closest to zero.
    """

    index: int = None


def sector_indices(L, n_down):
    """Basis indices of the fixed-magnetization sector (bit set = down)."""
    if not 0 <= n_down <= L:
        raise SectorEmpty(f"no states with {n_down} of {L} spins down")
    idx = np.arange(2 ** L, dtype=np.int64)
    counts = np.zeros(2 ** L, dtype=np.int64)
    for bit in range(L):
        counts += (idx >> bit) & 1
    return idx[counts == n_down]


def rotate_x_all(state, L, theta):
    """Apply prod_i exp(-i theta sigma_i^x) to a 2^L state vector."""
    if theta == 0.0:
        return state
    gate = np.array(
        [[math.cos(theta), -1j * math.sin(theta)],
         [-1j * math.sin(theta), math.cos(theta)]],
        dtype=complex,
    )
    psi = state.reshape([2] * L)
    for site in range(L):
        # site 0 sits in the lowest bit, i.e. the last tensor axis
        psi = np.moveaxis(
            np.tensordot(gate, psi, axes=([1], [L - 1 - site])), 0, L - 1 - site
        )
    return np.ascontiguousarray(psi.reshape(-1))


def _haar_in_sector(spec, L, rng):
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    sector = sector_indices(L, spec.n_down)
    amps = rng.normal(size=len(sector)) + 1j * rng.normal(size=len(sector))
    amps /= np.linalg.norm(amps)
    state = np.zeros(2 ** L, dtype=complex)
    state[sector] = amps
    return rotate_x_all(state, L, spec.theta)


def _clock_product(spec, L):
    if not 0 <= spec.n <= 3:
        raise ValueError("clock level must be 0..3")
    state = np.zeros(4 ** L, dtype=complex)
    state[spec.n * (4 ** L - 1) // 3] = 1.0
    return state


def _hoti_edge_product(p):
    cells = edge_cells(p.L)
    phi = np.zeros((p.dim, len(cells)), dtype=complex)
    for col, (x, y) in enumerate(cells):
        phi[4 * cell_index(p.L, x, y) + 3, col] = 1.0
    return phi


def _hoti_eigenstate(spec, p):
    q0 = hoti_generators(p)["H2"] / 5.0
    evals, evecs = np.linalg.eigh(q0)
    index = spec.index
    if index is None:
        index = int(np.argmin(np.abs(evals)))
    return np.ascontiguousarray(evecs[:, index])


def prepare_initial(spec, space, rng=None):
    """Build the state (or orbital matrix) described by spec.

    space is the model parameter object; spin and clock specs also accept a
    plain site count.  An explicit rng overrides the seed stored on the
    spec, which is how ensemble runs draw independent sector states.
    """
    L = space.L if hasattr(space, "L") else int(space)
    if isinstance(spec, HaarInSector):
        return _haar_in_sector(spec, L, rng)
    if isinstance(spec, ClockProduct):
        return _clock_product(spec, L)
    if isinstance(spec, HotiEdgeProduct):
        if not isinstance(space, HotiParams):
            raise TypeError("edge product needs lattice parameters")
        return _hoti_edge_product(space)
    if isinstance(spec, HotiEigenstate):
        if not isinstance(space, HotiParams):
            raise TypeError("eigenstate preparation needs lattice parameters")
        return _hoti_eigenstate(spec, space)
    raise TypeError(f"unknown initial-state spec {type(spec).__name__}")
