"""Measured quantities: expectations, entropies, populations, densities.

Observable specs are small declarative records; :func:`build_evaluators`
turns a list of them into named closures over a fixed initial state, so
normalized columns carry their own reference value and sector lookups
are precomputed once per realization.  Column names are stable across
runs because downstream CSV consumers key on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionOverflow, NonHermitian
from .models.hoti import (
    HotiParams, boundary_density, corner_density, densities_by_cell, edge_density,
)
from .models.states import sector_indices
from .operators import OperatorExpr
from .propagate import Trajectory, compile_period_unitary
from .sequences import RandomDrive

#: imaginary residue allowed in a Hermitian expectation value
IMAG_TOL = 1e-10

#: initial expectations smaller than this make a normalized column undefined
NORM_REF_TOL = 1e-8

#: largest dense dimension for exact-trace autocorrelation
AUTOCORR_CAP = 2 ** 8


# ----------------------------------------------------------------------
# spec records
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExpectationOf:
    """Plain expectation value of a Hermitian operator."""

    name: str
    op: object


@dataclass(frozen=True)
class NormalizedExpectation:
    """Expectation divided by its value on the initial state.

    If the reference magnitude falls below ``NORM_REF_TOL`` the column is
    undefined and records NaN instead of dividing.
    """

    name: str
    op: object


@dataclass(frozen=True)
class ParticipationEntropy:
    """Basis-resolved entropy restricted to one magnetization sector."""

    n_down: int

    @property
    def name(self):
        return f"s_part_N{self.n_down}"


@dataclass(frozen=True)
class ClockPopulation:
    """Site-averaged occupation of one local clock state."""

    n: int

    def __post_init__(self):
        if self.n not in range(4):
            raise ValueError("clock populations are indexed 0..3")

    @property
    def name(self):
        return f"pop_{self.n}"


@dataclass(frozen=True)
class SiteDensity:
    """Lattice density aggregated over a named region."""

    region: str

    def __post_init__(self):
        if self.region not in ("corner", "edge", "boundary"):
            raise ValueError("region must be 'corner', 'edge' or 'boundary'")

    @property
    def name(self):
        return f"n_{self.region}"


# ----------------------------------------------------------------------
# raw measurements
# ----------------------------------------------------------------------

def _dense_hermitian(op):
    if isinstance(op, OperatorExpr):
        if not op.is_hermitian():
            raise NonHermitian("expectation requires a Hermitian operator")
        return op.to_dense()
    mat = np.asarray(op, dtype=complex)
    if not np.allclose(mat, mat.conj().T, atol=1e-12):
        raise NonHermitian("expectation requires a Hermitian matrix")
    return mat


def _expect_dense(state, mat):
    if state.ndim == 2:
        val = complex(np.einsum("ic,ij,jc->", state.conj(), mat, state))
    else:
        val = complex(np.vdot(state, mat @ state))
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val)):
        raise NonHermitian(f"imaginary residue {val.imag:.3e} in expectation")
    return val.real


def expectation(state, op):
    """<state|op|state> with the operator checked Hermitian."""
    return _expect_dense(np.asarray(state), _dense_hermitian(op))


def participation_entropy(state, L, n_down):
    """-sum p_i ln p_i over the n_down sector, with 0 ln 0 = 0.

    Weights are taken from the full state without renormalizing to the
    sector, so leakage shows up as a lowered entropy rather than being
    hidden.
    """
    idx = sector_indices(L, n_down)
    p = np.abs(np.asarray(state)[idx]) ** 2
    p = p[p > 0.0]
    if p.size == 0:
        return 0.0
    return float(-(p * np.log(p)).sum())


def infinite_temperature_entropy(L, n_down):
    """Sector participation entropy of the fully mixed state."""
    dim = math.comb(L, n_down)
    return dim * L * math.log(2.0) / 2 ** L


def clock_populations(state, L):
    """Site-averaged probabilities of the four local clock states."""
    w = np.abs(np.asarray(state)) ** 2
    if w.size != 4 ** L:
        raise ValueError(f"state is not a {L}-site clock state")
    w = w.reshape([4] * L)
    pops = np.zeros(4)
    for site in range(L):
        axes = tuple(a for a in range(L) if a != L - 1 - site)
        pops += w.sum(axis=axes)
    pops /= L
    total = pops.sum()
    # guard against wrong-space input, where the sum is off by order one;
    # round-off drift of long single-precision walks stays below this and
    # is divided out
    if abs(total - 1.0) > 1e-3:
        raise ValueError(f"populations sum to {total!r}, state not normalized")
    return pops / total


def site_density(state, params, region):
    """Aggregated region density of a lattice state or orbital stack."""
    cells = densities_by_cell(params, state)
    if region == "corner":
        return corner_density(params, cells)
    if region == "edge":
        return edge_density(params, cells)
    if region == "boundary":
        return boundary_density(params, cells)
    raise ValueError("region must be 'corner', 'edge' or 'boundary'")


# ----------------------------------------------------------------------
# evaluator factory
# ----------------------------------------------------------------------

def build_evaluators(specs, initial, space=None):
    """Named closures for a fixed initial state.

    ``space`` is the chain length for sector and clock observables, or
    the lattice parameters for site densities; plain expectations ignore
    it.
    """
    initial = np.asarray(initial)
    out = {}
    for spec in specs:
        if spec.name in out:
            raise ValueError(f"duplicate observable name {spec.name!r}")
        out[spec.name] = _evaluator(spec, initial, space)
    return out


def _site_count(space):
    # parameter objects carry L; a bare int is the site count itself
    return int(space.L) if hasattr(space, "L") else int(space)


def _evaluator(spec, initial, space):
    if isinstance(spec, ExpectationOf):
        mat = _dense_hermitian(spec.op)
        return lambda s: _expect_dense(s, mat)
    if isinstance(spec, NormalizedExpectation):
        mat = _dense_hermitian(spec.op)
        ref = _expect_dense(initial, mat)
        if abs(ref) < NORM_REF_TOL:
            return lambda s: math.nan
        return lambda s: _expect_dense(s, mat) / ref
    if isinstance(spec, ParticipationEntropy):
        L = _site_count(space)
        idx = sector_indices(L, spec.n_down)

        def entropy(s, idx=idx):
            p = np.abs(s[idx]) ** 2
            p = p[p > 0.0]
            return float(-(p * np.log(p)).sum()) if p.size else 0.0

        return entropy
    if isinstance(spec, ClockPopulation):
        L = _site_count(space)
        return lambda s: float(clock_populations(s, L)[spec.n])
    if isinstance(spec, SiteDensity):
        if not isinstance(space, HotiParams):
            raise TypeError("site densities need lattice parameters as space")
        return lambda s: float(site_density(s, space, spec.region))
    raise TypeError(f"unknown observable spec {spec!r}")


def standard_spin_specs(L, total_spin, parity_z):
    """The four normalized spin columns used by the chain drives."""
    return (
        NormalizedExpectation("s_x_norm", 0.5 * total_spin(L, "x")),
        NormalizedExpectation("s_y_norm", 0.5 * total_spin(L, "y")),
        NormalizedExpectation("s_z_norm", 0.5 * total_spin(L, "z")),
        NormalizedExpectation("parity_z_norm", parity_z(L)),
    )


def clock_population_specs():
    return tuple(ClockPopulation(n) for n in range(4))


def hoti_density_specs():
    return (SiteDensity("corner"), SiteDensity("edge"), SiteDensity("boundary"))


# ----------------------------------------------------------------------
# exact-trace autocorrelation
# ----------------------------------------------------------------------

def autocorrelation(seq, op, n_periods, sample_times=None, name="op",
                    cap=AUTOCORR_CAP):
    """Infinite-temperature stroboscopic autocorrelation of ``op``.

    C(l) = Tr(S(lT) S) / Tr(S^2) with S evolved in the Heisenberg
    picture by the compiled period unitary, so C(0) = 1.  The unitary is
    normal, so a complex Schur form turns every sample into an O(dim^2)
    phase sum; this keeps arbitrary horizons exact without stochastic
    trace estimation.
    """
    from scipy.linalg import schur

    if isinstance(seq, RandomDrive):
        raise TypeError("exact-trace autocorrelation needs a deterministic drive")
    mat = _dense_hermitian(op)
    if mat.shape[0] > cap:
        raise DimensionOverflow(
            f"autocorrelation dim {mat.shape[0]} exceeds cap {cap}"
        )
    u = compile_period_unitary(seq, cap=cap)
    tri, z = schur(u, output="complex")
    theta = np.angle(np.diagonal(tri))
    s_tilde = z.conj().T @ mat @ z
    weight = s_tilde * s_tilde.T
    delta = theta[None, :] - theta[:, None]
    norm = weight.sum().real
    if abs(norm) < 1e-300:
        raise ValueError("operator has vanishing Hilbert-Schmidt norm")

    if sample_times is None:
        from .propagate import default_sample_times

        samples = default_sample_times(int(n_periods))
    else:
        samples = np.asarray(sample_times, dtype=np.int64)
    series = np.empty(samples.size)
    for i, ell in enumerate(samples):
        val = (weight * np.exp(1j * delta * float(ell))).sum() / norm
        series[i] = val.real
    super_period = float(seq.period) * float(seq.q_periods)
    return Trajectory(
        label=f"autocorr-{seq.label}",
        period_indices=samples,
        times=samples * super_period,
        values={f"autocorr_{name}": series},
        method="exact-trace",
    )
