"""Stroboscopic evolution of compiled drive protocols.

A drive is applied one super-period at a time (``q_periods`` base
periods, so one application of the compiled unitary), and observables
are recorded at integer super-period indices.  Three methods cover the
practical regimes:

``dense``
    precompute the one-period unitary once, then apply it stepwise;
``krylov``
    never densify: apply each segment exponential to the state with a
    sparse Krylov expansion (large dimensions);
``squared``
    reach log-spaced sample indices through cached binary powers
    ``U^(2^k)`` built by repeated squaring (deterministic drives only).

Random drives draw one fair branch coin per super-period from the
realization's own bit stream, so a trajectory is reproducible from its
seed alone.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionOverflow, NonHermitian, NormDrift
from .operators import DENSE_CAP, OperatorExpr
from .sequences import DriveSequence, RandomDrive

#: relative state-norm drift that aborts a run, by working precision
NORM_TOL = 1e-8  # squared-method round-off reaches ~1e-9 near 2^20 periods
NORM_TOL_SINGLE = 1e-2  # per sample gap; the state renormalizes at samples

_PRECISIONS = ("double", "single")

#: largest dimension the automatic method selection will densify
DENSE_AUTO_CAP = 2 ** 12

_METHOD_ALIASES = {
    "auto": "auto",
    "dense": "dense",
    "denseprecomputed": "dense",
    "krylov": "krylov",
    "krylovpersegment": "krylov",
    "squared": "squared",
    "squaredstroboscopic": "squared",
}


def canonical_method(name):
    key = str(name).replace("_", "").replace("-", "").lower()
    if key not in _METHOD_ALIASES:
        raise ValueError(f"unknown evolution method {name!r}")
    return _METHOD_ALIASES[key]


def default_sample_times(n_periods_max, per_decade=40):
    """Log-spaced integer period indices, always including 0 and the end."""
    n_max = int(n_periods_max)
    if n_max < 0:
        raise ValueError("n_periods_max must be non-negative")
    if n_max == 0:
        return np.array([0], dtype=np.int64)
    decades = max(math.log10(n_max), 1e-9)
    count = max(2, int(round(decades * per_decade)) + 1)
    grid = np.round(10.0 ** np.linspace(0.0, math.log10(n_max), count))
    return np.unique(np.concatenate([[0], grid.astype(np.int64), [n_max]]))


@dataclass(frozen=True)
class EvolutionPlan:
    """What to evolve, for how long, and when to look.

    ``sample_times`` are integer super-period indices; ``None`` picks the
    log-spaced default over ``[0, n_periods_max]``.  ``seed`` feeds the
    branch-coin stream of random drives and the sub-seeding of
    ensembles.  ``precision`` selects the working dtype of the compiled
    unitaries: exponentials are always built in double, but "single"
    casts them before the stepping products, which roughly halves the
    cost of long dense or squared walks.
    """

    drive: object
    n_periods_max: int
    sample_times: tuple = None
    method: str = "auto"
    seed: int = None
    precision: str = "double"

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if self.precision not in _PRECISIONS:
            raise ValueError(f"precision must be one of {_PRECISIONS}")
        if int(self.n_periods_max) < 1:
            raise ValueError("n_periods_max must be positive")
        object.__setattr__(self, "n_periods_max", int(self.n_periods_max))
        if self.sample_times is not None:
            arr = np.asarray(self.sample_times, dtype=np.int64)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError("sample_times must be a non-empty 1-d list")
            if np.any(np.diff(arr) <= 0):
                raise ValueError("sample_times must be strictly increasing")
            if arr[0] < 0 or arr[-1] > self.n_periods_max:
                raise ValueError("sample_times outside [0, n_periods_max]")
            object.__setattr__(
                self, "sample_times", tuple(int(x) for x in arr)
            )
        if self.is_random and self.method == "squared":
            raise ValueError("squared sampling needs a deterministic drive")

    @property
    def is_random(self):
        return isinstance(self.drive, RandomDrive)

    @property
    def branches(self):
        return self.drive.branches if self.is_random else (self.drive,)

    @property
    def super_period(self):
        seq = self.branches[0]
        return float(seq.period) * float(seq.q_periods)

    def resolved_samples(self):
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=np.int64)
        return default_sample_times(self.n_periods_max)

    def resolved_method(self, dim):
        if self.method != "auto":
            return self.method
        return "dense" if dim <= DENSE_AUTO_CAP else "krylov"


@dataclass(frozen=True)
class Trajectory:
    """Sampled observable series for a single realization.

    ``values`` maps observable name to a float array aligned with
    ``period_indices``.  NaN marks a value that is declared undefined by
    its observable (for example a normalization against a vanishing
    initial expectation); infinities are rejected at construction time.
    """

    label: str
    period_indices: np.ndarray
    times: np.ndarray
    values: dict
    seed: object = None
    disorder: dict = None
    method: str = "dense"

    def __post_init__(self):
        for name, col in self.values.items():
            arr = np.asarray(col, dtype=float)
            if np.any(np.isinf(arr)):
                raise ValueError(f"observable {name!r} produced infinities")
            self.values[name] = arr

    def column(self, name):
        return self.values[name]


@dataclass(frozen=True)
class EnsembleResult:
    """Realization-resolved trajectories plus their mean and stderr."""

    label: str
    period_indices: np.ndarray
    times: np.ndarray
    mean: dict
    stderr: dict
    trajectories: tuple
    seeds: tuple

    @property
    def n_realizations(self):
        return len(self.trajectories)


# ----------------------------------------------------------------------
# period-unitary compilation
# ----------------------------------------------------------------------

#: above this dimension, OperatorExpr exponents go through a sparse
#: Taylor expansion instead of a dense eigendecomposition
SPARSE_EXPM_MIN = 2048


class _GeneratorMats:
    """Dense, sparse, and diagonal views of one generator, built lazily."""

    def __init__(self, op, cap):
        self._cap = cap
        self._dense = None
        self._eig = None
        self._checked = False
        if isinstance(op, OperatorExpr):
            self.expr = op
            self.sparse = op.to_sparse().tocsr()
            self.dim = self.sparse.shape[0]
            if self.dim > cap:
                raise DimensionOverflow(f"dense dim {self.dim} exceeds cap {cap}")
            coo = self.sparse.tocoo()
            if coo.nnz == 0 or np.array_equal(coo.row, coo.col):
                self.diagonal = self.sparse.diagonal()
            else:
                self.diagonal = None
        else:
            self.expr = None
            self.sparse = None
            mat = np.asarray(op, dtype=complex)
            if mat.shape[0] > cap:
                raise DimensionOverflow(f"dense dim {mat.shape[0]} exceeds cap {cap}")
            self._dense = mat
            self.dim = mat.shape[0]
            diag = np.diagonal(mat)
            self.diagonal = (
                diag if np.count_nonzero(mat) == np.count_nonzero(diag) else None
            )

    @property
    def dense(self):
        if self._dense is None:
            self._dense = self.expr.to_dense(self._cap)
        return self._dense

    def check_hermitian(self, name):
        if self._checked:
            return
        herm = (
            self.expr.is_hermitian()
            if self.expr is not None
            else bool(np.allclose(self._dense, self._dense.conj().T, atol=1e-12))
        )
        if not herm:
            raise NonHermitian(f"exponent generator {name!r}")
        self._checked = True

    def exp_factor(self, coeff):
        """exp(coeff * H) as ('diag', phases) or ('full', matrix)."""
        if self.diagonal is not None:
            return "diag", np.exp(coeff * self.diagonal)
        if self.sparse is not None and self.dim >= SPARSE_EXPM_MIN:
            from scipy.sparse.linalg import expm_multiply

            return "full", expm_multiply(
                (coeff * self.sparse).tocsc(), np.eye(self.dim, dtype=complex)
            )
        if self._eig is None:
            self._eig = np.linalg.eigh(self.dense)
        w, v = self._eig
        return "full", (v * np.exp(coeff * w)) @ v.conj().T

    def kick_factor(self, sign):
        """The generator itself as a unitary factor; sign -1 is the adjoint."""
        if (
            self.sparse is not None
            and self.sparse.nnz == self.dim
            and np.all(np.diff(self.sparse.indptr) == 1)
            and np.unique(self.sparse.indices).size == self.dim
        ):
            m = self.sparse if sign > 0 else self.sparse.conj().T.tocsr()
            return "perm", (m.indices.copy(), m.data.copy())
        return "full", self.dense if sign > 0 else self.dense.conj().T


def compile_period_unitary(seq, cap=DENSE_CAP):
    """Dense unitary for one super-period of a deterministic sequence.

    Distinct exponent factors are built once and cached: diagonal
    generators exponentiate elementwise, large operator expressions go
    through a sparse Taylor product, and everything else reuses one
    eigendecomposition per generator.  Kick segments multiply in
    verbatim, with sign -1 meaning the adjoint; single-entry-per-row
    kicks apply as column gathers instead of full products.
    """
    if isinstance(seq, RandomDrive):
        raise TypeError("random drive has no single unitary; compile branches")
    T = float(seq.period)
    gens = {}
    factors = {}
    U = None
    lead = None  # diagonal phases waiting to the right of U
    for s in seq.segments:
        name = s.generator
        if name not in gens:
            gens[name] = _GeneratorMats(seq.generators[name], cap)
        g = gens[name]
        key = (name, s.is_kick, float(s.sign_coeff), s.duration_fraction)
        if key not in factors:
            if s.is_kick:
                factors[key] = g.kick_factor(s.sign_coeff)
            else:
                g.check_hermitian(name)
                coeff = -1j * s.sign_coeff * float(s.duration_fraction) * T
                factors[key] = g.exp_factor(coeff)
        kind, payload = factors[key]
        if kind == "diag":
            lead = payload if lead is None else lead * payload
            continue
        if kind == "perm":
            # row r of P carries phases[r] at column cols[r], so
            # (M @ P)[:, cols[r]] = M[:, r] * phases[r]
            cols, phases = payload
            if U is None:
                dim = phases.shape[0]
                U = np.zeros((dim, dim), dtype=complex)
                rowvals = phases if lead is None else lead * phases
                U[np.arange(dim), cols] = rowvals
            else:
                if lead is not None:
                    U = U * lead[None, :]
                out = np.empty_like(U)
                out[:, cols] = U * phases[None, :]
                U = out
            lead = None
            continue
        F = payload
        if lead is not None:
            F = lead[:, None] * F
            lead = None
        U = F.copy() if U is None else U @ F
    if U is None and lead is None:
        raise ValueError("sequence has no segments")
    if lead is not None:
        U = np.diag(lead) if U is None else U * lead[None, :]
    return U


def compile_branch_unitaries(drive, cap=DENSE_CAP):
    return tuple(compile_period_unitary(b, cap) for b in drive.branches)


# ----------------------------------------------------------------------
# steppers
# ----------------------------------------------------------------------

def _working_dtype(plan):
    return np.complex64 if plan.precision == "single" else np.complex128


class _DenseStepper:
    def __init__(self, plan, cap):
        dtype = _working_dtype(plan)
        self._us = [
            compile_period_unitary(b, cap).astype(dtype, copy=False)
            for b in plan.branches
        ]

    def advance(self, psi, start, target, coins):
        for step in range(start, target):
            b = 0 if coins is None else int(coins[step])
            psi = self._us[b] @ psi
        return psi


class _KrylovStepper:
    """Per-segment sparse exponentials; the state never densifies."""

    def __init__(self, plan):
        self._branches = [self._compile(seq) for seq in plan.branches]

    @staticmethod
    def _compile(seq):
        from scipy.sparse import csr_matrix

        T = float(seq.period)
        cache = {}
        ops = []
        # segments are stored in product order; the rightmost factor hits
        # the state first
        for s in reversed(seq.segments):
            if s.generator not in cache:
                gen = seq.generators[s.generator]
                if isinstance(gen, OperatorExpr):
                    cache[s.generator] = gen.to_sparse(cap=None).tocsr()
                else:
                    cache[s.generator] = csr_matrix(np.asarray(gen, dtype=complex))
            m = cache[s.generator]
            if s.is_kick:
                ops.append(("kick", m if s.sign_coeff > 0 else m.conj().T.tocsr()))
            else:
                scale = -1j * s.sign_coeff * float(s.duration_fraction) * T
                ops.append(("exp", (scale * m).tocsc()))
        return ops

    def advance(self, psi, start, target, coins):
        from scipy.sparse.linalg import expm_multiply

        for step in range(start, target):
            b = 0 if coins is None else int(coins[step])
            for kind, mat in self._branches[b]:
                psi = mat @ psi if kind == "kick" else expm_multiply(mat, psi)
        return psi


class _SquaredStepper:
    """Reaches samples through cached binary powers U^(2^k).

    Powers are built by repeated squaring on first use and dropped once
    no later gap needs their bit; log-spaced grids shed low bits as the
    walk climbs, so only a handful of powers stay live.  Every squaring
    is rescaled to unit mean singular value (Frobenius norm sqrt(dim)),
    which strips the systematic norm inflation of round-off and is exact
    for a true unitary.
    """

    def __init__(self, plan, cap, samples):
        u = compile_period_unitary(plan.drive, cap).astype(
            _working_dtype(plan), copy=False)
        gaps = np.diff(np.concatenate([[0], np.asarray(samples, dtype=np.int64)]))
        last_use = {}
        for i, g in enumerate(gaps):
            k, gg = 0, int(g)
            while gg:
                if gg & 1:
                    last_use[k] = i
                gg >>= 1
                k += 1
        self._last_use = last_use
        self._powers = {0: u}
        self._top = 0
        self._gap = -1

    def advance(self, psi, start, target, coins):
        self._gap += 1
        delta = target - start
        if delta == 0:
            return psi
        hi = delta.bit_length() - 1
        while self._top < hi:
            prev = self._top
            sq = self._powers[prev] @ self._powers[prev]
            # accumulate the norm in double; float32 partial sums are too
            # coarse at large dimensions
            sq *= math.sqrt(
                sq.shape[0] / np.sum(np.abs(sq) ** 2, dtype=np.float64)
            )
            self._powers[prev + 1] = sq
            self._top = prev + 1
            if self._last_use.get(prev, -1) < self._gap:
                del self._powers[prev]
        for k in range(delta.bit_length()):
            if (delta >> k) & 1:
                psi = self._powers[k] @ psi
        for k in list(self._powers):
            if k != self._top and self._last_use.get(k, -1) <= self._gap:
                del self._powers[k]
        return psi


def _make_stepper(method, plan, cap, samples):
    if method == "dense":
        return _DenseStepper(plan, cap)
    if method == "krylov":
        if plan.precision == "single":
            raise ValueError("krylov stepping is double precision only")
        return _KrylovStepper(plan)
    if method == "squared":
        return _SquaredStepper(plan, cap, samples)
    raise ValueError(f"unresolved method {method!r}")


# ----------------------------------------------------------------------
# evolution
# ----------------------------------------------------------------------

def _column_norms(psi):
    if psi.ndim == 2:
        return np.linalg.norm(psi, axis=0)
    return np.atleast_1d(np.linalg.norm(psi))


def _check_norm(psi, norms0, where, tol=NORM_TOL):
    drift = np.max(np.abs(_column_norms(psi) / norms0 - 1.0))
    if drift > tol:
        raise NormDrift(f"relative norm drift {drift:.3e} at period {where}")


def evolve(plan, initial, observables=None, *, coin_rng=None, disorder=None,
           label=None, seed_info=None, cap=DENSE_CAP):
    """Propagate ``initial`` and sample observables on the plan's grid.

    ``observables`` maps column name to a callable evaluated on the
    state; entries become the float columns of the returned trajectory.
    For random drives one branch coin per super-period is drawn up
    front from ``coin_rng`` (falling back to a generator seeded with
    ``plan.seed``), which pins the whole trajectory to the seed.
    """
    observables = dict(observables or {})
    psi = np.array(initial, dtype=_working_dtype(plan), copy=True)
    if psi.shape[0] < 1:
        raise ValueError("empty initial state")
    samples = plan.resolved_samples()
    method = plan.resolved_method(psi.shape[0])
    coins = None
    if plan.is_random:
        rng = coin_rng if coin_rng is not None else np.random.default_rng(plan.seed)
        coins = rng.integers(0, len(plan.branches), size=int(samples[-1]),
                             dtype=np.int64)
    stepper = _make_stepper(method, plan, cap, samples)

    single = plan.precision == "single"
    norm_tol = NORM_TOL_SINGLE if single else NORM_TOL
    norms0 = _column_norms(psi)
    records = {name: np.empty(samples.size) for name in observables}
    pos = 0
    for i, raw in enumerate(samples):
        target = int(raw)
        psi = stepper.advance(psi, pos, target, coins)
        pos = target
        if pos:
            _check_norm(psi, norms0, pos, norm_tol)
            if single:
                # renormalize so the check above bounds per-gap drift and
                # scale error never compounds across the walk
                psi *= norms0 / _column_norms(psi)
        for name, fn in observables.items():
            records[name][i] = float(fn(psi))
    return Trajectory(
        label=label if label is not None else plan.drive.label,
        period_indices=samples,
        times=samples * plan.super_period,
        values=records,
        seed=seed_info if seed_info is not None else plan.seed,
        disorder=disorder,
        method=method,
    )


# ----------------------------------------------------------------------
# ensembles
# ----------------------------------------------------------------------

def _seed_record(child):
    return {"entropy": int(child.entropy), "spawn_key": list(child.spawn_key)}


def default_workers():
    env = os.environ.get("HS_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def evolve_ensemble(plan, n_realizations, prepare_state, observable_factory, *,
                    drive_factory=None, label=None, workers=None, cap=DENSE_CAP):
    """Deterministic sub-seeded ensemble around :func:`evolve`.

    Each realization splits three child streams off the master seed,
    consumed in a fixed order: disorder, initial state, branch coins.
    ``prepare_state(rng)`` builds the initial state, and
    ``observable_factory(initial)`` the per-realization evaluators (so
    normalized observables can capture their own reference values).
    ``drive_factory(rng)`` may return a drive or a ``(drive, disorder)``
    pair; when present the plan's drive is rebuilt per realization.

    Shared-drive dense runs with vector states collapse into one
    batched state matrix, which keeps long sweeps at BLAS speed; the
    seeding and results match the per-realization path.
    """
    n_realizations = int(n_realizations)
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    children = np.random.SeedSequence(plan.seed).spawn(n_realizations)
    base_label = label if label is not None else plan.drive.label

    streams = [
        tuple(np.random.default_rng(s) for s in child.spawn(3))
        for child in children
    ]
    states = [
        np.asarray(prepare_state(s_rng), dtype=complex)
        for _, s_rng, _ in streams
    ]

    dim = states[0].shape[0]
    batched = (
        drive_factory is None
        and plan.resolved_method(dim) == "dense"
        and all(s.ndim == 1 and s.shape[0] == dim for s in states)
    )
    if batched:
        trajectories = _evolve_batched(
            plan, children, streams, states, observable_factory, base_label, cap
        )
    else:
        def _one(r):
            d_rng, _, c_rng = streams[r]
            if drive_factory is not None:
                made = drive_factory(d_rng)
                drive, disorder = made if isinstance(made, tuple) else (made, None)
                local = replace(plan, drive=drive)
            else:
                local, disorder = plan, None
            obs = observable_factory(states[r])
            return evolve(
                local, states[r], obs, coin_rng=c_rng, disorder=disorder,
                label=f"{base_label}#{r}", seed_info=_seed_record(children[r]),
                cap=cap,
            )

        n_workers = workers if workers is not None else default_workers()
        if n_workers > 1 and n_realizations > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                trajectories = list(pool.map(_one, range(n_realizations)))
        else:
            trajectories = [_one(r) for r in range(n_realizations)]

    first = trajectories[0]
    mean, stderr = {}, {}
    for name in first.values:
        stack = np.vstack([t.values[name] for t in trajectories])
        mean[name] = stack.mean(axis=0)
        if len(trajectories) > 1:
            stderr[name] = stack.std(axis=0, ddof=1) / math.sqrt(len(trajectories))
        else:
            stderr[name] = np.zeros(stack.shape[1])
    return EnsembleResult(
        label=base_label,
        period_indices=first.period_indices,
        times=first.times,
        mean=mean,
        stderr=stderr,
        trajectories=tuple(trajectories),
        seeds=tuple(_seed_record(c) for c in children),
    )


def _evolve_batched(plan, children, streams, states, observable_factory,
                    base_label, cap):
    """Shared-drive dense path: all realizations ride one state matrix."""
    samples = plan.resolved_samples()
    n_real = len(states)
    dtype = _working_dtype(plan)
    us = [
        compile_period_unitary(b, cap).astype(dtype, copy=False)
        for b in plan.branches
    ]
    coins = None
    if plan.is_random:
        n_steps = int(samples[-1])
        coins = np.stack([
            c_rng.integers(0, len(us), size=n_steps, dtype=np.int64)
            for _, _, c_rng in streams
        ])
    psi = np.stack(states, axis=1).astype(dtype, copy=False)
    single = plan.precision == "single"
    norm_tol = NORM_TOL_SINGLE if single else NORM_TOL
    norms0 = _column_norms(psi)
    evaluators = [observable_factory(states[r]) for r in range(n_real)]
    names = list(evaluators[0])
    records = np.empty((n_real, len(names), samples.size))

    pos = 0
    for i, raw in enumerate(samples):
        target = int(raw)
        if coins is None:
            for _ in range(pos, target):
                psi = us[0] @ psi
        else:
            for step in range(pos, target):
                row = coins[:, step]
                for b in range(len(us)):
                    cols = np.flatnonzero(row == b)
                    if cols.size:
                        psi[:, cols] = us[b] @ psi[:, cols]
        pos = target
        if pos:
            _check_norm(psi, norms0, pos, norm_tol)
            if single:
                psi *= norms0 / _column_norms(psi)
        for r in range(n_real):
            for j, name in enumerate(names):
                records[r, j, i] = float(evaluators[r][name](psi[:, r]))

    times = samples * plan.super_period
    out = []
    for r in range(n_real):
        out.append(Trajectory(
            label=f"{base_label}#{r}",
            period_indices=samples,
            times=times,
            values={name: records[r, j] for j, name in enumerate(names)},
            seed=_seed_record(children[r]),
            disorder=None,
            method="dense",
        ))
    return out


# ----------------------------------------------------------------------
# trajectory persistence
# ----------------------------------------------------------------------

def write_trajectory_csv(path, traj):
    """One realization per file: period_index, time, then one column each."""
    path = Path(path)
    names = list(traj.values)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period_index", "time", *names])
        for i, idx in enumerate(traj.period_indices):
            row = [str(int(idx)), format(float(traj.times[i]), ".17g")]
            row.extend(
                format(float(traj.values[name][i]), ".17g") for name in names
            )
            writer.writerow(row)
    return path


def read_trajectory_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["period_index", "time"]:
            raise ValueError(f"{path} lacks a trajectory header")
        rows = [row for row in reader if row]
    names = header[2:]
    idx = np.array([int(r[0]) for r in rows], dtype=np.int64)
    times = np.array([float(r[1]) for r in rows])
    values = {
        name: np.array([float(r[2 + j]) for r in rows])
        for j, name in enumerate(names)
    }
    return Trajectory(
        label=path.stem, period_indices=idx, times=times, values=values,
        method="file",
    )
