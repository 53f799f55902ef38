"""Effective-generator extraction for drive sequences.

Two independent routes compute the series Q = sum_m Q^(m) with Q^(m)
proportional to T^m, defined through U_F = exp(-i q_duration Q):

* ``bch_symbolic`` recombines segment exponentials with a truncated
  Baker-Campbell-Hausdorff formula, yielding exact operator-valued
  coefficients;
* ``extract_orders`` fits principal matrix logarithms of the dense
  Floquet unitary on a small-T grid.

Keeping both routes separate lets each certify the other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchAmbiguity,
    IllConditionedFit,
    TruncationUnsupported,
)
from .operators import OperatorExpr

BCH_MAX_ORDER = 3
BRANCH_GUARD = 1e-6
COND_LIMIT = 1e8


def _comm(a, b):
    if isinstance(a, OperatorExpr):
        return a * b - b * a
    return a @ b - b @ a


def _is_zero(op):
    if isinstance(op, OperatorExpr):
        return op.n_terms == 0
    return not np.any(op)


class TPoly:
    """Operator-valued polynomial in T, truncated beyond ``max_deg``.

    Coefficients live in whatever algebra the inputs use; only +, scalar
    multiplication and the commutator are required of them.
    """

    __slots__ = ("max_deg", "coeffs")

    def __init__(self, max_deg, coeffs=None):
        self.max_deg = max_deg
        self.coeffs = {}
        if coeffs:
            for d, op in coeffs.items():
                if d <= max_deg and not _is_zero(op):
                    self.coeffs[d] = op

    @classmethod
    def monomial(cls, op, degree, max_deg):
        return cls(max_deg, {degree: op})

    def __add__(self, other):
        out = dict(self.coeffs)
        for d, op in other.coeffs.items():
            out[d] = out[d] + op if d in out else op
        return TPoly(self.max_deg, out)

    def scale(self, factor):
        return TPoly(self.max_deg, {d: op * factor for d, op in self.coeffs.items()})

    def bracket(self, other):
        out = TPoly(self.max_deg)
        acc = {}
        for da, a in self.coeffs.items():
            for db, b in other.coeffs.items():
                d = da + db
                if d > self.max_deg:
                    continue
                c = _comm(a, b)
                acc[d] = acc[d] + c if d in acc else c
        out.coeffs = {d: op for d, op in acc.items() if not _is_zero(op)}
        return out

    def coefficient(self, degree, zero=None):
        if degree in self.coeffs:
            return self.coeffs[degree]
        return zero


def bch_combine(x, y):
    """Truncated log(e^x e^y), complete through nested weight four."""
    c1 = x.bracket(y)
    c2 = x.bracket(c1)
    c3 = y.bracket(c1)
    z = x + y + c1.scale(0.5) + c2.scale(1 / 12) + c3.scale(-1 / 12)
    return z + y.bracket(c2).scale(-1 / 24)


@dataclass(frozen=True)
class EffectiveSeries:
    """Orders of the effective generator with the T^m scaling factored out."""

    orders: tuple
    total_duration: float
    truncation: int
    source: str = "bch"

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(self.orders))

    def order_operators(self):
        return tuple(op for _, op in self.orders)

    def operator(self, m):
        for order, op in self.orders:
            if order == m:
                return op
        raise KeyError(f"series holds no order {m}")

    def evaluate(self, T):
        """Sum of Q^(m) T^m as a dense matrix."""
        total = None
        for m, op in self.orders:
            mat = op.to_dense() if isinstance(op, OperatorExpr) else np.asarray(op)
            term = mat * (T ** m)
            total = term if total is None else total + term
        return total

    def to_json_dict(self):
        orders = []
        for m, op in self.orders:
            if isinstance(op, OperatorExpr):
                orders.append({"order": m, "operator": op.to_json_dict()})
            else:
                arr = np.asarray(op)
                orders.append(
                    {
                        "order": m,
                        "dense_re": arr.real.tolist(),
                        "dense_im": arr.imag.tolist(),
                    }
                )
        return {
            "total_duration": self.total_duration,
            "truncation": self.truncation,
            "source": self.source,
            "orders": orders,
        }

    def dumps(self):
        return json.dumps(self.to_json_dict(), indent=2)


def _require_exponential_segments(seq, what):
    if any(s.is_kick for s in seq.segments):
        raise ValueError(f"{what} requires exponential segments only; "
                         "unroll kicks first")


def bch_symbolic(seq, M):
    """Symbolic Q^(0..M) by pairwise left-to-right BCH recombination."""
    if M > BCH_MAX_ORDER:
        raise TruncationUnsupported(f"symbolic truncation capped at {BCH_MAX_ORDER}")
    if M < 0:
        raise ValueError("truncation order must be >= 0")
    _require_exponential_segments(seq, "bch_symbolic")
    max_deg = M + 1
    acc = None
    for s in seq.segments:
        gen = seq.generators[s.generator]
        weight = -1j * s.sign_coeff * float(s.duration_fraction)
        x = TPoly.monomial(gen * weight, 1, max_deg)
        acc = x if acc is None else bch_combine(acc, x)
    q_coeff = float(seq.q_periods)
    first = next(iter(seq.generators.values()))
    if isinstance(first, OperatorExpr):
        zero = OperatorExpr.zero(first.algebra, first.n_sites)
    else:
        zero = np.zeros_like(np.asarray(first))
    orders = []
    for m in range(M + 1):
        w = acc.coefficient(m + 1)
        q_m = zero if w is None else w * (1j / q_coeff)
        orders.append((m, q_m))
    return EffectiveSeries(
        orders=tuple(orders),
        total_duration=seq.q_duration,
        truncation=M,
        source="bch",
    )


# ----------------------------------------------------------------------
# numeric route
# ----------------------------------------------------------------------

def dense_floquet_unitary(seq, T=None, cap=None):
    """Dense product of segment factors, rightmost applied first."""
    from scipy.linalg import expm

    T = seq.period if T is None else T
    U = None
    for s in seq.segments:
        op = seq.generators[s.generator]
        if isinstance(op, OperatorExpr):
            mat = op.to_dense() if cap is None else op.to_dense(cap)
        else:
            mat = np.asarray(op)
        if s.is_kick:
            F = mat if s.sign_coeff > 0 else mat.conj().T
        else:
            F = expm(-1j * s.sign_coeff * float(s.duration_fraction) * T * mat)
        U = F if U is None else U @ F
    if U is None:
        raise ValueError("sequence has no segments")
    return U


def matrix_log_effective(seq, T, cap=None):
    """Exact Q at period T from the principal log of the dense unitary.

    The product is normal, so a complex Schur form gives an exactly
    unitary eigenbasis; eigenphases within BRANCH_GUARD of the cut raise.
    """
    from scipy.linalg import schur

    U = dense_floquet_unitary(seq, T, cap)
    tri, z = schur(U, output="complex")
    theta = np.angle(np.diagonal(tri))
    if np.any(np.pi - np.abs(theta) < BRANCH_GUARD):
        raise BranchAmbiguity(
            "eigenphase too close to the principal-branch cut at +-pi"
        )
    # U = Z e^{i theta} Z^dagger and U = e^{-i q_duration Q}
    q_duration = float(seq.q_periods) * T
    return (z * (-theta / q_duration)) @ z.conj().T


def _branch_safe_tmax(seq, cap=None):
    lead = seq.leading_order()
    mat = lead.to_dense() if isinstance(lead, OperatorExpr) else np.asarray(lead)
    scale = np.linalg.norm(mat, 2) * float(seq.q_periods)
    if scale == 0:
        return np.inf
    return np.pi / scale


def _action_scale(seq, cap=None):
    """Summed segment exponent norms per unit T; sets the series scale."""
    total = 0.0
    norms = {}
    for s in seq.segments:
        if s.is_kick:
            continue
        if s.generator not in norms:
            op = seq.generators[s.generator]
            if isinstance(op, OperatorExpr):
                mat = op.to_dense() if cap is None else op.to_dense(cap)
            else:
                mat = np.asarray(op)
            norms[s.generator] = np.linalg.norm(mat, 2)
        total += norms[s.generator] * abs(s.sign_coeff) * float(s.duration_fraction)
    return total


def default_t_grid(seq, n_points=9, cap=None):
    """Geometric decade ending where truncation tail and log noise balance."""
    action = _action_scale(seq, cap)
    t_max = 0.5 / action if action > 0 else 1.0
    t_max = min(t_max, _branch_safe_tmax(seq, cap) / 6.0)
    ratio = 10.0 ** (1.0 / (n_points - 1))
    return [t_max / ratio ** j for j in range(n_points)]


def extract_orders(seq, M, T_grid=None, cap=None):
    """Numeric Q^(0..M) from matrix logs on a small-T grid.

    Eigenphase symmetry under T -> -T splits even and odd orders, so two
    smaller fits replace one stiff degree-M fit; two guard orders absorb
    the leading truncation tail.
    """
    _require_exponential_segments(seq, "extract_orders")
    if T_grid is None:
        T_grid = default_t_grid(seq, max(7, M + 2), cap)
    ts = np.asarray(sorted(float(t) for t in T_grid), dtype=float)
    if len(ts) < M + 2:
        raise ValueError("need at least M+2 grid points")
    if np.any(ts <= 0):
        raise ValueError("grid points must be positive")

    q_plus = np.stack([matrix_log_effective(seq, t, cap).ravel() for t in ts])
    q_minus = np.stack([matrix_log_effective(seq, -t, cap).ravel() for t in ts])
    even = 0.5 * (q_plus + q_minus)
    odd = 0.5 * (q_plus - q_minus) / ts[:, None]

    n_even = M // 2 + 1
    n_odd = (M + 1) // 2
    coeff_even = _fit_in_u(ts, even, n_even)
    coeff_odd = _fit_in_u(ts, odd, n_odd) if n_odd else []

    dim = int(round(np.sqrt(q_plus.shape[1])))
    orders = []
    for m in range(M + 1):
        bank = coeff_even if m % 2 == 0 else coeff_odd
        orders.append((m, bank[m // 2].reshape(dim, dim)))
    return EffectiveSeries(
        orders=tuple(orders),
        total_duration=seq.q_duration,
        truncation=M,
        source="matrix-log",
    )


def _fit_in_u(ts, rows, n_wanted, n_guard=3):
    """Least-squares polynomial fit in u = t^2; returns coefficient rows."""
    u = ts ** 2
    degree = n_wanted - 1 + n_guard
    degree = min(degree, len(ts) - 1)
    if degree < n_wanted - 1:
        raise IllConditionedFit("grid too small for requested orders")
    u0 = u.max()
    A = np.vander(u / u0, degree + 1, increasing=True)
    if np.linalg.cond(A) > COND_LIMIT:
        raise IllConditionedFit(
            f"Vandermonde condition number exceeds {COND_LIMIT:.0e}"
        )
    sol, *_ = np.linalg.lstsq(A, rows, rcond=None)
    return [sol[k] / u0 ** k for k in range(n_wanted)]


def series_residual(seq, series, T, cap=None):
    """Frobenius distance between exact Q(T) and the truncated series."""
    exact = matrix_log_effective(seq, T, cap)
    approx = series.evaluate(T)
    return float(np.linalg.norm(exact - approx))


def order_accuracy_slope(seq, M, t_values, cap=None):
    """Log-log slope of the truncation residual; ideally M+1."""
    series = bch_symbolic(seq, M)
    res = [series_residual(seq, series, t, cap) for t in t_values]
    logs_t = np.log(np.asarray(t_values))
    logs_r = np.log(np.asarray(res))
    slope, _ = np.polyfit(logs_t, logs_r, 1)
    return float(slope)


def projection_coefficient(op, direction):
    """Frobenius projection <direction, op> / <direction, direction>."""
    if isinstance(op, OperatorExpr) and isinstance(direction, OperatorExpr):
        num = 0.0
        for key, c in op.terms.items():
            if key in direction.terms:
                num += c * np.conj(direction.terms[key])
        den = sum(abs(c) ** 2 for c in direction.terms.values())
        return complex(num / den)
    a = op.to_dense() if isinstance(op, OperatorExpr) else np.asarray(op)
    b = (
        direction.to_dense()
        if isinstance(direction, OperatorExpr)
        else np.asarray(direction)
    )
    return complex(np.vdot(b, a) / np.vdot(b, b))
