"""Symmetry groups, ladders, and order-by-order commutation certification.

A symmetry group here is nothing more than a named generator list.  The
certification question is always the same: does a given Hermitian operator
commute with every generator, measured by a scale-free relative Frobenius
norm?  Verdicts are three-valued.  PASS and FAIL are separated by five
decades on purpose; anything in between is reported as INDETERMINATE
instead of being silently classified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AntiunitaryUnsupported, DimensionMismatch, NonHermitian
from .operators import OperatorExpr, frobenius_norm

# default verdict band (relative Frobenius norm)
PASS_TOL = 1e-10
FAIL_TOL = 1e-3

PASS = "PASS"
FAIL = "FAIL"
INDETERMINATE = "INDETERMINATE"


def _densify(op, cap=None):
    if isinstance(op, OperatorExpr):
        return op.to_dense() if cap is None else op.to_dense(cap=cap)
    return np.asarray(op, dtype=complex)


@dataclass(frozen=True)
class SymmetryGroup:
    """Named generator set; the trivial group "E" carries no generators.

    Antiunitary groups store the unitary part U of S = U K and can only be
    certified through momentum-block relations, not by commutators.
    """

    name: str
    generators: tuple = ()
    kind: str = "unitary"

    def __post_init__(self):
        if self.kind not in ("unitary", "antiunitary"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def is_trivial(self):
        return len(self.generators) == 0

    def validate(self, tol=1e-10):
        """Check each generator is Hermitian or unitary on its dense form."""
        for gen in self.generators:
            m = _densify(gen)
            scale = max(np.linalg.norm(m), 1.0)
            hermitian = np.linalg.norm(m - m.conj().T) <= tol * scale
            unitary = (
                np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
                <= tol * np.sqrt(m.shape[0])
            )
            if not (hermitian or unitary):
                raise NonHermitian(
                    f"generator of {self.name} is neither Hermitian nor unitary"
                )
        return True


@dataclass(frozen=True)
class SymmetryLadder:
    """Ordered chain of groups, largest first (G_n down to G_0)."""

    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))

    @property
    def level(self):
        """n in G_n > ... > G_0."""
        return len(self.groups) - 1

    def group_index(self, q):
        """Group G_q (q counts from the bottom, G_0 last in the list)."""
        return self.groups[self.level - q]


@dataclass(frozen=True)
class CertReport:
    group: str
    max_relative_norm: float
    verdict: str

    @property
    def passes(self):
        return self.verdict == PASS


def relative_commutator_norm(h, s):
    """‖[h, S]‖_F / (‖h‖_F ‖S‖_F); zero when either factor vanishes."""
    hd, sd = _densify(h), _densify(s)
    if hd.shape != sd.shape:
        raise DimensionMismatch(f"operator dims {hd.shape} vs {sd.shape}")
    nh, ns = frobenius_norm(hd), frobenius_norm(sd)
    if nh == 0 or ns == 0:
        return 0.0
    return frobenius_norm(hd @ sd - sd @ hd) / (nh * ns)


def classify(norm, tol=PASS_TOL, fail_tol=FAIL_TOL):
    if norm <= tol:
        return PASS
    if norm >= fail_tol:
        return FAIL
    return INDETERMINATE


def certify_commutes(h, group, tol=PASS_TOL, fail_tol=FAIL_TOL):
    """Certify [h, S] = 0 against every generator of one group.

    Returns the worst (largest) relative commutator norm over generators
    and the three-valued verdict.  The trivial group passes vacuously.
    """
    if group.kind == "antiunitary":
        raise AntiunitaryUnsupported(
            f"group {group.name} is antiunitary; certify it on momentum blocks"
        )
    worst = 0.0
    for gen in group.generators:
        worst = max(worst, relative_commutator_norm(h, gen))
    return CertReport(group.name, worst, classify(worst, tol, fail_tol))


@dataclass(frozen=True)
class LadderEntry:
    order: int
    group: str
    relative_norm: float
    verdict: str


@dataclass(frozen=True)
class LadderReport:
    """Per-(order, group) verdict matrix plus the predicted break pattern.

    ``matches_prediction`` asserts only the one-sided pattern: order m must
    commute with every group at or below G_{n-m}, and must visibly break
    the first group above it (when one exists).  Extra accidental
    commutation higher up is recorded but not treated as failure.
    """

    entries: tuple
    predicted_first_broken: dict = field(default_factory=dict)
    matches_prediction: bool = True
    tol: float = PASS_TOL
    fail_tol: float = FAIL_TOL

    def verdict(self, order, group_name):
        for e in self.entries:
            if e.order == order and e.group == group_name:
                return e.verdict
        raise KeyError((order, group_name))

    def norm(self, order, group_name):
        for e in self.entries:
            if e.order == order and e.group == group_name:
                return e.relative_norm
        raise KeyError((order, group_name))

    def to_json_dict(self):
        return {
            "tol_pass": self.tol,
            "tol_fail": self.fail_tol,
            "entries": [
                {
                    "order": e.order,
                    "group": e.group,
                    "relative_norm": e.relative_norm,
                    "verdict": e.verdict,
                }
                for e in self.entries
            ],
            "predicted_first_broken": {
                str(k): v for k, v in self.predicted_first_broken.items()
            },
            "matches_prediction": self.matches_prediction,
        }

    def dumps(self):
        return json.dumps(self.to_json_dict(), indent=2)


def certify_ladder(series, ladder, tol=PASS_TOL, fail_tol=FAIL_TOL):
    """Certify each series order against each ladder group.

    ``series`` is either a sequence of operators indexed by order or any
    object exposing ``order_operators()``.  The expected pattern for a
    level-n ladder: order m passes G_q for q <= n-m and fails G_{n-m+1}.
    """
    if hasattr(series, "order_operators"):
        orders = list(series.order_operators())
    else:
        orders = list(series)
    n = ladder.level
    entries = []
    predicted = {}
    matches = True
    for m, op in enumerate(orders):
        reports = {}
        for group in ladder.groups:
            rep = certify_commutes(op, group, tol, fail_tol)
            reports[group.name] = rep
            entries.append(
                LadderEntry(m, group.name, rep.max_relative_norm, rep.verdict)
            )
        # groups[i] = G_{n-i}; order m must preserve i >= m, break i = m-1
        for i, group in enumerate(ladder.groups):
            if i >= m and reports[group.name].verdict != PASS:
                matches = False
        if 1 <= m <= n:
            first = ladder.groups[m - 1].name
            predicted[m] = first
            if reports[first].verdict != FAIL:
                matches = False
        else:
            predicted[m] = None
    return LadderReport(tuple(entries), predicted, matches, tol, fail_tol)
