"""Many-body operator representations and their algebra.

Operators are stored as weighted sums of site-local basis strings.  Two
on-site algebras are supported:

* ``PAULI``: local dimension 2, basis {1, sigma^x, sigma^y, sigma^z};
* ``CLOCK``: local dimension 4, basis {Z^a X^b : a, b in 0..3} with
  Z = diag(1, -i, -1, i), X the cyclic shift |n> -> |n-1>, so that
  Z X = i X Z and X^4 = Z^4 = 1.

Strings are encoded as integers, one fixed-width bit field per site, which
gives O(1) merge keys when summing terms.  Products and commutators stay in
canonical form: like strings merged, coefficients below ``PRUNE_TOL``
dropped.

Tensor-order convention (fixed package-wide): site 0 is the least
significant factor of the Kronecker product, i.e. the dense realization of
a string is ``kron(local(L-1), ..., local(0))`` and basis-state index
``sum_s d^s n_s`` has site ``s`` in level ``n_s``.
"""

from __future__ import annotations

import json
import math
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import AlgebraMismatch, DimensionOverflow

# coefficients below this are treated as accumulation noise and pruned
PRUNE_TOL = 1e-14

# default ceiling on dense realizations (2**14 states)
DENSE_CAP = 2 ** 14

_PHASES = np.array([1, 1j, -1, -1j])  # i**k lookup


class SiteAlgebra:
    """On-site operator basis closed under multiplication, up to a phase.

    Parameters
    ----------
    kind : str
        "pauli" or "clock".
    local_dim : int
        Local Hilbert-space dimension.
    label_bits : int
        Bit width of one site label in the packed string key.
    """

    def __init__(self, kind, local_dim, label_bits, labels):
        self.kind = kind
        self.local_dim = local_dim
        self.label_bits = label_bits
        self.label_mask = (1 << label_bits) - 1
        self.n_labels = len(labels)
        self._names = labels
        self._dense = self._build_dense()
        # one nonzero per row for every basis label: store (col, phase) maps
        self._perm_col = np.zeros((self.n_labels, local_dim), dtype=np.int64)
        self._perm_phase = np.zeros((self.n_labels, local_dim), dtype=complex)
        for l in range(self.n_labels):
            m = self._dense[l]
            for r in range(local_dim):
                c = int(np.flatnonzero(m[r])[0])
                self._perm_col[l, r] = c
                self._perm_phase[l, r] = m[r, c]
        # multiplication table label x label -> (phase, label)
        self._mul_phase = np.zeros((self.n_labels, self.n_labels), dtype=complex)
        self._mul_label = np.zeros((self.n_labels, self.n_labels), dtype=np.int64)
        for a in range(self.n_labels):
            for b in range(self.n_labels):
                prod = self._dense[a] @ self._dense[b]
                for c in range(self.n_labels):
                    overlap = np.trace(self._dense[c].conj().T @ prod) / local_dim
                    if abs(overlap) > 0.5:
                        self._mul_phase[a, b] = overlap
                        self._mul_label[a, b] = c
                        break
        # hermitian conjugate of each label
        self._dag_phase = np.zeros(self.n_labels, dtype=complex)
        self._dag_label = np.zeros(self.n_labels, dtype=np.int64)
        for a in range(self.n_labels):
            dag = self._dense[a].conj().T
            for c in range(self.n_labels):
                overlap = np.trace(self._dense[c].conj().T @ dag) / local_dim
                if abs(overlap) > 0.5:
                    self._dag_phase[a] = overlap
                    self._dag_label[a] = c
                    break

    def _build_dense(self):
        raise NotImplementedError

    def dense_label(self, label):
        """Dense local matrix of one basis label."""
        return self._dense[label]

    def mul_labels(self, a, b):
        """Product of two labels as (phase, label)."""
        return self._mul_phase[a, b], int(self._mul_label[a, b])

    def dagger_label(self, a):
        return self._dag_phase[a], int(self._dag_label[a])

    def label_name(self, label):
        return self._names[label]

    def label_from_name(self, name):
        return self._names.index(name)

    def __repr__(self):
        return f"SiteAlgebra({self.kind!r}, d={self.local_dim})"


class _PauliAlgebra(SiteAlgebra):
    def __init__(self):
        super().__init__("pauli", 2, 2, ["i", "x", "y", "z"])

    def _build_dense(self):
        return [
            np.eye(2, dtype=complex),
            np.array([[0, 1], [1, 0]], dtype=complex),
            np.array([[0, -1j], [1j, 0]], dtype=complex),
            np.array([[1, 0], [0, -1]], dtype=complex),
        ]


class _ClockAlgebra(SiteAlgebra):
    """Z^a X^b basis, label = a + 4*b packed in 4 bits."""

    def __init__(self):
        names = [f"z{a}x{b}" for b in range(4) for a in range(4)]
        super().__init__("clock", 4, 4, names)

    def _build_dense(self):
        z = np.diag([1, -1j, -1, 1j]).astype(complex)
        x = np.zeros((4, 4), dtype=complex)
        for n in range(4):
            x[(n - 1) % 4, n] = 1.0  # X|n> = |n-1>
        mats = []
        for b in range(4):
            for a in range(4):
                mats.append(np.linalg.matrix_power(z, a) @ np.linalg.matrix_power(x, b))
        return mats


PAULI = _PauliAlgebra()
CLOCK = _ClockAlgebra()

_ALGEBRAS = {"pauli": PAULI, "clock": CLOCK}


def clock_label(a, b):
    """Packed label of Z^a X^b on one clock site."""
    return (a % 4) + 4 * (b % 4)


class OperatorExpr:
    """Weighted sum of site-local operator strings in canonical form.

    Terms map a packed string key to a complex coefficient.  Values are
    immutable by convention: all arithmetic returns new instances, so
    expressions are safe to share across worker processes.

    Parameters
    ----------
    algebra : SiteAlgebra
    n_sites : int
    terms : dict[int, complex], optional
        Packed-string -> coefficient map; canonicalized on construction.
    """

    __slots__ = ("algebra", "n_sites", "terms")

    def __init__(self, algebra, n_sites, terms=None):
        self.algebra = algebra
        self.n_sites = int(n_sites)
        clean = {}
        if terms:
            for key, coeff in terms.items():
                if abs(coeff) > PRUNE_TOL:
                    clean[key] = complex(coeff)
        self.terms = clean

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, algebra, n_sites):
        return cls(algebra, n_sites)

    @classmethod
    def identity(cls, algebra, n_sites):
        return cls(algebra, n_sites, {0: 1.0})

    @classmethod
    def from_sites(cls, algebra, n_sites, coeff, site_labels):
        """Single term from a {site: label} map.

        Labels may be given as packed integers or algebra names
        ("x", "y", "z" for Pauli; "z1x2" style for clock).
        """
        key = 0
        for site, label in site_labels.items():
            if not 0 <= site < n_sites:
                raise ValueError(f"site {site} outside 0..{n_sites - 1}")
            if isinstance(label, str):
                label = algebra.label_from_name(label)
            if label:
                key |= label << (algebra.label_bits * site)
        return cls(algebra, n_sites, {key: coeff})

    def copy_with(self, terms):
        return OperatorExpr(self.algebra, self.n_sites, terms)

    # ------------------------------------------------------------------
    # string key manipulation
    # ------------------------------------------------------------------
    def key_labels(self, key):
        """Unpack a string key into a {site: label} dict (identity omitted)."""
        out = {}
        bits, mask = self.algebra.label_bits, self.algebra.label_mask
        site = 0
        while key:
            label = key & mask
            if label:
                out[site] = label
            key >>= bits
            site += 1
        return out

    def _check(self, other):
        if self.algebra is not other.algebra or self.n_sites != other.n_sites:
            raise AlgebraMismatch(
                f"cannot combine {self.algebra.kind}/{self.n_sites} with "
                f"{other.algebra.kind}/{other.n_sites}"
            )

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------
    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for key, coeff in other.terms.items():
            terms[key] = terms.get(key, 0.0) + coeff
        return self.copy_with(terms)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self.copy_with({k: -c for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, OperatorExpr):
            return self._product(other)
        return self.copy_with({k: c * other for k, c in self.terms.items()})

    def __rmul__(self, scalar):
        return self.copy_with({k: c * scalar for k, c in self.terms.items()})

    def _product(self, other):
        self._check(other)
        alg = self.algebra
        bits, mask = alg.label_bits, alg.label_mask
        out = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                phase = 1.0 + 0j
                key = 0
                a, b = ka, kb
                site = 0
                while a or b:
                    la, lb = a & mask, b & mask
                    if la and lb:
                        ph, lc = alg.mul_labels(la, lb)
                        phase *= ph
                    else:
                        lc = la | lb
                    key |= lc << (bits * site)
                    a >>= bits
                    b >>= bits
                    site += 1
                coeff = ca * cb * phase
                out[key] = out.get(key, 0.0) + coeff
        return self.copy_with(out)

    def dagger(self):
        """Hermitian conjugate (an involution)."""
        alg = self.algebra
        bits, mask = alg.label_bits, alg.label_mask
        out = {}
        for key, coeff in self.terms.items():
            # conjugate each site label; labels on distinct sites commute
            phase = 1.0 + 0j
            new_key = 0
            k, site = key, 0
            while k:
                label = k & mask
                if label:
                    ph, ld = alg.dagger_label(label)
                    phase *= ph
                    new_key |= ld << (bits * site)
                k >>= bits
                site += 1
            out[new_key] = out.get(new_key, 0.0) + np.conj(coeff) * phase
        return self.copy_with(out)

    def is_hermitian(self, tol=1e-12):
        diff = self - self.dagger()
        return all(abs(c) <= tol for c in diff.terms.values())

    def allclose(self, other, tol=1e-12):
        self._check(other)
        diff = self - other
        return all(abs(c) <= tol for c in diff.terms.values())

    @property
    def n_terms(self):
        return len(self.terms)

    def coeff_norm(self):
        """2-norm of the coefficient vector (cheap term-level magnitude)."""
        return math.sqrt(sum(abs(c) ** 2 for c in self.terms.values()))

    # ------------------------------------------------------------------
    # dense / sparse realization
    # ------------------------------------------------------------------
    @property
    def dim(self):
        return self.algebra.local_dim ** self.n_sites

    def to_dense(self, cap=DENSE_CAP):
        """Dense matrix via the Kronecker convention (site 0 least significant).

        Raises
        ------
        DimensionOverflow
            If local_dim**n_sites exceeds ``cap``.
        """
        dim = self.dim
        if dim > cap:
            raise DimensionOverflow(f"dense dim {dim} exceeds cap {cap}")
        alg = self.algebra
        bits, mask = alg.label_bits, alg.label_mask
        out = np.zeros((dim, dim), dtype=complex)
        for key, coeff in self.terms.items():
            mats = []
            for site in range(self.n_sites - 1, -1, -1):
                label = (key >> (bits * site)) & mask
                mats.append(alg.dense_label(label))
            out += coeff * reduce(np.kron, mats)
        return out

    def to_sparse(self, cap=None):
        """CSR matrix; every basis string has one nonzero per row."""
        dim = self.dim
        if cap is not None and dim > cap:
            raise DimensionOverflow(f"sparse dim {dim} exceeds cap {cap}")
        alg = self.algebra
        bits, mask = alg.label_bits, alg.label_mask
        d = alg.local_dim
        rows = np.arange(dim)
        # site digits of every basis index, shape (n_sites, dim)
        digits = (rows[None, :] // d ** np.arange(self.n_sites)[:, None]) % d
        mat = sp.csr_matrix((dim, dim), dtype=complex)
        for key, coeff in self.terms.items():
            cols = np.zeros(dim, dtype=np.int64)
            phase = np.full(dim, coeff, dtype=complex)
            for site in range(self.n_sites):
                label = (key >> (bits * site)) & mask
                dg = digits[site]
                cols += alg._perm_col[label, dg] * d ** site
                phase *= alg._perm_phase[label, dg]
            mat = mat + sp.csr_matrix((phase, (rows, cols)), shape=(dim, dim))
        mat.sum_duplicates()
        return mat

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json_dict(self):
        terms = []
        for key, coeff in sorted(self.terms.items()):
            sites = [
                [site, self.algebra.label_name(label)]
                for site, label in sorted(self.key_labels(key).items())
            ]
            terms.append({"re": coeff.real, "im": coeff.imag, "sites": sites})
        return {"algebra": self.algebra.kind, "n_sites": self.n_sites, "terms": terms}

    @classmethod
    def from_json_dict(cls, data):
        alg = _ALGEBRAS[data["algebra"]]
        expr = cls.zero(alg, data["n_sites"])
        terms = {}
        for t in data["terms"]:
            coeff = complex(t["re"], t["im"])
            key = 0
            for site, name in t["sites"]:
                key |= alg.label_from_name(name) << (alg.label_bits * site)
            terms[key] = terms.get(key, 0.0) + coeff
        return cls(alg, data["n_sites"], terms)

    def dumps(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text):
        return cls.from_json_dict(json.loads(text))

    def __repr__(self):
        shown = []
        for key, coeff in sorted(self.terms.items())[:4]:
            labels = self.key_labels(key)
            body = "*".join(
                f"{self.algebra.label_name(l)}[{s}]" for s, l in sorted(labels.items())
            ) or "1"
            shown.append(f"({coeff:.4g})*{body}")
        more = "" if self.n_terms <= 4 else f" +{self.n_terms - 4} more"
        return f"<OperatorExpr {self.algebra.kind} L={self.n_sites}: {' + '.join(shown) or '0'}{more}>"


def commutator(a, b):
    """[a, b] = ab - ba in canonical form."""
    return a * b - b * a


def frobenius_norm(matrix):
    """sqrt(sum |entries|^2) of a dense or sparse matrix."""
    if sp.issparse(matrix):
        return float(np.sqrt(abs(matrix.multiply(matrix.conj())).sum()))
    return float(np.linalg.norm(matrix))


# ----------------------------------------------------------------------
# convenience builders used throughout the model zoo
# ----------------------------------------------------------------------

def sigma(site, axis, n_sites):
    """Single Pauli sigma^axis on one site."""
    return OperatorExpr.from_sites(PAULI, n_sites, 1.0, {site: axis})


def pauli_sum(n_sites, entries):
    """Sum of Pauli strings from (coeff, {site: axis}) entries."""
    total = OperatorExpr.zero(PAULI, n_sites)
    for coeff, sites in entries:
        total = total + OperatorExpr.from_sites(PAULI, n_sites, coeff, sites)
    return total


def clock_term(n_sites, coeff, site_powers):
    """Single clock string from {site: (a, b)} Z^a X^b powers."""
    labels = {site: clock_label(a, b) for site, (a, b) in site_powers.items()}
    return OperatorExpr.from_sites(CLOCK, n_sites, coeff, labels)


def normalize(state):
    nrm = np.linalg.norm(state)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return state / nrm
