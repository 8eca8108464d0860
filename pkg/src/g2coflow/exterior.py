"""Dense exterior algebra over an oriented orthonormal frame of R^n (n <= 7).

Conventions. A k-form is alpha = (1/k!) alpha_{i1...ik} e^{i1} ^ ... ^ e^{ik}
with fully antisymmetric coefficients; the stored representation is the
vector of coefficients over lexicographically increasing multi-indices, so a
3-form on R^7 is a length-35 vector. The orientation is e^1 ^ ... ^ e^n and
the frame metric is the identity unless a Gram matrix is passed explicitly.
All operations are pure functions; KForm values are immutable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "KForm",
    "multi_indices",
    "index_position",
    "perm_sign",
    "zero_form",
    "basis_form",
    "from_terms",
    "from_dense",
    "wedge",
    "interior",
    "form_inner",
    "form_norm",
    "hodge_star",
    "volume_form",
    "pullback",
    "theta",
]


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing k-tuples drawn from 0..n-1, lexicographic."""
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def index_position(n: int, k: int) -> dict[tuple[int, ...], int]:
    """Position of each increasing multi-index in the coefficient vector."""
    return {idx: pos for pos, idx in enumerate(multi_indices(n, k))}


def perm_sign(seq) -> int:
    """Sign of the permutation sorting seq; 0 if entries repeat."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class KForm:
    """Immutable k-form with dense coefficients over increasing multi-indices."""

    n: int
    k: int
    coeffs: np.ndarray
    _dense: np.ndarray | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if not (0 <= self.k <= self.n <= 7):
            raise ValueError(f"degree {self.k} not in range for n={self.n} (n <= 7)")
        c = np.asarray(self.coeffs, dtype=float).reshape(-1).copy()
        if c.size != math.comb(self.n, self.k):
            raise ValueError(
                f"expected {math.comb(self.n, self.k)} coefficients for a "
                f"{self.k}-form on R^{self.n}, got {c.size}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "KForm") -> "KForm":
        self._check_compatible(other)
        return KForm(self.n, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other: "KForm") -> "KForm":
        self._check_compatible(other)
        return KForm(self.n, self.k, self.coeffs - other.coeffs)

    def __neg__(self) -> "KForm":
        return KForm(self.n, self.k, -self.coeffs)

    def __mul__(self, scalar: float) -> "KForm":
        return KForm(self.n, self.k, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check_compatible(self, other: "KForm") -> None:
        if (self.n, self.k) != (other.n, other.k):
            raise ValueError(
                f"incompatible forms: ({self.n},{self.k}) vs ({other.n},{other.k})"
            )

    def dense(self) -> np.ndarray:
        """Fully antisymmetric coefficient array of shape (n,)*k (cached)."""
        if self._dense is None:
            arr = np.zeros((self.n,) * self.k)
            for pos, idx in enumerate(multi_indices(self.n, self.k)):
                c = self.coeffs[pos]
                if c == 0.0:
                    continue
                for perm in itertools.permutations(idx):
                    arr[perm] = perm_sign(perm) * c
            arr.setflags(write=False)
            object.__setattr__(self, "_dense", arr)
        return self._dense

    def coefficient(self, idx) -> float:
        """Coefficient alpha_{idx} for an arbitrary (not necessarily sorted) idx."""
        sign = perm_sign(idx)
        if sign == 0:
            return 0.0
        return sign * self.coeffs[index_position(self.n, self.k)[tuple(sorted(idx))]]

    def terms(self):
        """Yield (increasing multi-index, coefficient) for nonzero entries."""
        for pos, idx in enumerate(multi_indices(self.n, self.k)):
            if self.coeffs[pos] != 0.0:
                yield idx, self.coeffs[pos]

    def to_dict(self) -> dict:
        """JSON-ready dict with 1-based increasing index tuples."""
        return {
            "n": self.n,
            "k": self.k,
            "terms": [
                {"idx": [i + 1 for i in idx], "c": float(c)} for idx, c in self.terms()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KForm":
        n, k = int(data["n"]), int(data["k"])
        coeffs = np.zeros(math.comb(n, k))
        pos = index_position(n, k)
        for term in data.get("terms", []):
            idx = [int(i) - 1 for i in term["idx"]]
            sign = perm_sign(idx)
            if sign == 0:
                raise ValueError(f"repeated index in term {term['idx']}")
            coeffs[pos[tuple(sorted(idx))]] += sign * float(term["c"])
        return cls(n, k, coeffs)


def zero_form(n: int, k: int) -> KForm:
    return KForm(n, k, np.zeros(math.comb(n, k)))


def basis_form(n: int, idx) -> KForm:
    """Unit wedge monomial e^{i1} ^ ... ^ e^{ik} for 0-based idx (any order)."""
    sign = perm_sign(idx)
    if sign == 0:
        raise ValueError(f"repeated index in {idx}")
    k = len(idx)
    coeffs = np.zeros(math.comb(n, k))
    coeffs[index_position(n, k)[tuple(sorted(idx))]] = sign
    return KForm(n, k, coeffs)


def from_terms(n: int, k: int, terms) -> KForm:
    """Build a form from (idx, coefficient) pairs with 0-based indices."""
    coeffs = np.zeros(math.comb(n, k))
    pos = index_position(n, k)
    for idx, c in terms:
        sign = perm_sign(idx)
        if sign == 0:
            raise ValueError(f"repeated index in {idx}")
        coeffs[pos[tuple(sorted(idx))]] += sign * c
    return KForm(n, k, coeffs)


def from_dense(n: int, k: int, arr: np.ndarray) -> KForm:
    """KForm from a fully antisymmetric dense array (entries read as-is)."""
    arr = np.asarray(arr, dtype=float)
    if arr.shape != (n,) * k:
        raise ValueError(f"expected shape {(n,) * k}, got {arr.shape}")
    return KForm(n, k, np.array([arr[idx] for idx in multi_indices(n, k)]))


@lru_cache(maxsize=None)
def _wedge_table(n: int, ka: int, kb: int):
    """Sparse table (pos_a, pos_b, pos_out, sign) for the wedge of densities."""
    out = []
    pos_out = index_position(n, ka + kb)
    for pa, ia in enumerate(multi_indices(n, ka)):
        sa = set(ia)
        for pb, ib in enumerate(multi_indices(n, kb)):
            if sa & set(ib):
                continue
            merged = ia + ib
            out.append((pa, pb, pos_out[tuple(sorted(merged))], perm_sign(merged)))
    return tuple(out)


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product a ^ b."""
    if a.n != b.n:
        raise ValueError("forms live on different spaces")
    k = a.k + b.k
    if k > a.n:
        raise ValueError(f"wedge degree {k} exceeds dimension {a.n}")
    coeffs = np.zeros(math.comb(a.n, k))
    for pa, pb, po, sign in _wedge_table(a.n, a.k, b.k):
        coeffs[po] += sign * a.coeffs[pa] * b.coeffs[pb]
    return KForm(a.n, k, coeffs)


def interior(v: np.ndarray, a: KForm) -> KForm:
    """Interior product v -| a, i.e. (v -| a)_{J} = v^m a_{m J}."""
    if a.k == 0:
        raise ValueError("interior product of a 0-form is not defined")
    v = np.asarray(v, dtype=float).reshape(a.n)
    dense = a.dense()
    coeffs = np.array(
        [v @ dense[(slice(None),) + idx] for idx in multi_indices(a.n, a.k - 1)]
    )
    return KForm(a.n, a.k - 1, coeffs)


def form_inner(a: KForm, b: KForm, g: np.ndarray | None = None) -> float:
    """Frame inner product <a, b>; pass a Gram matrix g for a non-unit metric."""
    a._check_compatible(b)
    if g is None:
        return float(a.coeffs @ b.coeffs)
    if a.k == 0:
        return float(a.coeffs[0] * b.coeffs[0])
    ginv = np.linalg.inv(np.asarray(g, dtype=float))
    raised = b.dense()
    for slot in range(b.k):
        raised = np.moveaxis(np.tensordot(raised, ginv, axes=([slot], [0])), -1, slot)
    return float(np.tensordot(a.dense(), raised, axes=b.k) / math.factorial(b.k))


def form_norm(a: KForm, g: np.ndarray | None = None) -> float:
    return math.sqrt(max(form_inner(a, a, g), 0.0))


@lru_cache(maxsize=None)
def _levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n, dtype=np.int8)
    for perm in itertools.permutations(range(n)):
        eps[perm] = perm_sign(perm)
    eps.setflags(write=False)
    return eps


def volume_form(n: int, g: np.ndarray | None = None) -> KForm:
    """Riemannian volume form sqrt(det g) e^{1...n} for the fixed orientation."""
    scale = 1.0 if g is None else math.sqrt(np.linalg.det(np.asarray(g, dtype=float)))
    return scale * basis_form(n, tuple(range(n)))


def hodge_star(a: KForm, g: np.ndarray | None = None) -> KForm:
    """Hodge star, defined by alpha ^ *beta = <alpha, beta> vol_g."""
    n, k = a.n, a.k
    if g is None:
        # orthonormal frame: (*a)_{I^c} = sign(I, I^c) a_I
        pos_out = index_position(n, n - k)
        coeffs = np.zeros(math.comb(n, n - k))
        for pa, idx in enumerate(multi_indices(n, k)):
            comp = tuple(i for i in range(n) if i not in idx)
            coeffs[pos_out[comp]] += perm_sign(idx + comp) * a.coeffs[pa]
        return KForm(n, n - k, coeffs)
    g = np.asarray(g, dtype=float)
    ginv = np.linalg.inv(g)
    raised = a.dense()
    for slot in range(k):
        raised = np.moveaxis(np.tensordot(raised, ginv, axes=([slot], [0])), -1, slot)
    eps = _levi_civita(n).astype(float)
    dense_out = (
        math.sqrt(np.linalg.det(g))
        / math.factorial(k)
        * np.tensordot(raised, eps, axes=(tuple(range(k)), tuple(range(k))))
    )
    return from_dense(n, n - k, dense_out)


def pullback(h: np.ndarray, a: KForm) -> KForm:
    """Pullback h^* a, i.e. (h^* a)(v_1,...,v_k) = a(h v_1,..., h v_k)."""
    h = np.asarray(h, dtype=float).reshape(a.n, a.n)
    if a.k == 0:
        return a
    dense = a.dense()
    for slot in range(a.k):
        dense = np.moveaxis(np.tensordot(dense, h, axes=([slot], [0])), -1, slot)
    return from_dense(a.n, a.k, dense)


def theta(B: np.ndarray, a: KForm) -> KForm:
    """Infinitesimal gl(n) action theta(B) a = -sum_s a(..., B cdot, ...).

    Equals d/dt at t=0 of pullback(expm(-tB), a); a degree-0 derivation of
    the exterior algebra.
    """
    if a.k == 0:
        raise ValueError("theta acts on forms of degree >= 1")
    B = np.asarray(B, dtype=float).reshape(a.n, a.n)
    dense = a.dense()
    out = np.zeros_like(dense)
    for slot in range(a.k):
        out -= np.moveaxis(np.tensordot(dense, B, axes=([slot], [0])), -1, slot)
    return from_dense(a.n, a.k, out)
