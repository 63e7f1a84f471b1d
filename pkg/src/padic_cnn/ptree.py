"""Exact arithmetic and geometry of truncated p-adic integers.

Every network in this package lives on the group G_l = Z_p / p^l Z_p,
represented by the integers {0, ..., p^l - 1} written in base p.  These
are the leaves of a rooted tree with l levels: leaf i and leaf j hang
from a common ancestor at level v exactly when their first v base-p
digits agree, i.e. when p^v divides (i - j) mod p^l.

Norms are kept exact as (p, exponent) pairs so that ultrametric
identities can be tested without floating-point slack; they are only
converted to floats when a kernel is evaluated on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, total_ordering

import numpy as np

from .errors import ParameterError

#: Hard cap on the number of leaves, so indices stay well inside 64 bits.
MAX_LEAVES = 2**32


def is_prime(n: int) -> bool:
    """Trial-division primality test; adequate for the small p used here."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class TreeParams:
    """The pair (p, l): prime branching factor and number of tree levels."""

    p: int
    l: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not isinstance(self.l, int):
            raise ParameterError("p and l must be integers")
        if not is_prime(self.p):
            raise ParameterError(f"p must be prime, got {self.p}")
        if self.l < 1:
            raise ParameterError(f"l must be >= 1, got {self.l}")
        if self.p**self.l > MAX_LEAVES:
            raise ParameterError(
                f"p^l = {self.p}^{self.l} exceeds the supported bound 2^32"
            )

    @property
    def n_leaves(self) -> int:
        return self.p**self.l

    @property
    def haar_weight(self) -> float:
        """Haar mass of a single leaf ball, p^{-l}."""
        return float(self.p) ** (-self.l)


@total_ordering
@dataclass(frozen=True)
class PadicNormValue:
    """A p-adic norm restricted to G_l: either 0 (exponent None) or p^{-e}.

    Ordering compares the represented real values, so the zero norm is
    the smallest element and exponent 0 (norm 1) the largest.
    """

    p: int
    exponent: int | None

    @property
    def is_zero(self) -> bool:
        return self.exponent is None

    def as_float(self) -> float:
        if self.is_zero:
            return 0.0
        return float(self.p) ** (-self.exponent)

    def _key(self):
        # Zero norm sorts below every p^{-e}; bigger exponent = smaller norm.
        if self.is_zero:
            return (0, 0)
        return (1, -self.exponent)

    def __lt__(self, other: "PadicNormValue") -> bool:
        if self.p != other.p:
            raise ParameterError("cannot compare norms with different p")
        return self._key() < other._key()

    @classmethod
    def zero(cls, p: int) -> "PadicNormValue":
        return cls(p, None)


@dataclass(frozen=True)
class PadicIndex:
    """An element of G_l: an integer in [0, p^l) together with its params."""

    params: TreeParams
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.params.n_leaves:
            raise ParameterError(
                f"index {self.value} outside [0, {self.params.n_leaves})"
            )

    def digits(self) -> tuple[int, ...]:
        """Base-p digits (i_0, ..., i_{l-1}), least significant first."""
        p, l = self.params.p, self.params.l
        v = self.value
        out = []
        for _ in range(l):
            out.append(v % p)
            v //= p
        return tuple(out)


def norm(i: PadicIndex) -> PadicNormValue:
    """|i|_p on G_l: p^{-v} with v the number of trailing zero digits.

    The representative 0 gets the zero norm by convention.
    """
    p = i.params.p
    if i.value == 0:
        return PadicNormValue.zero(p)
    v, val = 0, i.value
    while val % p == 0:
        v += 1
        val //= p
    return PadicNormValue(p, v)


def sub_norm(i: PadicIndex, j: PadicIndex) -> PadicNormValue:
    """|i - j|_p computed in the group G_l, i.e. on (i - j) mod p^l.

    For i != j, -log_p of the result is the level of the first common
    ancestor of the two leaves.
    """
    if i.params != j.params:
        raise ParameterError("mismatched tree parameters")
    diff = (i.value - j.value) % i.params.n_leaves
    return norm(PadicIndex(i.params, diff))


def monna(i: PadicIndex) -> float:
    """Monna map M(i) = sum_j i_j p^{-(j+1)}, the digit-reversal into [0,1]."""
    p = i.params.p
    acc = 0.0
    scale = 1.0
    for d in i.digits():
        scale /= p
        acc += d * scale
    return acc


def ball_members(center: PadicIndex, radius_exp: int) -> set[PadicIndex]:
    """All leaves j with |j - center|_p <= p^{-radius_exp}.

    The ball center + p^r Z_p meets G_l in exactly p^{l-r} leaves.
    """
    params = center.params
    if not 0 <= radius_exp <= params.l:
        raise ParameterError(
            f"radius exponent {radius_exp} outside [0, {params.l}]"
        )
    step = params.p**radius_exp
    n = params.n_leaves
    return {
        PadicIndex(params, (center.value + step * k) % n)
        for k in range(n // step)
    }


@lru_cache(maxsize=32)
def leaf_valuations(params: TreeParams) -> np.ndarray:
    """Vector of trailing-zero digit counts for every leaf, in index order.

    Entry i is v with |i|_p = p^{-v}; the zero leaf gets the sentinel l,
    marking the norm-zero class.
    """
    n, p, l = params.n_leaves, params.p, params.l
    vals = np.zeros(n, dtype=np.int64)
    idx = np.arange(n, dtype=np.int64)
    power = p
    for v in range(1, l + 1):
        vals[(idx % power == 0) & (idx > 0)] = v
        power *= p
    vals[0] = l
    out = vals
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def leaf_norms(params: TreeParams) -> np.ndarray:
    """Float |i|_p for every leaf in index order (0.0 for the zero leaf)."""
    vals = leaf_valuations(params)
    norms = np.where(
        vals == params.l, 0.0, float(params.p) ** (-vals.astype(np.float64))
    )
    norms.flags.writeable = False
    return norms


@lru_cache(maxsize=32)
def monna_vector(params: TreeParams) -> np.ndarray:
    """Monna map evaluated on every leaf, in index order."""
    n, p, l = params.n_leaves, params.p, params.l
    idx = np.arange(n, dtype=np.int64)
    acc = np.zeros(n, dtype=np.float64)
    scale = 1.0
    for _ in range(l):
        scale /= p
        acc += (idx % p) * scale
        idx //= p
    acc.flags.writeable = False
    return acc
