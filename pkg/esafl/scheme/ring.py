"""Exact arithmetic in R_q = Z_q[X]/(X^n + 1) for power-of-two q.

Coefficients are arbitrary-precision Python integers held in numpy object
arrays so slice-wise accumulation runs in numpy's inner loop. Every mod-q
reduction is a bit mask; nothing in this module divides.

Only dense-by-sparse and dense-by-small products are provided. The scheme
never multiplies two uniform ring elements.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np

from esafl.scheme.errors import (
    DimensionMismatchError,
    MalformedMessageError,
    ModulusMismatchError,
    ParameterError,
)


def _coeff_bytes(log_q: int) -> int:
    return (log_q + 7) // 8


@dataclass(frozen=True, eq=False)
class RingElem:
    """Polynomial of degree < n with coefficients in [0, 2^log_q)."""

    coeffs: np.ndarray
    log_q: int

    def __post_init__(self) -> None:
        if self.coeffs.ndim != 1 or self.coeffs.dtype != object:
            raise TypeError("RingElem coefficients must be a 1-d object array")

    @property
    def n(self) -> int:
        return int(self.coeffs.shape[0])

    @property
    def mask(self) -> int:
        return (1 << self.log_q) - 1

    @classmethod
    def zero(cls, n: int, log_q: int) -> RingElem:
        return cls(np.zeros(n, dtype=object), log_q)

    @classmethod
    def from_ints(cls, values: Iterable[int], log_q: int) -> RingElem:
        """Build from signed integers, reducing each modulo 2^log_q."""
        mask = (1 << log_q) - 1
        return cls(np.array([int(v) & mask for v in values], dtype=object), log_q)

    @classmethod
    def from_stream(cls, data: bytes, n: int, log_q: int) -> RingElem:
        """Read n little-endian coefficients from a byte stream, masking high bits."""
        width = _coeff_bytes(log_q)
        mask = (1 << log_q) - 1
        coeffs = np.empty(n, dtype=object)
        for i in range(n):
            coeffs[i] = int.from_bytes(data[i * width:(i + 1) * width], "little") & mask
        return cls(coeffs, log_q)

    @classmethod
    def from_bytes(cls, data: bytes, n: int, log_q: int) -> RingElem:
        """Parse the canonical layout; rejects coefficients with stray high bits."""
        width = _coeff_bytes(log_q)
        if len(data) != n * width:
            raise MalformedMessageError(
                f"ring element needs {n * width} bytes, got {len(data)}"
            )
        limit = 1 << log_q
        coeffs = np.empty(n, dtype=object)
        for i in range(n):
            value = int.from_bytes(data[i * width:(i + 1) * width], "little")
            if value >= limit:
                raise MalformedMessageError(f"coefficient {i} exceeds {log_q} bits")
            coeffs[i] = value
        return cls(coeffs, log_q)

    def to_bytes(self) -> bytes:
        """Canonical layout: n coefficients, ceil(log_q/8) little-endian bytes each."""
        width = _coeff_bytes(self.log_q)
        return b"".join(int(c).to_bytes(width, "little") for c in self.coeffs)

    def to_list(self) -> list[int]:
        return [int(c) for c in self.coeffs]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingElem):
            return NotImplemented
        return (
            self.log_q == other.log_q
            and self.n == other.n
            and bool(np.all(self.coeffs == other.coeffs))
        )

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: RingElem) -> RingElem:
        return add(self, other)

    def __sub__(self, other: RingElem) -> RingElem:
        return sub(self, other)

    def __neg__(self) -> RingElem:
        return RingElem(_reduce(-self.coeffs, self.mask), self.log_q)

    def __repr__(self) -> str:
        return f"RingElem(n={self.n}, log_q={self.log_q})"


@dataclass(frozen=True)
class SparseTernaryKey:
    """Ternary polynomial stored as its +1 and -1 index sets."""

    plus: frozenset[int]
    minus: frozenset[int]
    n: int

    def __post_init__(self) -> None:
        if self.plus & self.minus:
            raise ValueError("plus and minus positions overlap")
        if any(not 0 <= i < self.n for i in self.plus | self.minus):
            raise ValueError(f"key position outside [0, {self.n})")

    @property
    def weight(self) -> int:
        return len(self.plus) + len(self.minus)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.n, dtype=np.int64)
        dense[sorted(self.plus)] = 1
        dense[sorted(self.minus)] = -1
        return dense


@dataclass(frozen=True, eq=False)
class SmallPoly:
    """Polynomial with small signed coefficients, |c| <= bound."""

    coeffs: np.ndarray
    bound: int

    def __post_init__(self) -> None:
        if self.coeffs.ndim != 1:
            raise TypeError("SmallPoly coefficients must be 1-d")
        if self.coeffs.size and int(np.max(np.abs(self.coeffs))) > self.bound:
            raise ValueError(f"coefficient magnitude exceeds bound {self.bound}")

    @property
    def n(self) -> int:
        return int(self.coeffs.shape[0])

    @classmethod
    def from_keys(cls, keys: Iterable[SparseTernaryKey]) -> SmallPoly:
        """Exact signed sum of ternary keys; bound is the number of keys."""
        keys = list(keys)
        if not keys:
            raise ValueError("at least one key is required")
        total = np.sum([k.to_dense() for k in keys], axis=0).astype(np.int64)
        return cls(total, len(keys))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SmallPoly):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None  # type: ignore[assignment]


def _reduce(values: Any, mask: int) -> np.ndarray:
    reduced = np.bitwise_and(values, mask)
    return np.asarray(reduced, dtype=object)


def _check_pair(a: RingElem, b: RingElem) -> None:
    if a.n != b.n:
        raise DimensionMismatchError(f"ring dimensions differ: {a.n} != {b.n}")
    if a.log_q != b.log_q:
        raise ModulusMismatchError(f"moduli differ: 2^{a.log_q} != 2^{b.log_q}")


def add(a: RingElem, b: RingElem) -> RingElem:
    _check_pair(a, b)
    return RingElem(_reduce(a.coeffs + b.coeffs, a.mask), a.log_q)


def sub(a: RingElem, b: RingElem) -> RingElem:
    _check_pair(a, b)
    return RingElem(_reduce(a.coeffs - b.coeffs, a.mask), a.log_q)


def _accumulate_shift(acc: np.ndarray, coeffs: np.ndarray, j: int, factor: int) -> None:
    """acc += factor * X^j * a  (mod X^n + 1), unreduced."""
    n = coeffs.shape[0]
    if j == 0:
        acc += coeffs if factor == 1 else factor * coeffs
        return
    if factor == 1:
        acc[j:] += coeffs[:n - j]
        acc[:j] -= coeffs[n - j:]
    elif factor == -1:
        acc[j:] -= coeffs[:n - j]
        acc[:j] += coeffs[n - j:]
    else:
        acc[j:] += factor * coeffs[:n - j]
        acc[:j] -= factor * coeffs[n - j:]


def mul_sparse(a: RingElem, s: SparseTernaryKey) -> RingElem:
    """Negacyclic product a * s for a ternary key, O(h * n) additions."""
    if a.n != s.n:
        raise DimensionMismatchError(f"ring dimensions differ: {a.n} != {s.n}")
    acc = np.zeros(a.n, dtype=object)
    for j in sorted(s.plus):
        _accumulate_shift(acc, a.coeffs, j, 1)
    for j in sorted(s.minus):
        _accumulate_shift(acc, a.coeffs, j, -1)
    return RingElem(_reduce(acc, a.mask), a.log_q)


def mul_small(a: RingElem, s: SmallPoly) -> RingElem:
    """Negacyclic product a * s for a small dense polynomial."""
    if a.n != s.n:
        raise DimensionMismatchError(f"ring dimensions differ: {a.n} != {s.n}")
    acc = np.zeros(a.n, dtype=object)
    for j in np.flatnonzero(s.coeffs):
        _accumulate_shift(acc, a.coeffs, int(j), int(s.coeffs[j]))
    return RingElem(_reduce(acc, a.mask), a.log_q)


def lift_and_scale_error(e: SmallPoly, log_p: int, log_q: int) -> RingElem:
    """Coefficient-wise p * e mod q, i.e. signed e shifted left by log_p bits."""
    mask = (1 << log_q) - 1
    shifted = np.array([int(v) << log_p for v in e.coeffs], dtype=object)
    return RingElem(_reduce(shifted, mask), log_q)


def mod_p(a: RingElem, log_p: int) -> RingElem:
    """Keep the low log_p bits of every coefficient (result lives in R_p)."""
    if log_p >= a.log_q:
        raise ParameterError("log_p < log_q", f"log_p={log_p}, log_q={a.log_q}")
    return RingElem(_reduce(a.coeffs, (1 << log_p) - 1), log_p)


def sample_ternary(rng: np.random.Generator, n: int, h: int) -> SparseTernaryKey:
    """h distinct positions chosen uniformly, each +1 or -1 with probability 1/2."""
    if h > n:
        raise ParameterError("ternary_weight <= n", f"h={h}, n={n}")
    positions = rng.choice(n, size=h, replace=False)
    signs = rng.integers(0, 2, size=h)
    plus = frozenset(int(i) for i, bit in zip(positions, signs, strict=True) if bit)
    minus = frozenset(int(i) for i, bit in zip(positions, signs, strict=True) if not bit)
    return SparseTernaryKey(plus, minus, n)


def gaussian_table(sigma: float, bound: int) -> tuple[np.ndarray, np.ndarray]:
    """Support [-bound, bound] and its cumulative table, weights exp(-x^2 / 2 sigma^2)."""
    support = np.arange(-bound, bound + 1, dtype=np.int64)
    weights = np.exp(-(support.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    cdf = np.cumsum(weights) / weights.sum()
    cdf[-1] = 1.0
    return support, cdf


def sample_gaussian(rng: np.random.Generator, n: int, sigma: float) -> SmallPoly:
    """Discrete Gaussian over the integers, tail cut at ceil(6 * sigma).

    Inverts the cumulative table from gaussian_table.
    """
    if sigma <= 0:
        raise ParameterError("gaussian_sigma > 0", f"sigma={sigma}")
    bound = int(np.ceil(6 * sigma))
    support, cdf = gaussian_table(sigma, bound)
    index = np.searchsorted(cdf, rng.random(n), side="right")
    values = support[np.minimum(index, support.size - 1)]
    return SmallPoly(values, bound)


def sample_uniform(rng: np.random.Generator, n: int, log_q: int) -> RingElem:
    """Uniform element of R_q drawn from the generator's byte stream."""
    return RingElem.from_stream(rng.bytes(n * _coeff_bytes(log_q)), n, log_q)
