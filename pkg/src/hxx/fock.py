"""Second-quantization kernel.

A determinant is stored as two bit chains held in Python integers, so the
width is not capped at one machine word:

* ``val``   bit ``i`` is the occupancy of one-particle state ``i``;
* ``signs`` bit ``i`` is the parity of the occupied states below ``i``.

String renderings put bit 0 first (leftmost), e.g. ``val = 00010010`` has
states 3 and 6 occupied and ``signs = 00001110``.

Creation on state ``p`` follows the bit rules: the state must be empty
(``AND``), the new occupancy is the ``OR``, the new sign chain is the ``XOR``
with the parity chain of the single bit, and the fermionic sign is ``-1``
exactly when bit ``p`` of the old sign chain is set.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

PRUNE_TOL = 1e-14


class FockError(ValueError):
    """Raised when an operator leaves the space it is applied in."""


def parity_chain(val: int, width: int) -> int:
    """Return the running prefix parity of ``val``.

    Bit ``i`` of the result is ``popcount(val & ((1 << i) - 1)) % 2``.
    """
    if width <= 0:
        return 0
    y = val << 1
    shift = 1
    while shift < width:
        y ^= y << shift
        shift <<= 1
    return y & ((1 << width) - 1)


def bits_to_str(val: int, width: int) -> str:
    """Render ``val`` as a bit string with bit 0 leftmost."""
    return "".join("1" if (val >> i) & 1 else "0" for i in range(width))


def str_to_bits(s: str) -> int:
    """Inverse of :func:`bits_to_str`."""
    s = s.strip()
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return int(s[::-1], 2)


@dataclass(frozen=True)
class Determinant:
    val: int
    signs: int
    width: int

    @classmethod
    def from_val(cls, val: int, width: int) -> "Determinant":
        if val < 0 or val >> width:
            raise ValueError(f"occupancy does not fit in {width} bits")
        return cls(val, parity_chain(val, width), width)

    @classmethod
    def from_occupied(cls, occupied: Iterable[int], width: int) -> "Determinant":
        val = 0
        for p in occupied:
            val |= 1 << p
        return cls.from_val(val, width)

    @classmethod
    def from_str(cls, s: str) -> "Determinant":
        return cls.from_val(str_to_bits(s), len(s.strip()))

    @property
    def n_electrons(self) -> int:
        return self.val.bit_count()

    def occupied(self) -> list[int]:
        return [i for i in range(self.width) if (self.val >> i) & 1]

    def __str__(self) -> str:
        return bits_to_str(self.val, self.width)


def _check_position(p: int, width: int) -> None:
    if not 0 <= p < width:
        raise IndexError(f"state index {p} out of range for width {width}")


def apply_create(p: int, d: Determinant):
    """Apply ``c_p^+`` to ``d``; returns ``(Determinant, sign)`` or ``None``."""
    _check_position(p, d.width)
    co = 1 << p
    if co & d.val:
        return None
    sign = -1 if co & d.signs else 1
    return Determinant(d.val | co, d.signs ^ parity_chain(co, d.width), d.width), sign


def apply_annihilate(p: int, d: Determinant):
    """Apply ``c_p`` to ``d``; returns ``(Determinant, sign)`` or ``None``."""
    _check_position(p, d.width)
    co = 1 << p
    if not co & d.val:
        return None
    sign = -1 if co & d.signs else 1
    return Determinant(d.val ^ co, d.signs ^ parity_chain(co, d.width), d.width), sign


class LadderOp(NamedTuple):
    position: int
    create: bool

    @property
    def kind(self) -> str:
        return "create" if self.create else "annihilate"

    def dagger(self) -> "LadderOp":
        return LadderOp(self.position, not self.create)

    def __repr__(self) -> str:
        return f"c{'+' if self.create else ''}_{self.position}"


class OperatorTerm(NamedTuple):
    coefficient: complex
    factors: tuple  # of LadderOp, applied right to left


def _order_key(op: LadderOp):
    # creators first (ascending), then annihilators (descending)
    return (0, op.position) if op.create else (1, -op.position)


@lru_cache(maxsize=None)
def _normal_order(factors: tuple) -> tuple:
    """Expand a product into normal-ordered products.

    Returns a tuple of ``(coefficient, factors)`` with anticommutator
    contractions included, so equal operators always get equal keys.
    """
    for k in range(len(factors) - 1):
        a, b = factors[k], factors[k + 1]
        if a == b:
            return ()
        if _order_key(a) > _order_key(b):
            head, tail = factors[:k], factors[k + 2:]
            out: dict = {}
            for c, f in _normal_order(head + (b, a) + tail):
                out[f] = out.get(f, 0) - c
            if a.position == b.position and not a.create and b.create:
                for c, f in _normal_order(head + tail):
                    out[f] = out.get(f, 0) + c
            return tuple((c, f) for f, c in out.items() if c != 0)
    return ((1, factors),)


class OperatorSum:
    """Linear combination of products of ladder operators.

    Terms are kept in normal order (creators ascending, then annihilators
    descending) so that two sums representing the same operator compare equal.
    Contractions can leave a term with no factors; it stands for the identity.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        acc: dict = {}
        for coef, factors in terms:
            factors = tuple(LadderOp(*f) for f in factors)
            coef = complex(coef)
            if not np.isfinite(coef):
                raise ValueError("non-finite operator coefficient")
            for c, f in _normal_order(factors):
                acc[f] = acc.get(f, 0j) + c * coef
        self._terms = {f: c for f, c in acc.items() if abs(c) > PRUNE_TOL}

    @classmethod
    def _raw(cls, mapping: dict) -> "OperatorSum":
        new = cls.__new__(cls)
        new._terms = {f: c for f, c in mapping.items() if abs(c) > PRUNE_TOL}
        return new

    @property
    def terms(self) -> list[OperatorTerm]:
        return [OperatorTerm(c, f) for f, c in sorted(self._terms.items(), key=_term_sort_key)]

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if not isinstance(other, OperatorSum):
            return NotImplemented
        acc = dict(self._terms)
        for f, c in other._terms.items():
            acc[f] = acc.get(f, 0j) + c
        return OperatorSum._raw(acc)

    def __neg__(self) -> "OperatorSum":
        return OperatorSum._raw({f: -c for f, c in self._terms.items()})

    def __sub__(self, other: "OperatorSum") -> "OperatorSum":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, OperatorSum):
            return OperatorSum(
                (c1 * c2, f1 + f2)
                for f1, c1 in self._terms.items()
                for f2, c2 in other._terms.items()
            )
        if np.isscalar(other):
            return OperatorSum._raw({f: c * other for f, c in self._terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def adjoint(self) -> "OperatorSum":
        return adjoint(self)

    def commutator(self, other: "OperatorSum") -> "OperatorSum":
        return self * other - other * self

    def is_close(self, other: "OperatorSum", tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0) - other._terms.get(k, 0)) <= tol for k in keys)

    def positions(self) -> set[int]:
        return {op.position for f in self._terms for op in f}

    def __repr__(self) -> str:
        return f"OperatorSum({len(self)} terms)"


def _term_sort_key(item):
    f, _ = item
    return (len(f), [(not op.create, op.position) for op in f])


def adjoint(op: OperatorSum) -> OperatorSum:
    """Hermitian conjugate: conjugate coefficients, reverse and dagger factors."""
    return OperatorSum(
        (np.conj(c), tuple(x.dagger() for x in reversed(f))) for f, c in op._terms.items()
    )


def create(p: int) -> OperatorSum:
    return OperatorSum([(1.0, (LadderOp(p, True),))])


def annihilate(p: int) -> OperatorSum:
    return OperatorSum([(1.0, (LadderOp(p, False),))])


def number(p: int) -> OperatorSum:
    return OperatorSum([(1.0, (LadderOp(p, True), LadderOp(p, False)))])


def one_body(matrix, rows, cols) -> OperatorSum:
    """``sum_ab matrix[a, b] c+_{rows[a]} c_{cols[b]}``."""
    matrix = np.asarray(matrix)
    terms = []
    for a, pa in enumerate(rows):
        for b, pb in enumerate(cols):
            h = matrix[a, b]
            if abs(h) > PRUNE_TOL:
                terms.append((h, (LadderOp(pa, True), LadderOp(pb, False))))
    return OperatorSum(terms)


def apply_factors(factors, d: Determinant):
    """Apply a product of ladder operators (right to left) to ``d``."""
    sign = 1
    for op in reversed(factors):
        res = apply_create(op.position, d) if op.create else apply_annihilate(op.position, d)
        if res is None:
            return None
        d, s = res
        sign *= s
    return d, sign


class StateVector:
    """Dense amplitude array over the basis of a Hilbert space."""

    def __init__(self, space, amplitudes=None):
        self.space = space
        if amplitudes is None:
            amplitudes = np.zeros(space.dim, dtype=complex)
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (space.dim,):
            raise ValueError(f"expected {space.dim} amplitudes, got {amplitudes.shape}")
        if not np.all(np.isfinite(amplitudes)):
            raise ValueError("non-finite amplitudes")
        self.amplitudes = amplitudes

    @classmethod
    def basis_state(cls, space, index: int) -> "StateVector":
        v = cls(space)
        v.amplitudes[index] = 1.0
        return v

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def vdot(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def apply_operator(op: OperatorSum, x: StateVector, target=None) -> StateVector:
    """Apply ``op`` to ``x`` and express the result over ``target``.

    Raises :class:`FockError` naming the first determinant that is not in
    ``target`` (the target space is under-expanded for this operator).
    """
    target = x.space if target is None else target
    width = x.space.width
    acc: dict[int, complex] = {}
    terms = op.terms
    for i in np.flatnonzero(x.amplitudes):
        amp = x.amplitudes[i]
        d = Determinant.from_val(x.space.basis[i], width)
        for coef, factors in terms:
            res = apply_factors(factors, d)
            if res is None:
                continue
            out, sign = res
            acc[out.val] = acc.get(out.val, 0j) + sign * coef * amp
    y = StateVector(target)
    for val, amp in acc.items():
        if abs(amp) <= PRUNE_TOL:
            continue
        j = target.lookup.get(val)
        if j is None:
            raise FockError(f"determinant {bits_to_str(val, width)} is outside the target space")
        y.amplitudes[j] += amp
    return y
