"""Truncated Taylor jets: exact mixed partials up to order 3.

A :class:`Jet` carries a value together with all first, second and third
partial derivatives with respect to a fixed set of seeded variables. The
arithmetic and elementary functions propagate these by the Leibniz and
Faa di Bruno formulas, so one traversal of an expression yields every mixed
partial at once. Derivative arrays are dense; the third-order array is
re-read through canonical (sorted) indices after every operation that could
break symmetry in floating point, which makes symmetry exact.

:func:`fd_partial` is the independent finite-difference oracle used to
cross-check the propagated derivatives.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .dsl import Expr, evaluate, pow_value
from .errors import DomainError


@lru_cache(maxsize=None)
def _canonical3(m: int):
    i, j, k = np.indices((m, m, m))
    s = np.sort(np.stack([i, j, k]), axis=0)
    return s[0], s[1], s[2]


def _sym3(P, q):
    # P_ij q_k + P_ik q_j + P_jk q_i
    T = P[:, :, None] * q[None, None, :]
    return T + T.transpose(0, 2, 1) + T.transpose(2, 0, 1)


def _canon(T):
    return T[_canonical3(T.shape[0])]


class Jet:
    """Value plus derivatives up to ``order`` over ``m`` seeded variables."""

    __slots__ = ("value", "first", "second", "third")
    __array_priority__ = 1000  # keep numpy scalars from swallowing jets

    def __init__(self, value, first, second=None, third=None):
        self.value = value
        self.first = first
        self.second = second
        self.third = third

    @property
    def order(self) -> int:
        return 3 if self.third is not None else 2 if self.second is not None else 1

    @property
    def nvars(self) -> int:
        return self.first.shape[0]

    @classmethod
    def constant(cls, value, m: int, order: int) -> "Jet":
        z = np.zeros
        return cls(
            value,
            z(m),
            z((m, m)) if order >= 2 else None,
            z((m, m, m)) if order >= 3 else None,
        )

    @classmethod
    def variable(cls, value, slot: int, m: int, order: int) -> "Jet":
        jet = cls.constant(value, m, order)
        jet.first[slot] = 1.0
        return jet

    def __repr__(self):
        return f"Jet(value={self.value!r}, order={self.order}, nvars={self.nvars})"

    # -- arithmetic ---------------------------------------------------------

    def _scaled(self, c, value):
        return Jet(
            value,
            self.first * c,
            None if self.second is None else self.second * c,
            None if self.third is None else self.third * c,
        )

    def __neg__(self):
        return Jet(
            -self.value,
            -self.first,
            None if self.second is None else -self.second,
            None if self.third is None else -self.third,
        )

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(
                self.value + other.value,
                self.first + other.first,
                None if self.second is None else self.second + other.second,
                None if self.third is None else self.third + other.third,
            )
        return Jet(self.value + other, self.first, self.second, self.third)

    def __radd__(self, other):
        return Jet(other + self.value, self.first, self.second, self.third)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(
                self.value - other.value,
                self.first - other.first,
                None if self.second is None else self.second - other.second,
                None if self.third is None else self.third - other.third,
            )
        return Jet(self.value - other, self.first, self.second, self.third)

    def __rsub__(self, other):
        neg = -self
        neg.value = other - self.value
        return neg

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._scaled(other, self.value * other)
        a, b = self, other
        first = a.first * b.value + a.value * b.first
        second = third = None
        if a.second is not None:
            o = np.outer(a.first, b.first)
            second = a.second * b.value + (o + o.T) + a.value * b.second
        if a.third is not None:
            third = _canon(
                a.third * b.value + _sym3(a.second, b.first) + _sym3(b.second, a.first) + a.value * b.third
            )
        return Jet(a.value * b.value, first, second, third)

    def __rmul__(self, other):
        return self._scaled(other, other * self.value)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self._scaled(1.0 / other, self.value / other)
        out = self * other.reciprocal()
        out.value = self.value / other.value
        return out

    def __rtruediv__(self, other):
        out = other * self.reciprocal()
        out.value = other / self.value
        return out

    # -- univariate chain rule -----------------------------------------------

    def _chain(self, f0, f1, f2, f3):
        u1 = self.first
        first = f1 * u1
        second = third = None
        if self.second is not None:
            second = f2 * np.outer(u1, u1) + f1 * self.second
        if self.third is not None:
            uuu = u1[:, None, None] * u1[None, :, None] * u1[None, None, :]
            third = _canon(f3 * uuu + f2 * _sym3(self.second, u1) + f1 * self.third)
        return Jet(f0, first, second, third)

    def reciprocal(self):
        v = self.value
        if v == 0:
            raise DomainError("division by zero")
        r = 1.0 / v
        return self._chain(r, -r * r, 2 * r * r * r, -6 * r * r * r * r)

    def sqrt(self):
        v = self.value
        if v <= 0:
            raise DomainError(f"sqrt of non-positive value {v!r}")
        s = math.sqrt(v)
        return self._chain(s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))

    def exp(self):
        e = math.exp(self.value)
        return self._chain(e, e, e, e)

    def log(self):
        v = self.value
        if v <= 0:
            raise DomainError(f"log of non-positive value {v!r}")
        return self._chain(math.log(v), 1 / v, -1 / (v * v), 2 / (v * v * v))

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(s, c, -s, -c)

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(c, -s, -c, s)

    def tan(self):
        t = math.tan(self.value)
        sec2 = 1 + t * t
        return self._chain(t, sec2, 2 * t * sec2, 2 * sec2 * (1 + 3 * t * t))

    def sinh(self):
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self._chain(s, c, s, c)

    def cosh(self):
        s, c = math.sinh(self.value), math.cosh(self.value)
        return self._chain(c, s, c, s)

    def tanh(self):
        t = math.tanh(self.value)
        d = 1 - t * t
        return self._chain(t, d, -2 * t * d, (6 * t * t - 2) * d)

    def pow_rational(self, r: Fraction):
        v = self.value
        f0 = pow_value(v, r)
        rf = float(r)
        coeffs = [rf, rf * (rf - 1), rf * (rf - 1) * (rf - 2)]
        derivs = []
        for k, c in enumerate(coeffs, start=1):
            # falling factorial vanishes for small non-negative integer powers
            derivs.append(0.0 if c == 0 else c * pow_value(v, r - k))
        return self._chain(f0, *derivs)


def as_jet(v, m: int, order: int) -> Jet:
    return v if isinstance(v, Jet) else Jet.constant(float(v), m, order)


def jet_eval(e: Expr, point: Mapping[str, float], seeds: Sequence[str], order: int = 2) -> Jet:
    """Propagate derivatives of ``e`` at ``point`` over the seeded variables.

    ``point`` binds every variable of ``e``; ``seeds`` lists the variable
    names to differentiate with respect to, in slot order.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    m = len(seeds)
    env = dict(point)
    for slot, name in enumerate(seeds):
        env[name] = Jet.variable(float(point[name]), slot, m, order)
    return as_jet(evaluate(e, env), m, order)


def partial(jet: Jet, slots: Sequence[int]) -> float:
    """Read one mixed partial out of a jet by seed slots."""
    k = len(slots)
    if k == 0:
        return jet.value
    arr = (jet.first, jet.second, jet.third)[k - 1]
    if arr is None:
        raise ValueError(f"jet has no order-{k} derivatives")
    return float(arr[tuple(slots)])


def default_step(order: int, coordinate: float) -> float:
    base = 1e-3 if order >= 3 else 1e-5
    return base * max(1.0, abs(coordinate))


def fd_partial(e: Expr, point: Mapping[str, float], multi_index: Sequence[str], h: float | None = None) -> float:
    """Central finite-difference estimate of a mixed partial (error O(h^2)).

    The derivative along ``multi_index`` (variable names, repeats allowed,
    at most 3) is the product of one central difference per entry, so the
    stencil reaches at most ``len(multi_index) * h`` from ``point`` in each
    differenced variable. ``h`` scales with ``max(1, |coordinate|)``; the
    default is 1e-5 for orders 1-2 and 1e-3 for order 3.
    """
    k = len(multi_index)
    if not 1 <= k <= 3:
        raise ValueError("multi_index must have 1 to 3 entries")
    if h is None:
        steps = [default_step(k, point[v]) for v in multi_index]
    else:
        steps = [h * max(1.0, abs(point[v])) for v in multi_index]
    stencil: dict[tuple, float] = {}
    for signs in product((1, -1), repeat=k):
        offset: dict[str, float] = {}
        for s, v, hv in zip(signs, multi_index, steps):
            offset[v] = offset.get(v, 0.0) + s * hv
        key = tuple(sorted((v, d) for v, d in offset.items() if d != 0.0))
        stencil[key] = stencil.get(key, 0.0) + math.prod(signs)
    terms = []
    for key, coeff in stencil.items():
        if coeff == 0:
            continue
        env = dict(point)
        for v, d in key:
            env[v] = point[v] + d
        try:
            terms.append(coeff * evaluate(e, env))
        except DomainError as exc:
            raise DomainError(f"finite-difference stencil left the domain ({exc})") from None
    return math.fsum(terms) / math.prod(2 * hv for hv in steps)
