"""Truncated directional Taylor expansions (jets) up to order 3.

A Jet carries a value and its first `order` directional derivatives along
one seeded input direction. Components may be floats, numpy arrays, or tape
Values; in the latter case reverse mode differentiates through the
derivatives themselves (forward-over-reverse).
"""

from __future__ import annotations

import numpy as np

from . import tape as ad
from .tape import StructuralError

MAX_ORDER = 3

_BINOM = {1: (1, 1), 2: (1, 2, 1), 3: (1, 3, 3, 1)}


class UnsupportedOrderError(ValueError):
    """Requested derivative order above the supported ceiling."""


def _is_zero(x):
    return isinstance(x, float) and x == 0.0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


class Jet:
    __slots__ = ("comps", "direction_id")

    __array_ufunc__ = None

    def __init__(self, comps, direction_id=None):
        comps = tuple(comps)
        if not 2 <= len(comps) <= MAX_ORDER + 1:
            raise UnsupportedOrderError(
                f"jet order must be 1..{MAX_ORDER}, got {len(comps) - 1}"
            )
        self.comps = comps
        self.direction_id = direction_id

    @staticmethod
    def seed(value, direction=1.0, order=1, direction_id=0):
        """Jet tracking `value` with first derivative seeded to `direction`."""
        comps = [value, direction] + [0.0] * (order - 1)
        return Jet(comps, direction_id)

    @staticmethod
    def constant(value, order=1):
        return Jet([value] + [0.0] * order)

    @property
    def order(self):
        return len(self.comps) - 1

    @property
    def value(self):
        return self.comps[0]

    def d(self, k):
        """k-th directional derivative; zero-filled beyond the jet's order."""
        if k > MAX_ORDER:
            raise UnsupportedOrderError(f"order {k} above ceiling {MAX_ORDER}")
        return self.comps[k] if k <= self.order else 0.0

    @property
    def d1(self):
        return self.d(1)

    @property
    def d2(self):
        return self.d(2)

    @property
    def d3(self):
        return self.d(3)

    def _merge_id(self, other):
        if self.direction_id is None:
            return other.direction_id
        if other.direction_id is None or other.direction_id == self.direction_id:
            return self.direction_id
        raise StructuralError(
            f"mixing jets of directions {self.direction_id} and {other.direction_id}"
        )

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            m = min(self.order, other.order)
            return Jet(
                [_add(self.comps[k], other.comps[k]) for k in range(m + 1)],
                self._merge_id(other),
            )
        return Jet((_add(self.comps[0], other),) + self.comps[1:], self.direction_id)

    __radd__ = __add__

    def __neg__(self):
        return Jet([-c if not _is_zero(c) else 0.0 for c in self.comps], self.direction_id)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            m = min(self.order, other.order)
            out = []
            for k in range(m + 1):
                acc = 0.0
                for j in range(k + 1):
                    coeff = _BINOM[k][j] if k else 1
                    term = _mul(self.comps[j], other.comps[k - j])
                    if coeff != 1 and not _is_zero(term):
                        term = term * float(coeff)
                    acc = _add(acc, term)
                out.append(acc)
            return Jet(out, self._merge_id(other))
        return Jet([_mul(c, other) for c in self.comps], self.direction_id)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other._recip()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self._recip() * other

    def __pow__(self, n):
        u = self.comps[0]
        phis = [u ** n]
        coeff = float(n)
        power = n - 1
        for _ in range(self.order):
            phis.append(coeff * u ** power if coeff != 0.0 else 0.0)
            coeff *= power
            power -= 1
        return self._compose(phis)

    def _recip(self):
        u = self.comps[0]
        inv = 1.0 / u
        phis = [inv]
        if self.order >= 1:
            inv2 = inv * inv
            phis.append(-inv2)
        if self.order >= 2:
            inv3 = inv2 * inv
            phis.append(2.0 * inv3)
        if self.order >= 3:
            phis.append(-6.0 * inv3 * inv)
        return self._compose(phis)

    # -- composition with scalar functions -----------------------------------

    def _compose(self, phis):
        """Apply a scalar function given its derivatives phis[k] at the value.

        Faa di Bruno through order 3:
          y1 = p1 u1
          y2 = p2 u1^2 + p1 u2
          y3 = p3 u1^3 + 3 p2 u1 u2 + p1 u3
        """
        u = self.comps
        out = [phis[0]]
        if self.order >= 1:
            out.append(_mul(phis[1], u[1]))
        if self.order >= 2:
            u1sq = _mul(u[1], u[1])
            out.append(_add(_mul(phis[2], u1sq), _mul(phis[1], u[2])))
        if self.order >= 3:
            t1 = _mul(phis[3], _mul(u1sq, u[1]))
            t2 = _mul(3.0, _mul(phis[2], _mul(u[1], u[2])))
            t3 = _mul(phis[1], u[3])
            out.append(_add(_add(t1, t2), t3))
        return Jet(out, self.direction_id)

    def tanh(self):
        p0 = ad.tanh(self.comps[0])
        phis = [p0]
        if self.order >= 1:
            p1 = 1.0 - p0 * p0
            phis.append(p1)
        if self.order >= 2:
            p2 = -2.0 * (p0 * p1)
            phis.append(p2)
        if self.order >= 3:
            phis.append(-2.0 * (p1 * p1 + p0 * p2))
        return self._compose(phis)

    def exp(self):
        e = ad.exp(self.comps[0])
        return self._compose([e] * (self.order + 1))

    def log(self):
        u = self.comps[0]
        phis = [ad.log(u)]
        if self.order >= 1:
            inv = 1.0 / u
            phis.append(inv)
        if self.order >= 2:
            inv2 = inv * inv
            phis.append(-inv2)
        if self.order >= 3:
            phis.append(2.0 * (inv2 * inv))
        return self._compose(phis)

    def sin(self):
        s = ad.sin(self.comps[0])
        c = ad.cos(self.comps[0])
        return self._compose([s, c, -s, -c][: self.order + 1])

    def cos(self):
        s = ad.sin(self.comps[0])
        c = ad.cos(self.comps[0])
        return self._compose([c, -s, -c, s][: self.order + 1])

    # -- shape ops ------------------------------------------------------------

    def matmul(self, w):
        return Jet(
            [c if _is_zero(c) else ad.matmul(c, w) for c in self.comps],
            self.direction_id,
        )

    __matmul__ = matmul

    def col(self, i):
        out = []
        for c in self.comps:
            if _is_zero(c):
                out.append(0.0)
            elif isinstance(c, np.ndarray):
                out.append(c[:, i : i + 1])
            else:
                out.append(c.col(i))
        return Jet(out, self.direction_id)


def _seed_is_nonzero(jet):
    d1 = jet.d1
    if isinstance(d1, float):
        return d1 != 0.0
    if isinstance(d1, np.ndarray):
        return bool(np.any(d1 != 0.0))
    return bool(np.any(np.asarray(d1.data) != 0.0))


def forward_jet(f, inputs, order):
    """Evaluate f on seeded jets; returns value plus directional derivatives.

    Exactly one input must carry a nonzero first-derivative seed.
    """
    if not 1 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(f"order must be 1..{MAX_ORDER}, got {order}")
    for j in inputs:
        if not isinstance(j, Jet):
            raise StructuralError("forward_jet inputs must be Jets")
        if j.order != order:
            raise StructuralError(
                f"input jet order {j.order} does not match requested order {order}"
            )
    seeded = sum(1 for j in inputs if _seed_is_nonzero(j))
    if seeded != 1:
        raise StructuralError(f"exactly one seeded input required, got {seeded}")
    out = f(*inputs)
    if not isinstance(out, Jet):
        raise StructuralError("recorded computation must return a Jet")
    return out


def _directional_d2(f, inputs, weights):
    jets = [
        Jet.seed(x, w, order=2, direction_id=None) for x, w in zip(inputs, weights)
    ]
    out = f(*jets)
    return out.d2


def mixed_second(f, inputs, dir_a, dir_b):
    """Mixed second derivative of f at `inputs` along input axes a and b.

    Uses the exact polarization identity
      2 f_ab = D^2_{a+b} f - D^2_a f - D^2_b f,
    which is symmetric in (a, b) by construction.
    """
    n = len(inputs)
    if not (0 <= dir_a < n and 0 <= dir_b < n):
        raise StructuralError(f"direction indices out of range for {n} inputs")
    if dir_a == dir_b:
        raise StructuralError("mixed_second requires two distinct directions")
    e_a = [1.0 if i == dir_a else 0.0 for i in range(n)]
    e_b = [1.0 if i == dir_b else 0.0 for i in range(n)]
    e_ab = [a + b for a, b in zip(e_a, e_b)]
    return 0.5 * (
        _directional_d2(f, inputs, e_ab)
        - _directional_d2(f, inputs, e_a)
        - _directional_d2(f, inputs, e_b)
    )
