"""Forward-mode automatic differentiation on dual numbers.

A :class:`Dual` carries a value together with a vector of partial
derivatives with respect to the active independent variables.  Arithmetic
propagates derivatives by the chain rule, so evaluating any supported
expression on seeded duals yields exact first derivatives.

The component type is deliberately generic: the value and the partials of
a ``Dual`` may themselves be duals.  Seeding inside an already-seeded
evaluation therefore gives exact second (third, ...) derivatives, which is
how nested Lie brackets and Hessians are computed elsewhere.
"""

from __future__ import annotations

import math
import numbers


class ADDomainError(ArithmeticError):
    """An elementary function was evaluated outside its domain."""

    def __init__(self, op: str, value):
        super().__init__(f"{op}: argument {value!r} outside domain")
        self.op = op
        self.value = value


def real(x):
    """Underlying float of a possibly nested dual."""
    while isinstance(x, Dual):
        x = x.value
    return x


class Dual:
    __slots__ = ("value", "partials")

    def __init__(self, value, partials):
        self.value = value
        self.partials = tuple(partials)

    def __repr__(self):
        return f"Dual({self.value!r}, {self.partials!r})"

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value,
                        tuple(p + q for p, q in zip(self.partials, other.partials, strict=True)))
        if isinstance(other, numbers.Real):
            return Dual(self.value + other, self.partials)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, tuple(-p for p in self.partials))

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value,
                        tuple(p - q for p, q in zip(self.partials, other.partials, strict=True)))
        if isinstance(other, numbers.Real):
            return Dual(self.value - other, self.partials)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return Dual(other - self.value, tuple(-p for p in self.partials))
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Dual):
            sv, ov = self.value, other.value
            return Dual(sv * ov,
                        tuple(p * ov + sv * q
                              for p, q in zip(self.partials, other.partials, strict=True)))
        if isinstance(other, numbers.Real):
            return Dual(self.value * other, tuple(p * other for p in self.partials))
        return NotImplemented

    __rmul__ = __mul__

    def _reciprocal(self):
        if real(self.value) == 0.0:
            raise ADDomainError("div", real(self.value))
        inv = 1.0 / self.value
        neg_inv2 = -(inv * inv)
        return Dual(inv, tuple(neg_inv2 * p for p in self.partials))

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other._reciprocal()
        if isinstance(other, numbers.Real):
            if other == 0.0:
                raise ADDomainError("div", 0.0)
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return other * self._reciprocal()
        return NotImplemented

    def __pow__(self, exponent):
        return power(self, exponent)

    def __rpow__(self, base):
        return power(base, self)

    def __eq__(self, other):
        if isinstance(other, Dual):
            return self.value == other.value and self.partials == other.partials
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.partials))


def seed(point, active):
    """Duals for ``point`` with identity seeding on the ``active`` indices.

    Partials are ordered by ascending active index; inactive coordinates get
    zero partial vectors of the same length.
    """
    point = list(point)
    active = sorted(set(active))
    for i in active:
        if not 0 <= i < len(point):
            raise IndexError(f"active index {i} out of range for point of length {len(point)}")
    k = len(active)
    slot = {i: j for j, i in enumerate(active)}
    out = []
    for i, v in enumerate(point):
        parts = [0.0] * k
        if i in slot:
            parts[slot[i]] = 1.0
        out.append(Dual(v, parts))
    return out


# -- elementary functions, generic over floats and (nested) duals -------

def sin(x):
    if isinstance(x, Dual):
        c = cos(x.value)
        return Dual(sin(x.value), tuple(c * p for p in x.partials))
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        ns = -sin(x.value)
        return Dual(cos(x.value), tuple(ns * p for p in x.partials))
    return math.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.value)
        return Dual(e, tuple(e * p for p in x.partials))
    return math.exp(x)


def log(x):
    if real(x) <= 0.0:
        raise ADDomainError("log", real(x))
    if isinstance(x, Dual):
        inv = 1.0 / x.value
        return Dual(log(x.value), tuple(inv * p for p in x.partials))
    return math.log(x)


def sqrt(x):
    if real(x) <= 0.0:
        raise ADDomainError("sqrt", real(x))
    if isinstance(x, Dual):
        r = sqrt(x.value)
        half_inv = 0.5 / r
        return Dual(r, tuple(half_inv * p for p in x.partials))
    return math.sqrt(x)


def absolute(x):
    v = real(x)
    if v == 0.0:
        raise ADDomainError("abs", 0.0)
    return x if v > 0.0 else -x


def _int_pow(base, k: int):
    # repeated multiplication keeps integer powers exact and avoids the
    # positive-base restriction of the log route
    if k == 0:
        return 1.0
    if k < 0:
        return 1.0 / _int_pow(base, -k)
    out = base
    for _ in range(k - 1):
        out = out * base
    return out


def power(base, exponent):
    if isinstance(exponent, Dual):
        return exp(exponent * log(base))
    if isinstance(exponent, numbers.Integral):
        return _int_pow(base, int(exponent))
    if isinstance(exponent, numbers.Real) and float(exponent).is_integer():
        return _int_pow(base, int(exponent))
    if real(base) <= 0.0:
        raise ADDomainError("pow", real(base))
    return exp(exponent * log(base))
