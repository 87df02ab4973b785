"""Truncated multivariate Taylor (jet) arithmetic to third order.

A :class:`Jet3` carries the value, gradient, Hessian and third-order partial
derivatives of a scalar quantity at a point.  Every derivative consumed
downstream (potential Hessians, metric derivatives, connection coefficients)
is propagated through these jets, so no finite differencing happens outside
test oracles.

All operations are pure and deterministic: the accumulation order is fixed,
and the symmetric parts are mirrored from a canonical index ordering so that
``hess`` and ``third`` are exactly (bitwise) symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

__all__ = [
    "Jet3",
    "JetDomainError",
    "seed_coordinate",
    "constant",
    "recip",
    "sqrt",
    "pow_int",
    "exp",
    "log",
    "sin",
    "cos",
]


class JetDomainError(ArithmeticError):
    """A primitive was evaluated outside its domain (e.g. ``log`` at 0)."""

    def __init__(self, primitive: str, value: float):
        self.primitive = primitive
        self.value = value
        super().__init__(f"{primitive} undefined at value {value!r}")


def _mirror_hess(h: np.ndarray) -> np.ndarray:
    # copy the upper triangle onto the lower one; exact symmetry
    upper = np.triu(h)
    return upper + np.triu(h, 1).T


def _mirror_third(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    out = np.empty_like(t)
    for i, j, k in combinations_with_replacement(range(n), 3):
        v = t[i, j, k]
        for p in permutations((i, j, k)):
            out[p] = v
    return out


def _grad_hess_sym(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    # sum of g ⊗ h over the three placements of the gradient index
    t = np.einsum("i,jk->ijk", g, h)
    t = t + np.einsum("j,ik->ijk", g, h)
    t = t + np.einsum("k,ij->ijk", g, h)
    return t


@dataclass(frozen=True)
class Jet3:
    """Value plus partial derivatives to order three at a point.

    Invariants: ``hess`` is symmetric and ``third`` is fully symmetric (both
    exactly, by construction), and all arithmetic requires matching ``dim``.
    """

    dim: int
    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray

    def _binary_dim(self, other: "Jet3") -> None:
        if self.dim != other.dim:
            raise ValueError(
                f"jet dimension mismatch: {self.dim} vs {other.dim}"
            )

    def _coerce(self, other) -> "Jet3":
        if isinstance(other, Jet3):
            self._binary_dim(other)
            return other
        return constant(float(other), self.dim)

    def __add__(self, other) -> "Jet3":
        b = self._coerce(other)
        return Jet3(
            self.dim,
            self.value + b.value,
            self.grad + b.grad,
            self.hess + b.hess,
            self.third + b.third,
        )

    __radd__ = __add__

    def __neg__(self) -> "Jet3":
        return Jet3(self.dim, -self.value, -self.grad, -self.hess, -self.third)

    def __sub__(self, other) -> "Jet3":
        return self.__add__(-self._coerce(other))

    def __rsub__(self, other) -> "Jet3":
        return (-self).__add__(other)

    def __mul__(self, other) -> "Jet3":
        b = self._coerce(other)
        a = self
        value = a.value * b.value
        grad = a.value * b.grad + b.value * a.grad
        hess = (
            a.value * b.hess
            + b.value * a.hess
            + np.outer(a.grad, b.grad)
            + np.outer(b.grad, a.grad)
        )
        third = (
            a.value * b.third
            + b.value * a.third
            + _grad_hess_sym(a.grad, b.hess)
            + _grad_hess_sym(b.grad, a.hess)
        )
        return Jet3(a.dim, value, grad, _mirror_hess(hess), _mirror_third(third))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet3":
        b = self._coerce(other)
        return self * recip(b)

    def __rtruediv__(self, other) -> "Jet3":
        return self._coerce(other) * recip(self)


def constant(value: float, dim: int) -> Jet3:
    """Jet of a constant: all derivative parts vanish."""
    n = int(dim)
    if n <= 0:
        raise ValueError(f"jet dimension must be positive, got {dim}")
    return Jet3(
        n, float(value), np.zeros(n), np.zeros((n, n)), np.zeros((n, n, n))
    )


def seed_coordinate(i: int, x0: float, dim: int) -> Jet3:
    """Jet of the i-th coordinate function at ``x0``.

    The gradient is the i-th standard basis vector; higher parts vanish.
    """
    n = int(dim)
    if n <= 0:
        raise ValueError(f"jet dimension must be positive, got {dim}")
    if not 0 <= i < n:
        raise ValueError(f"coordinate index {i} out of range for dimension {n}")
    grad = np.zeros(n)
    grad[i] = 1.0
    return Jet3(n, float(x0), grad, np.zeros((n, n)), np.zeros((n, n, n)))


def _compose(a: Jet3, f0: float, f1: float, f2: float, f3: float) -> Jet3:
    """Chain rule of a univariate map through a jet, to order three."""
    g = a.grad
    value = f0
    grad = f1 * g
    hess = f1 * a.hess + f2 * np.outer(g, g)
    third = (
        f1 * a.third
        + f2 * _grad_hess_sym(g, a.hess)
        + f3 * np.einsum("i,j,k->ijk", g, g, g)
    )
    return Jet3(a.dim, value, grad, _mirror_hess(hess), _mirror_third(third))


def recip(a: Jet3) -> Jet3:
    v = a.value
    if v == 0.0:
        raise JetDomainError("recip", v)
    inv = 1.0 / v
    return _compose(a, inv, -(inv**2), 2.0 * inv**3, -6.0 * inv**4)


def sqrt(a: Jet3) -> Jet3:
    v = a.value
    if v <= 0.0:
        raise JetDomainError("sqrt", v)
    r = math.sqrt(v)
    return _compose(
        a, r, 0.5 / r, -0.25 * v ** (-1.5), 0.375 * v ** (-2.5)
    )


def pow_int(a: Jet3, k: int) -> Jet3:
    """Integer power of a jet; negative exponents require a nonzero value."""
    k = int(k)
    v = a.value
    if k < 0 and v == 0.0:
        raise JetDomainError(f"pow_int({k})", v)

    def term(c: float, p: int) -> float:
        if c == 0.0:
            return 0.0
        return c * v ** p

    f0 = term(1.0, k) if k != 0 else 1.0
    f1 = term(float(k), k - 1)
    f2 = term(float(k * (k - 1)), k - 2)
    f3 = term(float(k * (k - 1) * (k - 2)), k - 3)
    return _compose(a, f0, f1, f2, f3)


def exp(a: Jet3) -> Jet3:
    e = math.exp(a.value)
    return _compose(a, e, e, e, e)


def log(a: Jet3) -> Jet3:
    v = a.value
    if v <= 0.0:
        raise JetDomainError("log", v)
    inv = 1.0 / v
    return _compose(a, math.log(v), inv, -(inv**2), 2.0 * inv**3)


def sin(a: Jet3) -> Jet3:
    s, c = math.sin(a.value), math.cos(a.value)
    return _compose(a, s, c, -s, -c)


def cos(a: Jet3) -> Jet3:
    s, c = math.sin(a.value), math.cos(a.value)
    return _compose(a, c, -s, -c, s)
