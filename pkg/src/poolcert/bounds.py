"""Bound containers and the dual-norm concretization of global linear bounds.

Given linear bounds of a layer in input coordinates, A_l x + B_l <= f(x) <=
A_u x + B_u over an lp ball of radius eps around x0, Holder's inequality
turns each row into a scalar interval:

    upper_i =  eps * ||row_i(A_u)||_q + row_i(A_u) . x0 + B_u[i]
    lower_i = -eps * ||row_i(A_l)||_q + row_i(A_l) . x0 + B_l[i]

with q the dual exponent, 1/p + 1/q = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_DUAL = {1.0: math.inf, 2.0: 2.0, math.inf: 1.0}


@dataclass(frozen=True)
class IntervalBounds:
    """Elementwise lower/upper vectors for one layer's outputs."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lower > upper):
            worst = int(np.argmax(lower - upper))
            raise ValueError(f"lower exceeds upper at index {worst}: "
                             f"{lower[worst]} > {upper[worst]}")

    def __len__(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: np.ndarray, slack: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))


@dataclass(frozen=True)
class RelaxationRow:
    """Linear lower/upper bound of one neuron over its fan-in.

    `indices` are flat indices into the predecessor layer; the coefficient
    vectors have the fan-in cardinality. The bound functions are
    a . x[indices] + b for each side.
    """

    indices: np.ndarray
    a_l: np.ndarray
    b_l: float
    a_u: np.ndarray
    b_u: float

    def __post_init__(self):
        for name in ("indices", "a_l", "a_u"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if not (self.indices.size == self.a_l.size == self.a_u.size):
            raise ValueError("coefficient vectors must match the fan-in cardinality")

    def lower_at(self, x: np.ndarray) -> float:
        return float(self.a_l @ x + self.b_l)

    def upper_at(self, x: np.ndarray) -> float:
        return float(self.a_u @ x + self.b_u)


@dataclass(frozen=True)
class GlobalLinearBounds:
    """Linear bounds of a whole layer with respect to the network input."""

    A_l: np.ndarray
    B_l: np.ndarray
    A_u: np.ndarray
    B_u: np.ndarray

    def lower_at(self, x: np.ndarray) -> np.ndarray:
        return self.A_l @ x + self.B_l

    def upper_at(self, x: np.ndarray) -> np.ndarray:
        return self.A_u @ x + self.B_u


@dataclass(frozen=True)
class PerturbationSpec:
    """An lp ball: center x0, radius eps, norm p in {1, 2, inf}.

    The dual exponent q is derived here and never passed independently, so a
    mismatched (p, q) pair cannot occur.
    """

    center: np.ndarray
    radius: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).ravel())
        if self.p not in _DUAL:
            raise ValueError(f"p must be 1, 2 or inf, got {self.p}")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def q(self) -> float:
        return _DUAL[self.p]

    def input_box(self) -> IntervalBounds:
        """Per-coordinate envelope of the ball (|x_i - x0_i| <= eps for any p)."""
        return IntervalBounds(self.center - self.radius, self.center + self.radius)


def dual_norm(v: np.ndarray, q: float) -> float:
    """lq norm of a vector for q in {1, 2, inf}."""
    v = np.asarray(v)
    if q == 1.0:
        return float(np.abs(v).sum())
    if q == 2.0:
        return float(np.sqrt(np.square(v).sum()))
    if q == math.inf:
        return float(np.abs(v).max()) if v.size else 0.0
    raise ValueError(f"q must be 1, 2 or inf, got {q}")


def _row_norms(A: np.ndarray, q: float) -> np.ndarray:
    if q == 1.0:
        return np.abs(A).sum(axis=1)
    if q == 2.0:
        return np.sqrt(np.square(A).sum(axis=1))
    return np.abs(A).max(axis=1) if A.shape[1] else np.zeros(A.shape[0])


def concretize(g: GlobalLinearBounds, spec: PerturbationSpec) -> IntervalBounds:
    """Scalar interval implied by global linear bounds over the ball."""
    if g.A_l.shape[1] != spec.center.size or g.A_u.shape[1] != spec.center.size:
        raise ValueError(f"bounds expect {g.A_l.shape[1]} inputs, center has {spec.center.size}")
    q = spec.q
    upper = spec.radius * _row_norms(g.A_u, q) + g.A_u @ spec.center + g.B_u
    lower = -spec.radius * _row_norms(g.A_l, q) + g.A_l @ spec.center + g.B_l
    return IntervalBounds(lower, upper)
