"""MaxPool relaxation rules mapping window interval bounds to linear bounds.

Three interchangeable rules:

  maxlin    Upper bound built from the two largest input upper bounds: if the
            best input dominates (its lower bound is the window maximum of
            lower bounds and at least the runner-up's upper bound) the bound
            is exact pass-through u(x) = x_i; otherwise
            u(x) = (u_i - u_j)/(u_i - l_i) * (x_i - l_i) + u_j.
            Lower bound selects the input with the largest interval midpoint.
  deeppoly  Pass-through on dominance, else constant max upper / selection of
            the largest lower bound. A frozen comparison baseline, not a
            reproduction of any external tool.
  interval  Plain interval arithmetic of max: constant bounds both sides.

All rules emit coefficient vectors over the window's local indices 0..n-1
with nonnegative entries, which downstream composition relies on.
"""
from __future__ import annotations

import enum

import numpy as np

from .bounds import RelaxationRow


class PoolRule(str, enum.Enum):
    MAXLIN = "maxlin"
    DEEPPOLY_STYLE = "deeppoly"
    INTERVAL_CONSTANT = "interval"


def _check_window(l: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l = np.asarray(l, dtype=np.float64).ravel()
    u = np.asarray(u, dtype=np.float64).ravel()
    if l.size == 0:
        raise ValueError("empty pool window")
    if l.shape != u.shape:
        raise ValueError("window bounds must have equal length")
    if np.any(l > u):
        k = int(np.argmax(l - u))
        raise ValueError(f"window bound {k} inverted: [{l[k]}, {u[k]}]")
    return l, u


def _identity_row(n: int) -> RelaxationRow:
    a = np.zeros(n)
    a[0] = 1.0
    return RelaxationRow(np.arange(n), a.copy(), 0.0, a.copy(), 0.0)


def _top_two(u: np.ndarray) -> tuple[int, int]:
    """Indices of the largest and second-largest upper bounds, ties to the
    smallest index; duplicates count as separate order statistics."""
    i = int(np.argmax(u))
    rest = np.delete(np.arange(u.size), i)
    j = int(rest[np.argmax(u[rest])])
    return i, j


def maxlin_relax(l: np.ndarray, u: np.ndarray) -> RelaxationRow:
    l, u = _check_window(l, u)
    n = l.size
    if n == 1:
        return _identity_row(1)

    i, j = _top_two(u)
    l_max = float(l.max())
    a_u = np.zeros(n)
    if l[i] == l_max and l[i] >= u[j]:
        # dominance: the maximum is exactly x_i
        a_u[i] = 1.0
        b_u = 0.0
    else:
        # slope guard: u_i == l_i can only coexist with dominance, so this
        # branch is defensive against float ties
        denom = u[i] - l[i]
        slope = (u[i] - u[j]) / denom if denom > 0 else 0.0
        a_u[i] = slope
        b_u = float(u[j] - slope * l[i])

    m = 0.5 * (l + u)
    j_star = int(np.argmax(m))
    a_l = np.zeros(n)
    a_l[j_star] = 1.0
    return RelaxationRow(np.arange(n), a_l, 0.0, a_u, b_u)


def _dominant_index(l: np.ndarray, u: np.ndarray) -> int | None:
    for i in range(l.size):
        others = np.delete(u, i)
        if others.size == 0 or l[i] >= others.max():
            return i
    return None


def deeppoly_style_relax(l: np.ndarray, u: np.ndarray) -> RelaxationRow:
    l, u = _check_window(l, u)
    n = l.size
    dom = _dominant_index(l, u)
    if dom is not None:
        a = np.zeros(n)
        a[dom] = 1.0
        return RelaxationRow(np.arange(n), a.copy(), 0.0, a.copy(), 0.0)
    a_l = np.zeros(n)
    a_l[int(np.argmax(l))] = 1.0
    return RelaxationRow(np.arange(n), a_l, 0.0, np.zeros(n), float(u.max()))


def interval_constant_relax(l: np.ndarray, u: np.ndarray) -> RelaxationRow:
    l, u = _check_window(l, u)
    n = l.size
    return RelaxationRow(np.arange(n), np.zeros(n), float(l.max()),
                         np.zeros(n), float(u.max()))


_RULES = {
    PoolRule.MAXLIN: maxlin_relax,
    PoolRule.DEEPPOLY_STYLE: deeppoly_style_relax,
    PoolRule.INTERVAL_CONSTANT: interval_constant_relax,
}


def relax_window(rule: PoolRule, l: np.ndarray, u: np.ndarray) -> RelaxationRow:
    return _RULES[PoolRule(rule)](l, u)


MAX_VERTEX_DIM = 12


def relax_soundness_check(rule: PoolRule, l: np.ndarray, u: np.ndarray) -> float:
    """Min over all box vertices of upper(v) - max(v).

    upper - max is concave (linear minus convex), so its box minimum sits at a
    vertex; a nonnegative result (up to roundoff) certifies the upper bound.
    The lower bound needs no search: every rule emits either a single input
    coordinate or the constant max of lower bounds, both <= max(x) pointwise.
    """
    l, u = _check_window(l, u)
    n = l.size
    if n > MAX_VERTEX_DIM:
        raise ValueError(f"vertex enumeration capped at {MAX_VERTEX_DIM} inputs, got {n}")
    row = relax_window(rule, l, u)
    masks = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    vertices = np.where(masks == 1, u, l)
    slack = vertices @ row.a_u + row.b_u - vertices.max(axis=1)
    return float(slack.min())
