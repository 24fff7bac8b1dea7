"""Neuron-wise linear relaxations for ReLU, adaptive-ReLU and S-shaped activations.

Every function maps a scalar pre-activation interval [l, u] to a sound pair of
linear bounds. The scalar entry points return a RelaxationRow over a single
local fan-in index; the engine substitutes real indices. Vectorized variants
returning coefficient arrays are provided for layer-sized batches.

S-shaped bounds (sigmoid, tanh, arctan) follow the common curvature structure
(convex on the negative axis, concave on the positive axis): tangent on the
curved side, chord on the other, and for sign-spanning intervals a line with
the chord's slope shifted until it touches the curve. The tangency point is
located by bisection on f'(x) = slope.
"""
from __future__ import annotations

import numpy as np

from .bounds import RelaxationRow

BISECT_TOL = 1e-9
BISECT_MAX_ITER = 200


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))  # stable for large |x|


def _sigmoid_d(x):
    s = _sigmoid(x)
    return s * (1.0 - s)


def _tanh_d(x):
    return 1.0 - np.tanh(x) ** 2


def _arctan_d(x):
    return 1.0 / (1.0 + np.square(x))


SSHAPED = {
    "sigmoid": (_sigmoid, _sigmoid_d),
    "tanh": (np.tanh, _tanh_d),
    "arctan": (np.arctan, _arctan_d),
}


def activation_fn(kind: str):
    """Exact forward function of an activation layer.

    adaptive_relu computes ReLU; its slope only parametrizes the relaxation.
    """
    if kind in ("relu", "adaptive_relu"):
        return lambda x: np.maximum(x, 0.0)
    if kind in SSHAPED:
        return SSHAPED[kind][0]
    raise ValueError(f"unknown activation kind {kind!r}")


def _single_row(a_l, b_l, a_u, b_u) -> RelaxationRow:
    return RelaxationRow(np.array([0]), np.array([a_l]), float(b_l),
                         np.array([a_u]), float(b_u))


def relu_relax(l: float, u: float) -> RelaxationRow:
    """Chord upper bound; lower slope 1 iff u > |l| (tie goes to 0), else 0."""
    if l > u:
        raise ValueError(f"invalid interval [{l}, {u}]")
    if u <= 0:
        return _single_row(0.0, 0.0, 0.0, 0.0)
    if l >= 0:
        return _single_row(1.0, 0.0, 1.0, 0.0)
    slope = u / (u - l)
    lam = 1.0 if u > -l else 0.0
    return _single_row(lam, 0.0, slope, -u * l / (u - l))


def adaptive_relu_relax(l: float, u: float, a: float) -> RelaxationRow:
    """ReLU chord upper bound with a caller-chosen lower slope a in [0, 1]."""
    if a is None or not 0.0 <= a <= 1.0:
        raise ValueError(f"adaptive slope must lie in [0, 1], got {a}")
    if l > u:
        raise ValueError(f"invalid interval [{l}, {u}]")
    if u <= 0 or l >= 0:
        return relu_relax(l, u)
    slope = u / (u - l)
    return _single_row(a, 0.0, slope, -u * l / (u - l))


def _tangent_point(df, target: float, lo: float, hi: float, decreasing: bool) -> float | None:
    """Bisect f'(x) = target on [lo, hi]; None when no sign change exists."""
    if hi <= lo:
        return None
    flo, fhi = df(lo) - target, df(hi) - target
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        return None
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        v = df(mid) - target
        if abs(v) <= BISECT_TOL or (hi - lo) <= BISECT_TOL:
            return mid
        going_down = (v > 0) if decreasing else (v < 0)
        if going_down:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sshape_relax(kind: str, l: float, u: float) -> RelaxationRow:
    """Sound linear bounds for sigmoid / tanh / arctan on [l, u]."""
    if kind not in SSHAPED:
        raise ValueError(f"{kind!r} is not an S-shaped activation")
    if l > u:
        raise ValueError(f"invalid interval [{l}, {u}]")
    f, df = SSHAPED[kind]

    if l == u:
        c = float(f(l))
        return _single_row(0.0, c, 0.0, c)

    fl, fu = float(f(l)), float(f(u))
    chord = (fu - fl) / (u - l)

    if l >= 0:  # concave region: tangent above, chord below
        m = 0.5 * (l + u)
        tm = float(df(m))
        return _single_row(chord, fl - chord * l, tm, float(f(m)) - tm * m)
    if u <= 0:  # convex region: chord above, tangent below
        m = 0.5 * (l + u)
        tm = float(df(m))
        return _single_row(tm, float(f(m)) - tm * m, chord, fl - chord * l)

    # sign-spanning: both bounds share the chord slope; shift each line to the
    # extreme value of f(x) - chord * x over [l, u], which lies at an endpoint
    # or at a tangency point (one per curvature side at most).
    upper_cands = [l, u]
    t = _tangent_point(df, chord, 0.0, u, decreasing=True)
    if t is not None:
        upper_cands.append(t)
    b_u = max(float(f(x)) - chord * x for x in upper_cands)

    lower_cands = [l, u]
    t = _tangent_point(df, chord, l, 0.0, decreasing=False)
    if t is not None:
        lower_cands.append(t)
    b_l = min(float(f(x)) - chord * x for x in lower_cands)

    return _single_row(chord, b_l, chord, b_u)


def relax_layer(kind: str, lower: np.ndarray, upper: np.ndarray,
                slope: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-neuron coefficients (a_l, b_l, a_u, b_u) for a whole activation layer."""
    n = lower.size
    a_l = np.zeros(n)
    b_l = np.zeros(n)
    a_u = np.zeros(n)
    b_u = np.zeros(n)
    if kind == "relu":
        rows = (relu_relax(lo, up) for lo, up in zip(lower, upper))
    elif kind == "adaptive_relu":
        rows = (adaptive_relu_relax(lo, up, slope) for lo, up in zip(lower, upper))
    elif kind in SSHAPED:
        rows = (sshape_relax(kind, lo, up) for lo, up in zip(lower, upper))
    else:
        raise ValueError(f"unknown activation kind {kind!r}")
    for i, row in enumerate(rows):
        a_l[i] = row.a_l[0]
        b_l[i] = row.b_l
        a_u[i] = row.a_u[0]
        b_u[i] = row.b_u
    return a_l, b_l, a_u, b_u
