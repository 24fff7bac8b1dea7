"""Independent validation machinery.

Three families of checks, all independent of the bound-propagation path:

  * falsify        samples the perturbation ball and evaluates the network
                   exactly, hunting for label flips inside a claimed radius;
  * brute force    grid + vertex evaluation of tiny networks, giving an inner
                   approximation the analyzer's intervals must contain;
  * block volume   the Activation+MaxPool over-approximation volume. For
                   linear bounds the integral of (upper - lower) over a box
                   equals box volume times the gap at the box midpoint, so the
                   volume is computed analytically rather than by sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import activations, pooling
from .bounds import IntervalBounds, PerturbationSpec
from .model import Network, VerificationQuery, materialize_affine, pool_index_sets
from .pooling import PoolRule

VOLUME_ACTIVATIONS = ("relu", "adaptive_relu", "sigmoid")
DEFAULT_VOLUME_TRIALS = 50
VOLUME_SAMPLE_RANGE = 10.0


def forward_eval(net: Network, x: np.ndarray) -> np.ndarray:
    """Exact batch forward pass; x has shape (batch, n_inputs)."""
    z = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for layer in net.layers:
        if layer.is_linear:
            W, b = materialize_affine(layer)
            z = z @ W.T + b
        elif layer.kind == "maxpool":
            windows = pool_index_sets(layer)
            z = np.stack([z[:, idx].max(axis=1) for idx in windows], axis=1)
        else:
            z = activations.activation_fn(layer.kind)(z)
    return z


@dataclass(frozen=True)
class FalsificationReport:
    label: int
    radius: float
    samples_drawn: int
    violations: int
    witnesses: np.ndarray  # (k, n) worst offending points, possibly empty

    @property
    def sound(self) -> bool:
        return self.violations == 0


def sample_ball(rng: np.random.Generator, x0: np.ndarray, radius: float, p: float,
                count: int) -> np.ndarray:
    """Points inside the lp ball around x0.

    l-inf draws per-coordinate uniforms and clamps to the [0, 1] pixel domain
    (clamping never leaves the ball for centers inside the domain); l1 and l2
    draw a uniform direction on the sphere and a radius r = eps * U^(1/n).
    """
    n = x0.size
    if count == 0:
        return np.empty((0, n))
    if p == math.inf:
        pts = rng.uniform(x0 - radius, x0 + radius, size=(count, n))
        return np.clip(pts, 0.0, 1.0)
    if p == 2.0:
        g = rng.normal(size=(count, n))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    elif p == 1.0:
        g = rng.laplace(size=(count, n))
        norms = np.abs(g).sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unsupported norm {p}")
    norms[norms == 0] = 1.0
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return x0 + g / norms * r


def falsify(net: Network, query: VerificationQuery, radius: float,
            samples: int = 10_000, seed: int = 0) -> FalsificationReport:
    """Sample the ball and look for points the network classifies away from
    the query label. Zero violations is necessary (not sufficient) for the
    radius to be a sound certificate."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    rng = np.random.default_rng(seed)
    pts = [query.x0[None, :]]
    if radius > 0:
        pts.append(sample_ball(rng, query.x0, radius, query.norm, samples))
        if query.norm == math.inf:
            # axis-extreme probes, clamped to the pixel domain like the samples
            eye = np.eye(query.x0.size)
            extremes = np.concatenate([query.x0 + radius * eye, query.x0 - radius * eye])
            pts.append(np.clip(extremes, 0.0, 1.0))
    batch = np.concatenate(pts, axis=0)
    logits = forward_eval(net, batch)
    predicted = logits.argmax(axis=1)
    bad = predicted != query.label
    witnesses = batch[bad][:16]
    return FalsificationReport(query.label, radius, batch.shape[0],
                               int(bad.sum()), witnesses)


BRUTE_FORCE_MAX_DIM = 3


def brute_force_output_interval(net: Network, spec: PerturbationSpec,
                                grid: int = 33) -> IntervalBounds:
    """Observed min/max logits over a dense grid (plus vertices) of the input
    box. An inner approximation of the reachable set: analyzer intervals must
    contain it. Restricted to l-inf and very low input dimension."""
    n = spec.center.size
    if n > BRUTE_FORCE_MAX_DIM:
        raise ValueError(f"brute force capped at {BRUTE_FORCE_MAX_DIM} inputs, got {n}")
    if spec.p != math.inf:
        raise ValueError("brute force oracle covers the l-inf box only")
    axes = [np.linspace(spec.center[i] - spec.radius, spec.center[i] + spec.radius,
                        max(2, grid)) for i in range(n)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    logits = forward_eval(net, mesh)
    return IntervalBounds(logits.min(axis=0), logits.max(axis=0))


# ---------------------------------------------------------------------------
# Activation+MaxPool block volume
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockVolumeReport:
    activation: str
    rule: PoolRule
    trials: int
    mean_volume: float
    seed: int
    volumes: tuple[float, ...] = ()


def block_volume_from_box(activation: str, rule: PoolRule, l: np.ndarray, u: np.ndarray,
                          lower_slopes: np.ndarray | None = None) -> float:
    """Over-approximation volume of an Activation+MaxPool block on a given box.

    Relaxes the activation over each pre-activation interval, concretizes the
    pool inputs, applies the pool rule, composes the block bounds back to the
    pre-activation coordinates by coefficient sign, and returns
    prod(u - l) * (U_b(m) - L_b(m)) with m the pre-activation midpoints. For
    linear bounds that product is exactly the integral of (upper - lower).
    """
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if activation == "adaptive_relu":
        cols = [activations.adaptive_relu_relax(lo, up, a)
                for lo, up, a in zip(l, u, lower_slopes)]
        a_l = np.array([c.a_l[0] for c in cols])
        b_l = np.array([c.b_l for c in cols])
        a_u = np.array([c.a_u[0] for c in cols])
        b_u = np.array([c.b_u for c in cols])
    else:
        a_l, b_l, a_u, b_u = activations.relax_layer(activation, l, u)

    # pool-input bounds: activation rows concretized over the box (slopes >= 0)
    pool_l = a_l * l + b_l
    pool_u = a_u * u + b_u
    row = pooling.relax_window(rule, pool_l, pool_u)

    m = 0.5 * (l + u)
    # pool coefficients are nonnegative for every rule, so the upper block
    # bound composes with upper activation rows and the lower with lower rows
    upper_at_m = float(row.a_u @ (a_u * m + b_u) + row.b_u)
    lower_at_m = float(row.a_l @ (a_l * m + b_l) + row.b_l)
    return float(np.prod(u - l) * (upper_at_m - lower_at_m))


def block_volume_trial(activation: str, rule: PoolRule, window: int, seed: int) -> float:
    """One volume trial: endpoints uniform on [-10, 10] sorted into l <= u,
    adaptive lower slopes uniform on [0, 1], then block_volume_from_box."""
    if activation not in VOLUME_ACTIVATIONS:
        raise ValueError(f"activation must be one of {VOLUME_ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-VOLUME_SAMPLE_RANGE, VOLUME_SAMPLE_RANGE, size=(window, 2))
    l = pts.min(axis=1)
    u = pts.max(axis=1)
    slopes = rng.uniform(0.0, 1.0, size=window) if activation == "adaptive_relu" else None
    return block_volume_from_box(activation, rule, l, u, slopes)


def volume_benchmark(trials: int = DEFAULT_VOLUME_TRIALS, seed: int = 0,
                     window: int = 4,
                     activation_kinds=VOLUME_ACTIVATIONS,
                     rules=tuple(PoolRule),
                     keep_volumes: bool = False) -> list[BlockVolumeReport]:
    """Mean block volume for every activation x rule combination.

    Trial t of every configuration shares the derived seed (seed + t), so
    rules are compared on identical sampled boxes.
    """
    if trials <= 0:
        return []
    reports = []
    for activation in activation_kinds:
        for rule in rules:
            vols = [block_volume_trial(activation, rule, window, seed + t)
                    for t in range(trials)]
            mean = float(np.mean(vols)) if vols else float("nan")
            reports.append(BlockVolumeReport(activation, PoolRule(rule), trials, mean, seed,
                                             tuple(vols) if keep_volumes else ()))
    return reports
