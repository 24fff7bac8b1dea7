"""Layer-by-layer analysis: relaxation, backsubstitution and concretization.

For each layer k the analysis builds that layer's linear form with respect to
its immediate input (exact for affine-like layers, relaxation rows for
activations and pools), composes it backward through every preceding layer's
stored form down to the network input, and concretizes the resulting global
bounds over the perturbation ball. The concretized intervals of layer k-1
parametrize the relaxations of layer k.

Backsubstitution is the standard sign-split composition: pushing an upper
expression through a preceding layer, a positive coefficient multiplies that
layer's upper row and a negative one its lower row (offsets accumulate the
same way); lower expressions are symmetric. Zero coefficients contribute
nothing either way.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import activations, pooling
from .bounds import GlobalLinearBounds, IntervalBounds, PerturbationSpec, concretize
from .model import Network, materialize_affine, pool_index_sets
from .pooling import PoolRule


class PropagationError(RuntimeError):
    """Raised when the analysis produces non-finite bounds."""


@dataclass(frozen=True)
class _LayerForm:
    """One layer's linear bounds with respect to its immediate input."""

    A_u: np.ndarray
    B_u: np.ndarray
    A_l: np.ndarray
    B_l: np.ndarray


@dataclass(frozen=True)
class LayerAnalysis:
    """Per-layer analysis artifacts: local form, global bounds, intervals."""

    index: int
    kind: str
    form: _LayerForm
    global_bounds: GlobalLinearBounds
    intervals: IntervalBounds


@dataclass(frozen=True)
class RobustnessVerdict:
    certified: bool
    outputs: IntervalBounds
    margin: float

    @property
    def verdict(self) -> str:
        return "Certified" if self.certified else "Unknown"


def _affine_form(layer) -> _LayerForm:
    W, b = materialize_affine(layer)
    return _LayerForm(W, b, W, b)


def _activation_form(layer, pred: IntervalBounds) -> _LayerForm:
    a_l, b_l, a_u, b_u = activations.relax_layer(layer.kind, pred.lower, pred.upper,
                                                 layer.slope)
    return _LayerForm(np.diag(a_u), b_u, np.diag(a_l), b_l)


def _maxpool_form(layer, pred: IntervalBounds, rule: PoolRule) -> _LayerForm:
    windows = pool_index_sets(layer)
    n_out, n_in = len(windows), len(pred)
    A_u = np.zeros((n_out, n_in))
    B_u = np.zeros(n_out)
    A_l = np.zeros((n_out, n_in))
    B_l = np.zeros(n_out)
    for w, idx in enumerate(windows):
        row = pooling.relax_window(rule, pred.lower[idx], pred.upper[idx])
        A_u[w, idx] = row.a_u
        B_u[w] = row.b_u
        A_l[w, idx] = row.a_l
        B_l[w] = row.b_l
    return _LayerForm(A_u, B_u, A_l, B_l)


def _compose(A_u, B_u, A_l, B_l, form: _LayerForm):
    """Substitute one preceding layer's bounds into the running expressions."""
    up = np.clip(A_u, 0.0, None)
    un = A_u - up
    lp = np.clip(A_l, 0.0, None)
    ln = A_l - lp
    return (up @ form.A_u + un @ form.A_l,
            B_u + up @ form.B_u + un @ form.B_l,
            lp @ form.A_l + ln @ form.A_u,
            B_l + lp @ form.B_l + ln @ form.B_u)


def _to_input(forms: list[_LayerForm], target: _LayerForm) -> GlobalLinearBounds:
    A_u, B_u = target.A_u, target.B_u
    A_l, B_l = target.A_l, target.B_l
    for form in reversed(forms):
        A_u, B_u, A_l, B_l = _compose(A_u, B_u, A_l, B_l, form)
    return GlobalLinearBounds(A_l, B_l, A_u, B_u)


def backsubstitute(net: Network, analyses: list[LayerAnalysis], k: int,
                   rule: PoolRule = PoolRule.MAXLIN) -> GlobalLinearBounds:
    """Global bounds of layer k given complete analyses for layers below it."""
    if len(analyses) < k:
        raise ValueError(f"need analyses for layers 0..{k - 1}, have {len(analyses)}")
    layer = net.layers[k]
    if layer.is_linear:
        target = _affine_form(layer)
    else:
        if k == 0:
            raise ValueError("nonlinear first layers need input bounds; use analyze()")
        pred = analyses[k - 1].intervals
        if layer.kind == "maxpool":
            target = _maxpool_form(layer, pred, rule)
        else:
            target = _activation_form(layer, pred)
    return _to_input([a.form for a in analyses[:k]], target)


def analyze(net: Network, spec: PerturbationSpec, rule: PoolRule = PoolRule.MAXLIN,
            unsafe_slack: float = 0.0) -> list[LayerAnalysis]:
    """Run the full analysis; the last entry holds the output intervals.

    unsafe_slack is a test-only fault injection that shifts the final lower
    bounds up, deliberately breaking soundness so downstream falsification
    checks have something to catch.
    """
    if spec.center.size != net.input_size:
        raise ValueError(f"network expects {net.input_size} inputs, "
                         f"center has {spec.center.size}")
    analyses: list[LayerAnalysis] = []
    forms: list[_LayerForm] = []
    pred = spec.input_box()
    for k, layer in enumerate(net.layers):
        if layer.is_linear:
            form = _affine_form(layer)
        elif layer.kind == "maxpool":
            form = _maxpool_form(layer, pred, rule)
        else:
            form = _activation_form(layer, pred)
        bounds = _to_input(forms, form)
        intervals = concretize(bounds, spec)
        if not (np.all(np.isfinite(intervals.lower)) and np.all(np.isfinite(intervals.upper))):
            raise PropagationError(f"non-finite bounds at layer {k} ({layer.kind})")
        if unsafe_slack and k == net.depth - 1:
            # fault injection: raise only the lower bounds so margins inflate;
            # uppers move just enough to keep the interval container valid
            shifted = intervals.lower + unsafe_slack
            intervals = IntervalBounds(shifted, np.maximum(intervals.upper, shifted))
        analyses.append(LayerAnalysis(k, layer.kind, form, bounds, intervals))
        forms.append(form)
        pred = intervals
    return analyses


def output_bounds(analyses: list[LayerAnalysis]) -> IntervalBounds:
    return analyses[-1].intervals


def check_robust(outputs: IntervalBounds, label: int) -> RobustnessVerdict:
    """Certified iff the label's lower bound beats every other upper bound."""
    if label >= len(outputs):
        raise ValueError(f"label {label} out of range for {len(outputs)} outputs")
    others = np.delete(outputs.upper, label)
    margin = float(outputs.lower[label] - others.max()) if others.size else float("inf")
    return RobustnessVerdict(margin >= 0.0, outputs, margin)
