"""Binary-search certification driver and batch orchestration.

The search runs a fixed 15-iteration schedule: starting from eps_l = eps0 it
doubles after a certified radius (capped by the bracket midpoint) and halves
after a failure (floored by the bracket midpoint), maintaining the invariant
that eps_min is the largest radius that actually verified and eps_max the
smallest that failed. The reported certified radius is eps_min; the raw
candidate left by the final update (which may never have been tested) is kept
in the result for reference.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import PerturbationSpec
from .engine import RobustnessVerdict, analyze, check_robust, output_bounds
from .model import Network, VerificationQuery
from .pooling import PoolRule

DEFAULT_EPS0 = 0.005
SEARCH_ITERATIONS = 15


@dataclass(frozen=True)
class TraceEntry:
    eps: float
    certified: bool
    margin: float


@dataclass(frozen=True)
class CertificationResult:
    certified_radius: float
    trace: tuple[TraceEntry, ...]
    raw_eps_l: float
    wall_time: float
    rule: PoolRule
    norm: float
    misclassified: bool = False
    error: str | None = None

    @property
    def analyzer_calls(self) -> int:
        return len(self.trace)


@dataclass
class SearchState:
    """Bracket state of the search; eps_min never decreases, eps_max never grows."""

    eps_l: float
    eps_min: float = 0.0
    eps_max: float = 1.0
    iterations: int = 0

    def record(self, certified: bool) -> None:
        if certified:
            self.eps_min = self.eps_l
            self.eps_l = min(2.0 * self.eps_l, 0.5 * (self.eps_max + self.eps_min))
        else:
            self.eps_max = self.eps_l
            self.eps_l = max(0.5 * self.eps_l, 0.5 * (self.eps_max + self.eps_min))
        self.iterations += 1


def verify_at(net: Network, query: VerificationQuery, rule: PoolRule = PoolRule.MAXLIN,
              unsafe_slack: float = 0.0) -> RobustnessVerdict:
    """Single fixed-radius verification; query.eps must be set."""
    if query.eps is None:
        raise ValueError("verify_at needs a query with a fixed eps")
    spec = PerturbationSpec(query.x0, query.eps, query.norm)
    analyses = analyze(net, spec, rule, unsafe_slack=unsafe_slack)
    return check_robust(output_bounds(analyses), query.label)


def binary_search(net: Network, query: VerificationQuery, rule: PoolRule = PoolRule.MAXLIN,
                  eps0: float = DEFAULT_EPS0, iterations: int = SEARCH_ITERATIONS,
                  unsafe_slack: float = 0.0,
                  _oracle=None) -> CertificationResult:
    """Maximal certified radius for one query via the fixed-iteration search.

    _oracle replaces the analyzer verdict with a callable eps -> bool in
    tests; production callers leave it unset.
    """
    start = time.perf_counter()

    def check(eps: float) -> tuple[bool, float]:
        if _oracle is not None:
            return bool(_oracle(eps)), float("nan")
        spec = PerturbationSpec(query.x0, eps, query.norm)
        verdict = check_robust(
            output_bounds(analyze(net, spec, rule, unsafe_slack=unsafe_slack)),
            query.label)
        return verdict.certified, verdict.margin

    # a center the network misclassifies certifies nothing at any radius;
    # checked with the exact forward pass, not the analyzer
    if _oracle is None:
        from .oracle import forward_eval
        if int(forward_eval(net, query.x0)[0].argmax()) != query.label:
            return CertificationResult(0.0, (), 0.0, time.perf_counter() - start,
                                       rule, query.norm, misclassified=True)

    state = SearchState(eps_l=eps0)
    trace = []
    for _ in range(iterations):
        certified, margin = check(state.eps_l)
        trace.append(TraceEntry(state.eps_l, certified, margin))
        state.record(certified)

    return CertificationResult(state.eps_min, tuple(trace), state.eps_l,
                               time.perf_counter() - start, rule, query.norm)


@dataclass(frozen=True)
class BatchAggregates:
    mean_certified_radius: float
    mean_wall_time: float
    queries_counted: int
    queries_misclassified: int


def batch_certify(net: Network, queries: list[VerificationQuery],
                  rule: PoolRule = PoolRule.MAXLIN, workers: int = 1,
                  eps0: float = DEFAULT_EPS0,
                  unsafe_slack: float = 0.0) -> tuple[list[CertificationResult], BatchAggregates | None]:
    """Certify every query, concurrently across queries.

    Aggregates average over correctly-classified centers only; misclassified
    queries are flagged and excluded. Per-query failures are recorded and the
    batch continues. Results are ordered like the input regardless of worker
    count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def run(query: VerificationQuery) -> CertificationResult:
        try:
            return binary_search(net, query, rule, eps0=eps0, unsafe_slack=unsafe_slack)
        except Exception as exc:  # keep the batch alive, record the failure
            return CertificationResult(0.0, (), 0.0, 0.0, rule, query.norm,
                                       error=f"{type(exc).__name__}: {exc}")

    if workers == 1 or len(queries) <= 1:
        results = [run(q) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, queries))

    counted = [r for r in results if not r.misclassified and r.error is None]
    if not results:
        return results, None
    aggregates = BatchAggregates(
        mean_certified_radius=float(np.mean([r.certified_radius for r in counted])) if counted else 0.0,
        mean_wall_time=float(np.mean([r.wall_time for r in counted])) if counted else 0.0,
        queries_counted=len(counted),
        queries_misclassified=sum(r.misclassified for r in results),
    )
    return results, aggregates
