"""Empirical probes of the conditions behind the recovery guarantees.

None of these feed into estimation; they report how comfortably a given model,
dynamics or sample satisfies the hypotheses used to justify it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BlockSchedule, block_sequence, glauber_kernel
from .generators import covariance_opnorm_estimate
from .ising import (
    GuardError,
    IsingModel,
    configurations,
    exact_distribution,
    likelihood_ratio_excess,
    width,
)
from .regression import prediction_gap_exact

CONDITION2_MAX_SITES = 12
GOOD_EVENT_DELTA = 0.25
GOOD_EVENT_C = 8.0


# -- condition-2 probe -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Condition2Table:
    """Prediction gaps on a grid next to the per-coordinate lower-bound form.

    ``coordinate_terms[g, i] = min{1, 8 (w_i - w*_i)^2}`` at grid point ``g``;
    ``constant`` is the largest ``c`` with ``gap >= c * term`` for every grid
    point and coordinate (``inf`` if every term is zero).
    """

    gaps: np.ndarray
    coordinate_terms: np.ndarray
    constant: float


def _context_law_for(model, node, conditional):
    n = model.n
    if conditional == "stationary":
        dist = exact_distribution(model)
        X = dist.configurations()
        return np.delete(X, node, axis=1), dist.probabilities
    if conditional in ("uniform", "m_regime"):
        ctx = configurations(n - 1)
        return ctx, np.full(ctx.shape[0], 1.0 / ctx.shape[0])
    ctx, p = conditional
    ctx = np.asarray(ctx)
    p = np.asarray(p, dtype=float)
    if ctx.ndim != 2 or ctx.shape != (p.shape[0], n - 1):
        raise ValueError("context law needs one (n-1)-vector per probability")
    return ctx, p / p.sum()


def metatheorem_condition2_probe(model: IsingModel, node: int, grid, conditional="stationary") -> Condition2Table:
    """Exact prediction gaps for each ``(w, h)`` in ``grid``.

    Parameters
    ----------
    grid : iterable of (w, h)
        ``w`` has length ``n - 1`` (the coefficients on ``X_{-node}``).
    conditional : {"stationary", "uniform"} or (contexts, probabilities)
        Law of the context.  ``"uniform"`` (alias ``"m_regime"``) is the context
        law of M-regime samples.
    """
    if model.n > CONDITION2_MAX_SITES:
        raise GuardError(f"condition-2 probe limited to n <= {CONDITION2_MAX_SITES}, got {model.n}")
    law = _context_law_for(model, node, conditional)
    w_star = np.delete(model.couplings[node], node)
    gaps, terms = [], []
    for w, h in grid:
        w = np.asarray(w, dtype=float)
        if w.shape != w_star.shape:
            raise ValueError(f"grid weights must have length {w_star.shape[0]}")
        gaps.append(prediction_gap_exact(model, node, w, h, context_law=law))
        terms.append(np.minimum(1.0, 8.0 * (w - w_star) ** 2))
    gaps = np.array(gaps)
    terms = np.array(terms).reshape(len(gaps), -1)
    worst = terms.max(axis=1) if terms.size else np.zeros(len(gaps))
    active = worst > 0
    c = float(np.min(gaps[active] / worst[active])) if active.any() else math.inf
    return Condition2Table(gaps, terms, c)


# -- TAP residual ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TapResidual:
    residual: np.ndarray
    max_abs: float
    reference: float
    delta: float


def tap_reference_level(n: int, beta: float, delta: float = 0.1) -> float:
    """``beta sqrt(2 log(4n/delta)) + beta^2`` (finite-n correction term omitted)."""
    return beta * math.sqrt(2.0 * math.log(4.0 * n / delta)) + beta**2


def tap_residual(model: IsingModel, mean, beta: float, q: float, delta: float = 0.1) -> TapResidual:
    """``t_i = sum_j J_ij m_j - beta^2 (1 - q) m_i`` with ``J`` the model couplings.

    For an SK model ``J = beta A``; ``q`` should come from
    :func:`glauberlearn.generators.rs_fixed_point` and ``mean`` from an exact
    table or a long Glauber run.
    """
    m = np.asarray(mean, dtype=float)
    if m.shape != (model.n,):
        raise ValueError(f"mean must have length {model.n}, got {m.shape}")
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    t = model.couplings @ m - beta**2 * (1.0 - q) * m
    return TapResidual(t, float(np.max(np.abs(t))), tap_reference_level(model.n, beta, delta), delta)


# -- SK conditioning -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SKConditionReport:
    max_row_l2: float
    opnorm: float
    C: float
    fractions: np.ndarray
    degenerate: bool

    @property
    def min_fraction(self) -> float:
        return float(self.fractions.min())


def sk_condition_check(model: IsingModel, samples, C: float | None = None, rng=0) -> SKConditionReport:
    """Empirical check that ``|<A_j, X> + h_j| <= C`` holds for most samples.

    ``C`` defaults to ``4 sqrt(opnorm) * max_j ||A_j||_2``, with ``opnorm`` the
    estimated top eigenvalue of the centered sample covariance.  ``degenerate``
    flags a zero covariance estimate (for instance, all samples identical).
    """
    X = np.asarray(samples)
    if X.ndim != 2 or X.shape[1] != model.n:
        raise ValueError(f"samples must be an array of shape (T, {model.n})")
    if X.shape[0] < 100:
        raise ValueError(f"need at least 100 samples, got {X.shape[0]}")
    row_l2 = float(np.max(np.linalg.norm(model.couplings, axis=1)))
    opnorm = covariance_opnorm_estimate(X, centered=True, rng=rng)
    if C is None:
        C = 4.0 * math.sqrt(opnorm) * row_l2
    fields = X.astype(float) @ model.couplings + model.fields
    fractions = np.mean(np.abs(fields) <= C, axis=0)
    return SKConditionReport(row_l2, opnorm, float(C), fractions, opnorm <= 1e-12)


# -- good blocks -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GoodEventEstimate:
    """Per-site estimate of the good-event probability for one node.

    Entry ``j`` of ``probability`` (``nan`` at ``node``) is the fraction of
    inter-update intervals in which site ``j`` joined a block and
    ``sum_{k != node, j} |A_jk| N_k <= C * width``.
    """

    node: int
    probability: np.ndarray
    stderr: np.ndarray
    intervals: int
    delta: float = GOOD_EVENT_DELTA
    C: float = GOOD_EVENT_C

    @property
    def passed(self) -> bool:
        keep = ~np.isnan(self.probability)
        return bool(np.all(self.probability[keep] >= self.delta - 3.0 * self.stderr[keep]))


def _interval_counts(blocks, node):
    times = np.flatnonzero(blocks[:, node])
    # C[t] = number of blocks containing k among steps 0..t-1
    C = np.zeros((blocks.shape[0] + 1, blocks.shape[1]), dtype=np.int64)
    np.cumsum(blocks, axis=0, out=C[1:])
    return C[times[1:] + 1] - C[times[:-1] + 1]


def good_event_probe(model: IsingModel, schedule: BlockSchedule, node: int = -1, intervals: int = 10_000,
                     rng=None, C: float = GOOD_EVENT_C, delta: float = GOOD_EVENT_DELTA) -> GoodEventEstimate:
    """Monte-Carlo estimate of the good-block event between consecutive updates of ``node``.

    Only block selections are simulated.  An interval runs over the steps after
    one update of ``node`` up to and including its next update; ``N_k`` counts
    the blocks in the interval containing ``k``.
    """
    n = model.n
    node = node % n
    if schedule.kind in ("full_resample", "m_regime", "adversarial"):
        raise ValueError(f"no block process to probe for {schedule.kind!r}")
    lam = width(model)
    absA = np.abs(model.couplings)
    # first guess at the horizon from the per-step inclusion rate, doubled until enough intervals
    T = 4 * n * (intervals + 1)
    while True:
        blocks = block_sequence(schedule, n, T, rng)
        N = _interval_counts(blocks, node)
        if N.shape[0] >= intervals:
            break
        T *= 2
    N = N[:intervals]
    load = N @ absA.T - np.outer(N[:, node], absA[:, node])
    event = (N >= 1) & (load <= C * lam)
    p = event.mean(axis=0).astype(float)
    se = np.sqrt(p * (1 - p) / intervals)
    p[node] = se[node] = np.nan
    return GoodEventEstimate(node, p, se, intervals, delta, C)


# -- exact oracles, wrapped for reporting ----------------------------------------------------

def likelihood_ratio_probe(model: IsingModel) -> float:
    """Largest observed ``ratio / bound`` over all conditioning patterns (``<= 1`` when the bound holds)."""
    excess, _ = likelihood_ratio_excess(model)
    return math.exp(excess)


def stationarity_residuals(model: IsingModel) -> tuple[float, float]:
    """``(max |pi P - pi|, max |pi_x P_xy - pi_y P_yx|)`` for the Glauber kernel."""
    pi = exact_distribution(model).probabilities
    P = glauber_kernel(model)
    flow = pi[:, None] * P
    return float(np.max(np.abs(pi @ P - pi))), float(np.max(np.abs(flow - flow.T)))
