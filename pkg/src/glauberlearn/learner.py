"""Full-model estimates from per-node regressions, and recovery metrics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import NodeSampleSet
from .ising import (
    MAX_BLOCK_SIZE,
    IsingModel,
    exact_distribution,
    kl_upper_bound,
    tv_distance,
    tv_upper_bound,
)
from .regression import RegressionProblem, RegressionSolution, SolverOptions, default_radius, solve

REPORT_COLUMNS = ("n", "dynamics", "T", "radius", "linf_A", "linf_h", "precision", "recall",
                  "tv_exact", "kl_bound", "seed")


def symmetrize(raw) -> np.ndarray:
    """``(R + R^T) / 2`` with the diagonal zeroed; idempotent."""
    R = np.asarray(raw, dtype=float)
    S = (R + R.T) / 2
    np.fill_diagonal(S, 0.0)
    return S


@dataclass(frozen=True, eq=False)
class Estimate:
    """Recovered couplings (symmetric, zero diagonal) and fields.

    ``raw_couplings`` holds the unsymmetrized rows; ``estimated[i]`` is False
    for nodes whose regression was not run (corrupt nodes).
    """

    couplings: np.ndarray
    fields: np.ndarray
    raw_couplings: np.ndarray
    per_node: tuple[RegressionSolution | None, ...]
    estimated: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.couplings.shape[0]

    @property
    def disagreement(self) -> float:
        """Largest ``|A'_ij - A'_ji|`` over pairs where both rows were estimated."""
        m = np.outer(self.estimated, self.estimated)
        D = np.abs(self.raw_couplings - self.raw_couplings.T)
        return float(D[m].max()) if m.any() else 0.0

    def to_model(self) -> IsingModel:
        return IsingModel(self.couplings, self.fields)


def _solve_rows(sample_sets, nodes, radius, options, jobs):
    def one(i):
        s = sample_sets[i]
        r = default_radius(s) if radius is None else float(radius)
        return solve(RegressionProblem(s, r, options))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return dict(zip(nodes, pool.map(one, nodes)))
    return {i: one(i) for i in nodes}


def _check_sets(sample_sets, nodes):
    n = len(sample_sets)
    for i, s in enumerate(sample_sets):
        if s.node != i:
            raise ValueError(f"sample set {i} is labelled for node {s.node}")
        if s.contexts.shape[1] != n - 1:
            raise ValueError(f"node {i}: contexts have {s.contexts.shape[1]} columns, expected {n - 1}")
    empty = [i for i in nodes if len(sample_sets[i]) == 0]
    if empty:
        raise ValueError(f"no samples for node(s) {empty}")


def _row(sol: RegressionSolution, i: int, n: int) -> np.ndarray:
    return np.insert(sol.weights, i, 0.0)


def learn(sample_sets: list[NodeSampleSet], radius: float | None = None, options: SolverOptions | None = None,
          jobs: int = 1, provenance: dict | None = None) -> Estimate:
    """Solve every node's constrained regression and symmetrize the rows.

    ``radius=None`` picks a radius per node with :func:`default_radius`.
    """
    return learn_honest(sample_sets, (), radius, options, jobs, provenance)


def learn_honest(sample_sets: list[NodeSampleSet], corrupt, radius: float | None = None,
                 options: SolverOptions | None = None, jobs: int = 1, provenance: dict | None = None) -> Estimate:
    """Like :func:`learn`, but only honest nodes are regressed.

    Honest-honest entries are averaged as usual.  An entry between an honest
    node and a corrupt one is the honest node's own coefficient; entries
    between two corrupt nodes, and corrupt fields, are left at zero.
    """
    n = len(sample_sets)
    corrupt = sorted({int(i) for i in corrupt})
    honest = [i for i in range(n) if i not in corrupt]
    if not honest:
        raise ValueError("all nodes are corrupt")
    _check_sets(sample_sets, honest)
    options = options or SolverOptions()
    sols = _solve_rows(sample_sets, honest, radius, options, jobs)
    raw = np.zeros((n, n))
    h = np.zeros(n)
    for i in honest:
        raw[i] = _row(sols[i], i, n)
        h[i] = sols[i].intercept
    est = np.zeros(n, dtype=bool)
    est[honest] = True
    both = np.outer(est, est)
    one_side = raw + raw.T  # exactly one of the two rows is nonzero off the honest block
    A = np.where(both, symmetrize(raw), np.where(np.logical_xor.outer(est, est), one_side, 0.0))
    np.fill_diagonal(A, 0.0)
    prov = dict(provenance or {})
    prov.setdefault("radius", radius)
    if corrupt:
        prov["corrupt"] = tuple(corrupt)
    return Estimate(A, h, raw, tuple(sols.get(i) for i in range(n)), est, prov)


def threshold_support(estimate, alpha: float) -> frozenset[tuple[int, int]]:
    """Edges ``(i, j), i < j`` with ``|A_hat_ij| >= alpha / 2``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    A = estimate.couplings if hasattr(estimate, "couplings") else np.asarray(estimate)
    i, j = np.nonzero(np.triu(np.abs(A) >= alpha / 2, 1))
    return frozenset(zip(i.tolist(), j.tolist()))


def support_f1(truth: frozenset, found: frozenset) -> float:
    if not truth and not found:
        return 1.0
    tp = len(truth & found)
    return 2 * tp / (len(truth) + len(found))


@dataclass(frozen=True)
class RecoveryReport:
    linf_coupling_error: float
    linf_field_error: float
    support_precision: float
    support_recall: float
    kl_bound: float
    tv_bound: float
    tv_exact: float | None = None

    def csv_row(self, n, dynamics, T, radius, seed) -> dict:
        return {
            "n": n, "dynamics": dynamics, "T": T, "radius": radius,
            "linf_A": self.linf_coupling_error, "linf_h": self.linf_field_error,
            "precision": self.support_precision, "recall": self.support_recall,
            "tv_exact": "" if self.tv_exact is None else self.tv_exact,
            "kl_bound": self.kl_bound, "seed": seed,
        }


def evaluate(truth: IsingModel, estimate, alpha: float | None = None) -> RecoveryReport:
    """Compare an estimate (or estimated model) with the true model.

    Support is read off by :func:`threshold_support` at ``alpha``, by default
    the smallest nonzero true coupling magnitude.
    """
    est_model = estimate.to_model() if isinstance(estimate, Estimate) else estimate
    if est_model.n != truth.n:
        raise ValueError(f"dimension mismatch: n={truth.n} vs n={est_model.n}")
    dA = float(np.max(np.abs(truth.couplings - est_model.couplings)))
    dh = float(np.max(np.abs(truth.fields - est_model.fields)))
    true_edges = frozenset(zip(*[a.tolist() for a in np.nonzero(np.triu(truth.couplings, 1))]))
    if alpha is None:
        nz = np.abs(truth.couplings[truth.couplings != 0])
        alpha = float(nz.min()) if nz.size else 0.1
    found = threshold_support(est_model, alpha)
    tp = len(true_edges & found)
    precision = tp / len(found) if found else 1.0
    recall = tp / len(true_edges) if true_edges else 1.0
    tv = None
    if truth.n <= MAX_BLOCK_SIZE:
        tv = tv_distance(exact_distribution(truth), exact_distribution(est_model))
    return RecoveryReport(dA, dh, precision, recall, kl_upper_bound(truth, est_model),
                          tv_upper_bound(truth, est_model), tv)


def intercept_tolerance(eps: float, degree: int) -> float:
    """Field accuracy ``2 (d + 1) eps`` implied by coupling accuracy ``eps``."""
    return 2 * (degree + 1) * eps


def median(values) -> float:
    v = sorted(values)
    if not v:
        return math.nan
    k = len(v) // 2
    return v[k] if len(v) % 2 else 0.5 * (v[k - 1] + v[k])
