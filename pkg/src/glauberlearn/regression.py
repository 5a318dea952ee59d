"""l1-constrained logistic regression for one node, plus exact population oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dynamics import NodeSampleSet
from .ising import MAX_BLOCK_SIZE, ExactDistribution, GuardError, IsingModel, exact_distribution, sigmoid


def logistic_loss(z):
    """``log(1 + exp(-z))``, stable for large ``|z|``."""
    z = np.asarray(z, dtype=float)
    out = np.where(z >= 0, np.log1p(np.exp(-np.abs(z))), -z + np.log1p(np.exp(-np.abs(z))))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SolverOptions:
    """Projected-gradient settings.

    ``step_rule="spectral"`` uses ``L = lambda_max(mean (x,1)(x,1)^T)``;
    ``"uniform"`` uses the cruder ``L = max ||(x,1)||_2^2``.  Both bound the
    curvature of the 2-scaled logistic loss.
    """

    tol: float = 1e-10
    max_iters: int = 20_000
    step_rule: str = "spectral"
    constrain_intercept: bool = True
    keep_trace: bool = False

    def __post_init__(self):
        if self.step_rule not in ("spectral", "uniform"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol must be positive and max_iters at least 1")


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    samples: NodeSampleSet
    radius: float
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self) -> int:
        return self.samples.contexts.shape[1] + 1

    @cached_property
    def _data(self):
        # Duplicate (context, label) rows are merged into counts; the weighted
        # loss is identical to the plain average.
        s = self.samples
        if len(s) == 0:
            raise ValueError(f"node {s.node} has no samples")
        rows = np.hstack([s.contexts, s.labels[:, None]])
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        if 2 * len(uniq) > len(rows):
            uniq, counts = rows, np.ones(len(rows), dtype=np.int64)
        V = np.hstack([uniq[:, :-1].astype(float), np.ones((len(uniq), 1))])
        y = uniq[:, -1].astype(float)
        weights = counts / counts.sum()
        return V, y, weights

    def lipschitz(self) -> float:
        V, _, weights = self._data
        if self.options.step_rule == "uniform":
            return float(np.max(np.einsum("ti,ti->t", V, V)))
        M = (V * weights[:, None]).T @ V
        return float(np.linalg.eigvalsh(M)[-1])


@dataclass(frozen=True, eq=False)
class RegressionSolution:
    weights: np.ndarray
    intercept: float
    loss: float
    iterations: int
    converged: bool
    loss_trace: tuple[float, ...] = ()

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.weights).sum() + abs(self.intercept))


def _loss_grad(V, y, weights, theta):
    margin = 2.0 * y * (V @ theta)
    loss = float(weights @ logistic_loss(margin))
    coef = -2.0 * y * sigmoid(-margin) * weights
    return loss, V.T @ coef


def empirical_loss_and_gradient(problem: RegressionProblem, w, h) -> tuple[float, np.ndarray]:
    """Average of ``l(2 y (<w, x> + h))`` and its gradient in ``(w, h)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (problem.dim - 1,):
        raise ValueError(f"w must have length {problem.dim - 1}, got {w.shape}")
    V, y, weights = problem._data
    return _loss_grad(V, y, weights, np.append(w, float(h)))


def project_l1(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{u : ||u||_1 <= radius}`` (sort-based soft threshold)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(u) + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    out = np.sign(v) * np.maximum(a - theta, 0.0)
    # guard against rounding pushing the norm a hair above the radius
    excess = np.abs(out).sum() - radius
    if excess > 0:
        out *= radius / (radius + excess)
    return out


def solve(problem: RegressionProblem) -> RegressionSolution:
    """Projected gradient descent with step ``1/L`` on the joint vector ``(w, h)``.

    Stops once an iteration lowers the loss by less than ``options.tol`` or the
    iteration cap is reached (``converged=False``).
    """
    opts = problem.options
    V, y, weights = problem._data
    L = problem.lipschitz()
    d = problem.dim

    def project(theta):
        if opts.constrain_intercept:
            return project_l1(theta, problem.radius)
        return np.append(project_l1(theta[:-1], problem.radius), theta[-1])

    theta = np.zeros(d)
    loss, grad = _loss_grad(V, y, weights, theta)
    trace = [loss]
    converged = False
    it = 0
    while it < opts.max_iters:
        it += 1
        cand = project(theta - grad / L)
        new_loss, new_grad = _loss_grad(V, y, weights, cand)
        improvement = loss - new_loss
        theta, loss, grad = cand, new_loss, new_grad
        if opts.keep_trace:
            trace.append(loss)
        if improvement < opts.tol:
            converged = True
            break
    return RegressionSolution(theta[:-1].copy(), float(theta[-1]), loss, it, converged,
                              tuple(trace) if opts.keep_trace else ())


def default_radius(samples: NodeSampleSet, width_bound: float | None = None) -> float:
    """Radius to use when none is given.

    A known width bound wins; otherwise the l1 norm of a loosely constrained fit,
    capped at ``2 sqrt(n)``.
    """
    if width_bound is not None:
        return float(width_bound)
    cap = 2.0 * np.sqrt(samples.n)
    loose = solve(RegressionProblem(samples, 10.0 * cap, SolverOptions(tol=1e-8, max_iters=2000)))
    return float(min(max(loose.l1_norm, 1e-3), cap))


def _context_law(model, node, dist):
    if model.n > MAX_BLOCK_SIZE:
        raise GuardError(f"exact population quantities limited to n <= {MAX_BLOCK_SIZE}")
    dist = dist or exact_distribution(model)
    X = dist.configurations()
    return X, dist.probabilities


def population_loss_exact(model: IsingModel, node: int, w, h, dist: ExactDistribution | None = None) -> float:
    """``E[l(2 X_i (<w, X_{-i}> + h))]`` under the stationary measure, by enumeration."""
    X, p = _context_law(model, node, dist)
    ctx = np.delete(X, node, axis=1).astype(float)
    margin = 2.0 * X[:, node] * (ctx @ np.asarray(w, dtype=float) + h)
    return float(p @ logistic_loss(margin))


def prediction_gap_exact(model: IsingModel, node: int, w, h, dist: ExactDistribution | None = None,
                         context_law=None) -> float:
    """``E_X[(sigmoid(2(<w,X>+h)) - sigmoid(2(<w*,X>+h*)))^2]`` with ``(w*, h*)`` from the model.

    ``X`` is the context ``X_{-node}``; by default it follows the stationary
    marginal, or ``context_law=(contexts, probabilities)`` supplies another law.
    """
    w_star = np.delete(model.couplings[node], node)
    h_star = model.fields[node]
    if context_law is not None:
        ctx, p = context_law
        ctx = np.asarray(ctx, dtype=float)
        p = np.asarray(p, dtype=float)
    else:
        X, p = _context_law(model, node, dist)
        ctx = np.delete(X, node, axis=1).astype(float)
    diff = sigmoid(2.0 * (ctx @ np.asarray(w, dtype=float) + h)) - sigmoid(2.0 * (ctx @ w_star + h_star))
    return float(p @ diff**2)
