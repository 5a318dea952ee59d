"""Model families (GOE/SK, Curie-Weiss, random regular graphs) and RS scalars."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .ising import IsingModel
from .seeding import as_generator

GAUSS_HERMITE_NODES = 161
RS_DAMPING = 0.5
RS_MAX_ITERS = 10_000
REGULAR_GRAPH_RETRIES = 1000


class ConvergenceError(RuntimeError):
    """A fixed-point or iterative solver hit its iteration cap."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FieldSpec:
    """Law of the external field: zero, constant ``mu`` or i.i.d. N(mu, sigma2)."""

    kind: str = "zero"
    mu: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "gaussian"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.kind == "zero" and (self.mu != 0 or self.sigma2 != 0):
            raise ValueError("zero field takes no parameters")
        if self.kind == "constant" and self.sigma2 != 0:
            raise ValueError("constant field has no variance")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, mu: float):
        return cls("constant", float(mu))

    @classmethod
    def gaussian(cls, mu: float, sigma2: float):
        return cls("gaussian", float(mu), float(sigma2))

    def draw(self, n: int, rng) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(n)
        if self.kind == "constant":
            return np.full(n, self.mu)
        return self.mu + np.sqrt(self.sigma2) * as_generator(rng).standard_normal(n)


def goe_matrix(n: int, rng=None) -> np.ndarray:
    """Symmetric matrix, zero diagonal, upper entries i.i.d. N(0, 1/n)."""
    if n < 2:
        raise ValueError("GOE needs n >= 2")
    gen = as_generator(rng)
    iu = np.triu_indices(n, 1)
    A = np.zeros((n, n))
    A[iu] = gen.standard_normal(len(iu[0])) / np.sqrt(n)
    return A + A.T


def sk_model(n: int, beta: float, field: FieldSpec | None = None, rng=None) -> IsingModel:
    """SK measure: couplings ``beta * GOE(n)`` and fields drawn from ``field``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    gen = as_generator(rng)
    A = goe_matrix(n, gen)
    h = (field or FieldSpec.zero()).draw(n, gen)
    return IsingModel(beta * A, h)


def curie_weiss(n: int, beta: float) -> IsingModel:
    if n < 2:
        raise ValueError("Curie-Weiss needs n >= 2")
    A = np.full((n, n), beta / n)
    np.fill_diagonal(A, 0.0)
    return IsingModel(A, np.zeros(n))


def _pairing_model(n, d, gen):
    stubs = np.repeat(np.arange(n), d)
    for _ in range(REGULAR_GRAPH_RETRIES):
        gen.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        pairs = np.sort(pairs, axis=1)
        if len(np.unique(pairs, axis=0)) == len(pairs):
            return [tuple(p) for p in pairs.tolist()]
    return None


def _circulant_edges(n, d):
    # ring plus chords: i ~ i +- 1..d//2, and the antipode when d is odd
    edges = set()
    for i in range(n):
        for k in range(1, d // 2 + 1):
            edges.add(tuple(sorted((i, (i + k) % n))))
        if d % 2:
            edges.add(tuple(sorted((i, (i + n // 2) % n))))
    return sorted(edges)


def random_bounded_degree(n: int, d: int, strength: float, rng=None) -> IsingModel:
    """Random d-regular graph with edge weights uniform on {-strength, +strength}.

    The graph comes from the pairing model with rejection of loops and
    multi-edges; after ``REGULAR_GRAPH_RETRIES`` failures a deterministic
    circulant d-regular graph is used instead.
    """
    if d < 0 or d >= n or (n * d) % 2:
        raise ValueError(f"no {d}-regular graph on {n} vertices")
    gen = as_generator(rng)
    if d == 0:
        return IsingModel.zeros(n)
    edges = _pairing_model(n, d, gen)
    if edges is None:
        edges = _circulant_edges(n, d)
    edges = sorted(edges)
    signs = gen.choice(np.array([-1.0, 1.0]), size=len(edges))
    A = np.zeros((n, n))
    for (i, j), s in zip(edges, signs):
        A[i, j] = A[j, i] = s * strength
    return IsingModel(A, np.zeros(n))


def _gaussian_rule(mu=0.0, sigma2=1.0):
    x, w = hermegauss(GAUSS_HERMITE_NODES)
    return mu + np.sqrt(sigma2) * x, w / w.sum()


@dataclass(frozen=True)
class RSFixedPoint:
    beta: float
    mu: float
    sigma2: float
    q: float
    residual: float
    iterations: int


def _rs_map(beta, mu, sigma2):
    h, wh = _gaussian_rule(mu, sigma2)
    z, wz = _gaussian_rule()
    W = np.outer(wh, wz)

    def F(q):
        arg = beta * np.sqrt(q) * z[None, :] + h[:, None]
        return float(np.sum(W * np.tanh(arg) ** 2))

    return F


def rs_fixed_point(beta: float, mu: float = 0.0, sigma2: float = 0.0, tol: float = 1e-10) -> RSFixedPoint:
    """Solve ``q = E_{h,z}[tanh^2(beta z sqrt(q) + h)]`` by damped iteration.

    ``h ~ N(mu, sigma2)`` and ``z ~ N(0, 1)``; both expectations use
    161-node Gauss-Hermite rules.  Raises :class:`ConvergenceError` if the
    residual is still above ``tol`` after ``RS_MAX_ITERS`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if beta < 0 or sigma2 < 0:
        raise ValueError("beta and sigma2 must be nonnegative")
    F = _rs_map(beta, mu, sigma2)
    # without field and below beta = 1 the only solution is q = 0
    q = 0.0 if (mu == 0 and sigma2 == 0 and beta <= 1) else 0.5
    residual = abs(F(q) - q)
    it = 0
    while residual > tol and it < RS_MAX_ITERS:
        q = (1 - RS_DAMPING) * q + RS_DAMPING * F(q)
        residual = abs(F(q) - q)
        it += 1
    result = RSFixedPoint(beta, mu, sigma2, q, residual, it)
    if residual > tol:
        raise ConvergenceError(f"RS iteration stalled at residual {residual:.3g}", result)
    return result


def at_line_value(beta: float, mu: float, sigma2: float, q: float) -> float:
    """``beta^2 E_{h,z}[cosh^{-4}(beta z sqrt(q) + h)]``; below 1 means inside the AT line."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    h, wh = _gaussian_rule(mu, sigma2)
    z, wz = _gaussian_rule()
    arg = beta * np.sqrt(q) * z[None, :] + h[:, None]
    return float(beta**2 * np.sum(np.outer(wh, wz) / np.cosh(arg) ** 4))


def covariance_opnorm_estimate(samples, centered: bool = True, iterations: int = 200, rng=None) -> float:
    """Dominant eigenvalue of the empirical covariance (or second-moment) matrix.

    Power iteration from a random start, using only matrix-vector products with
    the sample matrix.  The returned value is the larger of the final Rayleigh
    quotient and the largest diagonal entry, both lower bounds on the true
    eigenvalue.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 samples as rows of a 2-d array")
    T, n = X.shape
    m = X.mean(axis=0) if centered else np.zeros(n)

    def apply(v):
        return X.T @ (X @ v) / T - m * (m @ v)

    diag = np.einsum("ti,ti->i", X, X) / T - m * m
    v = as_generator(0 if rng is None else rng).standard_normal(n)
    v /= np.linalg.norm(v)
    rq = 0.0
    for _ in range(iterations):
        w = apply(v)
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        v = w / norm
    else:
        rq = float(v @ apply(v))
    return max(rq, float(diag.max()), 0.0)
