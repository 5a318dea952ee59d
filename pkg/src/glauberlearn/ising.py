"""Ising measures on {-1, +1}^n: conditional laws, exact enumeration, distances.

The measure is ``mu(x) ∝ exp(x^T A x / 2 + h^T x)`` for a symmetric coupling
matrix ``A`` with zero diagonal and external fields ``h``.

Configuration tables use lexicographic indexing with site 0 as the most
significant bit and bit value 1 meaning spin +1, so index 0 is the all -1
configuration and index ``2**n - 1`` is all +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from .seeding import as_generator

MAX_ENUMERATION_SITES = 25
MAX_BLOCK_SIZE = 20
_CHUNK = 1 << 16


class GuardError(ValueError):
    """Raised when an exact computation would exceed its enumeration guard."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Symmetric zero-diagonal couplings ``A`` plus external fields ``h``."""

    couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        A = np.array(self.couplings, dtype=float)
        h = np.array(self.fields, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"couplings must be square, got shape {A.shape}")
        if A.shape[0] < 1:
            raise ValueError("model needs at least one site")
        if h.shape != (A.shape[0],):
            raise ValueError(f"fields must have length {A.shape[0]}, got {h.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(h))):
            raise ValueError("couplings and fields must be finite")
        if not np.array_equal(A, A.T):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("couplings must have an exactly zero diagonal")
        object.__setattr__(self, "couplings", _readonly(A))
        object.__setattr__(self, "fields", _readonly(h))

    @property
    def n(self) -> int:
        return self.couplings.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "IsingModel":
        return cls(np.zeros((n, n)), np.zeros(n))

    @classmethod
    def from_edges(cls, n: int, edges: dict, fields=None) -> "IsingModel":
        """Build from ``{(i, j): value}`` with 0-based sites; symmetry is implied."""
        A = np.zeros((n, n))
        for (i, j), value in edges.items():
            if i == j:
                raise ValueError(f"self-coupling at site {i}")
            A[i, j] = A[j, i] = value
        return cls(A, np.zeros(n) if fields is None else fields)

    def permuted(self, perm) -> "IsingModel":
        """Relabel sites so that new site ``k`` is old site ``perm[k]``."""
        perm = np.asarray(perm)
        return IsingModel(self.couplings[np.ix_(perm, perm)], self.fields[perm])

    def local_field(self, config, site: int) -> float:
        """``<A_site, x_{-site}> + h_site``."""
        return float(self.couplings[site] @ config + self.fields[site])

    def log_weight(self, configs) -> np.ndarray:
        """Unnormalized log-probability ``x^T A x / 2 + h^T x`` for rows of ``configs``."""
        X = np.asarray(configs, dtype=float)
        return 0.5 * np.einsum("...i,...i->...", X @ self.couplings, X) + X @ self.fields

    def __repr__(self):
        return f"IsingModel(n={self.n}, width={width(self):.4g}, degree={degree(self)})"


def check_spins(config, n: int | None = None) -> np.ndarray:
    """Validate a spin configuration and return it as an int8 array."""
    x = np.asarray(config)
    if x.ndim != 1:
        raise ValueError("a configuration is a 1-d vector")
    if not np.all((x == 1) | (x == -1)):
        raise ValueError("spins must be exactly -1 or +1")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"configuration has length {x.shape[0]}, model has n={n}")
    return x.astype(np.int8)


def width(model: IsingModel) -> float:
    """l1-width ``max_i sum_{j != i} |A_ij| + |h_i|``."""
    return float(np.max(np.abs(model.couplings).sum(axis=1) + np.abs(model.fields)))


def neighborhoods(model: IsingModel) -> list[tuple[int, ...]]:
    return [tuple(int(j) for j in np.flatnonzero(row)) for row in model.couplings]


def degree(model: IsingModel) -> int:
    return int(np.max(np.count_nonzero(model.couplings, axis=1)))


def support(model_or_matrix) -> frozenset[tuple[int, int]]:
    """Undirected edge set ``{(i, j): i < j, A_ij != 0}``."""
    A = model_or_matrix.couplings if isinstance(model_or_matrix, IsingModel) else np.asarray(model_or_matrix)
    i, j = np.nonzero(np.triu(A, 1))
    return frozenset(zip(i.tolist(), j.tolist()))


def sigmoid(z):
    """Logistic function, built so that ``sigmoid(z) + sigmoid(-z) == 1`` exactly."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    pos = 1.0 / (1.0 + np.exp(-a))
    out = np.where(z >= 0, pos, 1.0 - pos)
    return out if out.ndim else float(out)


def conditional_probability(model: IsingModel, config, site: int) -> float:
    """``Pr(X_site = +1 | X_{-site}) = sigmoid(2 (<A_site, x> + h_site))``."""
    if not 0 <= site < model.n:
        raise IndexError(f"site {site} out of range for n={model.n}")
    x = check_spins(config, model.n)
    return sigmoid(2.0 * model.local_field(x, site))


def configurations(n: int, indices=None) -> np.ndarray:
    """Rows of ±1 spins for the given lexicographic indices (all 2^n by default)."""
    if indices is None:
        indices = np.arange(1 << n, dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (idx[..., None] >> shifts) & 1
    return (2 * bits - 1).astype(np.int8)


def config_index(config):
    """Lexicographic index of a configuration (or of each row of an array)."""
    x = np.asarray(config)
    n = x.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return (((x > 0).astype(np.int64)) * weights).sum(axis=-1)


@dataclass(frozen=True)
class BlockDistribution:
    """Law of ``X_block`` given the spins outside ``block``.

    ``patterns[k]`` lists the block spins (in the order of ``block``) for
    outcome ``k``; outcomes are lexicographic with the first block site most
    significant.
    """

    block: tuple[int, ...]
    patterns: np.ndarray
    probabilities: np.ndarray


def conditional_block_distribution(model: IsingModel, config, block) -> BlockDistribution:
    S = tuple(sorted({int(i) for i in block}))
    if not S:
        raise ValueError("block must be nonempty")
    if len(S) > MAX_BLOCK_SIZE:
        raise GuardError(f"block of size {len(S)} exceeds the enumeration guard {MAX_BLOCK_SIZE}")
    if S[0] < 0 or S[-1] >= model.n:
        raise IndexError(f"block {S} out of range for n={model.n}")
    x = check_spins(config, model.n).astype(float)
    idx = np.array(S)
    A_SS = model.couplings[np.ix_(idx, idx)]
    # external drive on the block from the frozen spins
    drive = model.couplings[idx] @ x - A_SS @ x[idx] + model.fields[idx]
    P = configurations(len(S)).astype(float)
    logw = 0.5 * np.einsum("ki,ki->k", P @ A_SS, P) + P @ drive
    probs = np.exp(logw - logsumexp(logw))
    return BlockDistribution(S, P.astype(np.int8), probs)


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Full probability table of an n-site measure in lexicographic order."""

    n: int
    probabilities: np.ndarray
    log_partition: float = float("nan")
    _cdf: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (1 << self.n,):
            raise ValueError(f"need 2^{self.n} probabilities, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probabilities", _readonly(p))

    def _chunks(self):
        N = 1 << self.n
        for start in range(0, N, _CHUNK):
            stop = min(start + _CHUNK, N)
            yield self.probabilities[start:stop], configurations(self.n, np.arange(start, stop))

    def configurations(self) -> np.ndarray:
        return configurations(self.n)

    def mean(self) -> np.ndarray:
        m = np.zeros(self.n)
        for p, X in self._chunks():
            m += p @ X
        return m

    def second_moment(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        for p, X in self._chunks():
            Xf = X.astype(float)
            M += (Xf * p[:, None]).T @ Xf
        return M

    def covariance(self) -> np.ndarray:
        m = self.mean()
        return self.second_moment() - np.outer(m, m)

    def marginal(self, sites) -> np.ndarray:
        """Marginal table of ``X_sites`` (lexicographic in the listed order)."""
        sites = list(sites)
        out = np.zeros(1 << len(sites))
        for p, X in self._chunks():
            np.add.at(out, config_index(X[:, sites]), p)
        return out

    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            c = np.cumsum(self.probabilities)
            c /= c[-1]
            object.__setattr__(self, "_cdf", _readonly(c))
        return self._cdf


def exact_distribution(model: IsingModel) -> ExactDistribution:
    """Enumerate all 2^n configurations; ``log Z`` via log-sum-exp."""
    n = model.n
    if n > MAX_ENUMERATION_SITES:
        raise GuardError(f"n={n} exceeds the enumeration guard {MAX_ENUMERATION_SITES}")
    N = 1 << n
    logw = np.empty(N)
    for start in range(0, N, _CHUNK):
        stop = min(start + _CHUNK, N)
        logw[start:stop] = model.log_weight(configurations(n, np.arange(start, stop)))
    log_z = float(logsumexp(logw))
    probs = np.exp(logw - log_z)
    probs /= probs.sum()
    return ExactDistribution(n, probs, log_z)


def exact_sample(dist: ExactDistribution, rng=None, size: int | None = None) -> np.ndarray:
    """Draw configurations by inverse CDF over the table.

    Returns one configuration when ``size`` is None, else a ``(size, n)`` array.
    """
    gen = as_generator(rng)
    u = gen.random() if size is None else gen.random(size)
    idx = np.searchsorted(dist.cdf(), u, side="right")
    idx = np.minimum(idx, (1 << dist.n) - 1)
    return configurations(dist.n, idx)


def _tables(p, q):
    a = p.probabilities if isinstance(p, ExactDistribution) else np.asarray(p, dtype=float)
    b = q.probabilities if isinstance(q, ExactDistribution) else np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def kl_divergence(p, q) -> float:
    """``E_p[log(p/q)]``; infinite when ``q`` misses mass of ``p``."""
    a, b = _tables(p, q)
    mask = a > 0
    if np.any(b[mask] == 0):
        return float("inf")
    return max(0.0, float(np.sum(a[mask] * (np.log(a[mask]) - np.log(b[mask])))))


def tv_distance(p, q) -> float:
    a, b = _tables(p, q)
    return float(0.5 * np.abs(a - b).sum())


def _check_same_n(a: IsingModel, b: IsingModel):
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: n={a.n} vs n={b.n}")


def kl_upper_bound(model_a: IsingModel, model_b: IsingModel) -> float:
    """Upper bound ``n^2 ||A - B||_inf + 2 n ||h_A - h_B||_inf`` on ``KL(mu_A, mu_B)``."""
    _check_same_n(model_a, model_b)
    n = model_a.n
    dA = float(np.max(np.abs(model_a.couplings - model_b.couplings)))
    dh = float(np.max(np.abs(model_a.fields - model_b.fields)))
    return n * n * dA + 2 * n * dh


def tv_upper_bound(model_a: IsingModel, model_b: IsingModel) -> float:
    """Pinsker consequence ``n sqrt(||A - B||_inf / 2) + sqrt(n ||h_A - h_B||_inf)``."""
    _check_same_n(model_a, model_b)
    n = model_a.n
    dA = float(np.max(np.abs(model_a.couplings - model_b.couplings)))
    dh = float(np.max(np.abs(model_a.fields - model_b.fields)))
    return n * np.sqrt(dA / 2) + np.sqrt(n * dh)


def likelihood_ratio_excess(model: IsingModel, dist: ExactDistribution | None = None):
    """Exhaustive check of the conditional likelihood-ratio bound.

    For every pair of disjoint sets ``S`` (nonempty) and ``T``, every ``sigma``
    on ``S`` and every ``tau, tau'`` on ``T``, compares
    ``mu(X_S = sigma | X_T = tau) / mu(X_S = sigma | X_T = tau')`` with
    ``exp(4 sum_{i not in T, j in U} |A_ij|)`` where ``U`` is where ``tau`` and
    ``tau'`` differ.  Returns ``(max log(ratio) - log(bound), cases checked)``;
    the bound holds iff the first value is <= 0 (up to rounding).
    """
    n = model.n
    if n > 8:
        raise GuardError(f"exhaustive ratio check limited to n <= 8, got {n}")
    dist = dist or exact_distribution(model)
    absA = np.abs(model.couplings)
    p = dist.probabilities
    X = dist.configurations()
    worst = -np.inf
    checked = 0
    sites = range(n)
    for s_size in range(1, n + 1):
        for S in combinations(sites, s_size):
            rest = [i for i in sites if i not in S]
            for t_size in range(0, len(rest) + 1):
                for T in combinations(rest, t_size):
                    S_, T_ = list(S), list(T)
                    kS = config_index(X[:, S_])
                    kT = config_index(X[:, T_]) if T_ else np.zeros(len(p), dtype=np.int64)
                    joint = np.zeros((1 << len(S_), 1 << len(T_)))
                    np.add.at(joint, (kS, kT), p)
                    cond = joint / joint.sum(axis=0, keepdims=True)
                    log_cond = np.log(cond)
                    # log ratio for all (sigma, tau, tau')
                    log_ratio = log_cond[:, :, None] - log_cond[:, None, :]
                    outside_T = [i for i in sites if i not in T]
                    col = absA[np.ix_(outside_T, T_)].sum(axis=0) if T_ else np.zeros(0)
                    pats = configurations(len(T_)) if T_ else np.zeros((1, 0), dtype=np.int8)
                    differ = pats[:, None, :] != pats[None, :, :]
                    log_bound = 4.0 * (differ * col).sum(axis=-1)
                    excess = log_ratio - log_bound[None, :, :]
                    worst = max(worst, float(excess.max()))
                    checked += excess.size
    return worst, checked
