"""Sequential block dynamics, M-regime samples and adversarial Glauber dynamics.

Every trajectory run draws its blocks from one stream and its spin updates from
another (see :func:`glauberlearn.seeding.split_streams`).  Single-site
dynamics consume one uniform per step from the spin stream and set the spin to
+1 iff the uniform is below the conditional probability of +1; this is what
makes an adversarial run with no corrupt nodes reproduce a Glauber run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .ising import (
    MAX_BLOCK_SIZE,
    GuardError,
    IsingModel,
    check_spins,
    conditional_block_distribution,
    config_index,
    configurations,
    exact_distribution,
    exact_sample,
    neighborhoods,
    sigmoid,
)
from .seeding import as_generator, split_streams

SCHEDULE_KINDS = ("glauber", "ell_block", "symmetric", "round_robin", "full_resample",
                  "m_regime", "adversarial")


@dataclass(frozen=True)
class BlockSchedule:
    """How the block ``S_t`` is chosen at each step.

    Use the constructors (``BlockSchedule.glauber()`` etc.).  ``symmetric``
    takes either an explicit weighted list of nonempty subsets or an inclusion
    probability ``p`` (each site joins independently, resampled until nonempty).
    """

    kind: str
    ell: int | None = None
    subsets: tuple[tuple[int, ...], ...] | None = None
    weights: tuple[float, ...] | None = None
    p: float | None = None
    permutation: tuple[int, ...] | None = None
    corrupt: tuple[int, ...] = ()
    gamma: float | None = None
    policy: str | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "symmetric":
            if (self.subsets is None) == (self.p is None):
                raise ValueError("symmetric schedule needs exactly one of subsets or p")
            if self.p is not None and not 0 < self.p <= 1:
                raise ValueError("inclusion probability must lie in (0, 1]")
            if self.subsets is not None:
                if any(len(s) == 0 for s in self.subsets):
                    raise ValueError("subsets must be nonempty")
                w = np.asarray(self.weights, dtype=float)
                if w.shape != (len(self.subsets),) or np.any(w <= 0):
                    raise ValueError("need one positive weight per subset")
                object.__setattr__(self, "weights", tuple((w / w.sum()).tolist()))
        if self.kind == "adversarial" and self.gamma is not None and not 0 < self.gamma <= 0.5:
            raise ValueError("gamma must lie in (0, 1/2]")

    @classmethod
    def glauber(cls):
        return cls("glauber")

    @classmethod
    def ell_block(cls, ell: int):
        return cls("ell_block", ell=int(ell))

    @classmethod
    def symmetric(cls, subsets=None, weights=None, p=None):
        if subsets is not None:
            subsets = tuple(tuple(sorted(int(i) for i in s)) for s in subsets)
            weights = tuple(weights) if weights is not None else (1.0,) * len(subsets)
        return cls("symmetric", subsets=subsets, weights=weights, p=p)

    @classmethod
    def round_robin(cls, permutation=None):
        return cls("round_robin", permutation=None if permutation is None else tuple(int(i) for i in permutation))

    @classmethod
    def full_resample(cls):
        return cls("full_resample")

    @classmethod
    def m_regime(cls):
        return cls("m_regime")

    @classmethod
    def adversarial(cls, corrupt, gamma, policy="stubborn"):
        return cls("adversarial", corrupt=tuple(sorted(int(i) for i in corrupt)), gamma=float(gamma), policy=policy)

    def validate(self, n: int):
        if self.kind == "ell_block" and not (self.ell is not None and 1 <= self.ell <= n):
            raise ValueError(f"ell must lie in [1, {n}]")
        if self.kind == "ell_block" and self.ell > MAX_BLOCK_SIZE:
            raise GuardError(f"ell={self.ell} exceeds the block guard {MAX_BLOCK_SIZE}")
        if self.kind == "round_robin" and self.permutation is not None:
            if sorted(self.permutation) != list(range(n)):
                raise ValueError("round-robin order must be a permutation of the sites")
        if self.kind == "symmetric" and self.subsets is not None:
            if any(max(s) >= n or min(s) < 0 for s in self.subsets):
                raise ValueError("subset members out of range")
            if any(len(s) > MAX_BLOCK_SIZE for s in self.subsets):
                raise GuardError("subset exceeds the block guard")
        if self.kind == "symmetric" and self.p is not None and n > MAX_BLOCK_SIZE:
            raise GuardError("inclusion-probability blocks may exceed the block guard")
        if self.kind == "adversarial" and any(not 0 <= i < n for i in self.corrupt):
            raise ValueError("corrupt sites out of range")

    def descriptor(self) -> str:
        """Single-token text form, e.g. ``ell_block:3`` or ``round_robin:2,0,1``."""
        k = self.kind
        if k == "ell_block":
            return f"ell_block:{self.ell}"
        if k == "symmetric" and self.p is not None:
            return f"symmetric:p={self.p!r}"
        if k == "symmetric":
            parts = ";".join(f"{'.'.join(map(str, s))}@{w!r}" for s, w in zip(self.subsets, self.weights))
            return f"symmetric:{parts}"
        if k == "round_robin" and self.permutation is not None:
            return "round_robin:" + ",".join(map(str, self.permutation))
        if k == "adversarial":
            return (f"adversarial:C={'.'.join(map(str, self.corrupt))};"
                    f"gamma={self.gamma!r};policy={self.policy}")
        return k

    @classmethod
    def from_descriptor(cls, text: str) -> "BlockSchedule":
        kind, _, arg = text.partition(":")
        if kind == "ell_block":
            return cls.ell_block(int(arg))
        if kind == "symmetric" and arg.startswith("p="):
            return cls.symmetric(p=float(arg[2:]))
        if kind == "symmetric":
            subsets, weights = [], []
            for part in arg.split(";"):
                members, _, w = part.partition("@")
                subsets.append([int(i) for i in members.split(".")])
                weights.append(float(w))
            return cls.symmetric(subsets, weights)
        if kind == "round_robin":
            return cls.round_robin([int(i) for i in arg.split(",")] if arg else None)
        if kind == "adversarial":
            opts = dict(item.split("=", 1) for item in arg.split(";"))
            corrupt = [int(i) for i in opts["C"].split(".")] if opts["C"] else []
            return cls.adversarial(corrupt, float(opts["gamma"]), opts["policy"])
        return cls(kind)

    @property
    def single_site(self) -> bool:
        return self.kind in ("glauber", "round_robin", "adversarial") or (
            self.kind == "ell_block" and self.ell == 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Initial configuration plus one ``(block, configuration)`` pair per step.

    ``blocks`` is a ``(T, n)`` boolean mask (row ``t`` marks ``S_{t+1}``) and
    ``configs`` a ``(T, n)`` int8 array holding ``X_1, ..., X_T``.
    """

    initial: np.ndarray
    blocks: np.ndarray
    configs: np.ndarray
    schedule: str
    seed: int | None = None
    model: IsingModel | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.blocks.shape != self.configs.shape or self.blocks.shape[1:] != self.initial.shape:
            raise ValueError("blocks, configs and initial configuration disagree in shape")

    @property
    def n(self) -> int:
        return self.initial.shape[0]

    def __len__(self):
        return self.configs.shape[0]

    def block(self, t: int) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.blocks[t]).tolist())

    def steps(self):
        for t in range(len(self)):
            yield self.block(t), self.configs[t]

    def update_counts(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def check_locality(self) -> bool:
        """True iff every step changed spins only inside its block."""
        prev = np.vstack([self.initial[None, :], self.configs[:-1]])
        return not np.any((prev != self.configs) & ~self.blocks)


@dataclass(frozen=True, eq=False)
class NodeSampleSet:
    """Regression examples for one node: contexts ``X_{-i}`` and labels ``X_i``."""

    node: int
    contexts: np.ndarray
    labels: np.ndarray
    source: str = ""

    def __post_init__(self):
        c = np.asarray(self.contexts, dtype=np.int8)
        y = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if c.ndim != 2 or c.shape[0] != y.shape[0]:
            raise ValueError("need one context row per label")
        object.__setattr__(self, "contexts", c)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n(self) -> int:
        return self.contexts.shape[1] + 1


@njit(cache=True)
def _single_site_kernel(A, h, x, sites, u, out):
    n = x.shape[0]
    for t in range(sites.shape[0]):
        i = sites[t]
        f = h[i]
        for j in range(n):
            f += A[i, j] * x[j]
        z = 2.0 * f
        if z >= 0:
            p = 1.0 / (1.0 + np.exp(-z))
        else:
            p = 1.0 - 1.0 / (1.0 + np.exp(z))
        x[i] = 1 if u[t] < p else -1
        for j in range(n):
            out[t, j] = x[j]


def _single_site_updates(model, x, sites, u, out):
    _single_site_kernel(model.couplings, model.fields, x, sites.astype(np.int64), u, out)


def step(model: IsingModel, config, block, rng=None) -> np.ndarray:
    """Resample the spins in ``block`` from their conditional law; others are kept."""
    gen = as_generator(rng)
    x = check_spins(config, model.n).copy()
    S = sorted({int(i) for i in block})
    u = gen.random()
    if len(S) == 1:
        x[S[0]] = 1 if u < sigmoid(2.0 * model.local_field(x, S[0])) else -1
        return x
    law = conditional_block_distribution(model, x, S)
    cdf = np.cumsum(law.probabilities)
    k = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)
    x[list(law.block)] = law.patterns[k]
    return x


def _draw_blocks(schedule: BlockSchedule, n: int, T: int, gen, offset: int = 0) -> np.ndarray:
    """``(T, n)`` boolean block masks for steps ``offset+1 .. offset+T``."""
    mask = np.zeros((T, n), dtype=bool)
    rows = np.arange(T)
    kind = schedule.kind
    if kind in ("glauber", "adversarial") or (kind == "ell_block" and schedule.ell == 1):
        mask[rows, gen.integers(n, size=T)] = True
    elif kind == "ell_block":
        picks = np.argsort(gen.random((T, n)), axis=1)[:, : schedule.ell]
        mask[rows[:, None], picks] = True
    elif kind == "round_robin":
        perm = np.arange(n) if schedule.permutation is None else np.asarray(schedule.permutation)
        mask[rows, perm[(offset + rows) % n]] = True
    elif kind == "full_resample":
        mask[:] = True
    elif kind == "symmetric" and schedule.p is not None:
        mask = gen.random((T, n)) < schedule.p
        empty = ~mask.any(axis=1)
        while empty.any():
            mask[empty] = gen.random((int(empty.sum()), n)) < schedule.p
            empty = ~mask.any(axis=1)
    elif kind == "symmetric":
        choice = gen.choice(len(schedule.subsets), size=T, p=np.asarray(schedule.weights))
        for k, s in enumerate(schedule.subsets):
            mask[np.ix_(choice == k, list(s))] = True
    else:
        raise ValueError(f"schedule kind {kind!r} does not define a block law")
    return mask


def block_sequence(schedule: BlockSchedule, n: int, T: int, rng=None) -> np.ndarray:
    """Just the block masks of ``T`` steps (no spins), from the block stream of ``rng``."""
    schedule.validate(n)
    block_rng, _ = split_streams(rng)
    return _draw_blocks(schedule, n, T, block_rng)


def _seed_of(rng):
    return int(rng) if isinstance(rng, (int, np.integer)) else None


def run(model: IsingModel, schedule: BlockSchedule, x0, T: int, rng=None) -> Trajectory:
    """Run ``T`` steps of sequential block dynamics from ``x0``."""
    if schedule.kind in ("m_regime", "adversarial"):
        raise ValueError(f"use {'m_regime_samples' if schedule.kind == 'm_regime' else 'adversarial_run'}"
                         f" for {schedule.kind} data")
    n = model.n
    schedule.validate(n)
    x = check_spins(x0, n).copy()
    initial = x.copy()
    block_rng, spin_rng = split_streams(rng)
    blocks = _draw_blocks(schedule, n, T, block_rng)
    configs = np.empty((T, n), dtype=np.int8)
    if schedule.kind == "full_resample":
        configs[:] = exact_sample(exact_distribution(model), spin_rng, size=T)
    elif schedule.single_site:
        sites = np.argmax(blocks, axis=1)
        _single_site_updates(model, x, sites, spin_rng.random(T), configs)
    else:
        for t in range(T):
            x = step(model, x, np.flatnonzero(blocks[t]), spin_rng)
            configs[t] = x
    return Trajectory(initial, blocks, configs, schedule.descriptor(), _seed_of(rng), model)


def extract_node_samples(traj: Trajectory, node: int) -> NodeSampleSet:
    """Examples ``(X_{tau,-i}, X_{tau,i})`` at every step whose block contains ``node``."""
    if not 0 <= node < traj.n:
        raise IndexError(f"node {node} out of range for n={traj.n}")
    cfg = traj.configs[traj.blocks[:, node]]
    return NodeSampleSet(node, np.delete(cfg, node, axis=1), cfg[:, node], traj.schedule.split(":")[0])


def all_node_samples(traj: Trajectory) -> list[NodeSampleSet]:
    return [extract_node_samples(traj, i) for i in range(traj.n)]


def m_regime_samples(model: IsingModel, T: int, rng=None, per_node: int | None = None) -> list[NodeSampleSet]:
    """One Glauber update from a uniform configuration, ``T`` times.

    With ``per_node`` set, the updated sites are fixed to exactly ``per_node``
    per node instead of uniform draws (and ``T`` is ignored).
    """
    n = model.n
    gen = as_generator(rng)
    if per_node is not None:
        sites = np.repeat(np.arange(n), per_node)
        T = sites.shape[0]
    else:
        if T < 1:
            raise ValueError("T must be positive")
        sites = None
    X = (2 * gen.integers(0, 2, size=(T, n)) - 1).astype(np.int8)
    if sites is None:
        sites = gen.integers(n, size=T)
    u = gen.random(T)
    f = np.einsum("tj,tj->t", model.couplings[sites], X) + model.fields[sites]
    labels = np.where(u < sigmoid(2.0 * f), 1, -1).astype(np.int8)
    out = []
    for i in range(n):
        sel = sites == i
        out.append(NodeSampleSet(i, np.delete(X[sel], i, axis=1), labels[sel], "m_regime"))
    return out


class NeighborhoodHistory:
    """Read-only view of the past spins of ``N(site)`` before the current update.

    This is everything a local adversary may look at.
    """

    def __init__(self, site, neighbors, initial, configs, t):
        self.site = site
        self.neighbors = tuple(neighbors)
        self._cols = list(self.neighbors)
        self._initial = initial
        self._configs = configs
        self._t = t

    @property
    def current(self) -> np.ndarray:
        """Neighbor spins in the configuration just before this update."""
        src = self._initial if self._t == 0 else self._configs[self._t - 1]
        return src[self._cols].copy()

    def history(self) -> np.ndarray:
        """``(t + 1, |N|)`` array of neighbor spins in ``X_0 .. X_t``."""
        past = self._configs[: self._t][:, self._cols]
        return np.vstack([self._initial[self._cols][None, :], past])


def stubborn(sign: int = 1) -> Callable[[NeighborhoodHistory], float]:
    def policy(view):
        return 1.0 if sign > 0 else 0.0
    policy.name = "stubborn" if sign > 0 else "stubborn-"
    return policy


def contrarian(view: NeighborhoodHistory) -> float:
    """Oppose the current neighborhood majority; fair coin on ties."""
    s = int(view.current.sum())
    return 0.0 if s > 0 else 1.0 if s < 0 else 0.5


contrarian.name = "contrarian"


def uniform_noise(view: NeighborhoodHistory) -> float:
    return 0.5


uniform_noise.name = "uniform"

POLICIES = {
    "stubborn": stubborn(+1),
    "stubborn-": stubborn(-1),
    "contrarian": contrarian,
    "uniform": uniform_noise,
}


def get_policy(policy):
    if callable(policy):
        return policy
    try:
        return POLICIES[policy]
    except KeyError:
        raise ValueError(f"unknown adversary policy {policy!r}; choose from {sorted(POLICIES)}") from None


def adversarial_run(model: IsingModel, corrupt, gamma: float, policy, x0, T: int, rng=None) -> Trajectory:
    """Glauber dynamics where corrupt sites follow a gamma-smooth local policy.

    The policy sees only a :class:`NeighborhoodHistory` of the updated site and
    returns a probability of +1, which is clamped to ``[gamma, 1 - gamma]``.
    """
    if not 0 < gamma <= 0.5:
        raise ValueError("gamma must lie in (0, 1/2]")
    n = model.n
    corrupt = tuple(sorted({int(i) for i in corrupt}))
    pol = get_policy(policy)
    schedule = BlockSchedule.adversarial(corrupt, gamma, getattr(pol, "name", "custom"))
    schedule.validate(n)
    x = check_spins(x0, n).copy()
    initial = x.copy()
    block_rng, spin_rng = split_streams(rng)
    blocks = _draw_blocks(schedule, n, T, block_rng)
    sites = np.argmax(blocks, axis=1)
    u = spin_rng.random(T)
    configs = np.empty((T, n), dtype=np.int8)
    nbrs = neighborhoods(model)
    is_corrupt = np.zeros(n, dtype=bool)
    is_corrupt[list(corrupt)] = True
    adversarial_steps = np.flatnonzero(is_corrupt[sites])
    start = 0
    for t in list(adversarial_steps) + [T]:
        if t > start:
            _single_site_updates(model, x, sites[start:t], u[start:t], configs[start:t])
        if t == T:
            break
        i = int(sites[t])
        view = NeighborhoodHistory(i, nbrs[i], initial, configs, t)
        p_plus = min(1.0 - gamma, max(gamma, float(pol(view))))
        x[i] = 1 if u[t] < p_plus else -1
        configs[t] = x
        start = t + 1
    return Trajectory(initial, blocks, configs, schedule.descriptor(), _seed_of(rng), model)


def glauber_kernel(model: IsingModel) -> np.ndarray:
    """Exact ``2^n x 2^n`` transition matrix of single-site Glauber dynamics."""
    n = model.n
    if n > 12:
        raise GuardError(f"kernel construction limited to n <= 12, got {n}")
    X = configurations(n)
    N = X.shape[0]
    P = np.zeros((N, N))
    rows = np.arange(N)
    for i in range(n):
        f = X.astype(float) @ model.couplings[i] + model.fields[i]
        p_plus = sigmoid(2.0 * f)
        Xp, Xm = X.copy(), X.copy()
        Xp[:, i], Xm[:, i] = 1, -1
        np.add.at(P, (rows, config_index(Xp)), p_plus / n)
        np.add.at(P, (rows, config_index(Xm)), (1.0 - p_plus) / n)
    return P


def chain_mean(model: IsingModel, steps: int, rng=None, burn_in: int | None = None, thin: int | None = None):
    """Glauber-chain estimate of the magnetization with a batch-means standard error.

    Returns ``(mean, stderr)``; ``thin`` defaults to one sweep (``n`` steps) and
    ``burn_in`` to a tenth of the run.
    """
    n = model.n
    thin = thin or n
    burn_in = steps // 10 if burn_in is None else burn_in
    gen = as_generator(rng)
    x0 = (2 * gen.integers(0, 2, size=n) - 1).astype(np.int8)
    traj = run(model, BlockSchedule.glauber(), x0, steps, gen)
    kept = traj.configs[burn_in::thin].astype(float)
    if kept.shape[0] < 20:
        raise ValueError("too few retained configurations; increase steps")
    batches = np.array_split(kept, 20)
    means = np.array([b.mean(axis=0) for b in batches])
    return kept.mean(axis=0), means.std(axis=0, ddof=1) / np.sqrt(len(batches))
