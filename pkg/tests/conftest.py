import itertools

import numpy as np
import pytest

from glauberlearn.ising import IsingModel


def random_model(rng, n, scale=1.0, fields=True):
    """Couplings and fields i.i.d. U[-scale, scale]."""
    A = np.triu(rng.uniform(-scale, scale, size=(n, n)), 1)
    h = rng.uniform(-scale, scale, size=n) if fields else np.zeros(n)
    return IsingModel(A + A.T, h)


def model_with_width(rng, n, lam):
    m = random_model(rng, n)
    row = np.abs(m.couplings).sum(axis=1) + np.abs(m.fields)
    s = lam / row.max()
    return IsingModel(m.couplings * s, m.fields * s)


def brute_force_probs(model):
    """Independent enumeration via itertools.product, same site-0-major order."""
    n = model.n
    X = np.array(list(itertools.product([-1, 1], repeat=n)), dtype=float)
    logw = np.array([0.5 * x @ model.couplings @ x + model.fields @ x for x in X])
    w = np.exp(logw - logw.max())
    return X, w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance results, one entry per criterion, printed at the end of the run
ACCEPTANCE: dict[str, str] = {}
ACCEPTANCE_IDS = [f"AC{k}" for k in range(1, 11)]


_acceptance_selected = []


def pytest_collection_finish(session):
    _acceptance_selected[:] = [k for k in ACCEPTANCE_IDS
                               if any(it.name.startswith(f"test_{k.lower()}_") for it in session.items)]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_selected:
        return
    terminalreporter.section("acceptance criteria")
    for k in _acceptance_selected:
        terminalreporter.write_line(ACCEPTANCE.get(k, f"{k} FAIL (did not complete)"))
