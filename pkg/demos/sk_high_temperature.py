"""A small Sherrington-Kirkpatrick model in the high-temperature phase.

Prints the replica-symmetric overlap, the AT-line value, the TAP residual from
exact magnetizations, the conditioning fractions, and the recovery error from
exact samples.

    python demos/sk_high_temperature.py
"""

import math

import numpy as np

from glauberlearn.diagnostics import sk_condition_check, tap_residual
from glauberlearn.dynamics import NodeSampleSet
from glauberlearn.generators import FieldSpec, at_line_value, rs_fixed_point, sk_model
from glauberlearn.ising import exact_distribution, exact_sample, tv_distance
from glauberlearn.learner import learn


def main(n=14, beta=0.5, mu=0.3, seed=1, T=100_000):
    model = sk_model(n, beta, FieldSpec.constant(mu), seed)
    rs = rs_fixed_point(beta, mu)
    print(f"SK n={n} beta={beta} field={mu}: q={rs.q:.4f}, AT value {at_line_value(beta, mu, 0.0, rs.q):.3f} (< 1)")
    dist = exact_distribution(model)
    tap = tap_residual(model, dist.mean(), beta, rs.q)
    print(f"TAP residual max {tap.max_abs:.3f} against reference {tap.reference:.3f}")
    X = exact_sample(dist, seed, size=T)
    check = sk_condition_check(model, X)
    print(f"conditioning: C={check.C:.3f}, smallest per-node fraction {check.min_fraction:.3f}")
    est = learn([NodeSampleSet(i, np.delete(X, i, axis=1), X[:, i]) for i in range(n)], 2 * math.sqrt(n))
    tv = tv_distance(dist, exact_distribution(est.to_model()))
    print(f"recovery from {T} samples: max coupling error {np.abs(est.couplings - model.couplings).max():.3f}, "
          f"TV {tv:.3f}")


if __name__ == "__main__":
    main()
