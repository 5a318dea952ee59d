"""Learn one bounded-degree model from three kinds of data at growing budgets.

Independent samples, a Glauber trajectory and a round-robin trajectory are each
given the same number of per-node examples.  The printed table shows the
largest coupling error after symmetrization.

    python demos/dynamics_vs_iid.py
"""

import numpy as np

from glauberlearn.dynamics import BlockSchedule, NodeSampleSet, all_node_samples, run
from glauberlearn.generators import random_bounded_degree
from glauberlearn.ising import exact_distribution, exact_sample, width
from glauberlearn.learner import learn, threshold_support


def iid_sets(X):
    return [NodeSampleSet(i, np.delete(X, i, axis=1), X[:, i]) for i in range(X.shape[1])]


def main(n=8, d=3, strength=0.4, seed=0):
    model = random_bounded_degree(n, d, strength, seed)
    print(f"model: n={n}, {d}-regular, |A_ij|={strength}, width={width(model):.2f}")
    x0 = np.ones(n, dtype=np.int8)
    print(f"{'per node':>9} {'iid':>8} {'glauber':>8} {'round-robin':>12}")
    for per_node in (2_000, 8_000, 32_000):
        X = exact_sample(exact_distribution(model), seed + 1, size=per_node)
        errs = [learn(iid_sets(X), 1.5)]
        # glauber updates each site n*per_node/n times on average
        errs.append(learn(all_node_samples(run(model, BlockSchedule.glauber(), x0, n * per_node, seed + 2)), 1.5))
        errs.append(learn(all_node_samples(run(model, BlockSchedule.round_robin(), x0, n * per_node, seed + 3)),
                          1.5))
        row = [np.abs(e.couplings - model.couplings).max() for e in errs]
        print(f"{per_node:>9} {row[0]:>8.3f} {row[1]:>8.3f} {row[2]:>12.3f}")
    recovered = threshold_support(errs[1], strength) == threshold_support(model.couplings, strength)
    print("glauber support recovered at the largest budget:", recovered)


if __name__ == "__main__":
    main()
