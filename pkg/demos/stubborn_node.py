"""One corrupt site that prefers +1 whenever it is allowed to.

The honest part of the coupling matrix is still recovered; the corrupt row is
reported from the honest side only.  Compare the two error columns.

    python demos/stubborn_node.py
"""

import numpy as np

from glauberlearn.dynamics import all_node_samples, adversarial_run
from glauberlearn.generators import random_bounded_degree
from glauberlearn.learner import learn, learn_honest


def main(n=8, seed=3, gamma=0.25):
    model = random_bounded_degree(n, 3, 0.4, seed)
    corrupt = [0]
    honest = np.arange(1, n)
    traj = adversarial_run(model, corrupt, gamma, "stubborn", np.ones(n), n * 50_000, seed)
    print(f"fraction of time the corrupt site reads +1: {np.mean(traj.configs[:, 0] > 0):.3f}")
    sets = all_node_samples(traj)
    for label, est in (("honest-aware", learn_honest(sets, corrupt, 1.5)), ("naive", learn(sets, 1.5))):
        err = np.abs(est.couplings - model.couplings)
        print(f"{label:>13}: honest-honest error {err[np.ix_(honest, honest)].max():.3f}, "
              f"corrupt-row error {err[0].max():.3f}")


if __name__ == "__main__":
    main()
