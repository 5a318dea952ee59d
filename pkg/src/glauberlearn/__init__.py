"""Learning Ising models from dynamics with node-wise l1-constrained logistic regression."""
