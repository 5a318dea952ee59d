import math

import numpy as np
import pytest
from scipy import integrate

from glauberlearn.generators import (
    ConvergenceError,
    FieldSpec,
    at_line_value,
    covariance_opnorm_estimate,
    curie_weiss,
    goe_matrix,
    random_bounded_degree,
    rs_fixed_point,
    sk_model,
)
from glauberlearn.ising import degree, exact_distribution, width


class TestGOE:
    def test_symmetric_zero_diagonal(self):
        for seed in range(5):
            A = goe_matrix(7, seed)
            assert np.array_equal(A, A.T)
            assert np.all(np.diag(A) == 0)

    def test_variance(self):
        n = 1000
        A = goe_matrix(n, 3)
        off = A[np.triu_indices(n, 1)]
        assert abs(off.var() - 1 / n) <= 0.1 / n
        # mean of ~5e5 entries with sd 1/sqrt(n)
        assert abs(off.mean()) <= 5 * math.sqrt(1 / n / off.size)

    def test_row_norm_bound(self):
        # each row of the GOE matrix has l2 norm at most 2, with high probability
        ok = sum(np.linalg.norm(goe_matrix(500, s), axis=1).max() <= 2 for s in range(100))
        assert ok >= 95

    def test_small_n(self):
        with pytest.raises(ValueError):
            goe_matrix(1)


class TestSK:
    def test_beta_zero(self):
        m = sk_model(10, 0.0, rng=1)
        assert np.all(m.couplings == 0)

    def test_zero_field(self):
        assert np.all(sk_model(10, 1.0, FieldSpec.zero(), 2).fields == 0)

    def test_gaussian_field_mean(self):
        n = 10_000
        h = FieldSpec.gaussian(0.5, 0.1).draw(n, 4)
        assert abs(h.mean() - 0.5) <= 3 * math.sqrt(0.1 / n)

    def test_couplings_scale_with_beta(self):
        a, b = sk_model(12, 1.0, rng=9), sk_model(12, 0.5, rng=9)
        np.testing.assert_allclose(b.couplings, 0.5 * a.couplings)

    def test_field_spec_validation(self):
        with pytest.raises(ValueError):
            FieldSpec("gaussian", 0.0, -1.0)
        with pytest.raises(ValueError):
            FieldSpec("bogus")


class TestCurieWeiss:
    def test_examples(self):
        assert curie_weiss(2, 1.0).couplings[0, 1] == 0.5
        assert width(curie_weiss(6, 1.5)) == pytest.approx(1.5 * 5 / 6)

    def test_flip_symmetry(self):
        p = exact_distribution(curie_weiss(4, 2.0)).probabilities
        np.testing.assert_allclose(p, p[::-1], atol=1e-15)


class TestRegular:
    def test_degree_zero(self):
        assert np.all(random_bounded_degree(5, 0, 1.0, 1).couplings == 0)

    def test_exact_degree_and_width(self):
        for seed in range(10):
            m = random_bounded_degree(8, 3, 0.4, seed)
            assert (np.count_nonzero(m.couplings, axis=1) == 3).all()
            assert width(m) == pytest.approx(1.2)
            assert set(np.abs(m.couplings[m.couplings != 0]).round(12)) == {0.4}

    def test_dense_case_uses_fallback_if_needed(self):
        m = random_bounded_degree(6, 5, 1.0, 0)
        assert degree(m) == 5

    def test_infeasible(self):
        with pytest.raises(ValueError):
            random_bounded_degree(7, 3, 1.0)
        with pytest.raises(ValueError):
            random_bounded_degree(4, 4, 1.0)

    def test_deterministic(self):
        a, b = random_bounded_degree(12, 3, 0.5, 7), random_bounded_degree(12, 3, 0.5, 7)
        np.testing.assert_array_equal(a.couplings, b.couplings)


def _rs_rhs_by_quad(beta, mu, sigma2, q):
    """Independent evaluation of E[tanh^2(beta z sqrt(q) + h)] by adaptive quadrature."""
    phi = lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    s = math.sqrt(sigma2)

    def inner(u):
        return integrate.quad(lambda z: phi(z) * math.tanh(beta * z * math.sqrt(q) + mu + s * u) ** 2, -12, 12,
                              epsabs=1e-13, epsrel=1e-12, limit=200)[0]

    if sigma2 == 0:
        return inner(0.0)
    return integrate.quad(lambda u: phi(u) * inner(u), -12, 12, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


class TestRS:
    def test_trivial_zero(self):
        assert rs_fixed_point(0.0).q == 0.0

    @pytest.mark.parametrize("mu", [0.1, 0.7, 2.0])
    def test_beta_zero_closed_form(self, mu):
        assert rs_fixed_point(0.0, mu).q == pytest.approx(math.tanh(mu) ** 2, abs=1e-8)

    def test_high_temperature_zero_field(self):
        assert rs_fixed_point(0.9).q == 0.0

    @pytest.mark.parametrize("beta,mu,sigma2", [(0.5, 0.3, 0.2), (1.2, 0.0, 0.5), (1.5, 1.0, 1.0), (0.8, 0.6, 0.0)])
    def test_residual_against_adaptive_quadrature(self, beta, mu, sigma2):
        res = rs_fixed_point(beta, mu, sigma2)
        assert 0 <= res.q < 1
        assert abs(_rs_rhs_by_quad(beta, mu, sigma2, res.q) - res.q) <= 1e-8

    def test_residual_on_grid(self):
        for beta in np.linspace(0, 1.5, 4):
            for mu in np.linspace(0, 1, 3):
                for s2 in np.linspace(0, 1, 3):
                    res = rs_fixed_point(beta, mu, s2)
                    assert res.residual <= 1e-10

    def test_monotone_in_mu(self):
        qs = [rs_fixed_point(0.0, mu).q for mu in np.linspace(0, 2, 21)]
        assert np.all(np.diff(qs) >= 0)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            rs_fixed_point(0.5, tol=0)
        with pytest.raises(ValueError):
            rs_fixed_point(-1.0)

    def test_convergence_error_carries_result(self, monkeypatch):
        import glauberlearn.generators as g
        monkeypatch.setattr(g, "RS_MAX_ITERS", 2)
        with pytest.raises(ConvergenceError) as info:
            g.rs_fixed_point(1.3, 0.2, 0.3)
        assert info.value.result.iterations == 2


class TestATLine:
    def test_examples(self):
        assert at_line_value(0.0, 0.3, 0.1, 0.5) == 0.0
        assert at_line_value(0.7, 0.0, 0.0, 0.0) == pytest.approx(0.49, abs=1e-14)
        assert at_line_value(0.5, 0.3, 0.1, rs_fixed_point(0.5, 0.3, 0.1).q) < 0.25

    def test_q_range(self):
        with pytest.raises(ValueError):
            at_line_value(0.5, 0, 0, 1.5)


class TestOpnorm:
    def test_iid_spins(self):
        X = np.random.default_rng(0).choice([-1, 1], size=(10_000, 50))
        assert 0.8 <= covariance_opnorm_estimate(X) <= 1.5

    def test_duplicated_sample(self):
        X = np.tile([1, -1, 1, 1], (20, 1))
        assert covariance_opnorm_estimate(X) == 0.0

    def test_perfectly_correlated(self):
        s = np.random.default_rng(1).choice([-1, 1], size=4000)
        X = np.tile(s[:, None], (1, 10))
        assert covariance_opnorm_estimate(X) == pytest.approx(10, rel=0.01)

    def test_matches_eigvalsh_and_dominates_diagonal(self):
        X = np.random.default_rng(2).choice([-1, 1], size=(500, 8))
        X[:, 1] = X[:, 0]
        C = np.cov(X.T, bias=True)
        est = covariance_opnorm_estimate(X)
        assert est == pytest.approx(np.linalg.eigvalsh(C)[-1], rel=1e-6)
        assert est >= C.diagonal().max() - 1e-6

    def test_uncentered(self):
        X = np.ones((10, 3))
        assert covariance_opnorm_estimate(X, centered=False) == pytest.approx(3.0)

    def test_too_few(self):
        with pytest.raises(ValueError):
            covariance_opnorm_estimate(np.ones((1, 3)))
