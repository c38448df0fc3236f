import numpy as np
import pytest

from hsics.errors import DimensionError, NearSingularError, ValidationError, ZeroColumnError
from hsics.numerics import condition_number, dct_basis, svd
from hsics.sensing import (
    BalancedDecomposition,
    balance,
    balanced_bpdn,
    balanced_residual,
    gaussian_measurement,
    leverage_imbalance,
    sampling_ratio,
    sensing_matrix,
    subsample_measurement,
    svd_measurement,
)
from hsics.solvers import BpdnProblem, solve_bpdn


def ill_conditioned(rng, m, n, cond):
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return (u * np.geomspace(1.0, 1.0 / cond, m)) @ v.T


class TestMeasurementMatrices:
    def test_gaussian_seeded_and_scaled(self):
        a = gaussian_measurement(50, 400, seed=3)
        b = gaussian_measurement(50, 400, seed=3)
        np.testing.assert_array_equal(a.phi, b.phi)
        assert a.phi.var() == pytest.approx(1 / 50, rel=0.05)
        assert a.provenance() == {"kind": "gaussian", "m": 50, "d": 400, "seed": 3}

    def test_gaussian_seed_is_used_directly(self):
        expected = np.random.default_rng(7).standard_normal((4, 9)) / 2.0
        np.testing.assert_array_equal(gaussian_measurement(4, 9, 7).phi, expected)

    def test_subsample_rows_are_distinct_unit_vectors(self):
        phi = subsample_measurement(10, 30, seed=1)
        assert np.all(phi.phi.sum(axis=1) == 1.0)
        assert len(set(phi.indices.tolist())) == 10
        np.testing.assert_array_equal(phi.phi[np.arange(10), phi.indices], 1.0)

    def test_svd_rows_orthonormal(self):
        d = np.random.default_rng(2).standard_normal((12, 20))
        phi = svd_measurement(d, 5)
        np.testing.assert_allclose(phi.phi @ phi.phi.T, np.eye(5), atol=1e-12)
        assert phi.kind == "svd"

    @pytest.mark.parametrize("m", [0, 13])
    def test_m_out_of_range(self, m):
        with pytest.raises(ValidationError):
            gaussian_measurement(m, 12, 0)

    def test_sampling_ratio(self):
        assert f"{sampling_ratio(1, 148):.2f}" == "0.68"
        assert f"{sampling_ratio(5, 148):.2f}" == "3.38"


class TestSensingMatrix:
    def test_svd_fast_path_equals_product(self):
        d = np.random.default_rng(4).standard_normal((16, 24))
        phi = svd_measurement(d, 6)
        sm = sensing_matrix(phi, d)
        assert sm.fast_path
        np.testing.assert_allclose(sm.a, phi.phi @ d, atol=1e-12)
        res = svd(d)
        np.testing.assert_allclose(sm.a, res.sigma[:6, None] * res.v[:, :6].T, atol=1e-12)

    def test_foreign_svd_uses_generic_product(self):
        d = np.random.default_rng(5).standard_normal((8, 10))
        phi = svd_measurement(d, 3)
        psi = dct_basis(8)
        sm = sensing_matrix(phi, psi)
        assert not sm.fast_path
        np.testing.assert_allclose(sm.a, phi.phi @ psi)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            sensing_matrix(gaussian_measurement(3, 8, 0), np.eye(9))


class TestBalancedResidual:
    def test_equal_columns_zero(self):
        assert balanced_residual(np.array([[1.0, 0.0], [0.0, 1.0]])) == 0.0

    def test_known_value(self):
        # column norms 1 and 3, mean 2
        assert balanced_residual(np.array([[1.0, 3.0]])) == pytest.approx(0.5)

    def test_all_zero_rejected(self):
        with pytest.raises(ZeroColumnError):
            balanced_residual(np.zeros((2, 2)))


class TestBalance:
    def test_balanced_input_is_fixed_point(self):
        a = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]) / np.sqrt(2)
        dec = balance(a, t_max=5, tol=0.0)
        np.testing.assert_allclose(np.linalg.norm(dec.b, axis=0), np.linalg.norm(a, axis=0), atol=1e-12)
        np.testing.assert_allclose(dec.q, 1.0, atol=1e-12)
        np.testing.assert_allclose(dec.reconstruct(), a, atol=1e-12)

    def test_product_invariant_every_iteration(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((6, 15)) * rng.uniform(0.1, 10, 15)
        worst = []

        def check(t, p, b, q):
            worst.append(np.abs(p @ b * q - a).max() / np.abs(a).max())

        dec = balance(a, t_max=10, tol=0.0, callback=check)
        assert dec.iterations_run == 10
        assert len(worst) == 10
        assert max(worst) <= 1e-10

    def test_columns_equal_and_rows_orthonormal_at_exit(self):
        rng = np.random.default_rng(7)
        a = ill_conditioned(rng, 8, 20, 1e6)
        dec = balance(a, t_max=10)
        c = np.linalg.norm(dec.b, axis=0)
        np.testing.assert_allclose(c, np.sqrt(8 / 20), rtol=1e-12)
        if dec.imbalance < 1e-8:
            np.testing.assert_allclose(dec.b @ dec.b.T, np.eye(8), atol=1e-6)

    def test_condition_improves(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            a = ill_conditioned(rng, 10, 30, 1e6)
            dec = balance(a)
            assert condition_number(dec.b) <= condition_number(a)

    def test_history_and_early_stop(self):
        a = np.random.default_rng(9).standard_normal((4, 12))
        dec = balance(a, t_max=50, tol=1e-10)
        assert dec.history[0] == pytest.approx(leverage_imbalance(a))
        assert dec.imbalance == dec.history[-1]
        assert len(dec.history) == dec.iterations_run + 1
        assert dec.iterations_run < 50 or dec.imbalance >= 1e-10

    def test_zero_iterations(self):
        a = np.random.default_rng(10).standard_normal((3, 5))
        dec = balance(a, t_max=0)
        np.testing.assert_array_equal(dec.b, a)
        np.testing.assert_array_equal(dec.p, np.eye(3))

    def test_rejects_tall(self):
        with pytest.raises(DimensionError):
            balance(np.ones((5, 3)))

    def test_rejects_zero_column(self):
        a = np.ones((2, 4))
        a[:, 2] = 0.0
        with pytest.raises(ZeroColumnError):
            balance(a)


class TestBalancedBpdn:
    def test_support_preserved_and_residual_in_original_space(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((10, 25))
        s = np.zeros(25)
        s[[3, 17]] = [1.0, -0.5]
        y = a @ s
        dec = balance(a)
        x, x_t, rep = balanced_bpdn(dec, y, 1e-8)
        assert rep.converged
        np.testing.assert_array_equal(np.flatnonzero(x), np.flatnonzero(x_t))
        assert np.linalg.norm(a @ x - y) <= 1e-6

    def test_balanced_input_matches_direct_solve(self):
        rng = np.random.default_rng(12)
        q, _ = np.linalg.qr(rng.standard_normal((12, 4)))
        a = np.ascontiguousarray(q.T)  # orthonormal rows
        a = a * np.sqrt(4 / 12) / np.linalg.norm(a, axis=0)
        a = balance(a, t_max=20).b  # already balanced
        y = rng.standard_normal(4)
        dec = balance(a)
        x, _, _ = balanced_bpdn(dec, y, 0.05)
        direct = solve_bpdn(BpdnProblem(a, y, 0.05)).solution
        # P is orthogonal here, so both problems are the same up to the 1e-3 root band
        np.testing.assert_allclose(np.abs(x).sum(), np.abs(direct).sum(), rtol=2e-3)
        np.testing.assert_allclose(x, direct, atol=1e-3)

    def test_near_singular_p(self):
        dec = BalancedDecomposition(
            p=np.diag([1.0, 1e-14]), b=np.eye(2), q=np.ones(2), iterations_run=0, imbalance=0.0
        )
        with pytest.raises(NearSingularError):
            dec.solve_p(np.ones(2))
