import math
import warnings

import numpy as np
import pytest

from sparse_sysid.exceptions import InvalidArgument
from sparse_sysid.hammerstein import (
    BasisFunction,
    BoundInputs,
    HammersteinModel,
    IoRecord,
    UnstableModelError,
    bound_terms,
    effective_basis,
    build_regressors,
    growth_ratios,
    inequality_threshold,
    monomial_basis,
    n0_bound,
    n0_optimal,
    noneffective_basis,
    optimal_m_const,
    pack_theta,
    recover_factors,
    regressor_arrays,
    register_basis,
    run_pipeline,
    simulate,
    unpack_M,
    within_band,
)
from sparse_sysid.linalg import jacobi_eigh
from sparse_sysid.rls import batch_ls
from sparse_sysid.sparsifier import ThresholdSchedule, sparsify


def _model(a=(0.5, -0.2), b=(2.0, 1.0), c=(2.0, 0.0, -2.0, 0.0, 2.0)):
    return HammersteinModel(np.array(a), np.array(b), np.array(c), monomial_basis(len(c)))


class TestSimulate:
    def test_zero_system_outputs_noise(self):
        m = HammersteinModel([0.0], [1.0], [0.0], monomial_basis(1))
        io = simulate(m, np.full(5, 0.3), np.zeros(5))
        np.testing.assert_array_equal(io.y, 0.0)

    def test_pure_delay_passthrough(self):
        m = HammersteinModel([], [1.0], [1.0], monomial_basis(1))
        u = np.array([0.1, 0.2, 0.3, 0.4])
        io = simulate(m, u, np.zeros(4))
        np.testing.assert_allclose(io.y, [0.0, 0.1, 0.2, 0.3])

    def test_fixed_point(self):
        # y = 0.5 y + f(1) with f(1) = 2 settles at 4
        m = HammersteinModel([0.5], [1.0], [2.0], monomial_basis(1))
        io = simulate(m, np.ones(200), np.zeros(200))
        assert io.y[-1] == pytest.approx(4.0, abs=1e-12)

    def test_initial_conditions(self):
        m = HammersteinModel([0.5, 0.25], [1.0], [0.0], monomial_basis(1))
        io = simulate(m, np.zeros(2), np.zeros(2), y_init=[4.0, 8.0])
        # y1 = 0.5*4 + 0.25*8, y2 = 0.5*y1 + 0.25*4
        np.testing.assert_allclose(io.y, [4.0, 3.0])

    def test_domain_checked(self):
        with pytest.raises(InvalidArgument):
            simulate(_model(), np.array([1.5]), np.zeros(1))


class TestModel:
    def test_unstable_rejected_with_roots(self):
        with pytest.raises(UnstableModelError) as info:
            HammersteinModel([1.1], [1.0], [1.0], monomial_basis(1))
        assert np.min(np.abs(info.value.roots)) < 1.0

    def test_stable_second_order(self):
        m = _model()
        assert (m.p, m.q, m.m) == (2, 2, 5)

    def test_dependent_basis_warns(self):
        basis = [BasisFunction("monomial", {"power": 1}), BasisFunction("monomial", {"power": 1})]
        with pytest.warns(UserWarning):
            HammersteinModel([], [1.0], [1.0, 1.0], basis)

    def test_legendre_and_custom(self):
        g = BasisFunction("legendre", {"degree": 2}, (0.0, 2.0))
        # P2(t) = (3 t^2 - 1)/2 with t = x - 1
        np.testing.assert_allclose(g([0.0, 1.0, 2.0]), [1.0, -0.5, 1.0])
        register_basis("tanh", np.tanh)
        h = BasisFunction("custom", {"name": "tanh"})
        assert h(0.5) == pytest.approx(math.tanh(0.5))
        with pytest.raises(InvalidArgument):
            BasisFunction("custom", {"name": "missing"})

    def test_dict_roundtrip(self):
        m = _model()
        back = HammersteinModel.from_dict(m.to_dict())
        np.testing.assert_array_equal(back.c, m.c)
        assert back.basis == m.basis


class TestRegressors:
    def test_dimension_and_values(self):
        io = IoRecord(u=np.array([0.1, 0.2, 0.3, 0.4]), y=np.array([1.0, 2.0, 3.0, 4.0]))
        basis = monomial_basis(2)
        phi, y = regressor_arrays(io, 2, 2, basis)
        assert phi.shape == (2, 2 + 2 * 2)
        # k = 2: (y2, y1, u2, u2^2, u1, u1^2) -> y3
        np.testing.assert_allclose(phi[0], [2.0, 1.0, 0.2, 0.04, 0.1, 0.01])
        np.testing.assert_array_equal(y, [3.0, 4.0])
        assert len(build_regressors(io, 2, 2, basis)) == 2

    def test_regression_reproduces_simulation(self):
        m = _model()
        rng = np.random.default_rng(4)
        u = rng.uniform(-1, 1, 50)
        io = simulate(m, u, np.zeros(50))
        phi, y = regressor_arrays(io, m.p, m.q, m.basis)
        np.testing.assert_allclose(phi @ pack_theta(m).theta, y, atol=1e-12)

    def test_least_squares_consistent(self):
        m = _model()
        n = 4000
        rng = np.random.default_rng(11)
        io = simulate(m, rng.uniform(-1, 1, n + 2), math.sqrt(0.1) * rng.standard_normal(n + 2))
        samples = build_regressors(io, m.p, m.q, m.basis)
        theta = batch_ls(samples, np.zeros(12), 100.0)
        err = np.abs(theta - pack_theta(m).theta)
        assert err[:2].max() < 2 / math.sqrt(n)


class TestPacking:
    def test_pack_layout(self):
        m = HammersteinModel([0.3], [1.0, 2.0], [1.0, 0.0, 3.0], monomial_basis(3))
        np.testing.assert_array_equal(pack_theta(m).theta, [0.3, 1, 0, 3, 2, 0, 6])

    def test_unpack_roundtrip(self):
        m = _model()
        packed = pack_theta(m)
        np.testing.assert_array_equal(unpack_M(packed.theta, 2, 2, 5), np.outer(m.b, m.c))
        with pytest.raises(InvalidArgument):
            unpack_M(packed.theta[:-1], 2, 2, 5)

    def test_noneffective(self):
        beta = np.array([0.5, 0.0, 1.0, 0.0, 2.0, 0.0])
        assert noneffective_basis(beta, 2, 1, 4) == frozenset({2, 4})
        est = sparsify([0.5, 0.0, 1.0, 0.01, 2.0, 0.0], 0.1)
        assert noneffective_basis(est, 2, 1, 4) == frozenset({2, 4})
        assert noneffective_basis(np.ones(6), 2, 2, 2) == frozenset()

    def test_contract_examples(self):
        assert effective_basis(np.zeros(2 + 2 * 3), 2, 2, 3) == frozenset({1, 2, 3})
        m = HammersteinModel([0.1], [1.0, 2.0], [3.0, 0.0, 4.0], monomial_basis(3))
        assert effective_basis(pack_theta(m).theta, 1, 2, 3) == frozenset({2})


class TestRecoverFactors:
    def test_exact_rank_one(self):
        b, c = recover_factors([[3.0, 0.0, 4.0], [6.0, 0.0, 8.0]])
        np.testing.assert_allclose(b, np.array([1.0, 2.0]) / math.sqrt(5), atol=1e-12)
        np.testing.assert_allclose(c, math.sqrt(5) * np.array([3.0, 0.0, 4.0]), atol=1e-12)

    def test_random_rank_one(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            b0 = rng.standard_normal(rng.integers(1, 5))
            c0 = rng.standard_normal(rng.integers(1, 7))
            M = np.outer(b0, c0)
            b, c = recover_factors(M)
            np.testing.assert_allclose(np.outer(b, c), M, atol=1e-8 * np.abs(M).max())
            assert np.linalg.norm(b) == pytest.approx(1.0)

    def test_identity_residual(self):
        b, c = recover_factors(np.diag([2.0, 1.0]))
        resid = np.diag([2.0, 1.0]) - np.outer(b, c)
        assert np.linalg.norm(resid) == pytest.approx(1.0, abs=1e-10)

    def test_against_jacobi_svd(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            M = rng.standard_normal((3, 5))
            w, v = jacobi_eigh(M.T @ M)
            sigma = math.sqrt(w[-1])
            b, c = recover_factors(M)
            assert np.linalg.norm(c) == pytest.approx(sigma, rel=1e-8)
            assert abs(abs(c @ v[:, -1]) - sigma) < 1e-7 * sigma

    def test_zero_matrix(self):
        with pytest.raises(InvalidArgument):
            recover_factors(np.zeros((2, 2)))


class TestBound:
    def test_all_ones(self):
        value = n0_bound(BoundInputs(1, 1, 1, 1, 1, 0.25))
        # k1 = 1, k2 = 16 and the last term is 32 log 16
        assert value == pytest.approx(32 * math.log(16), rel=1e-14)
        assert value == pytest.approx(88.7228, abs=1e-3)

    def test_optimal_all_ones(self):
        assert n0_optimal(1, 1, 1, 1, 0.25) == 47.0

    def test_optimal_constant_balances(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            c0, c5 = np.exp(rng.uniform(-3, 3, 2))
            eps = rng.uniform(0.01, 0.49)
            m = optimal_m_const(c0, c5, eps)
            t = bound_terms(BoundInputs(c0, 1.0, 1.0, c5, m, eps))
            assert t["k1"] == pytest.approx(4 * c0 / c5**2, rel=1e-9)
            assert t["k2"] == pytest.approx(4 * c0 / c5**2, rel=1e-9)

    def test_optimal_is_minimum(self):
        c0, c2, c3, c5, eps = 2.0, 1.5, 0.3, 0.4, 0.2
        best = n0_optimal(c0, c2, c3, c5, eps)
        m_star = optimal_m_const(c0, c5, eps)
        for f in (0.5, 0.9, 1.1, 2.0):
            assert n0_bound(BoundInputs(c0, c2, c3, c5, f * m_star, eps)) >= best

    def test_monotone_in_c0_and_c5(self):
        base = dict(c2=1.0, c3=0.5, epsilon=0.25)
        assert n0_optimal(c0=4.0, c5=1.0, **base) > n0_optimal(c0=2.0, c5=1.0, **base)
        assert n0_optimal(c0=2.0, c5=0.5, **base) > n0_optimal(c0=2.0, c5=1.0, **base)

    @pytest.mark.parametrize("t", [0.5, 1, 10, 100])
    def test_inequality_scan(self, t):
        n = np.arange(math.floor(inequality_threshold(t)) + 1, 200_001, dtype=float)
        assert np.all(np.log(n) / n < 1.0 / t)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidArgument):
            BoundInputs(1, 1, 1, 1, 1, 0.5)
        with pytest.raises(InvalidArgument):
            BoundInputs(0, 1, 1, 1, 1, 0.25)


class TestPipeline:
    def test_growth_band(self):
        run = run_pipeline(_model(), 3000, 0.1, 0, ThresholdSchedule("log_over_n", epsilon=0.25))
        _, rn, lm = growth_ratios(run.trajectory, start=500)
        assert within_band(rn) and within_band(lm)
        assert run.noneffective == frozenset({2, 4})

    def test_within_band(self):
        assert within_band([1.0, 2.0, 5.0])
        assert not within_band([1.0, 1.0, 100.0])

    def test_noise_free_error_shrinks(self):
        sched = ThresholdSchedule("log_over_n", epsilon=0.25)
        truth = np.outer(_model().b, _model().c)
        errs = []
        for n in (300, 3000):
            run = run_pipeline(_model(), n, 0.0, 1, sched)
            errs.append(np.linalg.norm(run.M_hat - truth))
        assert errs[1] < errs[0]
