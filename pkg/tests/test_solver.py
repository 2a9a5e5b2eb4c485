import numpy as np
import pytest
import scipy.sparse.linalg as spla

from helpers import psd, random_instance
from pairgvt.evaluation import generate_synthetic
from pairgvt.kernels import KERNEL_NAMES, decompose
from pairgvt.oracle import explicit_matrix
from pairgvt.solver import (EarlyStopper, SymmetricOperator, fit_early_stopping, minres_solve,
                            predict, ridge_fit, symmetry_defect, train_operator)
from pairgvt.types import PairSample


def labelled(sample, y):
    return PairSample(sample.first_ids, sample.second_ids, y, sample.homogeneous)


class TestMinres:
    def test_scaled_identity_one_iteration(self):
        y = np.array([3.0, -1.0, 4.0, 1.5])
        res = minres_solve(SymmetricOperator.from_matrix(2 * np.eye(4)), y)
        np.testing.assert_allclose(res.x, y / 2, rtol=1e-15)
        assert res.iterations == 1
        assert res.converged

    def test_zero_rhs(self):
        res = minres_solve(SymmetricOperator.from_matrix(np.eye(3)), np.zeros(3))
        assert res.x.tolist() == [0.0, 0.0, 0.0]
        assert res.iterations == 0

    def test_spd_against_dense_solve(self):
        rng = np.random.default_rng(42)
        A = psd(rng, 6) + 0.5 * np.eye(6)
        y = rng.standard_normal(6)
        res = minres_solve(SymmetricOperator.from_matrix(A), y, rel_tol=1e-10)
        np.testing.assert_allclose(res.x, np.linalg.solve(A, y), rtol=1e-8, atol=1e-10)

    def test_indefinite_matches_scipy(self):
        rng = np.random.default_rng(9)
        Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
        A = Q @ np.diag(np.linspace(-3, 5, 30)) @ Q.T
        y = rng.standard_normal(30)
        ours = minres_solve(SymmetricOperator.from_matrix(A), y, max_iter=12, rel_tol=0)
        ref, _ = spla.minres(A, y, maxiter=12, rtol=0.0)
        np.testing.assert_allclose(ours.x, ref, rtol=1e-8, atol=1e-10)

    def test_residual_history_non_increasing_and_exact(self):
        rng = np.random.default_rng(10)
        A = psd(rng, 40, rank=25) + 1e-3 * np.eye(40)
        y = rng.standard_normal(40)
        snaps = []
        res = minres_solve(SymmetricOperator.from_matrix(A), y, max_iter=30, rel_tol=0,
                           snapshot=lambda k, x: snaps.append((k, x.copy())))
        r = np.array(res.residuals)
        assert np.all(np.diff(r) <= 1e-12 * r[0])
        assert [k for k, _ in snaps] == list(range(1, res.iterations + 1))
        for k, x in snaps[:10]:
            true = np.linalg.norm(y - A @ x)
            assert true == pytest.approx(r[k], rel=1e-6, abs=1e-10 * r[0])

    def test_snapshot_can_stop(self):
        A = np.diag(np.arange(1.0, 11.0))
        res = minres_solve(SymmetricOperator.from_matrix(A), np.ones(10),
                           snapshot=lambda k, x: k == 3)
        assert res.iterations == 3 and res.stopped_by_callback

    def test_breakdown_flag(self):
        # two distinct eigenvalues: exact solution after two Lanczos steps
        A = np.diag([1.0, 1.0, 5.0, 5.0])
        res = minres_solve(SymmetricOperator.from_matrix(A), np.ones(4), rel_tol=0)
        assert res.breakdown and res.iterations == 2
        np.testing.assert_allclose(res.x, [1, 1, 0.2, 0.2], rtol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            minres_solve(SymmetricOperator.from_matrix(np.eye(2)), np.ones(3))


@pytest.mark.parametrize("name", KERNEL_NAMES)
def test_operator_symmetry(name):
    rng = np.random.default_rng(3)
    D, T, _, s = random_instance(rng, name)
    op = train_operator(decompose(name), D, T, s, 0.1)
    assert symmetry_defect(op, rng) <= 1e-8


class TestRidgeFit:
    def test_single_pair(self):
        s = PairSample([0], [0], [2.0])
        model = ridge_fit(s, "kronecker", [[1.0]], [[1.0]], lam=1.0)
        np.testing.assert_allclose(model.dual, [1.0], rtol=1e-14)

    def test_orthonormal_lambda_zero(self):
        s = PairSample([0, 1, 2], [0, 1, 2], [1.0, -2.0, 0.5])
        model = ridge_fit(s, "kronecker", np.eye(3), np.eye(3), lam=0.0)
        np.testing.assert_allclose(model.dual, s.labels, rtol=1e-14)

    def test_kronecker_twelve_pairs(self):
        rng = np.random.default_rng(12)
        D, T = psd(rng, 4), psd(rng, 3)
        s = PairSample(rng.integers(0, 4, 12), rng.integers(0, 3, 12), rng.standard_normal(12))
        model = ridge_fit(s, "kronecker", D, T, lam=0.1, rel_tol=1e-14)
        K = explicit_matrix("kronecker", D, T, s, s)
        np.testing.assert_allclose(model.dual, np.linalg.solve(K + 0.1 * np.eye(12), s.labels),
                                   atol=1e-6)

    @pytest.mark.parametrize("name", KERNEL_NAMES)
    def test_gvt_and_explicit_backends_agree(self, name):
        rng = np.random.default_rng(20 + KERNEL_NAMES.index(name))
        D, T, _, s = random_instance(rng, name)
        s = labelled(s, rng.standard_normal(len(s)))
        a = ridge_fit(s, name, D, T, lam=1.0, rel_tol=1e-14).dual
        b = ridge_fit(s, name, D, T, lam=1.0, rel_tol=1e-14, backend="explicit").dual
        np.testing.assert_allclose(a, b, atol=1e-8)

    def test_large_lambda_limit(self):
        rng = np.random.default_rng(13)
        D, T = psd(rng, 4), psd(rng, 4)
        s = PairSample(rng.integers(0, 4, 15), rng.integers(0, 4, 15), rng.standard_normal(15))
        lam = 1e6
        a = ridge_fit(s, "poly2d", D, T, lam=lam, rel_tol=1e-12).dual
        target = s.labels / lam
        assert np.linalg.norm(a - target) / np.linalg.norm(target) <= 1e-3

    def test_converged_residual(self):
        rng = np.random.default_rng(14)
        D, T = psd(rng, 5), psd(rng, 4)
        s = PairSample(rng.integers(0, 5, 18), rng.integers(0, 4, 18), rng.standard_normal(18))
        rel_tol, lam = 1e-8, 0.05
        model = ridge_fit(s, "kronecker", D, T, lam=lam, rel_tol=rel_tol)
        Ka = predict(model, s)
        y = s.labels
        assert np.linalg.norm(Ka - (y - lam * model.dual)) / np.linalg.norm(y) <= 10 * rel_tol

    def test_requires_labels(self):
        with pytest.raises(ValueError):
            ridge_fit(PairSample([0], [0]), "kronecker", [[1.0]], [[1.0]])

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            ridge_fit(PairSample([0], [0], [1.0]), "kronecker", [[1.0]], [[1.0]], lam=-1)


class TestPredict:
    def test_kronecker_unit_dual(self):
        rng = np.random.default_rng(15)
        D, T = psd(rng, 3), psd(rng, 4)
        train = PairSample([0], [0], [1.0])
        model = ridge_fit(train, "kronecker", D, T, lam=0.0)
        model.dual = np.array([1.0])
        test = PairSample([0, 1, 2, 2], [3, 0, 1, 3])
        expected = [D[i, 0] * T[j, 0] for i, j in zip(test.first_ids, test.second_ids)]
        np.testing.assert_allclose(predict(model, test), expected, rtol=1e-14)

    def test_zero_dual(self):
        rng = np.random.default_rng(16)
        D, T = psd(rng, 3), psd(rng, 3)
        train = PairSample([0, 1], [1, 2], [1.0, 0.0])
        model = ridge_fit(train, "poly2d", D, T)
        model.dual = np.zeros(2)
        assert predict(model, PairSample([2, 0], [0, 0])).tolist() == [0.0, 0.0]

    @pytest.mark.parametrize("name", KERNEL_NAMES)
    def test_matches_explicit_cross_kernel(self, name):
        rng = np.random.default_rng(40 + KERNEL_NAMES.index(name))
        D, T, test, train = random_instance(rng, name)
        train = labelled(train, rng.standard_normal(len(train)))
        model = ridge_fit(train, name, D, T, lam=0.5)
        e = explicit_matrix(name, D, T, test, train) @ model.dual
        u = predict(model, test)
        assert np.linalg.norm(u - e) <= 1e-10 * max(np.linalg.norm(e), 1.0)


class TestEarlyStopper:
    def test_increase_then_flat(self):
        stop = EarlyStopper(patience=3)
        scores = [0.5, 0.6, 0.7, 0.8, 0.9, 0.9, 0.9, 0.9, 0.9]
        for k, s in enumerate(scores, start=1):
            if stop.update(k, s):
                break
        assert stop.best_iteration == 5
        assert stop.last_iteration == 8

    def test_constant(self):
        stop = EarlyStopper(patience=2)
        k = 0
        while True:
            k += 1
            if stop.update(k, 0.7):
                break
        assert stop.best_iteration == 1 and k == 3

    def test_patience_validation(self):
        with pytest.raises(ValueError):
            EarlyStopper(0)


class TestFitEarlyStopping:
    def test_chessboard_few_iterations(self):
        ds = generate_synthetic("chessboard", 12, 12, seed=0)
        from pairgvt.evaluation import BaseKernelConfig, inner_split, kernel_matrices
        D, T = kernel_matrices(ds, BaseKernelConfig("linear"))
        idx = np.arange(len(ds.pairs))
        inner, val = inner_split(ds.pairs, idx, 1, 0.75, seed=0)
        best, score = fit_early_stopping(ds.pairs.subset(inner), ds.pairs.subset(val),
                                         "kronecker", D, T, lam=1e-5, patience=10)
        assert 1 <= best <= len(ds.pairs) // 4
        assert score == 1.0

    def test_degenerate_validation(self):
        s = PairSample([0, 1], [0, 1], [1.0, 0.0])
        v = PairSample([0, 1], [1, 0], [1.0, 1.0])
        with pytest.raises(ValueError, match="degenerate validation labels"):
            fit_early_stopping(s, v, "kronecker", np.eye(2), np.eye(2))
