import numpy as np
import pytest

from helpers import random_instance, relative_error, summand_magnitude
from pairgvt.kernels import KERNEL_NAMES, decompose, kernel_value, pairwise_matvec
from pairgvt.oracle import build_explicit, explicit_matvec
from pairgvt.types import PairSample


def test_kronecker_single():
    s = PairSample([0], [0])
    K = build_explicit("kronecker", [[2.0]], [[3.0]], s, s)
    assert K.matrix.tolist() == [[6.0]]


def test_linear_delta_grid():
    grid = PairSample([0, 0, 1, 1], [0, 1, 0, 1])
    K = build_explicit("linear", np.eye(2), np.eye(2), grid, grid).matrix
    assert K.shape == (4, 4)
    assert set(np.unique(K).tolist()) <= {0.0, 1.0, 2.0}
    np.testing.assert_array_equal(np.diag(K), 2.0)
    assert K[0, 3] == 0.0 and K[0, 1] == 1.0


def test_explicit_matvec_examples():
    assert explicit_matvec(np.array([[6.0]]), [2.0]).tolist() == [12.0]
    v = np.array([1.5, -2.0, 3.0])
    np.testing.assert_array_equal(explicit_matvec(np.eye(3), v), v)
    with pytest.raises(ValueError):
        explicit_matvec(np.eye(3), [1.0])


def test_explicit_matvec_double_loop():
    rng = np.random.default_rng(6)
    K, v = rng.standard_normal((5, 7)), rng.standard_normal(7)
    ref = [sum(K[i, j] * v[j] for j in range(7)) for i in range(5)]
    np.testing.assert_allclose(explicit_matvec(K, v), ref, rtol=1e-13)


@pytest.mark.parametrize("name", KERNEL_NAMES)
def test_entries_match_scalar_formula(name):
    rng = np.random.default_rng(17)
    for _ in range(10):
        D, T, out_s, in_s = random_instance(rng, name, max_pairs=6)
        K = build_explicit(name, D, T, out_s, in_s).matrix
        for i, a in enumerate(zip(out_s.first_ids, out_s.second_ids)):
            for j, b in enumerate(zip(in_s.first_ids, in_s.second_ids)):
                assert K[i, j] == pytest.approx(kernel_value(name, D, T, a, b), abs=1e-12)


@pytest.mark.parametrize("name", KERNEL_NAMES)
def test_gvt_agrees_with_oracle(name):
    rng = np.random.default_rng(1000 + KERNEL_NAMES.index(name))
    spec = decompose(name)
    for trial in range(200):
        D, T, out_s, in_s = random_instance(rng, name, distinct=trial % 2 == 0)
        v = rng.standard_normal(len(in_s))
        e = explicit_matvec(build_explicit(name, D, T, out_s, in_s), v)
        u = pairwise_matvec(spec, D, T, out_s, in_s, v)
        assert relative_error(u, e, summand_magnitude(name, D, T, out_s, in_s), v) <= 1e-10
