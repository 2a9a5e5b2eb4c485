"""Shared instance generators and error measures for the test suite."""

import numpy as np

from pairgvt.kernels import HOMOGENEOUS_KERNELS, decompose
from pairgvt.types import PairSample


def psd(rng, k, rank=None):
    G = rng.standard_normal((rank or k, k))
    return G.T @ G


def random_instance(rng, name, max_objects=6, max_pairs=20, distinct=True):
    """Random base kernels and out/in pair samples suited to kernel ``name``."""
    homogeneous = decompose(name).requires_homogeneous
    m = int(rng.integers(1, max_objects + 1))
    D = psd(rng, m)
    if homogeneous:
        q, T = m, None
    else:
        q = int(rng.integers(1, max_objects + 1))
        T = psd(rng, q)
    n_in = int(rng.integers(1, max_pairs + 1))
    n_out = int(rng.integers(1, max_pairs + 1))
    in_s = PairSample(rng.integers(0, m, n_in), rng.integers(0, q, n_in), homogeneous=homogeneous)
    if distinct:
        out_s = PairSample(rng.integers(0, m, n_out), rng.integers(0, q, n_out),
                           homogeneous=homogeneous)
    else:
        out_s = in_s
    return D, T, out_s, in_s


def summand_magnitude(name, D, T, out_s, in_s):
    """Entrywise sum of absolute values of the scalar summands of each kernel entry.

    This is the floating-point error scale of any evaluation order, and stays
    positive where the kernel value itself cancels to zero.
    """
    key = decompose(name).name
    T = D if T is None else T
    a, a2 = out_s.first_ids, out_s.second_ids
    b, b2 = in_s.first_ids, in_s.second_ids
    if key in HOMOGENEOUS_KERNELS:
        k11, k22 = np.abs(D[np.ix_(a, b)]), np.abs(D[np.ix_(a2, b2)])
        k12, k21 = np.abs(D[np.ix_(a, b2)]), np.abs(D[np.ix_(a2, b)])
        if key in ("symmetric", "antisymmetric"):
            return k11 * k22 + k12 * k21
        s = k11 + k12 + k21 + k22
        return s if key == "ranking" else s * s
    kd, kt = np.abs(D[np.ix_(a, b)]), np.abs(T[np.ix_(a2, b2)])
    if key == "poly2d":
        return (kd + kt) ** 2
    if key == "kronecker":
        return kd * kt
    return kd + kt


def relative_error(u, e, magnitude, v):
    """``||u - e|| / || |K| |v| ||`` with |K| the summand magnitude matrix."""
    scale = np.linalg.norm(magnitude @ np.abs(v))
    diff = np.linalg.norm(np.asarray(u) - np.asarray(e))
    if scale == 0.0:
        return diff
    return diff / scale
