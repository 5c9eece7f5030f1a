"""Independent oracles shared by the test modules.

These deliberately avoid the library's own code paths: Gaussian moments
come from the mean/variance recursion on numbers, determinants from the
permutation sum, and derivatives from central differences.
"""

from itertools import permutations

import numpy as np

from nambu_dyn.poly import Poly


def gaussian_moment(n: int, mean: float, var: float) -> float:
    """E[q^n] for a normal distribution via m_k = mean m_{k-1} + (k-1) var m_{k-2}."""
    m_prev, m_curr = 1.0, mean
    if n == 0:
        return m_prev
    for k in range(2, n + 1):
        m_prev, m_curr = m_curr, mean * m_curr + (k - 1) * var * m_prev
    return m_curr


def perm_sign(perm) -> int:
    inversions = sum(
        1
        for a in range(len(perm))
        for b in range(a + 1, len(perm))
        if perm[a] > perm[b]
    )
    return -1 if inversions % 2 else 1


def det_by_permutations(matrix: np.ndarray) -> float:
    """Brute-force determinant, independent of any LU code."""
    n = matrix.shape[0]
    total = 0.0
    for perm in permutations(range(n)):
        prod = perm_sign(perm)
        for row, col in enumerate(perm):
            prod *= matrix[row, col]
        total += prod
    return total


def central_difference(fn, x: float, step: float = 1e-5) -> float:
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def random_poly(rng, variables, max_degree=2, n_terms=4, scale=1.0) -> Poly:
    """Random sparse polynomial of bounded total degree, coefficients in
    [-scale, scale]."""
    out = Poly.zero()
    for _ in range(n_terms):
        degree = int(rng.integers(0, max_degree + 1))
        powers = {}
        for _ in range(degree):
            v = variables[int(rng.integers(0, len(variables)))]
            powers[v] = powers.get(v, 0) + 1
        out = out + Poly.monomial(powers, float(rng.uniform(-scale, scale)))
    return out
