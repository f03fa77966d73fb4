"""Reference computations kept independent of the code under test."""

import itertools
import math

import mpmath as mp
import numpy as np


def legendre_mp(n_max, x, dps=34):
    """P_0..P_{n_max} at x with mpmath at ~twice double precision."""
    with mp.workdps(dps):
        x = mp.mpf(x)
        out = [mp.mpf(1), x]
        for k in range(1, n_max):
            out.append(((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1))
        return out[: n_max + 1]


def gegenbauer_normalized_mp(n, d, x, dps=34):
    with mp.workdps(dps):
        lam = mp.mpf(d - 1) / 2
        return mp.gegenbauer(n, lam, x) / mp.gegenbauer(n, lam, 1)


def harmonic_dim_by_kernel(d, n):
    """dim ker(Laplacian) on homogeneous degree-n polynomials in d + 1 variables."""
    m = d + 1
    def monomials(deg):
        return [a for a in itertools.product(range(deg + 1), repeat=m) if sum(a) == deg]
    src = monomials(n)
    if n < 2:
        return len(src)
    dst = {a: i for i, a in enumerate(monomials(n - 2))}
    lap = np.zeros((len(dst), len(src)))
    for j, a in enumerate(src):
        for i in range(m):
            if a[i] >= 2:
                b = list(a)
                b[i] -= 2
                lap[dst[tuple(b)], j] += a[i] * (a[i] - 1)
    return len(src) - np.linalg.matrix_rank(lap)


def sl3_order(n):
    """|SL3(Z/nZ)| via CRT and the prime-power lift: q^8 per extra power of q."""
    order = 1
    m = n
    q = 2
    while m > 1:
        k = 0
        while m % q == 0:
            m //= q
            k += 1
        if k:
            order *= q**3 * (q * q - 1) * (q**3 - 1) * q ** (8 * (k - 1))
        q += 1
    return order


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def sinh_ratio_mp(a, b, dps=34):
    with mp.workdps(dps):
        return mp.sinh(a) / mp.sinh(b)


