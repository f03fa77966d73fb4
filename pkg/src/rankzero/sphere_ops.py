"""Zonal averaging operators T_delta on L2(S^d), handled through their band spectrum.

T_delta averages a function over the slice {y : <x, y> = delta}.  It commutes
with rotations, so it acts on the degree-n spherical harmonics by the scalar
R_n(delta) (normalized zonal polynomial).  Operator and Schatten norms of
T_delta - T_0 therefore reduce to weighted sums over bands; no matrix is ever
built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import orthopoly
from .orthopoly import DomainError

__all__ = [
    "EXPONENT_MARGIN",
    "QuadratureError",
    "BandSpectrum",
    "SchattenEstimate",
    "harmonic_dimension",
    "multiplicity_envelope",
    "schatten_threshold",
    "spectrum",
    "op_norm_diff",
    "op_norm_diff_many",
    "schatten_norm_diff",
    "schatten_sweep",
    "fit_delta_exponent",
    "partial_sum_curve",
    "funk_hecke_oracle",
]

EXPONENT_MARGIN = 1e-6
BLOCK = 4096


class QuadratureError(RuntimeError):
    pass


def harmonic_dimension(d: int, n):
    """Dimension of degree-n spherical harmonics on S^d (in d + 1 variables).

    binom(n + d, d) - binom(n + d - 2, d) = (2n + d - 1) (n + d - 2)! / (n! (d - 1)!).
    Returned as a Python int for scalar n, int64 array otherwise.
    """
    if d < 2:
        raise DomainError("d must be >= 2")
    if np.ndim(n) == 0:
        n = int(n)
        if n < 0:
            raise DomainError("degree must be >= 0")
        return math.comb(n + d, d) - (math.comb(n + d - 2, d) if n >= 2 else 0)
    n = np.asarray(n, dtype=np.int64)
    out = np.ones(n.shape, dtype=np.int64)
    out *= 2 * n + d - 1
    for j in range(1, d - 1):
        out *= n + j
    # (n+1)...(n+d-2) is divisible by (d-2)!, so the division is exact
    return out // math.factorial(d - 1)


def multiplicity_envelope(d: int, n_min: int) -> float:
    """A with harmonic_dimension(d, n) <= A n^(d-1) for every n >= n_min >= 1.

    The ratio (2 + (d-1)/n) prod_{j<d-1} (1 + j/n) / (d-1)! decreases in n.
    """
    ratio = 2.0 + (d - 1) / n_min
    for j in range(1, d - 1):
        ratio *= 1.0 + j / n_min
    return ratio / math.factorial(d - 1)


def schatten_threshold(d: int) -> float:
    """Critical Schatten exponent 2 + 2 / (d - 1) for T_delta - T_0 on S^d."""
    return 2.0 + 2.0 / (d - 1)


def _check_delta(delta, limit=1.0, closed=False):
    delta = float(delta)
    ok = abs(delta) <= limit if closed else abs(delta) < limit
    if not (math.isfinite(delta) and ok):
        raise DomainError(f"delta={delta!r} outside the allowed range (|delta| {'<=' if closed else '<'} {limit})")
    return delta


@dataclass(frozen=True)
class BandSpectrum:
    d: int
    delta: float
    eigenvalues: np.ndarray
    multiplicities: np.ndarray

    @property
    def n_cut(self) -> int:
        return len(self.eigenvalues) - 1

    def bands(self) -> list[tuple[float, int]]:
        return [(float(e), int(m)) for e, m in zip(self.eigenvalues, self.multiplicities)]


def spectrum(d: int, delta: float, n_cut: int) -> BandSpectrum:
    """Bands 0..n_cut of T_delta on S^d: (R_n(delta), dim of degree-n harmonics)."""
    fam = orthopoly.family(d)
    delta = _check_delta(delta)
    if n_cut < 0:
        raise DomainError("n_cut must be >= 0")
    ev = orthopoly.eval_table(fam, n_cut, np.array(delta))
    return BandSpectrum(d, delta, ev, harmonic_dimension(d, np.arange(n_cut + 1)))


def _band_differences(d, deltas, n_cut):
    """Yield (n_block, |R_n(delta) - R_n(0)|) blocks, shape (len(block), len(deltas))."""
    fam = orthopoly.family(d)
    pts = np.concatenate([np.asarray(deltas, dtype=float), [0.0]])
    buf = []
    start = 1
    for n, vals in orthopoly.iter_values(fam, n_cut, pts):
        if n == 0:
            continue
        buf.append(np.abs(vals[:-1] - vals[-1]))
        if len(buf) == BLOCK or n == n_cut:
            yield np.arange(start, n + 1), np.array(buf)
            start = n + 1
            buf = []


def op_norm_diff(d: int, delta: float, n_cut: int) -> tuple[float, float]:
    """(max band gap over 1..n_cut, certified upper bound for ||T_delta - T_0||).

    The certified value also covers every band above n_cut.
    """
    delta = _check_delta(delta, closed=True)
    sup, tail = orthopoly.holder_sup(orthopoly.family(d), delta, n_cut)
    return sup, max(sup, tail)


def op_norm_diff_many(d: int, deltas, n_cut: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized op_norm_diff over many deltas, sharing one recurrence pass."""
    deltas = np.array([_check_delta(x, closed=True) for x in np.atleast_1d(deltas)])
    sup, tail = orthopoly.holder_sup_many(orthopoly.family(d), deltas, n_cut)
    return sup, np.maximum(sup, tail)


@dataclass(frozen=True)
class SchattenEstimate:
    d: int
    p: float
    delta: float
    n_cut: int
    partial_sum: float
    tail_bound: float
    norm_upper: float
    convergent: bool

    @property
    def norm_lower(self) -> float:
        """partial_sum^(1/p): the truncated sum never exceeds the full one."""
        return self.partial_sum ** (1.0 / self.p)

    def row(self) -> dict:
        return {
            "delta": self.delta,
            "p": self.p,
            "n_cut": self.n_cut,
            "partial_sum": self.partial_sum,
            "tail_bound": self.tail_bound,
            "norm_upper": self.norm_upper,
            "convergent": self.convergent,
        }


def _schatten_tail(d, p, delta, n_cut):
    """Bound for sum_{n > n_cut} mult(n) |R_n(delta) - R_n(0)|^p, or inf.

    Termwise |R_n(delta) - R_n(0)| <= 2 K c_delta n^(-lam) (decay_bound envelope),
    mult(n) <= A n^(d-1), and sum_{n>N} n^(-e) <= N^(1-e) / (e - 1) for e > 1.
    """
    lam = (d - 1) / 2.0
    e = lam * p - (d - 1)
    if e - 1.0 <= EXPONENT_MARGIN:
        return math.inf
    if delta == 0.0:
        return 0.0
    if d == 2:
        amp = 2.0 * math.sqrt(2.0 / math.pi) * (1.0 - delta * delta) ** -0.25
    else:
        amp = 2.0 * orthopoly.decay_constant(d) * (1.0 - delta * delta) ** -lam
    a = multiplicity_envelope(d, n_cut + 1)
    return a * amp**p * n_cut ** (1.0 - e) / (e - 1.0)


def schatten_sweep(d: int, p_values, deltas, n_cut: int) -> list[SchattenEstimate]:
    """Schatten estimates for every (delta, p) pair, sharing one band scan.

    Block sums are accumulated in index order so the result does not depend on
    how the bands are chunked.
    """
    deltas = [_check_delta(x, 0.5, closed=True) for x in np.atleast_1d(deltas)]
    p_values = [float(p) for p in np.atleast_1d(p_values)]
    if any(p <= 0 for p in p_values):
        raise DomainError("p must be positive")
    if n_cut < 1:
        raise DomainError("n_cut must be >= 1")
    sums = np.zeros((len(p_values), len(deltas)))
    for ns, diffs in _band_differences(d, deltas, n_cut):
        mult = harmonic_dimension(d, ns).astype(float)[:, None]
        for i, p in enumerate(p_values):
            sums[i] += np.sum(mult * diffs**p, axis=0)
    out = []
    for j, delta in enumerate(deltas):
        for i, p in enumerate(p_values):
            tail = _schatten_tail(d, p, delta, n_cut)
            ps = float(sums[i, j])
            convergent = math.isfinite(tail)
            upper = (ps + tail) ** (1.0 / p) if convergent else math.inf
            out.append(SchattenEstimate(d, p, delta, n_cut, ps, tail, upper, convergent))
    return out


def schatten_norm_diff(d: int, p: float, delta: float, n_cut: int) -> SchattenEstimate:
    """Certified upper estimate of ||T_delta - T_0||_{S_p} on L2(S^d).

    convergent is False (and the tail infinite) when p does not exceed
    2 + 2/(d-1) by the exponent margin; the partial sum is still reported.
    """
    return schatten_sweep(d, [p], [delta], n_cut)[0]


def fit_delta_exponent(estimates) -> float:
    """Least-squares slope of log(norm_upper) against log(delta)."""
    x = np.log([e.delta for e in estimates])
    y = np.log([e.norm_upper for e in estimates])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def partial_sum_curve(d: int, p: float, delta: float, cuts) -> list[float]:
    """Partial sums sum_{n<=N} mult(n) |R_n(delta) - R_n(0)|^p at each N in ``cuts``."""
    cuts = sorted(int(c) for c in cuts)
    delta = _check_delta(delta, 0.5, closed=True)
    total = 0.0
    out = []
    k = 0
    for ns, diffs in _band_differences(d, [delta], cuts[-1]):
        terms = harmonic_dimension(d, ns) * diffs[:, 0] ** p
        lo = 0
        while k < len(cuts) and cuts[k] <= ns[-1]:
            hi = cuts[k] - ns[0] + 1
            total += float(np.sum(terms[lo:hi]))
            lo = hi
            out.append(total)
            k += 1
        total += float(np.sum(terms[lo:]))
    return out


def _orthonormal_frame(x):
    """Two unit vectors spanning the plane orthogonal to the unit vector x."""
    a = np.array([1.0, 0.0, 0.0]) if abs(x[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - np.dot(a, x) * x
    u /= np.linalg.norm(u)
    return u, np.cross(x, u)


_CANDIDATE_ANGLES = (0.2, 0.45, 0.7, 0.95, 1.2)


def funk_hecke_oracle(n: int, delta: float, quad_points: int = 256, d: int = 2) -> float:
    """Average a degree-n zonal harmonic over a circle on S^2, by quadrature.

    Returns avg_{<x,y>=delta} Z(y) / Z(x), where Z(y) = P_n(<e, y>) has its pole e
    at one of a few fixed angles from x (whichever keeps |Z(x)| largest).  Z is
    evaluated with scipy's Legendre routine, so the check is independent of the
    recurrence in ``orthopoly``.  The circle integrand is a trigonometric polynomial
    of degree n, so the trapezoid rule is exact once quad_points > n; the error
    estimate compares quad_points against quad_points // 2 nodes.
    """
    from scipy.special import eval_legendre

    if d != 2:
        raise DomainError("the quadrature oracle is implemented for S^2 only")
    if not 0 <= n <= 50:
        raise DomainError("n must be in [0, 50]")
    if quad_points < 256:
        raise DomainError("quad_points must be >= 256")
    delta = _check_delta(delta, closed=True)

    angle = max(_CANDIDATE_ANGLES, key=lambda a: abs(eval_legendre(n, math.cos(a))))
    x = np.array([0.0, 0.0, 1.0])
    e = np.array([math.sin(angle), 0.0, math.cos(angle)])
    u, v = _orthonormal_frame(x)
    rho = math.sqrt(max(0.0, 1.0 - delta * delta))

    def circle_mean(m):
        phi = 2.0 * np.pi * np.arange(m) / m
        y = delta * x[None, :] + rho * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v)
        return float(np.mean(eval_legendre(n, np.clip(y @ e, -1.0, 1.0))))

    zx = float(eval_legendre(n, math.cos(angle)))
    fine = circle_mean(quad_points) / zx
    coarse = circle_mean(quad_points // 2) / zx
    if abs(fine - coarse) > 1e-8:
        raise QuadratureError(f"quadrature error estimate {abs(fine - coarse):.3e} exceeds 1e-8")
    return fine
