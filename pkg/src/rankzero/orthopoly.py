"""Normalized Legendre / Gegenbauer polynomials and the inequalities built on them.

The polynomial attached to the sphere S^d is the Gegenbauer polynomial
C_n^lam with lam = (d - 1) / 2, divided by its value at 1.  For d = 2 this
is the Legendre polynomial P_n.  Everything is evaluated with the upward
three-term recurrence written directly for the normalized values

    R_{k+1}(x) = (2 (k + lam) x R_k(x) - k R_{k-1}(x)) / (k + 2 lam),

which keeps R_k(1) = 1 exactly and never forms factorial-sized coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "DomainError",
    "PolyFamily",
    "LEGENDRE",
    "family",
    "iter_values",
    "eval_table",
    "eval_poly",
    "eval_derivative",
    "bernstein_bound",
    "decay_bound",
    "decay_constant",
    "BernsteinReport",
    "check_bernstein",
    "tail_bound",
    "holder_sup",
    "holder_sup_many",
]

VIOLATION_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


@dataclass(frozen=True)
class PolyFamily:
    """Normalized zonal polynomials of the sphere S^d."""

    d: int
    lam: float = field(init=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"sphere dimension must be an integer >= 2, got {self.d!r}")
        object.__setattr__(self, "lam", (self.d - 1) / 2.0)

    @property
    def kind(self) -> str:
        return "legendre" if self.d == 2 else "gegenbauer"

    def __str__(self):
        if self.d == 2:
            return "Legendre"
        return f"Gegenbauer(lam={self.lam:g})"


LEGENDRE = PolyFamily(2)


def family(d: int) -> PolyFamily:
    return LEGENDRE if d == 2 else PolyFamily(d)


def _as_family(fam) -> PolyFamily:
    if isinstance(fam, PolyFamily):
        return fam
    return family(int(fam))


def _check_points(x, open_interval=False):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("points must be finite")
    if open_interval:
        if np.any(np.abs(x) >= 1.0):
            raise DomainError("points must lie in the open interval (-1, 1)")
    elif np.any(np.abs(x) > 1.0):
        raise DomainError("points must lie in [-1, 1]")
    return x


def _check_degree(n, lowest=0):
    if int(n) != n or n < lowest:
        raise DomainError(f"degree must be an integer >= {lowest}, got {n!r}")
    return int(n)


def iter_values(fam, n_max: int, x) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(n, R_n(x))`` for n = 0, ..., n_max.

    The yielded arrays are fresh objects; callers may keep them.
    """
    fam = _as_family(fam)
    n_max = _check_degree(n_max)
    x = _check_points(x)
    lam = fam.lam
    prev = np.ones_like(x)
    yield 0, prev
    if n_max == 0:
        return
    cur = x.copy()
    yield 1, cur
    for k in range(1, n_max):
        nxt = (2.0 * (k + lam) * x * cur - k * prev) / (k + 2.0 * lam)
        prev, cur = cur, nxt
        yield k + 1, cur


def eval_table(fam, n_max: int, x) -> np.ndarray:
    """Array of shape ``(n_max + 1,) + x.shape`` holding R_0(x), ..., R_{n_max}(x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    for n, vals in iter_values(fam, n_max, x):
        out[n] = vals
    return out


def eval_poly(fam, n: int, x):
    """Normalized polynomial of degree n at x (scalar or array)."""
    n = _check_degree(n)
    scalar = np.ndim(x) == 0
    val = None
    for _, val in iter_values(fam, n, x):
        pass
    return float(val) if scalar else val


def eval_derivative(fam, n: int, x):
    """Derivative of the normalized polynomial on the open interval (-1, 1).

    Legendre uses (1 - x^2) P_n' = -n x P_n + n P_{n-1}.  For d > 2 the
    relation d/dx C_n^lam = 2 lam C_{n-1}^{lam+1} becomes, after
    normalization, R_n' = n (n + 2 lam) / (2 lam + 1) * R_{n-1}^{(lam+1)},
    and lam + 1 is the family of S^{d+2}.
    """
    fam = _as_family(fam)
    n = _check_degree(n, lowest=1)
    scalar = np.ndim(x) == 0
    x = _check_points(x, open_interval=True)
    if fam.d == 2:
        p_prev = p_cur = None
        for k, vals in iter_values(fam, n, x):
            p_prev, p_cur = p_cur, vals
        out = (-n * x * p_cur + n * p_prev) / (1.0 - x * x)
    else:
        lam = fam.lam
        out = n * (n + 2.0 * lam) / (2.0 * lam + 1.0) * eval_poly(family(fam.d + 2), n - 1, x)
    return float(out) if scalar else out


def bernstein_bound(n, x):
    """min(1, sqrt(2 / (pi n)) (1 - x^2)^(-1/4)) for Legendre polynomials, n >= 1."""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        b = np.sqrt(2.0 / (np.pi * n)) * (1.0 - x * x) ** -0.25
    return np.minimum(1.0, b)


def decay_constant(d: int) -> float:
    """Constant K_d in |R_n(x)| <= K_d n^(-lam) (1 - x^2)^(-lam), d > 2.

    From Laplace's integral R_n(cos th) = c_lam * int_0^pi (cos th + i sin th cos phi)^n
    sin^(2 lam - 1) phi dphi, the bound 1 - u <= e^(-u), and 2 phi / pi <= sin phi <= phi
    on [0, pi/2].  This gives K_d = Gamma(lam + 1/2) / sqrt(pi) * (pi^2 / 2)^lam.
    """
    lam = (d - 1) / 2.0
    return math.gamma(lam + 0.5) / math.sqrt(math.pi) * (math.pi**2 / 2.0) ** lam


def decay_bound(fam, n, x):
    """Pointwise envelope for |R_n(x)|, n >= 1.

    Legendre: the Bernstein inequality.  Higher d: the Laplace-integral bound
    of ``decay_constant``.  Both capped at 1.
    """
    fam = _as_family(fam)
    if fam.d == 2:
        return bernstein_bound(n, x)
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    lam = fam.lam
    with np.errstate(divide="ignore"):
        b = decay_constant(fam.d) * n**-lam * (1.0 - x * x) ** -lam
    return np.minimum(1.0, b)


@dataclass
class BernsteinReport:
    n_max: int
    grid_size: int
    worst_slack: float
    worst_n: int
    worst_x: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_bernstein(n_max: int, grid, scale: float = 1.0) -> BernsteinReport:
    """Scan |P_n(x)| <= scale * bernstein_bound(n, x) for 1 <= n <= n_max over the grid.

    ``scale`` exists for fault injection; certified runs use 1.
    Violations (slack < -1e-12) are collected, not raised.
    """
    n_max = _check_degree(n_max, lowest=1)
    grid = _check_points(np.atleast_1d(grid), open_interval=True)
    worst = (math.inf, 0, 0.0)
    violations = []
    for n, vals in iter_values(LEGENDRE, n_max, grid):
        if n == 0:
            continue
        slack = scale * bernstein_bound(n, grid) - np.abs(vals)
        i = int(np.argmin(slack))
        if slack[i] < worst[0]:
            worst = (float(slack[i]), n, float(grid[i]))
        for j in np.flatnonzero(slack < -VIOLATION_TOL):
            violations.append((n, float(grid[j]), float(slack[j])))
    return BernsteinReport(n_max, grid.size, worst[0], worst[1], worst[2], violations)


def tail_bound(fam, delta, n_cut: int):
    """Bound on sup_{n > n_cut} |R_n(delta) - R_n(0)|.

    Each term is at most |R_n(delta)| + |R_n(0)|, and both envelopes decrease in n,
    so evaluating them at n_cut + 1 bounds the whole tail.  The envelope grows like
    (1 - delta^2)^(-1/4) (Legendre) and is only informative away from +-1; the cap at
    1 keeps it finite there.  delta = 0 gives an identically zero tail.
    """
    fam = _as_family(fam)
    delta = np.asarray(delta, dtype=float)
    m = n_cut + 1
    out = decay_bound(fam, m, delta) + decay_bound(fam, m, 0.0)
    return np.where(delta == 0.0, 0.0, out)


def holder_sup_many(fam, deltas, n_cut: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``holder_sup`` over an array of deltas."""
    fam = _as_family(fam)
    n_cut = _check_degree(n_cut, lowest=1)
    deltas = _check_points(np.atleast_1d(deltas))
    pts = np.concatenate([deltas, [0.0]])
    sup = np.zeros(deltas.shape)
    for n, vals in iter_values(fam, n_cut, pts):
        if n:
            np.maximum(sup, np.abs(vals[:-1] - vals[-1]), out=sup)
    return sup, tail_bound(fam, deltas, n_cut)


def holder_sup(fam, delta: float, n_cut: int) -> tuple[float, float]:
    """(sup_{1<=n<=n_cut} |R_n(delta) - R_n(0)|, bound for the remaining degrees).

    The certified quantity is max of the two.
    """
    sup, tail = holder_sup_many(fam, [delta], n_cut)
    return float(sup[0]), float(tail[0])
