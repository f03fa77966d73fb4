"""Cayley graphs of SL3(Z/nZ) and their Laplacian spectral gap.

Vertices are the group elements, packed into integers (9 residues in base n,
first entry most significant, so integer order is lexicographic order on the
entry tuples).  Vertex x is joined to x s for every generator s in a multiset S
closed under inverses; the graph is |S|-regular counting multiplicity.

Scalar Poincare constant.  We take the gradient on ordered generator-edges,
(grad f)(x, s) = f(x) - f(x s) for every vertex x and generator occurrence s, so
||grad f||^2 = sum_x sum_s (f(x) - f(xs))^2 = 2 f^T L f with L = |S| I - A.
The smallest rho with ||f - mean f|| <= rho ||grad f|| is then 1 / sqrt(2 lambda2).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

__all__ = [
    "DEFAULT_MAX_VERTICES",
    "DENSE_LIMIT",
    "SWEEP_HEADER",
    "SizeLimitError",
    "NonGeneratingError",
    "EigensolverError",
    "group_order",
    "elementary_generators",
    "encode",
    "decode",
    "mod_inverse_matrix",
    "enumerate_group",
    "RegularGraph",
    "CayleyGraph",
    "build_cayley",
    "SpectralGapResult",
    "spectral_gap",
    "dense_lambda2",
    "left_translation",
    "gap_sweep",
    "sweep_csv",
    "write_matrix_market",
    "read_matrix_market",
]

DEFAULT_MAX_VERTICES = 2_000_000
DENSE_LIMIT = 6000
ROW_BLOCK = 16384
SWEEP_HEADER = ["n", "vertices", "degree", "lambda2", "gap_normalized", "poincare_rho", "residual", "iterations"]


class SizeLimitError(RuntimeError):
    pass


class NonGeneratingError(ValueError):
    def __init__(self, reached: int, expected: int):
        super().__init__(f"generators reach a subgroup of order {reached}, group order is {expected}")
        self.reached = reached
        self.expected = expected


class EigensolverError(RuntimeError):
    pass


def _factorize(n: int) -> dict[int, int]:
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def group_order(n: int) -> int:
    """|SL3(Z/nZ)|: q^3 (q^2-1) (q^3-1) for q prime, times q^(8(k-1)) for q^k, multiplicative."""
    if n < 2:
        raise ValueError("modulus must be >= 2")
    order = 1
    for q, k in _factorize(n).items():
        order *= q**3 * (q**2 - 1) * (q**3 - 1) * q ** (8 * (k - 1))
    return order


def elementary_generators(n: int) -> list[np.ndarray]:
    """E_ij(+1), E_ij(-1) for i != j, reduced mod n: 12 matrices."""
    gens = []
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            for a in (1, -1):
                e = np.eye(3, dtype=np.int64)
                e[i, j] = a % n
                gens.append(e)
    return gens


def encode(mats: np.ndarray, n: int) -> np.ndarray:
    """Pack (..., 3, 3) residue arrays into int64 keys."""
    flat = np.asarray(mats, dtype=np.int64).reshape(-1, 9)
    weights = n ** np.arange(8, -1, -1, dtype=np.int64)
    return flat @ weights


def decode(keys, n: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    digits = np.empty(keys.shape + (9,), dtype=np.int64)
    rest = keys.copy()
    for i in range(8, -1, -1):
        digits[..., i] = rest % n
        rest //= n
    return digits.reshape(keys.shape + (3, 3))


def _det(m: np.ndarray) -> int:
    m = [[int(v) for v in row] for row in m]
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def mod_inverse_matrix(m, n: int) -> np.ndarray:
    """Inverse of a determinant-one matrix mod n (its adjugate)."""
    m = np.asarray(m, dtype=np.int64) % n
    if _det(m) % n != 1 % n:
        raise ValueError("matrix does not have determinant 1 mod n")
    adj = np.empty((3, 3), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(m, j, axis=0), i, axis=1)
            adj[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return adj % n


def _closure(n: int, gens: list[np.ndarray], max_vertices: int) -> np.ndarray:
    """Sorted keys of the subgroup generated by ``gens`` (breadth-first, right multiplication)."""
    frontier = np.eye(3, dtype=np.int64)[None]
    visited = encode(frontier, n)
    while len(frontier):
        cands = np.concatenate([(frontier @ g) % n for g in gens])
        keys = np.unique(encode(cands, n))
        new = np.setdiff1d(keys, visited, assume_unique=True)
        if not len(new):
            break
        visited = np.union1d(visited, new)
        if len(visited) > max_vertices:
            raise SizeLimitError(f"closure exceeds the vertex cap of {max_vertices}")
        frontier = decode(new, n)
    return visited


def _check_modulus(n, max_vertices):
    if int(n) != n or n < 2:
        raise ValueError(f"modulus must be an integer >= 2, got {n!r}")
    order = group_order(int(n))
    if order > max_vertices:
        raise SizeLimitError(f"|SL3(Z/{n}Z)| = {order} exceeds the vertex cap of {max_vertices}")
    return int(n), order


def enumerate_group(n: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> np.ndarray:
    """Sorted vertex keys of SL3(Z/nZ), found by closure under the elementary matrices."""
    n, _ = _check_modulus(n, max_vertices)
    return _closure(n, elementary_generators(n), max_vertices)


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """Regular multigraph given by a neighbour table: vertex x -> neighbors[x, k]."""

    neighbors: np.ndarray

    @property
    def num_vertices(self) -> int:
        return self.neighbors.shape[0]

    @property
    def degree(self) -> int:
        return self.neighbors.shape[1]

    def adjacency(self) -> sp.csr_matrix:
        nv, deg = self.neighbors.shape
        rows = np.repeat(np.arange(nv), deg)
        data = np.ones(nv * deg)
        a = sp.coo_matrix((data, (rows, self.neighbors.ravel())), shape=(nv, nv))
        return a.tocsr()  # duplicate entries are summed: edge multiplicity

    def laplacian(self) -> sp.csr_matrix:
        return (self.degree * sp.identity(self.num_vertices, format="csr") - self.adjacency()).tocsr()

    def laplacian_matvec(self, v: np.ndarray, threads: int = 1) -> np.ndarray:
        """L v with rows split into fixed blocks; each row is summed in generator order.

        The arithmetic per row does not depend on the block layout or the worker count.
        """
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        nbr = self.neighbors
        deg = float(self.degree)

        def work(lo):
            hi = min(lo + ROW_BLOCK, len(v))
            acc = deg * v[lo:hi]
            for k in range(nbr.shape[1]):
                acc -= v[nbr[lo:hi, k]]
            out[lo:hi] = acc

        starts = range(0, len(v), ROW_BLOCK)
        if threads <= 1 or len(v) <= ROW_BLOCK:
            for lo in starts:
                work(lo)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, starts))
        return out

    @classmethod
    def circulant(cls, m: int, steps) -> "RegularGraph":
        """Cayley graph of Z/m with the given steps (closed under negation)."""
        x = np.arange(m)[:, None]
        return cls(((x + np.asarray(steps)[None, :]) % m).astype(np.int64))


@dataclass(frozen=True, eq=False)
class CayleyGraph(RegularGraph):
    n: int = 0
    generators: tuple = ()
    keys: np.ndarray = None

    def index_of(self, mats) -> np.ndarray:
        k = encode(np.asarray(mats) % self.n, self.n)
        idx = np.searchsorted(self.keys, k)
        if np.any(idx >= len(self.keys)) or np.any(self.keys[np.minimum(idx, len(self.keys) - 1)] != k):
            raise KeyError("matrix is not a vertex of this graph")
        return idx

    def vertex(self, i: int) -> np.ndarray:
        return decode(self.keys[i], self.n)


def _validate_generators(n, gens):
    out = []
    for g in gens:
        g = np.asarray(g, dtype=np.int64)
        if g.shape != (3, 3):
            raise ValueError("generators must be 3x3 matrices")
        g = g % n
        if _det(g) % n != 1 % n:
            raise ValueError(f"generator {g.tolist()} is not in SL3(Z/{n}Z)")
        out.append(g)
    if not out:
        raise ValueError("empty generator set")
    keys = encode(np.array(out), n)
    inv_keys = encode(np.array([mod_inverse_matrix(g, n) for g in out]), n)
    if sorted(keys.tolist()) != sorted(inv_keys.tolist()):
        raise ValueError("generator multiset is not closed under inverses")
    return out


def build_cayley(n: int, generators=None, max_vertices: int = DEFAULT_MAX_VERTICES) -> CayleyGraph:
    """Cayley graph of SL3(Z/nZ); default generators are the 12 elementary matrices E_ij(+-1)."""
    n, order = _check_modulus(n, max_vertices)
    gens = _validate_generators(n, elementary_generators(n) if generators is None else generators)
    keys = _closure(n, gens, max_vertices)
    if len(keys) != order:
        raise NonGeneratingError(len(keys), order)
    mats = decode(keys, n)
    nbr = np.empty((len(keys), len(gens)), dtype=np.int64)
    for k, g in enumerate(gens):
        nbr[:, k] = np.searchsorted(keys, encode((mats @ g) % n, n))
    return CayleyGraph(nbr, n=n, generators=tuple(gens), keys=keys)


@dataclass(frozen=True)
class SpectralGapResult:
    lambda2: float
    degree: int
    gap_normalized: float
    poincare_rho: float
    residual: float
    iterations: int
    vertices: int

    def row(self, n=None) -> dict:
        d = asdict(self)
        d["n"] = n
        return d


def spectral_gap(g: RegularGraph, tolerance: float = 1e-8, threads: int = 1,
                 maxiter: int | None = None, seed: int = 0) -> SpectralGapResult:
    """Second-smallest Laplacian eigenvalue by implicitly restarted Lanczos.

    The constant vector is projected out of every Krylov vector, and the spectrum
    is flipped (sigma I - L with sigma = 2 deg >= lambda_max) so lambda2 becomes the
    largest eigenvalue on the complement of the constants.  ``iterations`` counts
    operator applications.
    """
    nv, deg = g.num_vertices, g.degree
    if nv < 3:
        raise ValueError("graph needs at least 3 vertices")
    sigma = 2.0 * deg
    count = 0

    def project(v):
        return v - v.mean()

    def matvec(v):
        nonlocal count
        count += 1
        w = project(np.ravel(v))
        return project(sigma * w - g.laplacian_matvec(w, threads))

    op = LinearOperator((nv, nv), matvec=matvec, dtype=float)
    v0 = project(np.random.default_rng(seed).standard_normal(nv))
    ncv = min(nv - 1, 40)
    try:
        vals, vecs = eigsh(op, k=1, which="LA", v0=v0, ncv=ncv, tol=0.0,
                           maxiter=maxiter or max(1000, 10 * nv))
    except ArpackNoConvergence as exc:
        raise EigensolverError(f"Lanczos did not converge after {count} operator applications") from exc
    vec = project(vecs[:, 0])
    vec /= np.linalg.norm(vec)
    lam = float(vec @ g.laplacian_matvec(vec, threads))
    residual = float(np.linalg.norm(g.laplacian_matvec(vec, threads) - lam * vec))
    if not (residual <= tolerance):
        raise EigensolverError(f"eigenpair residual {residual:.3e} exceeds {tolerance:.1e}")
    if not lam > 0:
        raise EigensolverError("lambda2 is not positive: graph is disconnected")
    return SpectralGapResult(lam, deg, lam / deg, 1.0 / math.sqrt(2.0 * lam), residual, count, nv)


def dense_lambda2(g: RegularGraph, limit: int = DENSE_LIMIT) -> float:
    """Second-smallest Laplacian eigenvalue from a full dense eigendecomposition."""
    if g.num_vertices > limit:
        raise SizeLimitError(f"dense eigensolve limited to {limit} vertices")
    from scipy.linalg import eigh

    ev = eigh(g.laplacian().toarray(), eigvals_only=True, subset_by_index=[0, 1])
    return float(ev[1])


def left_translation(g: CayleyGraph, h) -> np.ndarray:
    """Permutation x -> index of h x; an automorphism of the right Cayley graph."""
    mats = decode(g.keys, g.n)
    return g.index_of((np.asarray(h, dtype=np.int64) @ mats) % g.n)


def gap_sweep(n_list, threads: int = 1, max_vertices: int = DEFAULT_MAX_VERTICES,
              tolerance: float = 1e-8) -> list[dict]:
    """One row per modulus: n, vertices, degree, lambda2, gap_normalized, poincare_rho, residual, iterations.

    This is the scalar (real-valued) gap only.  A bounded-below normalized gap on
    finitely many moduli is evidence about ordinary expansion; it says nothing
    about Banach-valued Poincare inequalities or the asymptotic statement.
    """
    rows = []
    for n in n_list:
        g = build_cayley(n, max_vertices=max_vertices)
        res = spectral_gap(g, tolerance=tolerance, threads=threads)
        rows.append({
            "n": n,
            "vertices": g.num_vertices,
            "degree": g.degree,
            "lambda2": res.lambda2,
            "gap_normalized": res.gap_normalized,
            "poincare_rho": res.poincare_rho,
            "residual": res.residual,
            "iterations": res.iterations,
        })
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in SWEEP_HEADER})
    return buf.getvalue()


def write_matrix_market(g: RegularGraph, path) -> None:
    """Laplacian in Matrix Market coordinate format (1-based, symmetric, lower triangle)."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(g.laplacian()), symmetry="symmetric",
            comment="graph Laplacian L = deg I - A")


def read_matrix_market(path) -> sp.csr_matrix:
    from scipy.io import mmread

    return sp.csr_matrix(mmread(str(path)))
