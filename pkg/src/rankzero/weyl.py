"""Weyl chamber of SL3(R): polar coordinates, hop estimates and zig-zag chaining.

A point (r, s, t) with r >= s >= t and r + s + t = 0 stands for the double coset
of D(r, s, t) = diag(e^r, e^s, e^t).  A K-biinvariant coefficient c of a unitary
representation obeys two hop estimates:

    H: |c(r,s,t) - c(-t/2, -t/2, t)| <= 2 exp(-r/2 - s)
    V: |c(r,s,t) - c(r, -r/2, -r/2)| <= 2 exp(t/2 + s)

Two points with the same t share an H-target, two points with the same r share a
V-target, so chaining such "slides" bounds |c(p) - c(q)|.  ``plan_zigzag`` builds
that chain and records each hop with its error term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .orthopoly import DomainError

__all__ = [
    "WALL_DISTANCE",
    "PreconditionError",
    "GrowthRateError",
    "WeylPoint",
    "HopEstimate",
    "ZigZagCertificate",
    "GrowthRate",
    "diag_matrix",
    "kak",
    "polar_decomposition",
    "delta_map",
    "check_delta_chain",
    "h_hop",
    "v_hop",
    "slide",
    "plan_zigzag",
    "closed_form_bound",
    "verify_certificate",
    "growth_exponent",
    "ladder_series",
    "coefficient_constant",
    "coefficient_bound",
    "envelope",
    "SyntheticCoefficient",
    "synthetic_coeff_check",
    "point_grid",
]

TOL = 1e-10
WALL_DISTANCE = 1.0
CLOSED_FORM_CONSTANT = 100.0


class PreconditionError(DomainError):
    pass


class GrowthRateError(DomainError):
    pass


@dataclass(frozen=True)
class WeylPoint:
    r: float
    s: float
    t: float

    def __post_init__(self):
        r, s, t = float(self.r), float(self.s), float(self.t)
        if not all(map(math.isfinite, (r, s, t))):
            raise DomainError("coordinates must be finite")
        if abs(r + s + t) > TOL:
            raise DomainError(f"r + s + t = {r + s + t:.3e}, expected 0")
        if r < s - TOL or s < t - TOL:
            raise DomainError(f"({r}, {s}, {t}) is not ordered r >= s >= t")
        # project onto the plane r + s + t = 0
        m = (r + s + t) / 3.0
        object.__setattr__(self, "r", r - m)
        object.__setattr__(self, "s", s - m)
        object.__setattr__(self, "t", t - m)

    @classmethod
    def from_rt(cls, r: float, t: float) -> "WeylPoint":
        return cls(r, -r - t, t)

    @property
    def scale(self) -> float:
        """min(r, -t) = log min(||D||, ||D^-1||)."""
        return min(self.r, -self.t)

    def astuple(self) -> tuple[float, float, float]:
        return (self.r, self.s, self.t)

    def __iter__(self):
        return iter(self.astuple())


def diag_matrix(p: WeylPoint) -> np.ndarray:
    return np.diag(np.exp([p.r, p.s, p.t]))


def polar_decomposition(g) -> tuple[np.ndarray, WeylPoint, np.ndarray]:
    """g = k @ D(p) @ k2 with k, k2 in SO(3)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3) or not np.all(np.isfinite(g)):
        raise DomainError("expected a finite 3x3 matrix")
    u, sig, vt = np.linalg.svd(g)
    if sig[-1] <= sig[0] * 1e-15:
        raise DomainError("matrix is singular")
    det = float(np.linalg.det(g))
    if abs(det - 1.0) > 1e-8:
        raise DomainError(f"det = {det!r}, expected 1")
    # det(u) det(vt) = sign(det g) = 1; flip a paired column/row when both are -1
    if np.linalg.det(u) < 0:
        u[:, 2] *= -1.0
        vt[2, :] *= -1.0
    logs = np.log(sig)
    logs -= logs.mean()
    return u, WeylPoint(*logs), vt


def kak(g) -> tuple[WeylPoint, np.ndarray]:
    """Chamber point (log sigma_1, log sigma_2, log sigma_3) of g and its singular values."""
    _, p, _ = polar_decomposition(g)
    return p, np.exp(np.array(p.astuple()))


def delta_map(p: WeylPoint) -> float:
    """sinh(r + t/2) / sinh(-3t/2): the U\\K/U parameter met in the H-hop estimate."""
    if p.t >= 0:
        raise DomainError("delta_map is undefined at t = 0")
    # sinh ratio through exp differences to stay finite for large |t|
    a = p.r + p.t / 2.0
    b = -1.5 * p.t
    return math.exp(a - b) * (-math.expm1(-2.0 * a)) / (-math.expm1(-2.0 * b))


def check_delta_chain(p: WeylPoint) -> dict:
    """Evaluate 2 sqrt(delta) <= 2 e^(r/2 + t) = 2 e^(-r/2 - s) at p and report it."""
    delta = delta_map(p)
    lhs = 2.0 * math.sqrt(delta)
    mid = 2.0 * math.exp(p.r / 2.0 + p.t)
    rhs = 2.0 * math.exp(-p.r / 2.0 - p.s)
    return {
        "point": p.astuple(),
        "delta": delta,
        "in_unit_interval": -TOL <= delta <= 1.0 + TOL,
        "two_sqrt_delta": lhs,
        "bound": mid,
        "bound_rewritten": rhs,
        "holds": lhs <= mid * (1.0 + 1e-12) and abs(mid - rhs) <= 1e-12 * max(1.0, mid),
    }


@dataclass(frozen=True)
class HopEstimate:
    kind: str
    source: WeylPoint
    target: WeylPoint
    error_bound: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "source": list(self.source.astuple()),
            "target": list(self.target.astuple()),
            "error_bound": self.error_bound,
        }


def h_hop(p: WeylPoint) -> HopEstimate:
    if p.s < -1.0 - TOL:
        raise PreconditionError(f"H-hop needs s >= -1, got s = {p.s}")
    target = WeylPoint(-p.t / 2.0, -p.t / 2.0, p.t)
    return HopEstimate("H", p, target, 2.0 * math.exp(-p.r / 2.0 - p.s))


def v_hop(p: WeylPoint) -> HopEstimate:
    if p.s > TOL:
        raise PreconditionError(f"V-hop needs s <= 0, got s = {p.s}")
    target = WeylPoint(p.r, -p.r / 2.0, -p.r / 2.0)
    return HopEstimate("V", p, target, 2.0 * math.exp(p.t / 2.0 + p.s))


def slide(p: WeylPoint, q: WeylPoint) -> list[HopEstimate]:
    """Two hops p -> X <- q through a shared target X (same t: H, same r: V)."""
    if p == q:
        return []
    if abs(p.t - q.t) <= TOL and p.s >= -1.0 - TOL and q.s >= -1.0 - TOL:
        return [h_hop(p), h_hop(q)]
    if abs(p.r - q.r) <= TOL and p.s <= TOL and q.s <= TOL:
        return [v_hop(p), v_hop(q)]
    raise PreconditionError(f"no shared hop target between {p} and {q}")


def closed_form_bound(p: WeylPoint, q: WeylPoint) -> float:
    return CLOSED_FORM_CONSTANT * max(math.exp(-p.scale / 2.0), math.exp(-q.scale / 2.0))


@dataclass(frozen=True)
class ZigZagCertificate:
    endpoints: tuple[WeylPoint, WeylPoint]
    segments: tuple[HopEstimate, ...]
    total_bound: float
    closed_form_bound: float

    @property
    def sound(self) -> bool:
        return self.total_bound <= self.closed_form_bound

    def to_dict(self) -> dict:
        return {
            "endpoints": [list(p.astuple()) for p in self.endpoints],
            "segments": [h.to_dict() for h in self.segments],
            "total_bound": self.total_bound,
            "closed_form_bound": self.closed_form_bound,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ZigZagCertificate":
        segs = tuple(
            HopEstimate(h["kind"], WeylPoint(*h["source"]), WeylPoint(*h["target"]), float(h["error_bound"]))
            for h in data["segments"]
        )
        a, b = (WeylPoint(*e) for e in data["endpoints"])
        return cls((a, b), segs, float(data["total_bound"]), float(data["closed_form_bound"]))


def _to_band(p: WeylPoint) -> tuple[WeylPoint, list[HopEstimate]]:
    """Slide p onto the line s = 0, returning the landing point (a, 0, -a)."""
    if abs(p.s) <= TOL:
        return p, []
    if p.s > 0:
        q = WeylPoint.from_rt(-p.t, p.t)
    else:
        q = WeylPoint.from_rt(p.r, -p.r)
    return q, slide(p, q)


def _step(a: float, b: float) -> tuple[WeylPoint, list[HopEstimate]]:
    """(a,0,-a) -> (b, a-b, -a) -> (b,0,-b) for 0 < b - a <= 1: one H slide, one V slide."""
    start = WeylPoint.from_rt(a, -a)
    corner = WeylPoint.from_rt(b, -a)
    end = WeylPoint.from_rt(b, -b)
    return end, slide(start, corner) + slide(corner, end)


def _reverse(hops: list[HopEstimate]) -> list[HopEstimate]:
    """Walk a chain of paired hops backwards."""
    pairs = [hops[i : i + 2] for i in range(0, len(hops), 2)]
    return [h for a, b in reversed(pairs) for h in (b, a)]


def plan_zigzag(p: WeylPoint, q: WeylPoint) -> ZigZagCertificate:
    """Certificate bounding |c(p) - c(q)| for K-biinvariant coefficients.

    Both endpoints are slid onto s = 0.  The lower one then climbs in unit
    steps, each an H slide down to s = -1 followed by a V slide back to s = 0,
    which raises min(r, -t) by exactly 1.  A final step of length < 1 joins the
    two ladders.  Hop errors shrink by e^(-1/2) per unit step, so the total is a
    truncated geometric series well under 100 e^(-min scale / 2).

    Segments are listed as a path from p to q, two hops per slide.
    """
    for x in (p, q):
        if x.scale <= WALL_DISTANCE:
            raise PreconditionError(
                f"point {x.astuple()} is within distance {WALL_DISTANCE} of the chamber walls "
                f"(min(r, -t) = {x.scale:.6g})"
            )
    closed = closed_form_bound(p, q)
    if p == q:
        return ZigZagCertificate((p, q), (), 0.0, closed)

    bp, segs_p = _to_band(p)
    bq, segs_q = _to_band(q)
    a, top = min(bp.r, bq.r), max(bp.r, bq.r)
    ladder = []
    while top - a >= 1.0:
        ladder += _step(a, a + 1.0)[1]
        a += 1.0
    if top - a > TOL:
        ladder += _step(a, top)[1]
    if bp.r > bq.r:
        ladder = _reverse(ladder)
    segments = tuple(segs_p + ladder + _reverse(segs_q))
    total = math.fsum(h.error_bound for h in segments)
    return ZigZagCertificate((p, q), segments, total, closed)


def verify_certificate(cert: ZigZagCertificate) -> list[str]:
    """Recheck a certificate from its hops alone; returns a list of problems."""
    problems = []
    segs = cert.segments
    for i, h in enumerate(segs):
        try:
            ref = h_hop(h.source) if h.kind == "H" else v_hop(h.source)
        except PreconditionError as exc:
            problems.append(f"segment {i}: {exc}")
            continue
        if not _close(ref.target, h.target):
            problems.append(f"segment {i}: wrong target")
        if abs(ref.error_bound - h.error_bound) > 1e-12 * max(1.0, ref.error_bound):
            problems.append(f"segment {i}: wrong error bound")
    if len(segs) % 2:
        problems.append("odd number of hops")
    cur = cert.endpoints[0]
    for i in range(0, len(segs) - 1, 2):
        h1, h2 = segs[i], segs[i + 1]
        if h1.kind != h2.kind or not _close(h1.target, h2.target):
            problems.append(f"hops {i}, {i + 1} do not share a target")
        if not _close(h1.source, cur):
            problems.append(f"hop {i} does not start where the path stands")
        cur = h2.source
    if not _close(cur, cert.endpoints[1]):
        problems.append("path does not end at the second endpoint")
    if abs(math.fsum(h.error_bound for h in segs) - cert.total_bound) > 1e-12 * max(1.0, cert.total_bound):
        problems.append("total_bound is not the sum of hop errors")
    if cert.total_bound > cert.closed_form_bound:
        problems.append("total_bound exceeds the closed-form bound")
    return problems


def _close(a: WeylPoint, b: WeylPoint) -> bool:
    return max(abs(x - y) for x, y in zip(a, b)) <= 1e-9


@dataclass(frozen=True)
class GrowthRate:
    alpha: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError("growth rate must be >= 0")


def growth_exponent(alpha: float) -> float:
    """Decay exponent 2 alpha - 1/2 of the coefficient bound at growth rate alpha."""
    return 2.0 * alpha - 0.5


def ladder_series(alpha: float, rtol: float = 1e-16) -> float:
    """sum_{k>=0} exp((2 alpha - 1/2) k): the ladder's unit steps at growth rate alpha."""
    ratio = math.exp(growth_exponent(alpha))
    if ratio >= 1.0:
        raise GrowthRateError(f"alpha = {alpha} >= 1/4: the ladder series diverges")
    total, term = 0.0, 1.0
    parts = []
    while term > rtol * (total or 1.0):
        parts.append(term)
        total += term
        term *= ratio
    return math.fsum(parts)


def coefficient_constant(alpha: float) -> float:
    """C(alpha) = 100 times the ladder series relative to the unitary one; C(0) = 100."""
    return CLOSED_FORM_CONSTANT * ladder_series(alpha) / ladder_series(0.0)


def coefficient_bound(p: WeylPoint, alpha) -> float:
    """C(alpha) exp((2 alpha - 1/2) min(r, -t)); 100 min(||g||, ||g^-1||)^(-1/2) at alpha = 0."""
    a = alpha.alpha if isinstance(alpha, GrowthRate) else float(alpha)
    if a >= 0.25:
        raise GrowthRateError(f"alpha = {a} >= 1/4: no convergence rate")
    return coefficient_constant(a) * math.exp(growth_exponent(a) * p.scale)


def envelope(r, s, t):
    """min(e^(-r/2 - s), e^(t/2 + s)): largest |c - const| compatible with both hops."""
    return np.minimum(np.exp(-np.asarray(r) / 2.0 - s), np.exp(np.asarray(t) / 2.0 + s))


@dataclass
class SyntheticCoefficient:
    """c = const + envelope * (a cos(w1 t + ph1) + b cos(w2 r + ph2)), |a| + |b| <= 1.

    Any function const + w * envelope with |w| <= 1 satisfies both hop estimates:
    the envelope at an H-target is at most e^(3t/4) <= e^(-r/2 - s), and at a
    V-target at most e^(-3r/4) <= e^(t/2 + s).
    """

    const: float
    a: float
    b: float
    w1: float
    w2: float
    ph1: float
    ph2: float
    scale: float = 1.0

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SyntheticCoefficient":
        a, b = rng.uniform(-1, 1, 2)
        norm = abs(a) + abs(b)
        if norm > 1:
            a, b = a / norm, b / norm
        return cls(
            float(rng.normal()), float(a), float(b),
            float(rng.uniform(0, 3)), float(rng.uniform(0, 3)),
            float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0, 2 * np.pi)),
        )

    @classmethod
    def adversarial(cls) -> "SyntheticCoefficient":
        """2 * envelope: attains both hop bounds up to the target's own (tiny) value."""
        return cls(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, scale=2.0)

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate on an (k, 3) array of (r, s, t) rows."""
        r, s, t = pts[..., 0], pts[..., 1], pts[..., 2]
        wiggle = self.a * np.cos(self.w1 * t + self.ph1) + self.b * np.cos(self.w2 * r + self.ph2)
        return self.const + self.scale * wiggle * envelope(r, s, t)

    def __call__(self, p: WeylPoint) -> float:
        return float(self.values(np.array(p.astuple())))


def point_grid(n_points: int = 20, m_lo: float = 2.0, m_hi: float = 40.0) -> list[WeylPoint]:
    """Points with min(r, -t) spread over [m_lo, m_hi] and s sweeping across the chamber.

    With m = min(r, -t), s = sigma * m for sigma in [-1, 1] covers the chamber
    from the wall s = t (sigma = -1) to the wall r = s (sigma = 1).
    """
    ms = np.linspace(m_lo, m_hi, n_points)
    sigmas = np.linspace(-1.0, 1.0, n_points)
    # interleave so neighbouring scales do not share a shape
    sigmas = sigmas[(np.arange(n_points) * 7) % n_points]
    pts = []
    for m, sg in zip(ms, sigmas):
        s = sg * m
        if s >= 0:
            pts.append(WeylPoint(m, s, -m - s))
        else:
            pts.append(WeylPoint(m - s, s, -m))
    return pts


@lru_cache(maxsize=8)
def _pair_table(points: tuple[WeylPoint, ...]):
    """Certificates for all unordered pairs of points, flattened into arrays."""
    ends, totals, hop_src, hop_tgt, hop_err = [], [], [], [], []
    for i, p in enumerate(points):
        for q in points[i:]:
            cert = plan_zigzag(p, q)
            ends.append((p.astuple(), q.astuple()))
            totals.append(cert.total_bound)
            for h in cert.segments:
                hop_src.append(h.source.astuple())
                hop_tgt.append(h.target.astuple())
                hop_err.append(h.error_bound)
    ends = np.array(ends)
    return (
        ends[:, 0], ends[:, 1], np.array(totals),
        np.array(hop_src).reshape(-1, 3), np.array(hop_tgt).reshape(-1, 3), np.array(hop_err),
    )


def synthetic_coeff_check(seed: int, points=None, n_functions: int = 4, funcs=None) -> dict:
    """Check planner certificates against coefficients that obey both hop estimates.

    For each random coefficient and each pair of grid points, |c(p) - c(q)| must
    not exceed the certificate total, and every individual hop must respect its
    own error term.  ``funcs`` overrides the random draw.
    """
    rng = np.random.default_rng(seed)
    if points is None:
        points = point_grid(20, 2.0, 10.0)
    if funcs is None:
        funcs = [SyntheticCoefficient.random(rng) for _ in range(n_functions)]
    ps, qs, totals, src, tgt, err = _pair_table(tuple(points))
    violations = []
    worst_ratio = 0.0
    for c in funcs:
        diff = np.abs(c.values(ps) - c.values(qs))
        for k in np.flatnonzero(diff > totals + 1e-12):
            violations.append(("pair", tuple(ps[k]), tuple(qs[k]), float(diff[k]), float(totals[k])))
        pos = totals > 0
        if np.any(pos):
            worst_ratio = max(worst_ratio, float(np.max(diff[pos] / totals[pos])))
        if len(err):
            hd = np.abs(c.values(src) - c.values(tgt))
            for k in np.flatnonzero(hd > err * (1 + 1e-12)):
                violations.append(("hop", tuple(src[k]), tuple(tgt[k]), float(hd[k]), float(err[k])))
    return {
        "seed": seed,
        "pairs": len(totals),
        "functions": len(funcs),
        "violations": violations,
        "worst_ratio": worst_ratio,
        "passed": not violations,
    }
