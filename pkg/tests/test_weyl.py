import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import random_rotation, sinh_ratio_mp
from rankzero import weyl as w
from rankzero.orthopoly import DomainError


def _point(m, sigma):
    s = sigma * m
    return w.WeylPoint(m, s, -m - s) if s >= 0 else w.WeylPoint(m - s, s, -m)


def test_weyl_point_validation():
    p = w.WeylPoint(2, 1, -3)
    assert p.astuple() == (2.0, 1.0, -3.0) and p.scale == 2.0
    with pytest.raises(DomainError):
        w.WeylPoint(1, 2, -3)
    with pytest.raises(DomainError):
        w.WeylPoint(1, 0, 0)
    with pytest.raises(DomainError):
        w.WeylPoint(math.inf, 0, -math.inf)


def test_kak_identity():
    p, sig = w.kak(np.eye(3))
    assert max(map(abs, p)) <= 1e-12
    assert np.allclose(sig, 1.0, atol=1e-12)


def test_kak_diagonal():
    p, _ = w.kak(np.diag([math.e, 1.0, 1 / math.e]))
    assert np.allclose(p.astuple(), (1.0, 0.0, -1.0), atol=1e-12)


def test_kak_conjugated_diagonal():
    rng = np.random.default_rng(3)
    k1, k2 = random_rotation(rng), random_rotation(rng)
    g = k1 @ w.diag_matrix(w.WeylPoint(2, 1, -3)) @ k2
    p, _ = w.kak(g)
    assert np.allclose(p.astuple(), (2, 1, -3), atol=1e-9)


def test_polar_round_trip_many():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(300):
        r, t = rng.uniform(0, 6), rng.uniform(-6, 0)
        s = -r - t
        if not t <= s <= r:
            continue
        g = random_rotation(rng) @ w.diag_matrix(w.WeylPoint(r, s, t)) @ random_rotation(rng)
        k, p, k2 = w.polar_decomposition(g)
        assert np.linalg.det(k) == pytest.approx(1) and np.linalg.det(k2) == pytest.approx(1)
        assert np.allclose(k @ k.T, np.eye(3), atol=1e-12)
        worst = max(worst, np.max(np.abs(k @ w.diag_matrix(p) @ k2 - g)) / np.max(np.abs(g)))
    assert worst <= 1e-10


@pytest.mark.parametrize("bad", [np.zeros((3, 3)), 2 * np.eye(3), np.full((3, 3), np.nan), np.eye(2)])
def test_kak_rejects(bad):
    with pytest.raises(DomainError):
        w.kak(bad)


def test_delta_map_values():
    assert w.delta_map(w.WeylPoint(1, 0, -1)) == pytest.approx(
        float(sinh_ratio_mp(0.5, 1.5)), abs=1e-15
    )
    # the wall r = s maps to 0, the wall s = t maps to 1
    assert w.delta_map(w.WeylPoint(1, 1, -2)) == pytest.approx(0.0, abs=1e-14)
    assert w.delta_map(w.WeylPoint(2, -1, -1)) == pytest.approx(1.0, abs=1e-14)
    assert w.delta_map(w.WeylPoint(3, -1, -2)) == pytest.approx(0.36203889888099601, abs=1e-14)


def test_delta_map_large_coordinates_stay_finite():
    d = w.delta_map(w.WeylPoint(400, -100, -300))
    assert d == pytest.approx(math.exp(400 - 150 - 450), rel=1e-12)


def test_delta_map_undefined_at_origin():
    with pytest.raises(DomainError):
        w.delta_map(w.WeylPoint(0, 0, 0))


@settings(max_examples=200, deadline=None)
@given(m=st.floats(0.01, 30), sigma=st.floats(-1, 1))
def test_delta_chain_on_chamber(m, sigma):
    rep = w.check_delta_chain(_point(m, sigma))
    assert rep["in_unit_interval"] and rep["holds"]


def test_hop_targets_and_errors():
    p = w.WeylPoint(4, 0, -4)
    h = w.h_hop(p)
    assert h.target.astuple() == (2.0, 2.0, -4.0)
    assert h.error_bound == pytest.approx(2 * math.exp(-2))
    v = w.v_hop(p)
    assert v.target.astuple() == (4.0, -2.0, -2.0)
    assert v.error_bound == pytest.approx(2 * math.exp(-2))
    with pytest.raises(w.PreconditionError):
        w.h_hop(w.WeylPoint(5, -1.5, -3.5))
    with pytest.raises(w.PreconditionError):
        w.v_hop(w.WeylPoint(3, 0.5, -3.5))


def test_plan_band_pair():
    cert = w.plan_zigzag(w.WeylPoint(4, 0, -4), w.WeylPoint(6, 0, -6))
    assert cert.total_bound <= 100 * math.exp(-2)
    assert cert.sound and not w.verify_certificate(cert)
    assert len(cert.segments) == 8


def test_plan_off_band_pair():
    p, q = w.WeylPoint(10, -0.5, -9.5), w.WeylPoint(12, 0, -12)
    cert = w.plan_zigzag(p, q)
    assert cert.total_bound <= 100 * math.exp(-5)
    assert not w.verify_certificate(cert)


def test_plan_identical_endpoints():
    p = w.WeylPoint(5, 1, -6)
    cert = w.plan_zigzag(p, p)
    assert cert.segments == () and cert.total_bound == 0.0
    assert not w.verify_certificate(cert)


def test_plan_near_wall_is_refused():
    with pytest.raises(w.PreconditionError):
        w.plan_zigzag(w.WeylPoint(0.5, 0, -0.5), w.WeylPoint(4, 0, -4))


def test_plan_is_symmetric():
    p, q = _point(3.3, 0.4), _point(7.9, -0.8)
    a, b = w.plan_zigzag(p, q), w.plan_zigzag(q, p)
    assert a.total_bound == pytest.approx(b.total_bound, rel=1e-14)
    assert not w.verify_certificate(b)


def test_ladder_errors_decay_geometrically():
    # moving both ends up the band by one unit shrinks every hop error by e^(-1/2)
    lo = w.plan_zigzag(w.WeylPoint(3, 0, -3), w.WeylPoint(6, 0, -6))
    hi = w.plan_zigzag(w.WeylPoint(4, 0, -4), w.WeylPoint(7, 0, -7))
    ratios = [b.error_bound / a.error_bound for a, b in zip(lo.segments, hi.segments)]
    assert np.allclose(ratios, math.exp(-0.5), rtol=1e-12)
    # unit steps raise the scale by exactly one
    targets = [h.source.scale for h in lo.segments[::4]]
    assert np.allclose(np.diff(targets), 1.0)


@settings(max_examples=150, deadline=None)
@given(m1=st.floats(1.01, 40), s1=st.floats(-1, 1), m2=st.floats(1.01, 40), s2=st.floats(-1, 1))
def test_planner_always_sound(m1, s1, m2, s2):
    cert = w.plan_zigzag(_point(m1, s1), _point(m2, s2))
    assert cert.sound
    assert not w.verify_certificate(cert)


def test_grid_soundness():
    pts = w.point_grid(20, 2, 40)
    worst = max(
        w.plan_zigzag(p, q).total_bound / w.closed_form_bound(p, q) for p in pts for q in pts
    )
    assert worst <= 1.0


def test_certificate_json_round_trip():
    cert = w.plan_zigzag(_point(3.1, -0.3), _point(8.4, 0.7))
    back = w.ZigZagCertificate.from_dict(json.loads(cert.to_json()))
    assert back == cert


def test_verify_catches_tampering():
    cert = w.plan_zigzag(w.WeylPoint(4, 0, -4), w.WeylPoint(6, 0, -6))
    d = cert.to_dict()
    d["segments"][1]["error_bound"] *= 0.5
    assert w.verify_certificate(w.ZigZagCertificate.from_dict(d))
    d = cert.to_dict()
    d["total_bound"] = 0.01
    assert w.verify_certificate(w.ZigZagCertificate.from_dict(d))
    d = cert.to_dict()
    del d["segments"][2:4]
    assert w.verify_certificate(w.ZigZagCertificate.from_dict(d))
    d = cert.to_dict()
    d["endpoints"][1] = [7.0, 0.0, -7.0]
    assert w.verify_certificate(w.ZigZagCertificate.from_dict(d))


def test_coefficient_bound():
    assert w.coefficient_bound(w.WeylPoint(4, 0, -4), 0.0) == pytest.approx(100 * math.exp(-2), rel=1e-14)
    assert w.coefficient_constant(0.0) == pytest.approx(100.0)
    assert w.coefficient_constant(0.1) > w.coefficient_constant(0.0)
    with pytest.raises(w.GrowthRateError):
        w.coefficient_bound(w.WeylPoint(4, 0, -4), 0.25)
    with pytest.raises(DomainError):
        w.GrowthRate(-0.1)


def test_ladder_series_closed_form():
    for a in (0.0, 0.1, 0.2):
        q = math.exp(2 * a - 0.5)
        assert w.ladder_series(a) == pytest.approx(1 / (1 - q), rel=1e-13)


def test_synthetic_functions_respect_hops():
    rng = np.random.default_rng(0)
    pts = np.array([p.astuple() for p in w.point_grid(30, 1, 15)])
    for _ in range(20):
        c = w.SyntheticCoefficient.random(rng)
        for p in pts:
            P = w.WeylPoint(*p)
            if P.s >= -1:
                h = w.h_hop(P)
                assert abs(c(P) - c(h.target)) <= h.error_bound
            if P.s <= 0:
                v = w.v_hop(P)
                assert abs(c(P) - c(v.target)) <= v.error_bound


@pytest.mark.parametrize("seed", range(10))
def test_synthetic_seeds(seed):
    rep = w.synthetic_coeff_check(seed)
    assert rep["passed"], rep["violations"][:3]
    assert rep["pairs"] == 210


def test_adversarial_saturates_h_hop():
    c = w.SyntheticCoefficient.adversarial()
    # the H-target of (m, 0, -m) keeps envelope e^(-3m/4), so the ratio is 1 - e^(-m/4)
    for m in (4.0, 20.0):
        p = w.WeylPoint(m, 0, -m)
        h = w.h_hop(p)
        ratio = abs(c(p) - c(h.target)) / h.error_bound
        assert ratio == pytest.approx(1 - math.exp(-m / 4), rel=1e-12)
    rep = w.synthetic_coeff_check(0, funcs=[c])
    assert rep["passed"]
