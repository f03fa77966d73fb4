import itertools
import math

import numpy as np
import pytest

from _oracles import sl3_order
from rankzero import cayley as cg


@pytest.mark.parametrize("n", [2, 3, 4, 6, 12, 25, 30])
def test_order_formula_matches_oracle(n):
    assert cg.group_order(n) == sl3_order(n)


def test_order_brute_force_mod_2():
    # count all 2^9 residue matrices with determinant 1 mod 2
    count = sum(
        1 for e in itertools.product(range(2), repeat=9)
        if round(np.linalg.det(np.array(e).reshape(3, 3))) % 2 == 1
    )
    assert count == 168 == len(cg.enumerate_group(2))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_enumerate_group_orders(n):
    keys = cg.enumerate_group(n)
    assert len(keys) == sl3_order(n)
    assert np.all(np.diff(keys) > 0)


@pytest.mark.slow
def test_enumerate_group_mod_6():
    assert len(cg.enumerate_group(6, max_vertices=10**6)) == 943488


def test_size_cap():
    with pytest.raises(cg.SizeLimitError):
        cg.enumerate_group(7)
    with pytest.raises(cg.SizeLimitError):
        cg.build_cayley(3, max_vertices=1000)
    with pytest.raises(ValueError):
        cg.enumerate_group(1)


def test_encode_decode_round_trip():
    rng = np.random.default_rng(0)
    mats = rng.integers(0, 5, size=(50, 3, 3))
    assert np.array_equal(cg.decode(cg.encode(mats, 5), 5), mats)


def test_mod_inverse():
    for g in cg.elementary_generators(5):
        assert np.array_equal((g @ cg.mod_inverse_matrix(g, 5)) % 5, np.eye(3, dtype=int))
    with pytest.raises(ValueError):
        cg.mod_inverse_matrix(2 * np.eye(3, dtype=int), 5)


@pytest.fixture(scope="module")
def g3():
    return cg.build_cayley(3)


def test_graph_is_regular_and_symmetric(g3):
    assert g3.num_vertices == 5616 and g3.degree == 12
    a = g3.adjacency()
    assert (a - a.T).nnz == 0
    assert np.all(np.asarray(a.sum(axis=1)).ravel() == 12)


def test_no_self_loops(g3):
    assert not np.any(g3.neighbors == np.arange(g3.num_vertices)[:, None])


def test_mod_2_has_double_edges():
    g = cg.build_cayley(2)
    a = g.adjacency()
    # E_ij(1) = E_ij(-1) mod 2, so every edge appears twice
    assert set(np.unique(a.data)) == {2.0}
    assert a.nnz == 168 * 6


def test_neighbor_table_is_right_multiplication(g3):
    rng = np.random.default_rng(1)
    for x in rng.integers(0, g3.num_vertices, 20):
        m = g3.vertex(x)
        for k, s in enumerate(g3.generators):
            assert np.array_equal(g3.vertex(g3.neighbors[x, k]), (m @ s) % 3)


def test_non_generating_set():
    with pytest.raises(cg.NonGeneratingError) as info:
        cg.build_cayley(3, generators=[np.eye(3, dtype=int)])
    assert info.value.reached == 1


def test_rejects_bad_generators():
    with pytest.raises(ValueError):
        cg.build_cayley(3, generators=[2 * np.eye(3, dtype=int)])
    e = np.eye(3, dtype=int)
    e[0, 1] = 1
    with pytest.raises(ValueError):
        cg.build_cayley(3, generators=[e])  # inverse missing


def test_fixture_k4():
    k4 = cg.RegularGraph.circulant(4, [1, 2, 3])
    assert abs(cg.spectral_gap(k4).lambda2 - 4.0) <= 1e-10
    assert abs(cg.dense_lambda2(k4) - 4.0) <= 1e-10


def test_fixture_c6():
    c6 = cg.RegularGraph.circulant(6, [1, -1])
    assert abs(cg.spectral_gap(c6).lambda2 - 1.0) <= 1e-10


def test_cycle_family_closed_form():
    for m in (7, 20, 51):
        lam = cg.spectral_gap(cg.RegularGraph.circulant(m, [1, -1])).lambda2
        assert lam == pytest.approx(2 - 2 * math.cos(2 * math.pi / m), abs=1e-10)


def test_mod_2_gap():
    res = cg.spectral_gap(cg.build_cayley(2))
    assert abs(res.lambda2 - cg.dense_lambda2(cg.build_cayley(2))) <= 1e-10
    assert res.gap_normalized > 0
    assert res.poincare_rho == pytest.approx(1 / math.sqrt(2 * res.lambda2))


def test_laplacian_psd_with_constant_kernel(g3):
    ones = np.ones(g3.num_vertices)
    assert np.max(np.abs(g3.laplacian_matvec(ones))) == 0.0
    rng = np.random.default_rng(2)
    for _ in range(5):
        v = rng.standard_normal(g3.num_vertices)
        assert v @ g3.laplacian_matvec(v) >= 0


def test_matvec_matches_sparse(g3):
    v = np.random.default_rng(4).standard_normal(g3.num_vertices)
    assert np.allclose(g3.laplacian_matvec(v), g3.laplacian() @ v, atol=1e-12)


def test_matvec_thread_determinism(monkeypatch, g3):
    monkeypatch.setattr(cg, "ROW_BLOCK", 512)
    v = np.random.default_rng(5).standard_normal(g3.num_vertices)
    ref = g3.laplacian_matvec(v, 1)
    for t in (2, 8):
        assert np.array_equal(g3.laplacian_matvec(v, t), ref)


def test_gap_thread_determinism(monkeypatch):
    monkeypatch.setattr(cg, "ROW_BLOCK", 32)
    g = cg.build_cayley(2)
    rows = [cg.spectral_gap(g, threads=t) for t in (1, 2, 8)]
    assert rows[0] == rows[1] == rows[2]


def test_left_translation_is_automorphism(g3):
    h = cg.elementary_generators(3)[0] @ cg.elementary_generators(3)[5] % 3
    perm = cg.left_translation(g3, h)
    assert np.array_equal(np.sort(perm), np.arange(g3.num_vertices))
    # neighbours of h x are h (x s)
    assert np.array_equal(g3.neighbors[perm], perm[g3.neighbors])


def test_poincare_constant_brute_force():
    # rho is the best constant in sum f^2 <= rho^2 sum_x sum_s (f(x) - f(xs))^2 over mean-zero f
    g = cg.RegularGraph.circulant(8, [1, -1])
    res = cg.spectral_gap(g)
    lap = g.laplacian().toarray()
    rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(2000):
        f = rng.standard_normal(8)
        f -= f.mean()
        grad = sum((f[x] - f[y]) ** 2 for x in range(8) for y in g.neighbors[x])
        assert grad == pytest.approx(2 * f @ lap @ f)
        best = max(best, math.sqrt((f @ f) / grad))
    assert best <= res.poincare_rho * (1 + 1e-12)
    # the Fiedler vector attains it
    f = np.cos(2 * np.pi * np.arange(8) / 8)
    assert math.sqrt((f @ f) / (2 * f @ lap @ f)) == pytest.approx(res.poincare_rho, rel=1e-10)


def test_matrix_market_round_trip(tmp_path):
    g = cg.build_cayley(2)
    path = tmp_path / "lap.mtx"
    cg.write_matrix_market(g, path)
    back = cg.read_matrix_market(path)
    assert (back != g.laplacian()).nnz == 0
    header = path.read_text().splitlines()[0]
    assert header.startswith("%%MatrixMarket matrix coordinate") and header.endswith("symmetric")


def test_sweep_csv_header():
    rows = cg.gap_sweep([2])
    text = cg.sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(cg.SWEEP_HEADER)
    assert lines[1].startswith("2,168,12,")


def test_iterative_mod_3_against_frozen_dense_value(g3):
    # frozen from scipy.linalg.eigh on the dense 5616 x 5616 Laplacian
    res = cg.spectral_gap(g3)
    assert res.lambda2 == pytest.approx(2.70849737787082, abs=1e-8)
    assert res.residual <= 1e-8
