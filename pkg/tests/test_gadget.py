import math
from itertools import product

import numpy as np
import pytest

from ledplab.estimator import edge_noise_variance, exact_variance
from ledplab.gadget import (
    build_sum_gadget,
    end_to_end_sum_via_triangles,
    fit_log_log_exponent,
    ldp_sum_baseline,
    sample_sum_baseline,
    sample_sum_via_triangles,
    sum_error_scaling,
    triangles_to_sum,
)
from ledplab.graphs import count_triangles, triangles_per_triple
from ledplab.rng import Streams


def test_gadget_identity_exhaustive_small():
    # n = 8 is covered exhaustively by the acceptance battery
    for n in range(1, 8):
        for bits in product((0, 1), repeat=n):
            x = np.array(bits, dtype=np.uint8)
            g, _ = build_sum_gadget(x)
            assert count_triangles(g) == int(x.sum()) * n


def test_gadget_known_values():
    g, _ = build_sum_gadget(np.array([1, 0, 1], dtype=np.uint8))
    assert count_triangles(g) == 6
    g, _ = build_sum_gadget(np.ones(4, dtype=np.uint8))
    assert count_triangles(g) == 16
    g, _ = build_sum_gadget(np.zeros(5, dtype=np.uint8))
    assert count_triangles(g) == 0


def test_gadget_partition_layout():
    x = np.array([1, 1], dtype=np.uint8)
    g, part = build_sum_gadget(x)
    assert part.labels == ("V1", "V2")
    assert part.part("V1") == (0, 1)
    assert part.part("V2") == (2, 3, 4, 5)
    # matched pair of party 0 is (n+0, n+1) = (2, 3)
    assert g.has_edge(2, 3)
    assert g.has_edge(4, 5)


def test_every_triangle_uses_a_matching_edge():
    gen = Streams(40).generator()
    for n in (3, 4, 5, 6):
        x = (gen.random(n) < 0.5).astype(np.uint8)
        g, part = build_sum_gadget(x)
        v1 = set(part.part("V1"))
        v2 = set(part.part("V2"))
        for tri in triangles_per_triple(g):
            in_v2 = [v for v in tri if v in v2]
            assert len(in_v2) == 2
            assert len([v for v in tri if v in v1]) == 1
            a, b = sorted(in_v2)
            party = (a - n) // 2
            assert (a, b) == (n + 2 * party, n + 2 * party + 1)
            assert x[party] == 1


def test_single_bit_touches_only_its_party_rows():
    gen = Streams(41).generator()
    n = 6
    x = (gen.random(n) < 0.5).astype(np.uint8)
    g0, _ = build_sum_gadget(x)
    for i in range(n):
        flipped = x.copy()
        flipped[i] ^= 1
        g1, _ = build_sum_gadget(flipped)
        changed = np.argwhere(g0.adjacency != g1.adjacency)
        rows = set(changed[:, 0].tolist())
        assert rows == {n + 2 * i, n + 2 * i + 1}


def test_triangles_to_sum():
    assert triangles_to_sum(6.0, 3) == 2.0
    assert triangles_to_sum(0.0, 17) == 0.0
    with pytest.raises(ValueError):
        triangles_to_sum(1.0, 0)
    gen = Streams(42).generator()
    for _ in range(20):
        n = int(gen.integers(1, 50))
        alpha = gen.random() * 10
        s = gen.integers(0, n + 1)
        t_hat = s * n + alpha
        assert abs(triangles_to_sum(t_hat, n) - s) == pytest.approx(alpha / n)


def test_baseline_unbiased_zero_input():
    n, eps, trials = 16, math.log(3), 20000
    x = np.zeros(n, dtype=np.uint8)
    est = sample_sum_baseline(x, eps, trials, Streams(43))
    s_noise = edge_noise_variance(eps)
    assert s_noise == pytest.approx(0.75)
    tol = 4 * math.sqrt(n * s_noise / trials)
    assert abs(est.mean()) <= tol


def test_baseline_unbiased_all_ones_and_variance():
    n, eps, trials = 32, 1.0, 20000
    x = np.ones(n, dtype=np.uint8)
    est = sample_sum_baseline(x, eps, trials, Streams(44))
    s_noise = edge_noise_variance(eps)
    tol = 4 * math.sqrt(n * s_noise / trials)
    assert abs(est.mean() - n) <= tol
    assert est.var(ddof=1) == pytest.approx(n * s_noise, rel=0.1)


def test_baseline_std_scales_like_sqrt_n():
    eps, trials = 1.0, 4000
    stds = []
    ns = [64, 256, 1024]
    for n in ns:
        x = (Streams(45).child("x", n).generator().random(n) < 0.5).astype(np.uint8)
        est = sample_sum_baseline(x, eps, trials, Streams(45).child("mc", n))
        stds.append(est.std(ddof=1))
    for i in range(len(ns) - 1):
        ratio = stds[i + 1] / stds[i]
        assert ratio == pytest.approx(2.0, rel=0.2)  # sqrt(4) per 4x step


def test_baseline_single_run_and_validation():
    x = np.array([1, 0, 1, 1], dtype=np.uint8)
    v1 = ldp_sum_baseline(x, 1.0, Streams(46))
    v2 = ldp_sum_baseline(x, 1.0, Streams(46))
    assert v1 == v2
    with pytest.raises(ValueError):
        ldp_sum_baseline(x, 0.0, Streams(46))
    with pytest.raises(ValueError):
        ldp_sum_baseline(np.array([0, 2]), 1.0, Streams(46))


def test_end_to_end_sum_unbiased():
    n, eps, trials = 6, 1.0, 4000
    gen = Streams(47).generator()
    x = (gen.random(n) < 0.5).astype(np.uint8)
    s = int(x.sum())
    g, _ = build_sum_gadget(x)
    est = sample_sum_via_triangles(x, eps, trials, Streams(48))
    tol = 4 * math.sqrt(exact_variance(g, eps) / n**2 / trials)
    assert abs(est.mean() - s) <= tol


def test_end_to_end_near_noiseless_at_huge_epsilon():
    x = np.zeros(5, dtype=np.uint8)
    vals = [
        end_to_end_sum_via_triangles(x, 20.0, Streams(49).child(t)) for t in range(50)
    ]
    close = sum(1 for v in vals if abs(v) < 0.01)
    assert close >= 49


def test_fit_log_log_exponent():
    ns = [10, 100, 1000]
    errors = [math.sqrt(n) * 3.7 for n in ns]
    assert fit_log_log_exponent(ns, errors) == pytest.approx(0.5, abs=1e-9)


def test_sum_error_scaling_rows():
    rows, exponent = sum_error_scaling(
        [32, 128], 1.0, 2000, Streams(50), triangle_trials=200
    )
    assert len(rows) == 2
    for row in rows:
        assert set(row) == {
            "n", "epsilon", "trials",
            "mean_abs_error_baseline", "mean_abs_error_via_triangles",
            "fitted_exponent",
        }
        assert row["mean_abs_error_via_triangles"] is not None
    assert 0.3 <= exponent <= 0.7
