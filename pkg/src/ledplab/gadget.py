"""Reduction from private bit summation to private triangle counting.

Each party's secret bit becomes a potential matching edge inside one
part of a fixed bipartite scaffold; the scaffold makes every matching
edge close exactly n triangles, so a triangle estimate divided by n
estimates the sum. A direct randomized-response sum estimator serves as
the baseline whose error grows like sqrt(n) at fixed epsilon.
"""

from __future__ import annotations

import numpy as np

from ledplab.estimator import estimate_triangles, rescaled_atoms, sample_estimates
from ledplab.graphs import Graph, VertexPartition, count_triangles
from ledplab.ledp import flip_probability
from ledplab.rng import Streams

__all__ = [
    "build_sum_gadget",
    "triangles_to_sum",
    "ldp_sum_baseline",
    "sample_sum_baseline",
    "end_to_end_sum_via_triangles",
    "sample_sum_via_triangles",
    "sum_error_row",
    "sum_error_scaling",
]


def _as_bit_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 1:
        raise ValueError(f"input must be a 1-d bit vector, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("input entries must be 0 or 1")
    return x


def build_sum_gadget(x) -> tuple[Graph, VertexPartition]:
    """Gadget graph on 3n vertices whose triangle count is sum(x) * n.

    Vertices [0, n) form the public part V1; party i owns the matched
    pair (n + 2i, n + 2i + 1) inside V2 = [n, 3n). V1 x V2 is complete
    bipartite and the matched pair is joined iff x_i = 1.
    """
    x = _as_bit_vector(x)
    n = len(x)
    a = np.zeros((3 * n, 3 * n), dtype=np.uint8)
    a[:n, n:] = 1
    a[n:, :n] = 1
    for i in range(n):
        if x[i]:
            u, v = n + 2 * i, n + 2 * i + 1
            a[u, v] = 1
            a[v, u] = 1
    partition = VertexPartition(
        parts=(tuple(range(n)), tuple(range(n, 3 * n))),
        labels=("V1", "V2"),
    )
    return Graph(a), partition


def triangles_to_sum(t_hat: float, n: int) -> float:
    """Convert a gadget triangle estimate to a sum estimate."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return t_hat / n


def ldp_sum_baseline(x, epsilon: float, streams: Streams) -> float:
    """Unbiased local-model sum estimate: randomize each party's bit,
    debias, add. Variance is n * e^eps/(e^eps - 1)^2."""
    x = _as_bit_vector(x)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    p_flip = flip_probability(epsilon)
    lo, hi = rescaled_atoms(epsilon)
    gen = streams.generator()
    noisy = x ^ (gen.random(len(x)) < p_flip)
    return float(np.where(noisy, hi, lo).sum())


def sample_sum_baseline(x, epsilon: float, trials: int, streams: Streams) -> np.ndarray:
    """Baseline estimates over independent trials (one stream per trial)."""
    x = _as_bit_vector(x)
    p_flip = flip_probability(epsilon)
    lo, hi = rescaled_atoms(epsilon)
    out = np.empty(trials, dtype=np.float64)
    for t in range(trials):
        gen = streams.child(t).generator()
        noisy = x ^ (gen.random(len(x)) < p_flip)
        out[t] = np.where(noisy, hi, lo).sum()
    return out


def end_to_end_sum_via_triangles(x, epsilon: float, streams: Streams) -> float:
    """Build the gadget, run the triangle estimator, divide by n."""
    x = _as_bit_vector(x)
    n = len(x)
    g, _ = build_sum_gadget(x)
    s = int(x.sum())
    assert count_triangles(g) == s * n  # construction identity
    estimate, _ = estimate_triangles(g, epsilon, streams)
    return triangles_to_sum(estimate.t_hat, n)


def sample_sum_via_triangles(x, epsilon: float, trials: int, streams: Streams) -> np.ndarray:
    """Gadget-route estimates over independent trials."""
    x = _as_bit_vector(x)
    n = len(x)
    g, _ = build_sum_gadget(x)
    assert count_triangles(g) == int(x.sum()) * n
    return sample_estimates(g, epsilon, trials, streams) / n


def fit_log_log_exponent(ns, errors) -> float:
    """Least-squares slope of log(error) against log(n)."""
    logs_n = np.log(np.asarray(ns, dtype=np.float64))
    logs_e = np.log(np.asarray(errors, dtype=np.float64))
    slope = np.polyfit(logs_n, logs_e, 1)[0]
    return float(slope)


def sum_error_row(
    n: int, epsilon: float, trials: int, streams: Streams, triangle_trials: int = 0
) -> dict:
    """Mean |estimate - sum| for one input length (both routes)."""
    x = (streams.child("input", n).generator().random(n) < 0.5).astype(np.uint8)
    s = int(x.sum())
    estimates = sample_sum_baseline(x, epsilon, trials, streams.child("baseline", n))
    err_tri = None
    if triangle_trials > 0:
        tri = sample_sum_via_triangles(
            x, epsilon, triangle_trials, streams.child("triangles", n)
        )
        err_tri = float(np.abs(tri - s).mean())
    return {
        "n": n,
        "epsilon": epsilon,
        "trials": trials,
        "mean_abs_error_baseline": float(np.abs(estimates - s).mean()),
        "mean_abs_error_via_triangles": err_tri,
    }


def sum_error_scaling(
    ns: list[int],
    epsilon: float,
    trials: int,
    streams: Streams,
    triangle_trials: int = 0,
) -> tuple[list[dict], float]:
    """Mean |estimate - sum| per input length; returns rows and the
    fitted baseline exponent.

    The gadget route multiplies every input length by 3 vertices and
    runs the full estimator, so it is only evaluated when
    triangle_trials > 0 (intended for small n).
    """
    rows = [sum_error_row(n, epsilon, trials, streams, triangle_trials) for n in ns]
    errors = [row["mean_abs_error_baseline"] for row in rows]
    exponent = fit_log_log_exponent(ns, errors) if len(ns) >= 2 else float("nan")
    for row in rows:
        row["fitted_exponent"] = exponent
    return rows, exponent
