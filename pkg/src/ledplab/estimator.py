"""Noisy triangle counting from one round of randomized response.

Every released pair bit is rescaled to an unbiased edge indicator and
the estimate is the sum of rescaled products over all vertex triples.
The module carries two exact oracles for desk-scale verification: a
closed-form variance decomposition and a full enumeration over flip
patterns, which must agree to floating precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from ledplab.graphs import (
    Graph,
    complete_graph,
    count_four_cycles,
    count_triangles,
    empty_graph,
    erdos_renyi,
)
from ledplab.ledp import (
    RandomizedResponse,
    Transcript,
    assemble_upper,
    flip_probability,
    run_noninteractive,
)
from ledplab.rng import Streams

__all__ = [
    "TriangleEstimate",
    "rescale",
    "rescaled_atoms",
    "edge_noise_variance",
    "triple_product_sum",
    "estimate_triangles",
    "sample_estimates",
    "sample_estimates_range",
    "exact_expectation",
    "exact_variance",
    "variance_by_enumeration",
    "sweep_cell",
    "variance_sweep",
    "MIN_EPSILON",
]

# Below this the rescale magnitudes exceed 1e6 and float cancellation in
# the triple products dominates the estimate.
MIN_EPSILON = 1e-6

ENUMERATION_MAX_PAIRS = 24


@dataclass(frozen=True)
class TriangleEstimate:
    t_hat: float
    epsilon: float
    n: int
    seed: int
    exact_t: Optional[int] = None

    def __post_init__(self):
        if not math.isfinite(self.t_hat):
            raise ValueError(f"estimate must be finite, got {self.t_hat}")


def rescale(x: float, epsilon: float) -> float:
    """Map a released bit to ((e^eps + 1) x - 1)/(e^eps - 1).

    The result is an unbiased estimator of the true edge indicator when
    x came from randomized response at the same epsilon.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    denom = math.expm1(epsilon)
    if denom < 1e-300:
        raise ValueError(f"epsilon={epsilon} too small: e^eps - 1 underflows")
    return ((math.exp(epsilon) + 1.0) * x - 1.0) / denom


def rescaled_atoms(epsilon: float) -> tuple[float, float]:
    """The two values a rescaled bit can take: (for x=0, for x=1)."""
    return rescale(0, epsilon), rescale(1, epsilon)


def edge_noise_variance(epsilon: float) -> float:
    """Variance of one rescaled bit: e^eps/(e^eps - 1)^2."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    m = math.expm1(epsilon)
    return math.exp(epsilon) / (m * m)


def triple_product_sum(y: np.ndarray) -> float:
    """Sum of y[i,j] * y[j,k] * y[i,k] over all unordered triples i<j<k.

    For a symmetric matrix with zero diagonal this equals trace(y^3)/6:
    every closed 3-walk through distinct vertices visits one triple in 6
    orders, and degenerate walks vanish on the zero diagonal.
    """
    y = np.asarray(y, dtype=np.float64)
    return float(np.einsum("ij,ji->", y @ y, y)) / 6.0


def _rescaled_matrix(noisy: np.ndarray, epsilon: float) -> np.ndarray:
    lo, hi = rescaled_atoms(epsilon)
    y = np.where(noisy != 0, hi, lo)
    np.fill_diagonal(y, 0.0)
    return y


def estimate_triangles(
    g: Graph, epsilon: float, streams: Streams, with_exact: bool = False
) -> tuple[TriangleEstimate, Transcript]:
    """Run the one-round protocol on g and return the estimate.

    Each vertex releases its upper-triangle adjacency bits through
    randomized response; the postprocessor rescales every pair and sums
    the triple products.
    """
    if epsilon < MIN_EPSILON:
        raise ValueError(f"epsilon must be at least {MIN_EPSILON}, got {epsilon}")

    def post(released):
        noisy = assemble_upper(released, g.n)
        return triple_product_sum(_rescaled_matrix(noisy, epsilon))

    t_hat, transcript = run_noninteractive(
        g, RandomizedResponse(epsilon), post, streams, mode="upper"
    )
    estimate = TriangleEstimate(
        t_hat=t_hat,
        epsilon=epsilon,
        n=g.n,
        seed=streams.seed,
        exact_t=count_triangles(g) if with_exact else None,
    )
    return estimate, transcript


def sample_estimates(
    g: Graph, epsilon: float, trials: int, streams: Streams, block: int = 4096
) -> np.ndarray:
    """Monte Carlo estimates for `trials` independent protocol runs.

    Each trial draws from its own stream (child of `streams` by trial
    index), so results are identical however trials are scheduled. This
    bulk path skips transcripts; use estimate_triangles for a fully
    recorded single run.
    """
    return sample_estimates_range(g, epsilon, 0, trials, streams, block)


def sample_estimates_range(
    g: Graph, epsilon: float, start: int, stop: int, streams: Streams, block: int = 4096
) -> np.ndarray:
    """Estimates for the trial indices [start, stop); slicing a run into
    ranges and concatenating reproduces the full run bit for bit."""
    if epsilon < MIN_EPSILON:
        raise ValueError(f"epsilon must be at least {MIN_EPSILON}, got {epsilon}")
    n = g.n
    iu = np.triu_indices(n, k=1)
    true_bits = g.adjacency[iu].astype(np.uint8)
    p_flip = flip_probability(epsilon)
    lo, hi = rescaled_atoms(epsilon)
    out = np.empty(stop - start, dtype=np.float64)
    for lo_t in range(start, stop, block):
        hi_t = min(lo_t + block, stop)
        b = hi_t - lo_t
        flips = np.empty((b, len(true_bits)), dtype=bool)
        for t in range(lo_t, hi_t):
            gen = streams.child(t).generator()
            flips[t - lo_t] = gen.random(len(true_bits)) < p_flip
        noisy = true_bits[None, :] ^ flips
        yvals = np.where(noisy, hi, lo)
        ymat = np.zeros((b, n, n), dtype=np.float64)
        ymat[:, iu[0], iu[1]] = yvals
        ymat += ymat.transpose(0, 2, 1)
        cube = np.einsum("bij,bji->b", ymat @ ymat, ymat)
        out[lo_t - start : hi_t - start] = cube / 6.0
    return out


def _pair_and_triple_index(n: int):
    pairs = list(combinations(range(n), 2))
    pair_pos = {p: i for i, p in enumerate(pairs)}
    triples = np.array(
        [
            (pair_pos[(i, j)], pair_pos[(j, k)], pair_pos[(i, k)])
            for i, j, k in combinations(range(n), 3)
        ],
        dtype=np.int64,
    ).reshape(-1, 3)
    return pairs, triples


def _enumeration_moments(g: Graph, epsilon: float, chunk: int = 1 << 16):
    """Exact (E[T_hat], E[T_hat^2]) by enumerating all 2^pairs flip patterns."""
    n = g.n
    pairs, triples = _pair_and_triple_index(n)
    k = len(pairs)
    if k > ENUMERATION_MAX_PAIRS:
        raise ValueError(f"enumeration infeasible: {k} potential edges > {ENUMERATION_MAX_PAIRS}")
    true_bits = np.array([g.adjacency[i, j] for i, j in pairs], dtype=np.uint8)
    p_flip = flip_probability(epsilon)
    lo, hi = rescaled_atoms(epsilon)
    e1 = 0.0
    e2 = 0.0
    shifts = np.arange(k, dtype=np.uint64)
    for start in range(0, 1 << k, chunk):
        stop = min(start + chunk, 1 << k)
        idx = np.arange(start, stop, dtype=np.uint64)
        flip_bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        n_flips = flip_bits.sum(axis=1)
        weights = p_flip**n_flips * (1.0 - p_flip) ** (k - n_flips)
        noisy = true_bits[None, :] ^ flip_bits
        y = np.where(noisy, hi, lo)
        if len(triples):
            t_hat = (y[:, triples[:, 0]] * y[:, triples[:, 1]] * y[:, triples[:, 2]]).sum(axis=1)
        else:
            t_hat = np.zeros(stop - start)
        e1 += float(weights @ t_hat)
        e2 += float(weights @ (t_hat * t_hat))
    return e1, e2


def exact_expectation(g: Graph, epsilon: float, method: str = "auto") -> float:
    """E[T_hat], which equals the true triangle count.

    method="linearity" reads the count directly; "enumerate" sums over
    all flip patterns (small graphs only); "auto" does both when
    feasible and asserts they agree.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    by_linearity = float(count_triangles(g))
    n_pairs = g.n * (g.n - 1) // 2
    if method == "linearity":
        return by_linearity
    if method not in ("auto", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and n_pairs > ENUMERATION_MAX_PAIRS:
        return by_linearity
    by_enumeration, _ = _enumeration_moments(g, epsilon)
    scale = max(1.0, abs(by_linearity))
    if abs(by_enumeration - by_linearity) > 1e-9 * scale:
        raise AssertionError(
            f"expectation routes disagree: {by_enumeration} vs {by_linearity}"
        )
    return by_linearity


def exact_variance(g: Graph, epsilon: float) -> float:
    """Closed-form Var[T_hat] via the per-triple/shared-edge decomposition.

    Writing s for the rescaled-bit noise variance and e_ij for true edge
    indicators: each triple contributes (s+e_ij)(s+e_jk)(s+e_ik) - e_ijk,
    and each unordered pair of triples sharing two vertices contributes
    2 s when the four outer edges are present (those pairs are exactly
    the 4-cycles counted via both diagonals).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n = g.n
    a = g.adjacency.astype(np.float64)
    s = edge_noise_variance(epsilon)
    total = 0.0
    for i, j, k in combinations(range(n), 3):
        eij, ejk, eik = a[i, j], a[j, k], a[i, k]
        total += (s + eij) * (s + ejk) * (s + eik) - eij * ejk * eik
    codeg = g.adjacency.astype(np.int64) @ g.adjacency.astype(np.int64)
    shared = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            c = int(codeg[i, j])
            shared += c * (c - 1) // 2
    total += 2.0 * s * shared
    return total


def variance_by_enumeration(g: Graph, epsilon: float) -> float:
    """Var[T_hat] from the full flip-pattern enumeration (ground truth)."""
    e1, e2 = _enumeration_moments(g, epsilon)
    return e2 - e1 * e1


def _family_graph(family: str, n: int, streams: Streams) -> Graph:
    if family == "empty":
        return empty_graph(n)
    if family == "er05":
        return erdos_renyi(n, 0.5, streams.child("graph", n).generator())
    if family == "complete":
        return complete_graph(n)
    raise ValueError(f"unknown graph family {family!r}")


def sweep_cell(family: str, n: int, epsilon: float, trials: int, streams: Streams) -> dict:
    """One (family, n, epsilon) cell of the variance sweep."""
    g = _family_graph(family, n, streams)
    cell = streams.child("cell", n, int(round(epsilon * 1e9)))
    estimates = sample_estimates(g, epsilon, trials, cell)
    var_emp = float(np.var(estimates, ddof=1))
    var_oracle = exact_variance(g, epsilon)
    return {
        "n": n,
        "epsilon": epsilon,
        "family": family,
        "trials": trials,
        "t_exact": count_triangles(g),
        "c4": count_four_cycles(g),
        "var_empirical": var_emp,
        "var_oracle": var_oracle,
        "ratio": var_emp / var_oracle if var_oracle else float("nan"),
        "seed": streams.seed,
    }


def variance_sweep(
    ns: list[int],
    epsilons: list[float],
    family: str,
    trials: int,
    streams: Streams,
) -> list[dict]:
    """Empirical-vs-oracle variance table, one row per (n, epsilon) cell."""
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    return [sweep_cell(family, n, eps, trials, streams) for n in ns for eps in epsilons]
