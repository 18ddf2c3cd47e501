"""Reconstruction attack against noninteractive local mechanisms.

A secret bit matrix is embedded as the bipartite part of a tripartite
graph. Linear queries on the matrix translate to triangle counts of
query-dependent completions of that graph, so a noisy triangle counter
can be driven as a gray box: each secret-holding vertex's randomizer
runs exactly twice (once per possible completion of its neighborhood),
and every query afterwards mixes the two stored outputs with fresh
outputs from the public vertices. Accurate answers to enough random
queries pin down most of the secret matrix.

Vertex layout of the 3n-vertex graphs: rows of the secret matrix own
vertices [0, n), columns own [n, 2n), and the public completion block
W is [2n, 3n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ledplab.estimator import rescaled_atoms, triple_product_sum
from ledplab.graphs import Graph, VertexPartition, count_triangles
from ledplab.ledp import (
    IdentityRelease,
    PrivacyParams,
    RandomizedResponse,
    RandomizerOutput,
    Transcript,
    compose_ledger,
    flip_probability,
)
from ledplab.rng import Streams

__all__ = [
    "OuterProductQuery",
    "SubmatrixQuery",
    "AttackReport",
    "GrayBox",
    "TrianglePost",
    "ExactCountPost",
    "mechanism_components",
    "outer_product_answer",
    "submatrix_answer",
    "split_outer_product",
    "build_secret_graph",
    "build_query_graph",
    "secret_input_rows",
    "sample_query_signs",
    "sample_queries",
    "default_query_count",
    "accuracy_threshold",
    "disagreement_budget",
    "catch_threshold",
    "catches",
    "attacker_reconstruct",
    "run_attack",
    "privacy_distance_diagnostic",
]

DEFAULT_GAMMA = 1.0 / 9.0


def _as_bits(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"dataset must be a square bit matrix, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("dataset entries must be 0 or 1")
    return x


def _as_signs(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    if not np.all(np.isin(v, (-1, 1))):
        raise ValueError("sign vector entries must be -1 or 1")
    return v


@dataclass(frozen=True)
class OuterProductQuery:
    """Sign-vector pair; the query value on X is a^T X b."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _as_signs(self.a))
        object.__setattr__(self, "b", _as_signs(self.b))
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-d and the same length")


@dataclass(frozen=True)
class SubmatrixQuery:
    """Bit-vector pair; the query value on X is q1^T X q2."""

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = np.asarray(self.q1, dtype=np.uint8)
        q2 = np.asarray(self.q2, dtype=np.uint8)
        if not (np.all((q1 == 0) | (q1 == 1)) and np.all((q2 == 0) | (q2 == 1))):
            raise ValueError("query entries must be 0 or 1")
        if q1.shape != q2.shape or q1.ndim != 1:
            raise ValueError("q1 and q2 must be 1-d and the same length")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)


def outer_product_answer(x, q: OuterProductQuery) -> int:
    x = _as_bits(x)
    if len(q.a) != x.shape[0]:
        raise ValueError(f"query length {len(q.a)} does not match dataset side {x.shape[0]}")
    return int(q.a @ x.astype(np.int64) @ q.b)


def submatrix_answer(x, q: SubmatrixQuery) -> int:
    x = _as_bits(x)
    if len(q.q1) != x.shape[0]:
        raise ValueError(f"query length {len(q.q1)} does not match dataset side {x.shape[0]}")
    return int(q.q1.astype(np.int64) @ x.astype(np.int64) @ q.q2.astype(np.int64))


def split_outer_product(q: OuterProductQuery):
    """Three bit-vector queries plus the affine combiner recovering a^T X b.

    With a' = (a+1)/2, a'' = (1-a)/2 (same for b), the identity is
    a^T X b = 2 (a'^T X b' + a''^T X b'') - 1^T X 1.
    """
    ones = np.ones(len(q.a), dtype=np.uint8)
    a1 = ((q.a + 1) // 2).astype(np.uint8)
    a2 = ((1 - q.a) // 2).astype(np.uint8)
    b1 = ((q.b + 1) // 2).astype(np.uint8)
    b2 = ((1 - q.b) // 2).astype(np.uint8)

    def combine(ans1, ans2, ans3):
        return 2 * (ans1 + ans2) - ans3

    return (
        SubmatrixQuery(a1, b1),
        SubmatrixQuery(a2, b2),
        SubmatrixQuery(ones, ones),
        combine,
    )


def build_secret_graph(x) -> tuple[Graph, VertexPartition]:
    """Bipartite embedding of the dataset; the W block stays isolated."""
    x = _as_bits(x)
    n = x.shape[0]
    a = np.zeros((3 * n, 3 * n), dtype=np.uint8)
    a[:n, n : 2 * n] = x
    a[n : 2 * n, :n] = x.T
    partition = VertexPartition(
        parts=(
            tuple(range(n)),
            tuple(range(n, 2 * n)),
            tuple(range(2 * n, 3 * n)),
        ),
        labels=("U1", "U2", "W"),
    )
    return Graph(a), partition


def build_query_graph(x, q: SubmatrixQuery) -> Graph:
    """Secret graph completed per the query: selected row/column vertices
    connect to the whole public block."""
    x = _as_bits(x)
    n = x.shape[0]
    if len(q.q1) != n:
        raise ValueError(f"query length {len(q.q1)} does not match dataset side {n}")
    base, _ = build_secret_graph(x)
    a = base.adjacency.copy()
    a.setflags(write=True)
    for i in range(n):
        if q.q1[i]:
            a[i, 2 * n :] = 1
            a[2 * n :, i] = 1
        if q.q2[i]:
            a[n + i, 2 * n :] = 1
            a[2 * n :, n + i] = 1
    return Graph(a)


def secret_input_rows(x) -> tuple[np.ndarray, np.ndarray]:
    """The two possible randomizer inputs per secret-holding vertex.

    Returns (rows0, rows1), each (2n, 3n): rows0[v] is v's adjacency row
    in the bare secret graph, rows1[v] the same with the public block
    fully attached.
    """
    x = _as_bits(x)
    n = x.shape[0]
    base, _ = build_secret_graph(x)
    rows0 = base.adjacency[: 2 * n].copy()
    rows1 = rows0.copy()
    rows1[:, 2 * n :] = 1
    return rows0, rows1


class TrianglePost:
    """The estimator's postprocessing: rescale released bits, sum triple
    products."""

    name = "triangle-estimate"

    def __init__(self, epsilon: float):
        self.epsilon = epsilon

    def __call__(self, released: np.ndarray) -> float:
        lo, hi = rescaled_atoms(self.epsilon)
        y = np.where(released != 0, hi, lo)
        np.fill_diagonal(y, 0.0)
        return triple_product_sum(y)


class ExactCountPost:
    """Zero-error triangle counting on the assembled released graph."""

    name = "exact-count"

    def __init__(self, method: str = "fast"):
        if method not in ("fast", "enumerate"):
            raise ValueError(f"method must be 'fast' or 'enumerate', got {method!r}")
        self.method = method

    def __call__(self, released: np.ndarray) -> float:
        if self.method == "enumerate":
            return float(count_triangles(Graph(released)))
        a = released.astype(np.int64)
        return float(np.einsum("ij,ji->", a @ a, a)) / 6.0


def mechanism_components(mechanism: str, epsilon: Optional[float] = None):
    """(randomizer family, postprocessor) pair for a named mechanism."""
    if mechanism == "rr":
        if epsilon is None:
            raise ValueError("mechanism 'rr' needs epsilon")
        return RandomizedResponse(epsilon), TrianglePost(epsilon)
    if mechanism == "identity":
        return IdentityRelease(), ExactCountPost("fast")
    if mechanism == "oracle":
        return IdentityRelease(), ExactCountPost("enumerate")
    raise ValueError(f"unknown mechanism {mechanism!r}")


class GrayBox:
    """Stored two-invocation randomizer outputs plus query answering.

    After prepare(), answering any number of queries touches the secret
    dataset only through the stored payloads; the per-vertex invocation
    count never grows.
    """

    def __init__(self, n, family, post, r0, r1, transcript, charge):
        self.n = n
        self.family = family
        self.post = post
        self.r0 = r0  # (2n, 3n) payload bits, row v valid at columns > v
        self.r1 = r1
        self.transcript = transcript
        self.charge = charge
        self._tables = None
        self._rescaled_rows = None

    # -- preparation ---------------------------------------------------

    @classmethod
    def prepare(cls, x, family, post, streams: Streams) -> "GrayBox":
        x = _as_bits(x)
        n = x.shape[0]
        nv = 3 * n
        rows0, rows1 = secret_input_rows(x)
        r0 = np.zeros((2 * n, nv), dtype=np.uint8)
        r1 = np.zeros((2 * n, nv), dtype=np.uint8)
        transcript = Transcript()
        for tag, rows, store in ((0, rows0, r0), (1, rows1, r1)):
            outputs = []
            for v in range(2 * n):
                gen = streams.child("prepare", tag, v).generator()
                payload = family.release(rows[v, v + 1 :], gen)
                store[v, v + 1 :] = payload
                outputs.append(
                    RandomizerOutput(
                        vertex=v,
                        randomizer=family.name,
                        params=family.params,
                        payload=payload,
                        covered=tuple((v, j) for j in range(v + 1, nv)),
                    )
                )
            transcript.append_round(outputs)
        charge = compose_ledger([family.params, family.params])
        return cls(n, family, post, r0, r1, transcript, charge)

    # -- single-query paths (fully recorded) ---------------------------

    def _selection_bits(self, q: SubmatrixQuery) -> np.ndarray:
        if len(q.q1) != self.n:
            raise ValueError(f"query length {len(q.q1)} does not match prepared n={self.n}")
        return np.concatenate([q.q1, q.q2]).astype(np.uint8)

    def _fresh_w_payloads(self, streams: Streams) -> list[np.ndarray]:
        """One payload per public vertex, covering its upper-triangle slice."""
        n, nv = self.n, 3 * self.n
        payloads = []
        for w in range(2 * n, nv):
            gen = streams.child(w).generator()
            payloads.append(self.family.release(np.zeros(nv - w - 1, dtype=np.uint8), gen))
        return payloads

    def _assemble(self, sel: np.ndarray, w_payloads: list[np.ndarray]) -> np.ndarray:
        """Symmetric released-bit matrix from stored and fresh payloads."""
        n, nv = self.n, 3 * self.n
        m = np.zeros((nv, nv), dtype=np.uint8)
        for v in range(2 * n):
            source = self.r1 if sel[v] else self.r0
            m[v, v + 1 :] = source[v, v + 1 :]
        for idx, w in enumerate(range(2 * n, nv)):
            m[w, w + 1 :] = w_payloads[idx]
        return m | m.T

    def answer_submatrix(self, q: SubmatrixQuery, streams: Streams) -> float:
        """Answer one bit-vector query: simulate the mechanism on the query
        graph using stored secret-vertex outputs, divide by n."""
        sel = self._selection_bits(q)
        w_payloads = self._fresh_w_payloads(streams)
        outputs = [
            RandomizerOutput(
                vertex=2 * self.n + idx,
                randomizer=self.family.name,
                params=self.family.params,
                payload=p,
                covered=tuple((2 * self.n + idx, j) for j in range(2 * self.n + idx + 1, 3 * self.n)),
                public=True,
            )
            for idx, p in enumerate(w_payloads)
        ]
        self.transcript.append_round(outputs)
        released = self._assemble(sel, w_payloads)
        return self.post(released) / self.n

    def answer_outer(self, q: OuterProductQuery, streams: Streams) -> float:
        """Answer one sign-vector query through its three-part split."""
        q1, q2, q3, combine = split_outer_product(q)
        answers = [
            self.answer_submatrix(part, streams.child(t))
            for t, part in enumerate((q1, q2, q3))
        ]
        return combine(*answers)

    # -- batched path ---------------------------------------------------

    def answer_outer_batch(
        self, a_signs: np.ndarray, b_signs: np.ndarray, streams: Streams, block: int = 8192
    ) -> np.ndarray:
        """Answers to k sign-vector queries, vectorized.

        Equivalent to answer_outer per query, but public-vertex noise is
        drawn per fixed-size block of the 3k underlying bit-vector
        queries (one stream per block), and the postprocessing sum is
        evaluated from precomputed tables. Deterministic for a given
        stream node regardless of scheduling.
        """
        a_signs = np.atleast_2d(_as_signs(a_signs))
        b_signs = np.atleast_2d(_as_signs(b_signs))
        k, n = a_signs.shape
        if n != self.n:
            raise ValueError(f"query length {n} does not match prepared n={self.n}")
        # selection patterns for the three parts of each query
        pow2 = 1 << np.arange(n, dtype=np.int64)
        q1a = ((a_signs + 1) // 2).astype(np.int64)
        q2a = ((1 - a_signs) // 2).astype(np.int64)
        q1b = ((b_signs + 1) // 2).astype(np.int64)
        q2b = ((1 - b_signs) // 2).astype(np.int64)
        pos_idx = q1a @ pow2 + ((q1b @ pow2) << n)
        neg_idx = q2a @ pow2 + ((q2b @ pow2) << n)
        ones_idx = np.full(k, (1 << (2 * n)) - 1, dtype=np.int64)
        slot_idx = np.empty(3 * k, dtype=np.int64)
        slot_idx[0::3] = pos_idx
        slot_idx[1::3] = neg_idx
        slot_idx[2::3] = ones_idx

        if isinstance(self.family, IdentityRelease) and isinstance(self.post, ExactCountPost):
            slot_answers = self._exact_slot_answers(slot_idx, streams, block)
        elif isinstance(self.family, RandomizedResponse) and isinstance(self.post, TrianglePost):
            slot_answers = self._noisy_slot_answers(slot_idx, streams, block)
        else:
            raise ValueError("no batched path for this family/postprocessor pair")
        return 2.0 * (slot_answers[0::3] + slot_answers[1::3]) - slot_answers[2::3]

    def _stored_secret_block(self) -> np.ndarray:
        """Released row-column block bits, read from the stored payloads."""
        return self.r0[: self.n, self.n : 2 * self.n].astype(np.int64)

    def _exact_slot_answers(self, slot_idx, streams, block) -> np.ndarray:
        # Identity releases make every selected released bit exact, so the
        # assembled count equals n * q1^T R q2 with R the stored block;
        # public-vertex "noise" is vacuous for the identity family.
        n = self.n
        r = self._stored_secret_block()
        bits = ((slot_idx[:, None] >> np.arange(2 * n)[None, :]) & 1).astype(np.int64)
        q1 = bits[:, :n]
        q2 = bits[:, n:]
        counts = ((q1 @ r) * q2).sum(axis=1)
        self._record_bulk_public_rounds(len(slot_idx), None)
        return counts.astype(np.float64)

    def _noisy_slot_answers(self, slot_idx, streams, block) -> np.ndarray:
        n = self.n
        # precomputing the postprocessing sum over all 2^(2n) stored-output
        # selections pays off up to n = 10; beyond that assemble per slot
        tables = self._selection_tables() if 2 * n <= 20 else None
        n_wpairs = n * (n - 1) // 2
        p_flip = flip_probability(self.family.epsilon)
        lo, hi = rescaled_atoms(self.family.epsilon)
        iu = np.triu_indices(n, k=1)
        total = len(slot_idx)
        answers = np.empty(total, dtype=np.float64)
        w_bit_blocks = []
        for b, start in enumerate(range(0, total, block)):
            stop = min(start + block, total)
            gen = streams.child("wnoise", b).generator()
            w_bits = gen.random((stop - start, n_wpairs)) < p_flip
            w_bit_blocks.append(np.packbits(w_bits, axis=None))
            if tables is not None:
                answers[start:stop] = self._eval_slots(
                    slot_idx[start:stop], w_bits, tables, lo, hi, iu
                )
            else:
                answers[start:stop] = self._eval_slots_direct(
                    slot_idx[start:stop], w_bits, lo, hi, iu
                )
        self._record_bulk_public_rounds(total, w_bit_blocks)
        return answers

    def _eval_slots_direct(self, idx, w_bits, lo, hi, iu) -> np.ndarray:
        """Table-free variant of _eval_slots: assemble the full rescaled
        matrix per slot and take the triple-product sum."""
        n, nu, nv = self.n, 2 * self.n, 3 * self.n
        rescaled0, rescaled1 = self._rescaled_stored_rows(lo, hi)
        sel = ((idx[:, None] >> np.arange(nu)[None, :]) & 1).astype(bool)
        ymat = np.zeros((len(idx), nv, nv), dtype=np.float64)
        ymat[:, :nu, :] = np.where(sel[:, :, None], rescaled1[None], rescaled0[None])
        ymat[:, 2 * n + iu[0], 2 * n + iu[1]] = np.where(w_bits, hi, lo)
        ymat += ymat.transpose(0, 2, 1)
        t_hat = np.einsum("bij,bji->b", ymat @ ymat, ymat) / 6.0
        return t_hat / n

    def _rescaled_stored_rows(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Stored payload rows as rescaled values, zero outside each row's
        released (upper) span."""
        if getattr(self, "_rescaled_rows", None) is None:
            nu, nv = 2 * self.n, 3 * self.n
            valid = np.zeros((nu, nv), dtype=bool)
            for v in range(nu):
                valid[v, v + 1 :] = True
            y0 = np.where(valid, np.where(self.r0 != 0, hi, lo), 0.0)
            y1 = np.where(valid, np.where(self.r1 != 0, hi, lo), 0.0)
            self._rescaled_rows = (y0, y1)
        return self._rescaled_rows

    def _eval_slots(self, idx, w_bits, tables, lo, hi, iu) -> np.ndarray:
        """Postprocessing sum for a block of selection patterns and fresh
        public-block bits; returns per-slot answers (already /n)."""
        n = self.n
        t_uuu, t_uuw, h_uw = tables
        yw = np.where(w_bits, hi, lo)
        b = len(idx)
        wmat = np.zeros((b, n, n), dtype=np.float64)
        wmat[:, iu[0], iu[1]] = yw
        wmat += wmat.transpose(0, 2, 1)
        t_www = np.einsum("bij,bji->b", wmat @ wmat, wmat) / 6.0
        t_uww = np.einsum("bp,bp->b", h_uw[idx], yw)
        t_hat = t_uuu[idx] + t_uuw[idx] + t_uww + t_www
        return t_hat / n

    def _selection_tables(self):
        """Tables over all 2^(2n) stored-output selection patterns.

        For each pattern: the triple-product sum restricted to stored
        rows (t_uuu), the cross term with one public vertex (t_uuw), and
        the per-public-pair coefficient of the fresh values (h_uw).
        """
        if self._tables is not None:
            return self._tables
        n = self.n
        nu = 2 * n
        if 2 * n > 20:
            raise ValueError("selection tables are capped at n <= 10")
        lo, hi = rescaled_atoms(self.family.epsilon)
        y0, y1 = self._rescaled_stored_rows(lo, hi)
        patterns = 1 << nu
        t_uuu = np.empty(patterns, dtype=np.float64)
        t_uuw = np.empty(patterns, dtype=np.float64)
        h_uw = np.empty((patterns, n * (n - 1) // 2), dtype=np.float64)
        iu_w = np.triu_indices(n, k=1)
        chunk = 1 << 14
        for start in range(0, patterns, chunk):
            stop = min(start + chunk, patterns)
            sel = ((np.arange(start, stop)[:, None] >> np.arange(nu)[None, :]) & 1).astype(bool)
            rows = np.where(sel[:, :, None], y1[None], y0[None])  # (c, 2n, 3n)
            yuu_up = rows[:, :, :nu]  # upper-valid entries within stored rows
            yuu = yuu_up + yuu_up.transpose(0, 2, 1)
            t_uuu[start:stop] = np.einsum("cij,cji->c", yuu @ yuu, yuu) / 6.0
            yuw = rows[:, :, nu:]  # (c, 2n, n)
            gram_uu = yuw @ yuw.transpose(0, 2, 1)  # (c, 2n, 2n)
            t_uuw[start:stop] = np.einsum("cuv,cuv->c", yuu_up, gram_uu)
            gram_ww = yuw.transpose(0, 2, 1) @ yuw  # (c, n, n)
            h_uw[start:stop] = gram_ww[:, iu_w[0], iu_w[1]]
        self._tables = (t_uuu, t_uuw, h_uw)
        return self._tables

    def _record_bulk_public_rounds(self, slot_count: int, w_bit_blocks) -> None:
        """Condensed transcript round for the public-vertex refreshes."""
        payload = (
            np.concatenate(w_bit_blocks)
            if w_bit_blocks
            else np.zeros(0, dtype=np.uint8)
        )
        self.transcript.append_round(
            [
                RandomizerOutput(
                    vertex=-1,  # stands for the whole public block
                    randomizer=self.family.name,
                    params=self.family.params,
                    payload=payload,
                    covered=(),
                    public=True,
                    count=slot_count * self.n,
                )
            ]
        )


def graybox_prepare(x, family, post, streams: Streams) -> GrayBox:
    return GrayBox.prepare(x, family, post, streams)


def default_query_count(n: int, gamma: float = DEFAULT_GAMMA) -> int:
    return math.ceil(128.0 * n * n / (gamma * gamma))


def accuracy_threshold(n: int, gamma: float) -> float:
    return math.sqrt(gamma) * n / 4.0


def disagreement_budget(k: int, gamma: float) -> float:
    return gamma * gamma * k / 64.0


def catch_threshold(k: int, gamma: float) -> float:
    return gamma * gamma * k / 32.0


def sample_query_signs(n: int, k: int, streams: Streams) -> tuple[np.ndarray, np.ndarray]:
    """k independent uniform sign-vector pairs, as (k, n) arrays."""
    if k < 1:
        raise ValueError(f"need at least one query, got k={k}")
    gen = streams.generator()
    a = gen.choice((-1, 1), size=(k, n)).astype(np.int64)
    b = gen.choice((-1, 1), size=(k, n)).astype(np.int64)
    return a, b


def sample_queries(n: int, k: int, streams: Streams) -> list[OuterProductQuery]:
    a, b = sample_query_signs(n, k, streams)
    return [OuterProductQuery(a[i], b[i]) for i in range(k)]


def catches(a_signs, b_signs, m_diff, gamma: float) -> bool:
    """Whether the query set separates a candidate from the truth often
    enough: more than gamma^2 k / 32 queries move by over sqrt(gamma) n/2."""
    m = np.asarray(m_diff, dtype=np.int64)
    if not np.all(np.isin(m, (-1, 0, 1))):
        raise ValueError("difference entries must lie in {-1, 0, 1}")
    n = m.shape[0]
    a_signs = np.atleast_2d(np.asarray(a_signs, dtype=np.int64))
    b_signs = np.atleast_2d(np.asarray(b_signs, dtype=np.int64))
    k = a_signs.shape[0]
    products = np.einsum("li,li->l", a_signs @ m, b_signs)
    separated = int(np.count_nonzero(np.abs(products) > math.sqrt(gamma) * n / 2.0))
    return separated > catch_threshold(k, gamma)


@dataclass
class AttackReport:
    n: int
    k: int
    gamma: float
    inaccurate_count: int
    feasible: bool
    thresholds: dict
    seed: int
    search: str
    y_star: Optional[np.ndarray] = None
    hamming: Optional[int] = None
    best_dataset: Optional[np.ndarray] = None
    best_hamming: Optional[int] = None
    charge: Optional[PrivacyParams] = None
    mechanism: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "gamma": self.gamma,
            "inaccurate_count": self.inaccurate_count,
            "feasible": self.feasible,
            "thresholds": self.thresholds,
            "seed": self.seed,
            "search": self.search,
            "y_star": None if self.y_star is None else self.y_star.astype(int).tolist(),
            "hamming": self.hamming,
            "best_hamming": self.best_hamming,
            "charge": None
            if self.charge is None
            else {"epsilon": self.charge.epsilon, "delta": self.charge.delta},
            "mechanism": self.mechanism,
        }


def _query_patterns(a_signs, b_signs) -> np.ndarray:
    """(k, n^2) int8 entrywise sign pattern of each query."""
    return np.einsum("li,lj->lij", a_signs, b_signs).reshape(len(a_signs), -1).astype(np.int8)


def _inaccurate_counts_for_candidates(candidates, patterns, answers, tau, prune_at=None, chunk=512):
    """Count answers inaccurate for each candidate row.

    With prune_at set, candidates stop accumulating once they exceed it;
    their returned counts are partial (still above prune_at), which is
    enough to rule them out of the feasible set.
    """
    cands = candidates.astype(np.float64)
    k = len(answers)
    counts = np.zeros(len(cands), dtype=np.int64)
    alive = np.arange(len(cands))
    for start in range(0, k, chunk):
        stop = min(start + chunk, k)
        vals = cands[alive] @ patterns[start:stop].T.astype(np.float64)
        counts[alive] += (np.abs(vals - answers[start:stop][None, :]) > tau).sum(axis=1)
        if prune_at is not None:
            alive = alive[counts[alive] <= prune_at]
            if len(alive) == 0:
                break
    return counts


def _exhaustive_search(answers, patterns, n, tau, allowed):
    n_bits = n * n
    if n_bits > 20:
        raise ValueError(f"exhaustive search infeasible for n^2 = {n_bits} > 20")
    idx = np.arange(1 << n_bits, dtype=np.int64)
    candidates = ((idx[:, None] >> np.arange(n_bits)[None, :]) & 1).astype(np.uint8)
    counts = _inaccurate_counts_for_candidates(
        candidates, patterns, answers, tau, prune_at=int(allowed)
    )
    feasible = np.flatnonzero(counts <= allowed)
    if len(feasible):
        best = int(feasible[0])  # ties broken toward first-found
        return candidates[best].reshape(n, n), int(counts[best])
    # nothing feasible: pruned counts are partial, so rescore the pick exactly
    best = int(np.argmin(counts))
    exact = _inaccurate_counts_for_candidates(
        candidates[best : best + 1], patterns, answers, tau
    )
    return candidates[best].reshape(n, n), int(exact[0])


def _correlation_start(answers, a_signs, b_signs) -> np.ndarray:
    k, n = a_signs.shape
    corr = np.einsum("l,li,lj->ij", answers, a_signs.astype(np.float64), b_signs.astype(np.float64)) / k
    return (corr > 0.5).astype(np.uint8)


def _hillclimb_search(
    answers,
    a_signs,
    b_signs,
    n,
    tau,
    allowed,
    streams,
    restarts,
    max_sweeps,
    min_improvement,
    chunk=1 << 17,
):
    k = len(answers)
    patterns = _query_patterns(a_signs, b_signs)  # (k, n^2) int8
    best_y = None
    best_count = None
    for restart in range(restarts):
        if restart == 0:
            y = _correlation_start(answers, a_signs, b_signs)
        else:
            gen = streams.child("restart", restart).generator()
            y = (gen.random((n, n)) < 0.5).astype(np.uint8)
        flat = y.reshape(-1).astype(np.float64)
        values = patterns.astype(np.float64) @ flat
        diff = values - answers
        count = int(np.count_nonzero(np.abs(diff) > tau))
        for _ in range(max_sweeps):
            if count <= allowed:
                break
            # evaluate all single-bit flips in query chunks
            flip_counts = np.zeros(n * n, dtype=np.int64)
            signs = 1.0 - 2.0 * flat  # +1 to set the bit, -1 to clear it
            for start in range(0, k, chunk):
                stop = min(start + chunk, k)
                moved = diff[start:stop, None] + patterns[start:stop] * signs[None, :]
                flip_counts += (np.abs(moved) > tau).sum(axis=0)
            best_flip = int(np.argmin(flip_counts))
            if count - int(flip_counts[best_flip]) < min_improvement:
                break
            diff = diff + patterns[:, best_flip] * signs[best_flip]
            flat[best_flip] = 1.0 - flat[best_flip]
            count = int(flip_counts[best_flip])
        if best_count is None or count < best_count:
            best_count = count
            best_y = flat.astype(np.uint8).reshape(n, n)
        if best_count <= allowed:
            break
    return best_y, int(best_count)


def attacker_reconstruct(
    answers,
    a_signs,
    b_signs,
    n: int,
    gamma: float = DEFAULT_GAMMA,
    search: str = "auto",
    restarts: int = 2,
    max_sweeps: Optional[int] = None,
    streams: Optional[Streams] = None,
    x_true=None,
) -> AttackReport:
    """Find a dataset consistent with all but a small fraction of answers.

    Feasible means at most gamma^2 k / 64 answers are off by more than
    sqrt(gamma) n / 4. If no candidate within the search budget is
    feasible the attack fails; the best candidate found is still
    reported so downstream diagnostics have an output to score.
    """
    answers = np.asarray(answers, dtype=np.float64)
    a_signs = np.atleast_2d(np.asarray(a_signs, dtype=np.int64))
    b_signs = np.atleast_2d(np.asarray(b_signs, dtype=np.int64))
    k = len(answers)
    if k != len(a_signs) or k != len(b_signs):
        raise ValueError("answers and queries must align")
    tau = accuracy_threshold(n, gamma)
    allowed = disagreement_budget(k, gamma)
    if streams is None:
        streams = Streams(0)
    if search == "auto":
        search = "exhaustive" if n * n <= 20 else "hillclimb"
    if search == "exhaustive":
        patterns = _query_patterns(a_signs, b_signs)
        best_y, best_count = _exhaustive_search(answers, patterns, n, tau, allowed)
    elif search == "hillclimb":
        sweeps = max_sweeps if max_sweeps is not None else 4 * n * n
        min_improvement = max(1, k // 20000)
        best_y, best_count = _hillclimb_search(
            answers, a_signs, b_signs, n, tau, allowed,
            streams, restarts, sweeps, min_improvement,
        )
    else:
        raise ValueError(f"unknown search {search!r}")
    feasible = best_count <= allowed
    report = AttackReport(
        n=n,
        k=k,
        gamma=gamma,
        inaccurate_count=best_count,
        feasible=feasible,
        thresholds={
            "accuracy": tau,
            "disagreement_budget": allowed,
            "catch": catch_threshold(k, gamma),
        },
        seed=streams.seed,
        search=search,
        best_dataset=best_y,
    )
    if feasible:
        report.y_star = best_y
    if x_true is not None:
        x_true = _as_bits(x_true)
        report.best_hamming = int(np.count_nonzero(best_y != x_true))
        if feasible:
            report.hamming = report.best_hamming
    return report


def run_attack(
    x,
    mechanism: str,
    streams: Streams,
    epsilon: Optional[float] = None,
    gamma: float = DEFAULT_GAMMA,
    k: Optional[int] = None,
    search: str = "auto",
    restarts: int = 2,
    max_sweeps: Optional[int] = None,
) -> AttackReport:
    """Full pipeline: prepare the gray box on x, answer k random queries,
    reconstruct, and report against the true x."""
    x = _as_bits(x)
    n = x.shape[0]
    if k is None:
        k = default_query_count(n, gamma)
    family, post = mechanism_components(mechanism, epsilon)
    box = GrayBox.prepare(x, family, post, streams.child("prepare"))
    a_signs, b_signs = sample_query_signs(n, k, streams.child("queries"))
    answers = box.answer_outer_batch(a_signs, b_signs, streams.child("answers"))
    report = attacker_reconstruct(
        answers,
        a_signs,
        b_signs,
        n,
        gamma=gamma,
        search=search,
        restarts=restarts,
        max_sweeps=max_sweeps,
        streams=streams.child("search"),
        x_true=x,
    )
    report.charge = box.charge
    report.mechanism = mechanism
    report.seed = streams.seed
    return report


def privacy_distance_diagnostic(
    mechanism: str,
    n: int,
    trials: int,
    streams: Streams,
    epsilon: Optional[float] = None,
    gamma: float = DEFAULT_GAMMA,
    k: Optional[int] = None,
    search: str = "hillclimb",
) -> dict:
    """Mean reconstruction distance over uniform secrets vs the lower
    bound e^(-eps_charged) (1/2 - delta_charged) n^2 for private
    mechanisms.

    The attacker's best-effort output is scored even when infeasible:
    any output of a private pipeline obeys the bound.
    """
    if trials < 20:
        raise ValueError(f"need at least 20 trials, got {trials}")
    hammings = []
    charge = None
    for t in range(trials):
        trial = streams.child("trial", t)
        x = (trial.child("x").generator().random((n, n)) < 0.5).astype(np.uint8)
        report = run_attack(
            x,
            mechanism,
            trial.child("attack"),
            epsilon=epsilon,
            gamma=gamma,
            k=k,
            search=search,
        )
        hammings.append(report.best_hamming)
        charge = report.charge
    hammings = np.array(hammings, dtype=np.float64)
    mean = float(hammings.mean())
    se = float(hammings.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    not_private = math.isinf(charge.epsilon)
    bound = 0.0 if not_private else math.exp(-charge.epsilon) * (0.5 - charge.delta) * n * n
    return {
        "mechanism": mechanism,
        "n": n,
        "trials": trials,
        "k": k if k is not None else default_query_count(n, gamma),
        "gamma": gamma,
        "epsilon_charged": charge.epsilon,
        "delta_charged": charge.delta,
        "mean_hamming": mean,
        "se_hamming": se,
        "bound": bound,
        "bound_applies": not not_private,
        "per_trial_hamming": [int(h) for h in hammings],
        "seed": streams.seed,
    }
