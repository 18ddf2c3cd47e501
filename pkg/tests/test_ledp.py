import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ledplab.graphs import complete_graph
from ledplab.ledp import (
    IdentityRelease,
    PrivacyParams,
    RandomizedResponse,
    assemble_upper,
    compose_ledger,
    flip_probability,
    randomized_response,
    run_noninteractive,
)
from ledplab.rng import Streams


def test_flip_probability_values():
    assert flip_probability(math.log(3)) == pytest.approx(0.25, abs=1e-15)
    assert flip_probability(math.log(9)) == pytest.approx(0.1, abs=1e-15)
    assert abs(flip_probability(1e-6) - 0.5) < 1e-6


def test_flip_probability_rejects_nonpositive():
    with pytest.raises(ValueError):
        flip_probability(0.0)
    with pytest.raises(ValueError):
        flip_probability(-1.0)


def test_randomized_response_empirical_flip_rate():
    gen = Streams(100).child("rr").generator()
    bits = np.zeros(10**6, dtype=np.uint8)
    out = randomized_response(bits, math.log(3), gen)
    rate = out.mean()
    assert abs(rate - 0.25) < 0.005


def test_randomized_response_marginal_within_4_se():
    # Pr[output == input] should match e^eps/(e^eps+1) for both bit values.
    n = 10**6
    for eps in (0.5, math.log(3)):
        p_keep = 1.0 - flip_probability(eps)
        se = math.sqrt(p_keep * (1 - p_keep) / n)
        for b in (0, 1):
            gen = Streams(101).child("marginal", b).generator()
            bits = np.full(n, b, dtype=np.uint8)
            out = randomized_response(bits, eps, gen)
            kept = (out == b).mean()
            assert abs(kept - p_keep) <= 4 * se


def test_randomized_response_flips_uncorrelated_across_positions():
    # Flip indicators at distinct positions should be independent.
    gen = Streams(102).generator()
    trials, width = 200000, 4
    bits = np.zeros((trials, width), dtype=np.uint8)
    out = randomized_response(bits, math.log(3), gen)
    flips = out.astype(np.float64)
    p = 0.25
    se = math.sqrt(((p * (1 - p)) ** 2) / trials) / (p * (1 - p))  # corr SE ~ 1/sqrt(N)
    corr = np.corrcoef(flips.T)
    off_diag = corr[~np.eye(width, dtype=bool)]
    assert np.all(np.abs(off_diag) <= 4 / math.sqrt(trials) + 4 * se)


def test_randomized_response_empty_and_deterministic():
    out = randomized_response(np.zeros(0, dtype=np.uint8), 1.0, Streams(5).generator())
    assert out.shape == (0,)
    a = randomized_response(np.ones(64, dtype=np.uint8), 1.0, Streams(6).generator())
    b = randomized_response(np.ones(64, dtype=np.uint8), 1.0, Streams(6).generator())
    assert np.array_equal(a, b)


def test_randomized_response_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        randomized_response(np.zeros(3, dtype=np.uint8), 0.0, Streams(7).generator())
    with pytest.raises(ValueError):
        RandomizedResponse(-1.0)


def test_run_noninteractive_released_bit_counts():
    k3 = complete_graph(3)

    def count_bits(released):
        return sum(len(p) for p in released.values())

    total, transcript = run_noninteractive(
        k3, RandomizedResponse(1.0), count_bits, Streams(8), mode="upper"
    )
    assert total == 3  # vertex 0 releases 2 bits, vertex 1 one, vertex 2 none
    assert transcript.round_count == 1

    total_full, _ = run_noninteractive(
        k3, RandomizedResponse(1.0), count_bits, Streams(8), mode="full"
    )
    assert total_full == 9


def test_run_noninteractive_ledger_totals():
    k3 = complete_graph(3)
    eps = 0.7
    _, t_upper = run_noninteractive(k3, RandomizedResponse(eps), lambda r: None, Streams(9))
    assert t_upper.ledger() == PrivacyParams(eps, 0.0)
    # full-row release charges each shared bit at both endpoints
    _, t_full = run_noninteractive(
        k3, RandomizedResponse(eps), lambda r: None, Streams(9), mode="full"
    )
    assert t_full.ledger().epsilon == pytest.approx(2 * eps)


def test_identity_release_infinite_charge():
    k3 = complete_graph(3)
    _, t = run_noninteractive(k3, IdentityRelease(), lambda r: None, Streams(10))
    assert t.ledger().epsilon == math.inf


def test_transcript_records_all_released_values():
    k3 = complete_graph(3)
    released_seen = {}

    def keep(released):
        released_seen.update(released)
        return None

    _, t = run_noninteractive(k3, RandomizedResponse(1.0), keep, Streams(11))
    by_vertex = {out.vertex: out.payload for out in t.invocations()}
    assert set(by_vertex) == set(released_seen)
    for v, payload in released_seen.items():
        assert np.array_equal(by_vertex[v], payload)


def test_transcript_dump_format():
    k3 = complete_graph(3)
    _, t = run_noninteractive(k3, RandomizedResponse(1.5), lambda r: None, Streams(12))
    dump = t.dump()
    assert set(dump) == {"invocations", "ledger"}
    assert dump["ledger"] == {"epsilon_total": 1.5, "delta_total": 0.0}
    row = dump["invocations"][0]
    assert set(row) == {"round", "vertex", "randomizer", "epsilon", "delta", "payload_hex"}
    json.loads(t.dumps())  # round-trips as JSON


def test_compose_ledger_examples():
    p = PrivacyParams(0.3, 0.01)
    assert compose_ledger([p, p]) == PrivacyParams(0.6, 0.02)
    assert compose_ledger([]) == PrivacyParams(0.0, 0.0)
    charges = [PrivacyParams(0.1), PrivacyParams(0.2), PrivacyParams(0.3)]
    assert compose_ledger(charges).epsilon == pytest.approx(0.6)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(0.001, 5), st.floats(0, 0.05)).map(lambda t: PrivacyParams(*t)),
        max_size=6,
    )
)
def test_compose_ledger_order_invariant(charges):
    forward = compose_ledger(charges)
    backward = compose_ledger(list(reversed(charges)))
    assert abs(forward.epsilon - backward.epsilon) < 1e-12
    assert abs(forward.delta - backward.delta) < 1e-12
    # associativity: folding in two halves agrees with one pass
    half = len(charges) // 2
    two_step = compose_ledger(
        [compose_ledger(charges[:half]), compose_ledger(charges[half:])]
    )
    assert abs(two_step.epsilon - forward.epsilon) < 1e-12


def test_privacy_params_validation():
    with pytest.raises(ValueError):
        PrivacyParams(-0.1)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, -0.2)
    PrivacyParams(math.inf, 0.0)  # sentinel allowed


def test_assemble_upper_round_trip():
    k3 = complete_graph(3)
    result, _ = run_noninteractive(
        k3, IdentityRelease(), lambda released: assemble_upper(released, 3), Streams(13)
    )
    assert np.array_equal(result, k3.adjacency)
