from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obliv_kand.instance import Clause, Instance, InstanceError, symmetric_pair_instance
from obliv_kand.oblivious import oblivious_value, snapshot
from obliv_kand.streaming import (
    BiasProfile,
    ClauseStream,
    bounded_degree_estimate,
    exact_snapshot,
    generate_random_instance,
    generate_random_stream,
    max_degree,
    random_order_estimate,
    shuffle_stream,
)

F = Fraction
T = (F(1, 100), 1)
P = (F(2, 3) + F(1, 1000),)


def test_shuffle_single_clause():
    inst = Instance(2, 2, [Clause([1], [2])])
    s = shuffle_stream(inst, 3)
    assert s.m == 1 and s.to_instance() == inst


@given(st.integers(0, 10**6))
def test_shuffle_preserves_multiset(seed):
    inst = generate_random_instance(3, 20, 30, seed=seed)
    base = ClauseStream.from_instance(inst)
    s = shuffle_stream(inst, seed)
    assert s.clause_multiset() == base.clause_multiset()


def test_shuffle_deterministic():
    inst = generate_random_instance(2, 50, 100, seed=1)
    a, b = shuffle_stream(inst, 9), shuffle_stream(inst, 9)
    assert np.array_equal(a.variables, b.variables) and np.array_equal(a.signs, b.signs)
    c = shuffle_stream(inst, 10)
    assert not np.array_equal(a.variables, c.variables)


def test_shuffle_rejects_weighted():
    inst = Instance(2, 2, [Clause([1], [2], 2)])
    with pytest.raises(InstanceError):
        shuffle_stream(inst, 0)


def test_exact_snapshot_matches_instance_snapshot():
    inst = generate_random_instance(3, 30, 60, "skewed:0.3", seed=4)
    assert exact_snapshot(ClauseStream.from_instance(inst), T) == snapshot(inst, T)


def test_random_order_full_storage_is_exact():
    inst = generate_random_instance(2, 40, 100, seed=2)
    s = shuffle_stream(inst, 0)
    out = random_order_estimate(s, T, P, eps=0.2, C=32)
    assert out.full_storage and out.stored_clauses == 100
    assert out.raw == pytest.approx(float(oblivious_value(inst, T, P)), abs=1e-12)
    assert out.offset == pytest.approx(0.2 * 21)


@given(st.integers(0, 1000), st.floats(0.05, 0.5))
def test_estimate_in_range(seed, eps):
    st_ = generate_random_stream(2, 300, 3000, seed=seed)
    out = random_order_estimate(st_, T, P, eps, C=32)
    assert 0 <= out.estimate <= 1 + eps
    out = bounded_degree_estimate(st_, max_degree(st_), st_.m, T, P, eps, C=32, seed=seed)
    assert 0 <= out.estimate <= 1 + eps


def test_random_order_space():
    st_ = generate_random_stream(2, 2000, 40000, seed=3)
    out = random_order_estimate(st_, T, P, 0.05, C=32)
    assert out.stored_clauses == 12800
    assert out.tracked_vars <= 2 * out.stored_clauses
    assert out.space_used == out.stored_clauses + out.tracked_vars


def test_random_order_l1_concentration():
    base = generate_random_stream(2, 2000, 40000, seed=5)
    snap = exact_snapshot(base, T)
    errs = []
    for seed in range(20):
        perm = np.random.default_rng(seed).permutation(base.m)
        s = ClauseStream(2, base.n, base.variables[perm], base.signs[perm])
        errs.append(random_order_estimate(s, T, P, 0.05, 32).Mhat.l1_distance(snap))
    assert max(errs) <= 0.05 * 21


def test_bounded_degree_full_rate_is_exact():
    inst = generate_random_instance(2, 100, 200, degree_cap=6, seed=1)
    s = ClauseStream.from_instance(inst)
    out = bounded_degree_estimate(s, 6, s.m, T, P, eps=0.1, C=32, seed=0)
    assert out.full_storage and out.q == 1
    assert {c: F(w).limit_denominator(10**6) for c, w in out.Mhat.items()} == snapshot(inst, T)


def test_bounded_degree_unbiased_and_variance():
    st_ = generate_random_stream(2, 1000, 4000, degree_cap=8, seed=7)
    snap = exact_snapshot(st_, T)
    Xc = {c: int(w * st_.m) for c, w in snap.items()}
    eps, C, D = 0.2, 4, 8
    runs = [bounded_degree_estimate(st_, D, st_.m, T, P, eps, C, seed=s) for s in range(200)]
    q = runs[0].q
    assert q < 1
    for c, x in Xc.items():
        if x < 100:
            continue
        xs = np.array([r.counts.get(c, 0) for r in runs], dtype=float)
        mean = q ** 2 * x
        se = xs.std(ddof=1) / np.sqrt(len(xs))
        assert abs(xs.mean() - mean) <= 4 * se
        assert xs.var(ddof=1) <= (2 * D + 1) * mean * 1.5


def test_bounded_degree_deterministic():
    st_ = generate_random_stream(2, 500, 2000, degree_cap=8, seed=1)
    a = bounded_degree_estimate(st_, 8, st_.m, T, P, 0.3, seed=4)
    b = bounded_degree_estimate(st_, 8, st_.m, T, P, 0.3, seed=4)
    assert a.estimate == b.estimate and a.counts == b.counts


def test_max_degree_examples():
    assert max_degree(symmetric_pair_instance(4)) == 2
    assert max_degree(Instance(3, 3, [Clause([1, 2], [3])])) == 1


def test_degree_cap_honored():
    for seed in range(5):
        inst = generate_random_instance(3, 60, 100, degree_cap=5, seed=seed)
        assert max_degree(inst) <= 5


def test_perfect_matching_structure():
    inst = generate_random_instance(2, 40, 20, degree_cap=1, seed=0)
    assert max_degree(inst) == 1
    assert sorted(v for c in inst.clauses for v in c.variables) == list(range(1, 41))


def test_generator_errors():
    with pytest.raises(InstanceError):
        generate_random_instance(2, 10, 3)
    with pytest.raises(InstanceError):
        generate_random_instance(2, 10, 20, degree_cap=3)


def test_uniform_bias_concentrates():
    inst = generate_random_instance(2, 50, 5000, seed=1)
    biases = np.array([float(b) for b in inst.biases()])
    assert np.abs(biases).mean() < 0.1


def test_skewed_and_planted_profiles():
    inst = generate_random_instance(2, 50, 2000, "skewed:0.9", seed=2)
    assert np.mean([float(b) for b in inst.biases()]) < -0.6
    hidden = tuple(1 if v % 2 else -1 for v in range(1, 51))
    prof = BiasProfile("planted", 0.95, hidden)
    inst = generate_random_instance(2, 50, 2000, prof, seed=3)
    agree = np.mean([float(b) * h > 0 for b, h in zip(inst.biases(), hidden)])
    assert agree > 0.95


def test_generator_reproducible():
    a = generate_random_instance(3, 30, 50, "skewed:0.2", seed=11)
    b = generate_random_instance(3, 30, 50, "skewed:0.2", seed=11)
    assert a == b
