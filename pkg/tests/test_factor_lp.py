from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from obliv_kand.certificates import baseline_certificate, constants
from obliv_kand.factor_lp import (
    FeasibleWeights,
    approximation_ratio,
    build_dual,
    build_primal,
    grid_search,
    instance_from_solution,
    nice_solution,
    objective_curve,
    r_k,
    r_k_normalizer,
    superoblivious_hard_solution,
    witness_solution_from_instance,
)
from obliv_kand.instance import assignment_value, bias, brute_force_optimum, symmetric_pair_instance
from obliv_kand.lp import check_feasible
from obliv_kand.oblivious import (
    BiasPartition,
    Pattern,
    RoundingVector,
    bias_class,
    clause_patterns,
    oblivious_value,
    pattern_array,
    pattern_count,
)

from conftest import random_instance

F = Fraction


def test_primal_shape():
    lp = build_primal(2, (0, 1), (F(2, 3),))
    assert lp.n_vars == 21 == pattern_count(2, 1)
    assert lp.A_eq.shape == (1, 21) and lp.A_le.shape == (6, 21)
    rows = [tuple(r) for r in pattern_array(2, 1).tolist()]
    assert lp.c[rows.index((0, 2, 0, 0, 0, 0))] == pytest.approx(2.0 ** -2)


def test_class_zero_rows_with_zero_threshold():
    lp = build_primal(2, (0, 1), (F(2, 3),), exact=True)
    upper, lower = lp.A_le[2], lp.A_le[3]  # class 0 is the middle class
    P = pattern_array(2, 1)
    assert list(upper) == [F(int(a - b)) for a, b in zip(P[:, 1], P[:, 4])]
    assert list(lower) == [F(int(b - a)) for a, b in zip(P[:, 1], P[:, 4])]


def test_dual_shape_and_zero_point():
    lp = build_dual(2, (0, 1), (F(2, 3),))
    assert lp.A_le.shape == (21, 8)
    assert check_feasible(lp, np.zeros(8)).passed


@pytest.mark.parametrize("k", [2, 3, 4])
def test_primal_matches_scipy(k):
    rng = np.random.default_rng(k)
    for _ in range(3):
        t = BiasPartition((F(int(rng.integers(0, 30)), 100), F(1, 2), 1))
        p = RoundingVector(tuple(F(int(v), 100) for v in rng.integers(50, 101, 2)))
        lp = build_primal(k, t, p)
        h = linprog(lp.c, A_ub=lp.A_le, b_ub=lp.b_le, A_eq=lp.A_eq, b_eq=lp.b_eq, method="highs")
        assert approximation_ratio(k, t, p).value == pytest.approx(h.fun, abs=1e-8)


@given(st.integers(2, 4), st.integers(1, 2), st.integers(0, 10**6))
def test_strong_duality(k, ell, seed):
    rng = np.random.default_rng(seed)
    t = BiasPartition(tuple(sorted(set(F(int(v), 97) for v in rng.integers(0, 97, ell)))) + (1,))
    ell = t.ell
    p = RoundingVector(tuple(F(int(v), 100) for v in rng.integers(0, 101, ell)))
    a = approximation_ratio(k, t, p).value
    b = approximation_ratio(k, t, p, method="dual").value
    assert a == pytest.approx(b, abs=1e-6)


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_symmetric_pair_bound(k):
    W = FeasibleWeights(k, 1, {
        Pattern.from_classes(1, plus={0: k}): F(1),
        Pattern.from_classes(1, minus={0: k}): F(1),
    })
    t = (0, 1)
    assert W.is_feasible(t)
    for p in (F(1, 2), F(2, 3), F(9, 10)):
        assert W.objective((p,)) == 2 * F(1, 2 ** k)
        assert approximation_ratio(k, t, (p,)).value <= 2.0 ** -(k - 1) + 1e-9


def test_weak_duality_on_feasible_points():
    # any feasible dual value is below any feasible primal value
    for k in (2, 3):
        cert = baseline_certificate(k)
        t, p = cert.partition, cert.rounding
        for seed in range(6):
            W = witness_solution_from_instance(random_instance(seed, k, 6, 8), t)
            assert cert.z <= W.objective(p)


def test_witness_symmetric_pair():
    W = witness_solution_from_instance(symmetric_pair_instance(2), (0, 1))
    assert W == {Pattern.from_classes(1, plus={0: 2}): 1, Pattern.from_classes(1, minus={0: 2}): 1}
    assert W.objective((F(2, 3),)) == F(1, 2)
    inst = symmetric_pair_instance(2)
    assert W.objective((F(2, 3),)) == oblivious_value(inst, (0, 1), (F(2, 3),)) / brute_force_optimum(inst)[1]


def test_witness_single_clause():
    from obliv_kand.instance import Clause, Instance

    inst = Instance(3, 3, [Clause([1, 2], [3], 2)])
    W = witness_solution_from_instance(inst, (0, 1))
    assert list(W.values()) == [1]
    (c,) = W
    assert c.is_positive
    assert W.objective((F(3, 4),)) == F(27, 64)


@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_witness_is_exactly_feasible(seed, k):
    inst = random_instance(seed, k, 6, 7)
    t = BiasPartition((F(1, 5), 1))
    p = RoundingVector((F(7, 10),))
    W = witness_solution_from_instance(inst, t)
    lp = build_primal(k, t, p, exact=True)
    rep = check_feasible(lp, W.to_vector(exact=True), tol=0)
    assert rep.passed and rep.worst == 0
    val = brute_force_optimum(inst)[1]
    assert W.objective(p) == oblivious_value(inst, t, p) / val


def test_nice_solution_fixes_tight_row():
    # class +1 holds only all-positive mass: its lower row is slack but upper row is tight (bias 1)
    # class -1: W+ = W-, bias 0 at the closed end -> tight upper row
    W = superoblivious_hard_solution(3)
    t = (0, 1)
    rows = W.bias_rows(t)
    assert rows[-1][0] == 0
    N = nice_solution(W, 3, t, F(1, 1000))
    assert N.is_feasible(t)
    assert N.bias_rows(t)[-1][0] < 0
    assert N.pos_total() == 1


def test_nice_solution_tight_lower_row():
    t = BiasPartition((F(1, 2), 1))
    # class +1 at bias exactly 1/2: W+(1) = 3/2, W-(1) = 1/2
    W = FeasibleWeights(2, 1, {
        Pattern.from_classes(1, plus={1: 2}): F(1, 2),
        Pattern.from_classes(1, plus={1: 1}, minus={1: 1}): F(1, 2),
        Pattern.from_classes(1, plus={0: 2}): F(1, 2),
        Pattern.from_classes(1, minus={0: 2}): F(1, 2),
    })
    assert W.is_feasible(t)
    assert W.bias_rows(t)[1][1] == 0
    N = nice_solution(W, 2, t, F(1, 10**4))
    assert N.bias_rows(t)[1][1] < 0 and N.is_feasible(t)


def test_nice_solution_unchanged_when_already_nice():
    t = BiasPartition((F(1, 2), 1))
    W = FeasibleWeights(2, 1, {
        Pattern.from_classes(1, plus={1: 2}): F(1, 2),
        Pattern.from_classes(1, plus={1: 1}, minus={1: 1}): F(1, 4),
        Pattern.from_classes(1, minus={1: 2}): F(1, 20),
        Pattern.from_classes(1, plus={0: 2}): F(1, 2),
        Pattern.from_classes(1, minus={0: 2}): F(1, 2),
    })
    assert W.is_feasible(t)
    assert nice_solution(W, 2, t) == W


@pytest.mark.parametrize("eps", [F(1, 1000), F(1, 10**4)])
def test_nice_solution_drift(eps):
    t = BiasPartition((F(1, 5), 1))
    p = RoundingVector((F(7, 10),))
    for seed in range(5):
        W = witness_solution_from_instance(random_instance(seed, 2, 6, 8), t)
        N = nice_solution(W, 2, t, eps)
        assert N.is_feasible(t)
        assert abs(N.objective(p) - W.objective(p)) <= 8 * eps


def test_nice_solution_rejects_infeasible():
    W = FeasibleWeights(2, 1, {Pattern.from_classes(1, plus={1: 2}): F(1, 2)})
    with pytest.raises(ValueError):
        nice_solution(W, 2, (0, 1))


def _check_synthesis(W, k, t):
    inst = instance_from_solution(W, k, t)
    Wq = FeasibleWeights(k, W.ell, {c: Fraction(w) for c, w in W.items()})
    used = [i for i in range(-W.ell, W.ell + 1) if Wq.w_plus(i) + Wq.w_minus(i) > 0]
    assert inst.n == len(used) * k <= (2 * W.ell + 1) * k
    # counting identity and class membership, exactly
    wp, wm = inst.signed_weights()
    for j, i in enumerate(used):
        for a in range(k):
            v = j * k + a
            assert wp[v] == Wq.w_plus(i) / k and wm[v] == Wq.w_minus(i) / k
            assert bias_class(t, bias(inst, v + 1)) == i
    # every clause carries its source pattern
    agg = {}
    for c, pat in zip(inst.clauses, clause_patterns(inst, t)):
        agg[pat] = agg.get(pat, 0) + c.weight
    assert agg == {c: w for c, w in Wq.items() if w}
    return inst


def test_synthesis_symmetric_pair():
    t = BiasPartition((0, 1))
    W = witness_solution_from_instance(symmetric_pair_instance(2), t)
    inst = _check_synthesis(W, 2, t)
    val = brute_force_optimum(inst)[1]
    for p in (F(1, 2), F(2, 3), F(9, 10)):
        assert oblivious_value(inst, t, (p,)) / val == F(1, 2)


@pytest.mark.parametrize("k", [2, 3])
def test_synthesis_hard_solution(k):
    t = BiasPartition((0, 1))
    W = nice_solution(superoblivious_hard_solution(k), k, t)
    inst = _check_synthesis(W, k, t)
    p = (constants(k).p_star,)
    x, val = brute_force_optimum(inst)
    assert val >= 1 / sum(W.values())
    assert float(oblivious_value(inst, t, p) / val) <= float(constants(k).alpha_star) + 1e-6
    assert oblivious_value(inst, t, p) / val <= W.objective(p)


def test_synthesis_rejects_non_nice():
    with pytest.raises(ValueError, match="not nice"):
        instance_from_solution(superoblivious_hard_solution(3), 3, (0, 1))


def test_synthesis_clause_cap():
    W = nice_solution(superoblivious_hard_solution(3), 3, (0, 1))
    with pytest.raises(ValueError, match="cap"):
        instance_from_solution(W, 3, (0, 1), clause_cap=5)


def test_roundtrip_through_instance():
    t = BiasPartition((0, 1))
    W = nice_solution(superoblivious_hard_solution(2), 2, t)
    back = witness_solution_from_instance(instance_from_solution(W, 2, t), t)
    # the synthesized instance has value 1/sum(W), so the witness rescales by sum(W)
    p = (F(2, 3),)
    assert back.is_feasible(t)
    assert back.objective(p) <= W.objective(p)
    assert back.objective(p) == pytest.approx(float(superoblivious_hard_solution(2).objective(p)), abs=1e-5)


def test_hard_solution_k2():
    W = superoblivious_hard_solution(2)
    a = Pattern.from_classes(1, plus={-1: 1, 1: 1})
    b = Pattern.from_classes(1, plus={1: 2})
    d = Pattern.from_classes(1, minus={-1: 1, 1: 1})
    assert dict(W) == {a: F(2, 3), b: F(1, 3), d: F(2, 3)}


@pytest.mark.parametrize("k", range(2, 13))
def test_hard_solution_feasible(k):
    W = superoblivious_hard_solution(k)
    lp = build_primal(k, (0, 1), (constants(k).p_star,), exact=True)
    assert check_feasible(lp, W.to_vector(exact=True), tol=0).passed
    assert W.objective((constants(k).p_star,)) == constants(k).alpha_star


@pytest.mark.parametrize("k", range(2, 8))
def test_hard_solution_curve_is_rk(k):
    W = superoblivious_hard_solution(k)
    grid = [F(i, 40) for i in range(41)]
    for p, v in objective_curve(W, k, grid):
        assert v == r_k(k, p) / r_k_normalizer(k)


@pytest.mark.parametrize("k", range(2, 7))
def test_curve_argmax_near_pstar(k):
    W = superoblivious_hard_solution(k)
    step = F(1, 200)
    curve = objective_curve(W, k, [i * step for i in range(201)])
    p_best, _ = max(curve, key=lambda pv: pv[1])
    assert abs(p_best - constants(k).p_star) <= step


def test_curve_endpoints():
    W = superoblivious_hard_solution(2)
    assert objective_curve(W, 2, [F(0)]) == [(0, 0)]


def test_r_k_examples():
    assert r_k(3, F(2, 3)) == F(4, 27)
    for k in (2, 4, 6):
        assert r_k(k, 0) == 0
    for k in range(2, 9):
        c = constants(k)
        assert r_k(k, c.p_star) / r_k_normalizer(k) == c.alpha_star
        grid = [i / 1000 for i in range(1001)]
        vals = [r_k(k, p) for p in grid]
        assert abs(grid[int(np.argmax(vals))] - float(c.p_star)) <= 1e-3


def test_approximation_ratio_examples():
    assert approximation_ratio(2, (0, 1), (F(2, 3),)).value == pytest.approx(4 / 9, abs=1e-6)
    assert approximation_ratio(3, (0, 1), (F(2, 3),)).value == pytest.approx(2 / 9, abs=1e-6)
    assert approximation_ratio(2, (F(1, 100), 1), (F(2, 3) + F(1, 1000),)).value == pytest.approx(0.4457, abs=5e-4)


def test_ratio_weights_are_feasible_and_attain_value():
    res = approximation_ratio(3, (F(1, 10), F(1, 2), 1), (F(3, 5), F(4, 5)))
    W = res.weights
    assert W.is_feasible(res.t, tol=1e-8)
    assert W.objective(res.p) == pytest.approx(res.value, abs=1e-9)
    meta = res.metadata()
    assert meta["partition"] == ["1/10", "1/2", "1"]


def test_grid_search_small():
    res = grid_search(2, 3, [0.3, 0.5], [0.6, 0.7])
    assert len(res.cells) == 4
    for c in res.cells:
        assert 0 <= c.ratio <= 0.5 + 1e-9
    top = max(c.ratio for c in res.cells)
    assert res.best.ratio == top
    lines = res.to_csv().splitlines()
    assert lines[0] == "k,l,x,y,ratio,lp_iterations,seconds" and len(lines) == 5
    assert '"solver_tolerance"' in res.sidecar(1e-9)


def test_grid_search_tie_break():
    # y = 1/2 makes every x give the same (fair-coin) algorithm
    res = grid_search(2, 2, [0.7, 0.2, 0.5], [0.5])
    assert res.best.x == 0.2


def test_grid_search_reports_bad_cells():
    res = grid_search(2, 2, [0.5, 1.5], [0.7])
    assert [c.error is not None for c in res.cells] == [False, True]
    assert res.best.x == 0.5
