import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import LinearConstraint, milp

from quadcoarse.errors import TooLarge
from quadcoarse.generators import generate_test_mesh
from quadcoarse.ilp import (
    BUDGET_HIT,
    CONSISTENCY,
    GEOMETRIC,
    INFEASIBLE,
    NONNEG,
    OPTIMAL,
    VALIDITY,
    IlpModel,
    brute_force_solve,
    build_constraints,
    format_lp,
    integer_area,
    parse_lp,
    solve,
)
from quadcoarse.simplex import Budget
from quadcoarse.tmesh import build_tmesh, intersection_records, propagate_traces


def model_of(n, rows, weights, lengths=None):
    m = IlpModel(n, [], [Fraction(w) for w in weights], list(lengths or [1] * n), list(range(n)))
    for terms, sense, rhs in rows:
        m.add_row(terms, sense, rhs, VALIDITY)
    return m


def tm_model(spec, **kw):
    mesh = generate_test_mesh(spec)
    tm = build_tmesh(mesh, propagate_traces(mesh))
    return tm, build_constraints(tm, intersection_records(tm), **kw)


def test_equal_pair_example():
    m = model_of(2, [({0: 1, 1: -1}, "=", 0), ({0: 1}, ">=", 1)], [1, 1], [3, 3])
    for sol in (solve(m), brute_force_solve(m)):
        assert sol.var_values == [1, 1] and sol.objective_value == 2 and sol.status == OPTIMAL


def test_contradiction_is_infeasible():
    m = model_of(1, [({0: 1}, ">=", 1), ({0: 1}, "=", 0)], [1], [2])
    assert solve(m).status == INFEASIBLE
    assert brute_force_solve(m).status == INFEASIBLE


def test_cheapest_activation():
    m = model_of(2, [({0: 1, 1: 1}, ">=", 1)], [Fraction(1, 2), Fraction(1, 5)], [2, 5])
    for sol in (solve(m), brute_force_solve(m)):
        assert sol.var_values == [0, 1] and sol.objective_value == Fraction(1, 5)


def test_unconstrained_is_zero():
    m = model_of(3, [], [1, 1, 1], [2, 2, 2])
    for sol in (solve(m), brute_force_solve(m)):
        assert sol.var_values == [0, 0, 0] and sol.objective_value == 0


def test_grid_model_rows():
    tm, m = tm_model("grid(4,4)")
    assert m.n_vars == 4
    assert all(w == Fraction(1, 4) for w in m.weights)
    counts = m.tag_counts()
    assert counts[NONNEG] == 4 and counts[CONSISTENCY] == 2 and counts[VALIDITY] == 4
    eqs = {r.terms for r in m.rows if r.tag == CONSISTENCY}
    sides = tm.patches[0].sides
    for s, t in ((0, 2), (1, 3)):
        pair = tuple(sorted(((sides[s][0][0], 1), (sides[t][0][0], -1))))
        assert pair in eqs or tuple((v, -c) for v, c in pair) in eqs
    for sol in (solve(m), brute_force_solve(m)):
        assert sol.var_values == [1, 1, 1, 1] and sol.objective_value == 1
        assert integer_area(tm, m.arc_values(sol.var_values)) == 1


def test_grid_integer_area():
    tm, m = tm_model("grid(4,4)")
    assert integer_area(tm, [a.length for a in tm.arcs]) == 16
    q = [1] * len(tm.arcs)
    assert integer_area(tm, q) == 1
    s0 = tm.patches[0].sides[0][0][0]
    s2 = tm.patches[0].sides[2][0][0]
    q[s0] = q[s2] = 0
    assert integer_area(tm, q) == 0


def test_collapse_35_switch():
    tm, on = tm_model("ellipse_fig2")
    _, off = tm_model("ellipse_fig2", collapse_35=False)
    assert off.tag_counts()[VALIDITY] > on.tag_counts()[VALIDITY]
    assert solve(off).objective_value > solve(on).objective_value


def test_shared_variables_keep_optimum():
    for spec in ("disk_with_pair", "ellipse_fig2", "annulus(8,3)"):
        tm, plain = tm_model(spec)
        _, shared = tm_model(spec, share_variables=True)
        a, b = solve(plain), solve(shared)
        assert a.objective_value == b.objective_value
        assert integer_area(tm, plain.arc_values(a.var_values)) == integer_area(tm, shared.arc_values(b.var_values))


def test_weights_positive_and_every_var_constrained():
    _, m = tm_model("disk(40,6)")
    assert all(w > 0 for w in m.weights)
    used = {v for r in m.rows if r.tag == CONSISTENCY for v, _ in r.terms}
    _, m2 = tm_model("disk(40,6)", share_variables=True)
    assert used == set(range(m.n_vars))
    assert m2.n_vars < m.n_vars


def test_tag_partition():
    _, m = tm_model("disk(40,6)")
    counts = m.tag_counts()
    assert sum(counts.values()) == len(m.rows)
    assert counts[GEOMETRIC] > 0 and counts[VALIDITY] > 0


def test_lp_round_trip():
    _, m = tm_model("ellipse_fig2", share_variables=True)
    text = format_lp(m)
    back = parse_lp(text)
    assert format_lp(back) == text
    assert back.rows == m.rows and back.weights == m.weights and back.arc_var == m.arc_var


def test_brute_force_limit():
    m = model_of(3, [], [1, 1, 1], [1000, 1000, 1000])
    with pytest.raises(TooLarge):
        brute_force_solve(m, limit=10**6)


def test_budget_falls_back_to_initial_lengths():
    # LP relaxation is fractional, so one node cannot finish
    m = model_of(2, [({0: 2, 1: 2}, ">=", 3)], [1, 1], [2, 2])
    sol = solve(m, Budget(max_nodes=1))
    assert sol.status == BUDGET_HIT
    assert m.feasible(sol.var_values)
    assert solve(m).objective_value == 2


def test_solve_is_deterministic():
    _, m = tm_model("disk(40,6)", share_variables=True)
    a, b = solve(m), solve(m)
    assert a.var_values == b.var_values and a.objective_value == b.objective_value


# ----------------------------------------------------------------------
# random abstract models


@st.composite
def covering_models(draw):
    n = draw(st.integers(1, 6))
    lengths = draw(st.lists(st.integers(1, 4), min_size=n, max_size=n))
    rows = []
    for _ in range(draw(st.integers(0, 5))):
        support = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
        rhs = draw(st.integers(1, 2))
        # keeps an optimum inside the brute-force box [0, l]
        if rhs <= min(lengths[v] for v in support):
            rows.append(({v: 1 for v in support}, ">=", rhs))
    for _ in range(draw(st.integers(0, 2))):
        a, b = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if a != b and lengths[a] == lengths[b]:
            rows.append(({a: 1, b: -1}, "=", 0))
    weights = [Fraction(1, draw(st.integers(1, 6))) for _ in range(n)]
    return model_of(n, rows, weights, lengths)


@settings(max_examples=60, deadline=None)
@given(covering_models())
def test_solve_matches_brute_force(m):
    a, b = solve(m), brute_force_solve(m)
    assert a.objective_value == b.objective_value
    assert a.var_values == b.var_values


@pytest.mark.parametrize("spec", ["grid(4,4)", "disk_with_pair", "ellipse_fig2"])
def test_oracle_box_is_sound(spec):
    _, m = tm_model(spec, share_variables=True)
    small = brute_force_solve(m)
    big = brute_force_solve(m, box=[x + 1 for x in m.lengths])
    assert small.objective_value == big.objective_value == solve(m).objective_value


@settings(max_examples=40, deadline=None)
@given(covering_models())
def test_solve_matches_scipy_milp(m):
    n = m.n_vars
    A = np.zeros((len(m.rows), n))
    lo = np.zeros(len(m.rows))
    hi = np.zeros(len(m.rows))
    for k, r in enumerate(m.rows):
        for v, c in r.terms:
            A[k, v] = c
        lo[k] = r.rhs
        hi[k] = r.rhs if r.sense == "=" else np.inf
    c = np.array([float(w) for w in m.weights])
    cons = [LinearConstraint(A, lo, hi)] if len(m.rows) else []
    res = milp(c, constraints=cons, integrality=np.ones(n))
    assert res.success
    assert math.isclose(float(solve(m).objective_value), res.fun, rel_tol=1e-9, abs_tol=1e-9)
