"""Exact-rational branch-and-bound for small integer programs.

LP relaxations are solved by a two-phase primal simplex on a sparse
tableau of ``Fraction`` entries with Bland's rule.  The objective is
lexicographic: first the weighted cost, then ``x_0, x_1, ...`` in order.
The relaxation optimum is therefore the lexicographically smallest
optimal vertex, which gives a sound lexicographic bound in the search
and makes the returned integer optimum unique.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class Budget:
    max_nodes: int = 20000
    time_limit: float = 120.0


class _Tableau:
    """Rows ``x_basis[r] + sum_j a[r][j] x_j = b[r]`` over nonbasic columns."""

    def __init__(self, rows, rhs, basis, n_cols):
        self.a = rows
        self.b = rhs
        self.basis = basis
        self.n_cols = n_cols
        self.row_of = {v: r for r, v in enumerate(basis)}

    def pivot(self, r, j):
        a, b = self.a, self.b
        prow = a[r]
        p = prow.pop(j)
        leaving = self.basis[r]
        inv = ONE / p
        new = {k: v * inv for k, v in prow.items()}
        new[leaving] = inv
        bnew = b[r] * inv
        a[r] = new
        b[r] = bnew
        for i in range(len(a)):
            if i == r:
                continue
            row = a[i]
            f = row.pop(j, None)
            if f is None:
                continue
            for k, v in new.items():
                nv = row.get(k, ZERO) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            b[i] -= f * bnew
        del self.row_of[leaving]
        self.basis[r] = j
        self.row_of[j] = r

    def value(self, col):
        r = self.row_of.get(col)
        return self.b[r] if r is not None else ZERO


def _reduced_costs(tab: _Tableau, cost: dict[int, Fraction]) -> dict[int, Fraction]:
    """Reduced costs of nonbasic columns for ``min sum cost[k] x_k``."""
    d: dict[int, Fraction] = {}
    for k, c in cost.items():
        r = tab.row_of.get(k)
        if r is None:
            d[k] = d.get(k, ZERO) + c
        else:
            for j, v in tab.a[r].items():
                d[j] = d.get(j, ZERO) - c * v
    return {j: v for j, v in d.items() if v}


def _lex_improving(tab: _Tableau, j: int, lex_cols: list[int]) -> bool:
    """Whether column ``j`` decreases the tie-break objective ``(x_0, x_1, ...)``."""
    for k in lex_cols:
        r = tab.row_of.get(k)
        if r is None:
            if k == j:
                return False
            continue
        v = tab.a[r].get(j)
        if v:
            return v > 0
    return False


def _simplex(tab: _Tableau, cost, allowed, lex_cols=None, deadline=None) -> bool:
    """Minimize over ``allowed`` entering columns; False if unbounded."""
    while True:
        d = _reduced_costs(tab, cost)
        basic = tab.row_of
        if lex_cols is None:
            cols = d
        else:
            cols = set(d)
            for row in tab.a:
                cols.update(row)
            cols.update(k for k in lex_cols if k not in basic)
        entering = None
        # Bland's rule on the perturbed objective cost + eps * x_0 + eps^2 * x_1 ...
        for j in sorted(cols):
            if j in basic or j not in allowed:
                continue
            dj = d.get(j, ZERO)
            if dj < 0 or (dj == 0 and lex_cols is not None and _lex_improving(tab, j, lex_cols)):
                entering = j
                break
        if entering is None:
            return True
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutError
        best = None
        for r, row in enumerate(tab.a):
            v = row.get(entering)
            if v is None or v <= 0:
                continue
            ratio = tab.b[r] / v
            key = (ratio, tab.basis[r])
            if best is None or key < best[0]:
                best = (key, r)
        if best is None:
            return False
        tab.pivot(best[1], entering)


def solve_lp(n, rows, cost, lex=True, deadline=None):
    """Exact LP ``min cost.x`` s.t. rows, ``x >= 0``.

    ``rows`` are ``(terms dict, sense, rhs)`` with sense in ``= >= <=``.
    Returns ``None`` when infeasible, otherwise the lexicographically
    smallest optimal vertex as a list of Fractions.
    """
    next_col = n
    a, b, basis = [], [], []
    artificial = set()
    for terms, sense, rhs in rows:
        row = {k: Fraction(v) for k, v in terms.items() if v}
        rhs = Fraction(rhs)
        slack = None
        if sense != "=":
            slack = next_col
            next_col += 1
            row[slack] = ONE if sense == "<=" else -ONE
        if rhs < 0:
            row = {k: -v for k, v in row.items()}
            rhs = -rhs
        if slack is not None and row[slack] == ONE:
            bv = slack
            row.pop(slack)
        else:
            bv = next_col
            next_col += 1
            artificial.add(bv)
        a.append(row)
        b.append(rhs)
        basis.append(bv)
    tab = _Tableau(a, b, basis, next_col)
    allowed = set(range(next_col))
    if artificial:
        _simplex(tab, {k: ONE for k in artificial}, allowed, deadline=deadline)
        if sum(tab.value(k) for k in artificial) != 0:
            return None
        # drive zero artificials out of the basis, drop redundant rows
        for k in sorted(artificial):
            r = tab.row_of.get(k)
            if r is None:
                continue
            j = next((c for c in sorted(tab.a[r]) if c not in artificial), None)
            if j is not None:
                tab.pivot(r, j)
            else:
                _drop_row(tab, r)
        for row in tab.a:
            for k in artificial:
                row.pop(k, None)
        allowed -= artificial
    cost = {k: Fraction(v) for k, v in cost.items() if v}
    ok = _simplex(tab, cost, allowed, list(range(n)) if lex else None, deadline)
    if not ok:
        raise ValueError("unbounded LP relaxation")
    return [tab.value(k) for k in range(n)]


def _drop_row(tab: _Tableau, r: int) -> None:
    del tab.row_of[tab.basis[r]]
    del tab.a[r], tab.b[r], tab.basis[r]
    tab.row_of = {v: i for i, v in enumerate(tab.basis)}


def branch_and_bound(n, rows, cost, budget: Budget | None = None):
    """Lexicographically smallest optimal integer point.

    Returns ``(x, status, nodes)`` with status ``optimal``,
    ``feasible_budget_hit`` or ``infeasible`` (``x`` is ``None`` then, or
    when the budget ran out before any integer point was found).
    """
    budget = budget or Budget()
    deadline = time.monotonic() + budget.time_limit
    cost_list = [Fraction(cost.get(k, 0)) for k in range(n)]

    def key(x):
        return (sum(c * v for c, v in zip(cost_list, x)), *x)

    best = None
    best_key = None
    stack = [[]]
    nodes = 0
    exhausted = False
    while stack:
        if nodes >= budget.max_nodes or time.monotonic() > deadline:
            exhausted = True
            break
        extra = stack.pop()
        nodes += 1
        try:
            x = solve_lp(n, rows + extra, cost, deadline=deadline)
        except TimeoutError:
            exhausted = True
            break
        if x is None:
            continue
        k = key(x)
        if best_key is not None and k >= best_key:
            continue
        frac = [(abs(v - round(v)) if v.denominator != 1 else ZERO) for v in x]
        worst = max(frac) if frac else ZERO
        if worst == 0:
            best, best_key = [int(v) for v in x], k
            continue
        j = min(range(n), key=lambda i: (-frac[i], i))
        fl = x[j].numerator // x[j].denominator
        # explore the down branch first
        stack.append(extra + [({j: 1}, ">=", fl + 1)])
        stack.append(extra + [({j: 1}, "<=", fl)])
    if best is None:
        return None, ("feasible_budget_hit" if exhausted else "infeasible"), nodes
    return best, ("feasible_budget_hit" if exhausted else "optimal"), nodes
