"""Quantization integer program over T-mesh arc lengths.

One non-negative integer ``q_a`` per arc.  Rows:

* ``nonneg``       ``q_a >= 0``
* ``consistency``  opposite patch sides have equal total length
* ``validity``     each trace keeps its first pi/4-cone intersection apart
                   from its origin (3-5 pairs may be exempted)
* ``geometric``    an intersection whose other origin lies outside the
                   trace cone stays separated from that origin

The objective is ``sum q_a / l_a`` with ``l_a`` the initial arc length,
kept as exact fractions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import Infeasible, TooLarge
from .tmesh import IntersectionRecord, TMesh

NONNEG, CONSISTENCY, VALIDITY, GEOMETRIC = "nonneg", "consistency", "validity", "geometric"
TAGS = (NONNEG, CONSISTENCY, VALIDITY, GEOMETRIC)

OPTIMAL = "optimal"
BUDGET_HIT = "feasible_budget_hit"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Row:
    terms: tuple[tuple[int, int], ...]
    sense: str
    rhs: int
    tag: str

    def value(self, q) -> int:
        return sum(c * q[v] for v, c in self.terms)

    def satisfied(self, q) -> bool:
        lhs = self.value(q)
        return lhs == self.rhs if self.sense == "=" else lhs >= self.rhs


@dataclass
class IlpModel:
    """Integer program in variable space.

    ``arc_var[a]`` maps each arc to its variable; ``lengths[v]`` is the
    initial length shared by the arcs of variable ``v``; ``weights[v]`` is
    the exact objective weight (a sum of ``1/l_a`` when arcs share it).
    """

    n_vars: int
    rows: list[Row]
    weights: list[Fraction]
    lengths: list[int]
    arc_var: list[int] = field(default_factory=list)

    def add_row(self, terms: dict[int, int], sense: str, rhs: int, tag: str) -> None:
        clean = tuple(sorted((v, c) for v, c in terms.items() if c != 0))
        self.rows.append(Row(clean, sense, rhs, tag))

    def feasible(self, q) -> bool:
        return all(r.satisfied(q) for r in self.rows) and all(x >= 0 for x in q)

    def objective(self, q) -> Fraction:
        return sum((w * x for w, x in zip(self.weights, q)), Fraction(0))

    def tag_counts(self) -> dict[str, int]:
        out = dict.fromkeys(TAGS, 0)
        for r in self.rows:
            out[r.tag] += 1
        return out

    def arc_values(self, q) -> list[int]:
        return [int(q[v]) for v in self.arc_var]


@dataclass
class Quantization:
    q: dict[int, int]
    objective_value: Fraction
    status: str
    var_values: list[int] = field(default_factory=list)
    nodes: int = 0


def _side_terms(side, var, sign, acc):
    for a, _ in side:
        acc[var[a]] = acc.get(var[a], 0) + sign


def _is_35_pair(tmesh: TMesh, i: int, j: int) -> bool:
    ci, cj = tmesh.classes.get(i), tmesh.classes.get(j)
    if ci is None or cj is None:
        return False
    if ci.site != "interior" or cj.site != "interior":
        return False
    return {ci.valence, cj.valence} == {3, 5}


def build_constraints(
    tmesh: TMesh,
    records: list[IntersectionRecord],
    alpha: float = math.pi / 4,
    collapse_35: bool = True,
    share_variables: bool = False,
) -> IlpModel:
    """Assemble the quantization program for ``tmesh``.

    With ``share_variables`` arcs forming opposite single-arc sides of a
    patch use one variable, which replaces the corresponding equality.
    """
    n_arcs = len(tmesh.arcs)
    parent = list(range(n_arcs))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if share_variables:
        for p in tmesh.patches:
            for s, t in ((0, 2), (1, 3)):
                if len(p.sides[s]) == 1 and len(p.sides[t]) == 1:
                    a, b = find(p.sides[s][0][0]), find(p.sides[t][0][0])
                    if a != b and tmesh.arcs[a].length == tmesh.arcs[b].length:
                        parent[max(a, b)] = min(a, b)
    roots = sorted({find(a) for a in range(n_arcs)})
    index = {r: k for k, r in enumerate(roots)}
    arc_var = [index[find(a)] for a in range(n_arcs)]
    lengths = [tmesh.arcs[r].length for r in roots]
    weights = [Fraction(0)] * len(roots)
    for a in range(n_arcs):
        weights[arc_var[a]] += Fraction(1, tmesh.arcs[a].length)
    model = IlpModel(len(roots), [], weights, lengths, arc_var)

    for v in range(model.n_vars):
        model.add_row({v: 1}, ">=", 0, NONNEG)

    seen: set[tuple] = set()

    def emit(terms, sense, rhs, tag):
        clean = tuple(sorted((v, c) for v, c in terms.items() if c != 0))
        if not clean:
            if (sense == "=" and rhs != 0) or (sense == ">=" and rhs > 0):
                raise Infeasible(f"empty {tag} row with rhs {rhs}")
            return
        key = (clean, sense, rhs)
        if key in seen:
            return
        seen.add(key)
        model.rows.append(Row(clean, sense, rhs, tag))

    for p in tmesh.patches:
        for s, t in ((0, 2), (1, 3)):
            acc: dict[int, int] = {}
            _side_terms(p.sides[s], arc_var, 1, acc)
            _side_terms(p.sides[t], arc_var, -1, acc)
            # canonical sign: first nonzero coefficient positive
            nz = [c for _, c in sorted(acc.items()) if c]
            if nz and nz[0] < 0:
                acc = {v: -c for v, c in acc.items()}
            emit(acc, "=", 0, CONSISTENCY)

    by_trace: dict[int, list[IntersectionRecord]] = {}
    for r in records:
        by_trace.setdefault(r.trace_i, []).append(r)
    for t in tmesh.traces:
        first = next((r for r in by_trace.get(t.id, []) if r.first_pi4), None)
        if first is None:
            continue
        if collapse_35 and _is_35_pair(tmesh, first.i, first.j):
            continue
        acc = {}
        for a in first.S_ij:
            acc[arc_var[a]] = 1
        emit(acc, ">=", 1, VALIDITY)

    # a trace closing on its own origin needs three edges to bound a simple cycle
    for t in tmesh.traces:
        line = tmesh.lines[t.id]
        if len(line) > 1 and line[-1] == line[0]:
            emit({arc_var[a]: 1 for a in tmesh.arcs_along(line)}, ">=", 3, VALIDITY)

    for r in records:
        if r.in_cone_of_i or not r.S_ji:
            continue
        acc = {}
        for a in r.S_ji:
            acc[arc_var[a]] = 1
        emit(acc, ">=", 1, GEOMETRIC)
    return model


def integer_area(tmesh: TMesh, q) -> int:
    """Total number of coarse quads implied by arc values ``q`` (indexed by arc)."""
    total = 0
    for p in tmesh.patches:
        total += tmesh.side_length(p.sides[0], q) * tmesh.side_length(p.sides[1], q)
    return total


def format_lp(model: IlpModel) -> str:
    """Plain-text listing: header, weights, then one row per line.

    Row lines read ``<tag> <sense> <rhs> : <coef>*x<var> ...``.
    """
    out = [f"quadcoarse-lp v1 vars {model.n_vars} rows {len(model.rows)}", "minimize"]
    for v, w in enumerate(model.weights):
        out.append(f"x{v} {w.numerator}/{w.denominator} l={model.lengths[v]}")
    out.append("subject to")
    for r in model.rows:
        terms = " ".join(f"{c:+d}*x{v}" for v, c in r.terms)
        out.append(f"{r.tag} {r.sense} {r.rhs} : {terms}")
    out.append("arcs")
    out.append(" ".join(str(v) for v in model.arc_var))
    return "\n".join(out) + "\n"


def format_quantization(model: IlpModel, sol: Quantization) -> str:
    q = model.arc_values(sol.var_values)
    out = [
        "quadcoarse-quantization v1",
        f"status {sol.status}",
        f"objective {sol.objective_value.numerator}/{sol.objective_value.denominator}",
        f"nodes {sol.nodes}",
        "vars " + " ".join(str(x) for x in sol.var_values),
        "arcs " + " ".join(str(x) for x in q),
    ]
    return "\n".join(out) + "\n"


def parse_lp(text: str) -> IlpModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    n = int(head[3])
    weights, lengths, rows = [], [], []
    k = 2
    for _ in range(n):
        parts = lines[k].split()
        weights.append(Fraction(parts[1]))
        lengths.append(int(parts[2][2:]))
        k += 1
    k += 1
    while lines[k] != "arcs":
        left, _, right = lines[k].partition(" : ")
        tag, sense, rhs = left.split()
        terms = tuple((int(t.split("*x")[1]), int(t.split("*x")[0])) for t in right.split())
        rows.append(Row(terms, sense, int(rhs), tag))
        k += 1
    arc_var = [int(x) for x in lines[k + 1].split()] if k + 1 < len(lines) else []
    return IlpModel(n, rows, weights, lengths, arc_var)


# ----------------------------------------------------------------------
# brute force oracle


def _rref(rows: list[list[Fraction]], ncols: int):
    """Reduced row echelon form; returns (rows, pivot columns)."""
    m = [r[:] for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r] + [x for x in m[r:] if any(x)], pivots


def equality_basis(model: IlpModel):
    """Split variables into pivots and free ones using the equality rows.

    Returns ``(pivots, free, expr)`` where ``expr[p]`` is
    ``(const, {free: coef})`` with ``q_p = const + sum coef * q_free``;
    raises ``Infeasible`` on an inconsistent equality system.
    """
    n = model.n_vars
    eq = [r for r in model.rows if r.sense == "="]
    mat = []
    for r in eq:
        row = [Fraction(0)] * (n + 1)
        for v, c in r.terms:
            row[v] = Fraction(c)
        row[n] = Fraction(r.rhs)
        mat.append(row)
    red, pivots = _rref(mat, n) if mat else ([], [])
    for row in red[len(pivots):]:
        if row[n] != 0:
            raise Infeasible("equality rows are inconsistent")
    pset = set(pivots)
    free = [v for v in range(n) if v not in pset]
    expr = {}
    for row, p in zip(red, pivots):
        expr[p] = (row[n], {f: -row[f] for f in free if row[f] != 0})
    return pivots, free, expr


def brute_force_solve(model: IlpModel, box=None, limit: int = 10**7) -> Quantization:
    """Exhaustive search over the free variables within ``box`` (default ``l_a``)."""
    box = list(model.lengths if box is None else box)
    pivots, free, expr = equality_basis(model)
    states = 1
    for f in free:
        states *= box[f] + 1
    if states > limit:
        raise TooLarge(f"{states} enumeration states exceed the limit of {limit}")
    n = model.n_vars
    den = 1
    for const, coefs in expr.values():
        den = math.lcm(den, const.denominator, *(c.denominator for c in coefs.values()))
    ineq = [r for r in model.rows if r.sense == ">="]
    best_obj, best_q = None, None
    ranges = [np.arange(box[f] + 1, dtype=np.int64) for f in free]
    wden = math.lcm(*(w.denominator for w in model.weights)) if model.weights else 1
    wint = np.array([int(w * wden) for w in model.weights], dtype=object)
    chunk = 200_000
    it = itertools.product(*ranges) if free else iter([()])
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        F = np.array(block, dtype=np.int64).reshape(len(block), len(free))
        Q = np.zeros((len(block), n), dtype=np.int64)
        ok = np.ones(len(block), dtype=bool)
        if free:
            Q[:, free] = F
        for p, (const, coefs) in expr.items():
            num = np.full(len(block), int(const * den), dtype=np.int64)
            for f, c in coefs.items():
                num += int(c * den) * F[:, free.index(f)]
            ok &= num % den == 0
            val = num // den
            ok &= (val >= 0) & (val <= box[p])
            Q[:, p] = val
        for r in ineq:
            lhs = np.zeros(len(block), dtype=np.int64)
            for v, c in r.terms:
                lhs += c * Q[:, v]
            ok &= lhs >= r.rhs
        ok &= (Q >= 0).all(axis=1)
        if not ok.any():
            continue
        cand = Q[ok]
        objs = cand.astype(object) @ wint
        lo = min(objs)
        for k in np.flatnonzero(objs == lo):
            q = tuple(int(x) for x in cand[k])
            if best_obj is None or lo < best_obj or (lo == best_obj and q < best_q):
                best_obj, best_q = lo, q
    if best_q is None:
        return Quantization({}, Fraction(0), INFEASIBLE)
    return _quantization(model, list(best_q), OPTIMAL)


def _quantization(model: IlpModel, qv: list[int], status: str, nodes: int = 0) -> Quantization:
    q = {a: int(qv[v]) for a, v in enumerate(model.arc_var)} if model.arc_var else dict(enumerate(qv))
    return Quantization(q, model.objective(qv), status, list(qv), nodes)


# ----------------------------------------------------------------------
# exact solver


def _presolve(model: IlpModel):
    """Merge variables tied by ``q_a - q_b = 0`` rows and drop dominated rows.

    Returns ``(group_of, groups, rows)``: ``group_of[v]`` is the merged
    variable of ``v``; groups are ordered by their smallest member so that
    lexicographic order over groups matches the order over variables.
    """
    n = model.n_vars
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for r in model.rows:
        if r.sense == "=" and r.rhs == 0 and len(r.terms) == 2:
            (a, ca), (b, cb) = r.terms
            if ca == -cb:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = sorted({find(v) for v in range(n)})
    gidx = {r: k for k, r in enumerate(roots)}
    group_of = [gidx[find(v)] for v in range(n)]

    rows: list[tuple[dict[int, int], str, int]] = []
    seen = set()
    for r in model.rows:
        if r.tag == NONNEG and r.rhs <= 0 and len(r.terms) == 1 and r.terms[0][1] > 0:
            continue
        acc: dict[int, int] = {}
        for v, c in r.terms:
            g = group_of[v]
            acc[g] = acc.get(g, 0) + c
        acc = {g: c for g, c in acc.items() if c}
        if not acc:
            if (r.sense == "=" and r.rhs != 0) or (r.sense == ">=" and r.rhs > 0):
                return group_of, roots, None
            continue
        key = (tuple(sorted(acc.items())), r.sense, r.rhs)
        if key not in seen:
            seen.add(key)
            rows.append((acc, r.sense, r.rhs))
    # a covering row whose support contains another covering row is implied
    cover = [(i, frozenset(t)) for i, (t, s, b) in enumerate(rows) if s == ">=" and b == 1 and all(c == 1 for c in t.values())]
    cover.sort(key=lambda x: (len(x[1]), x[0]))
    drop = set()
    kept: list[frozenset] = []
    for i, sup in cover:
        if any(k <= sup for k in kept):
            drop.add(i)
        else:
            kept.append(sup)
    rows = [r for i, r in enumerate(rows) if i not in drop]
    return group_of, roots, rows


def _components(n: int, rows):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for t, _, _ in rows:
        ks = list(t)
        for k in ks[1:]:
            ra, rb = find(ks[0]), find(k)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    comps: dict[int, list[int]] = {}
    for v in range(n):
        comps.setdefault(find(v), []).append(v)
    return [comps[k] for k in sorted(comps)]


def _row_ok(row, x) -> bool:
    terms, sense, rhs = row
    lhs = sum(c * x[k] for k, c in terms.items())
    return lhs == rhs if sense == "=" else lhs >= rhs


def solve(model: IlpModel, budget=None) -> Quantization:
    """Exact minimum of the model, ties broken by the smallest ``q`` vector."""
    from .simplex import Budget, branch_and_bound

    budget = budget or Budget()
    group_of, roots, rows = _presolve(model)
    if rows is None:
        return Quantization({}, Fraction(0), INFEASIBLE)
    ng = len(roots)
    gweight = [Fraction(0)] * ng
    for v, w in enumerate(model.weights):
        gweight[group_of[v]] += w
    gval = [0] * ng
    status = OPTIMAL
    nodes = 0
    for comp in _components(ng, rows):
        local = {g: k for k, g in enumerate(comp)}
        crow = [({local[g]: c for g, c in t.items()}, s, b) for t, s, b in rows if next(iter(t)) in local]
        if not crow:
            continue
        cost = {local[g]: gweight[g] for g in comp}
        x, st, used = branch_and_bound(len(comp), crow, cost, budget)
        nodes += used
        if x is None and st == BUDGET_HIT:
            # the initial lengths are a feasible fallback incumbent
            x = [model.lengths[roots[g]] for g in comp]
            if not all(_row_ok(r, x) for r in crow):
                x = None
        if x is None:
            return Quantization({}, Fraction(0), st, nodes=nodes)
        if st != OPTIMAL:
            status = st
        for g, val in zip(comp, x):
            gval[g] = val
    qv = [gval[group_of[v]] for v in range(model.n_vars)]
    if not model.feasible(qv):
        raise Infeasible("solver returned a point violating the model")
    return _quantization(model, qv, status, nodes)
