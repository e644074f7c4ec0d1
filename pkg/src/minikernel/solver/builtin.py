"""Builtin decision procedure.

Exact over integer linear arithmetic: presolve (bound propagation,
gcd tests, substitution of unit-coefficient equalities), a rational
phase-1 simplex for the relaxation and branch and bound on bounds for
integrality.  Products of two variables are relaxed with McCormick
envelopes and resolved by substitution of fixed operands, enumeration
over a small operand range, or interval bisection.  Anything the
procedure cannot settle within its budget comes back ``unknown`` with a
reason, never a guess; every ``sat`` is validated against the original
assertions before being returned.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from ..sym import expr as E
from . import linear as L
from .query import Verdict, validate_model
from .simplex import Timeout as SimplexTimeout
from .simplex import feasible

Interval = Tuple[Optional[int], Optional[int]]

_ENUM_LIMIT = 2048

# Bound and envelope rows built from constants beyond this magnitude
# (default width ranges, mostly: 2^63 for i64 symbols, and products of
# two of those in McCormick corners) are left out of the tableau.  They
# almost never cut anything, but their giant numerators leak into every
# pivot and make the exact simplex crawl.  Dropping a row only relaxes
# the LP: unsat answers stay sound, and models are validated against
# the original assertions and symbol widths before anything is reported.
_ROW_MAG = 1 << 40


def _mag_filter(iv: Interval) -> Interval:
    lo, hi = iv
    if lo is not None and abs(lo) > _ROW_MAG:
        lo = None
    if hi is not None and abs(hi) > _ROW_MAG:
        hi = None
    return lo, hi


class _OutOfBudget(Exception):
    def __init__(self, reason: str) -> None:
        self.reason = reason


@dataclass
class _Budget:
    nodes: int
    deadline: Optional[float]

    def tick(self) -> None:
        self.nodes -= 1
        if self.nodes < 0:
            raise _OutOfBudget("solver node budget exhausted")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _OutOfBudget("solver timeout")


MutableAtom = Tuple[Dict[str, int], int, str]  # terms, const, rel ("le"|"eq")
Subst = Tuple[str, Dict[str, int], int]  # var = terms . x + const


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _tighten(bounds: Dict[str, Interval], v: str, lo: Optional[int], hi: Optional[int]) -> bool:
    """Intersect; returns True if anything changed."""
    olo, ohi = bounds.get(v, (None, None))
    nlo = olo if lo is None else (lo if olo is None else max(olo, lo))
    nhi = ohi if hi is None else (hi if ohi is None else min(ohi, hi))
    if (nlo, nhi) != (olo, ohi):
        bounds[v] = (nlo, nhi)
        return True
    return False


def _fbbt_row(terms: Dict[str, int], const: int, bounds: Dict[str, Interval]) -> Optional[bool]:
    """Propagate ``terms . x + const <= 0``.  Returns None if a var
    range became empty / the row is infeasible, else whether bounds
    changed."""
    mins: Dict[str, Optional[int]] = {}
    none_vars = []
    total = const
    for v, c in terms.items():
        if c == 0:
            mins[v] = 0
            continue
        lo, hi = bounds.get(v, (None, None))
        m = c * lo if (c > 0 and lo is not None) else (c * hi if (c < 0 and hi is not None) else None)
        mins[v] = m
        if m is None:
            none_vars.append(v)
        else:
            total += m
    if not none_vars and total > 0:
        return None  # row infeasible even at its minimum
    changed = False
    for v, c in terms.items():
        if c == 0:
            continue
        if none_vars and (len(none_vars) > 1 or none_vars[0] != v):
            continue
        rest = total - (mins[v] or 0) if not none_vars else total
        # c*v <= -rest  (rest = const + sum of other minima)
        if c > 0:
            ub = _floor_div(-rest, c)
            if _tighten(bounds, v, None, ub):
                changed = True
        else:
            lb = _ceil_div(-rest, c)
            if _tighten(bounds, v, lb, None):
                changed = True
        lo, hi = bounds.get(v, (None, None))
        if lo is not None and hi is not None and lo > hi:
            return None
    return changed


_AGG_WIDE = 4096
_AGG_RANGE = 4096


def _aggregate_rows(atoms: List[MutableAtom], bounds: Dict[str, Interval]) -> Optional[bool]:
    """Name tightly-bounded integer combinations hiding in equalities.

    When the wide-range variables of an equality share a coefficient
    divisor g and the rest of the row has a finite range [lo, hi], the
    combination w = sum(a_i/g * x_i) over those variables is confined
    to [ceil(-hi/g), floor(-lo/g)].  Introducing w as a variable hands
    branch and bound a narrow quantity to split on; without it an
    address equality over block indices forces bisection across ranges
    in the millions.  Returns None when a derived range is empty (the
    row is unsatisfiable), else whether anything was introduced.
    """
    changed = False
    counter = 0
    taken: Optional[Set[str]] = None
    for i, (terms, const, rel) in enumerate(list(atoms)):
        if rel != "eq" or len(terms) < 2:
            continue
        wide: List[str] = []
        rest_lo = const
        rest_hi = const
        for v, c in terms.items():
            lo, hi = bounds.get(v, (None, None))
            if lo is None or hi is None or hi - lo > _AGG_WIDE:
                wide.append(v)
            else:
                rest_lo += min(c * lo, c * hi)
                rest_hi += max(c * lo, c * hi)
        if not wide or len(wide) == len(terms):
            continue
        g = 0
        for v in wide:
            g = math.gcd(g, abs(terms[v]))
        if g <= 1:
            continue
        w_lo = _ceil_div(-rest_hi, g)
        w_hi = _floor_div(-rest_lo, g)
        if w_lo > w_hi:
            return None
        if w_hi - w_lo > _AGG_RANGE:
            continue
        if taken is None:
            taken = set(bounds)
            for t2, _, _ in atoms:
                taken.update(t2)
        name = f"$agg{counter}"
        while name in taken:
            counter += 1
            name = f"$agg{counter}"
        counter += 1
        taken.add(name)
        bounds[name] = (w_lo, w_hi)
        define = {v: terms[v] // g for v in wide}
        define[name] = -1
        repl = {v: c for v, c in terms.items() if v not in wide}
        repl[name] = g
        atoms[i] = (define, 0, "eq")
        atoms.append((repl, const, "eq"))
        changed = True
    return changed


def _presolve(
    atoms: List[MutableAtom],
    products: List[L.Product],
    bounds: Dict[str, Interval],
    subs: List[Subst],
    protected: Set[str],
) -> bool:
    """Simplify in place; False means proven unsat."""
    for _round in range(40):
        changed = False

        kept: List[MutableAtom] = []
        for terms, const, rel in atoms:
            if not terms:
                if rel == "eq" and const != 0:
                    return False
                if rel == "le" and const > 0:
                    return False
                changed = True
                continue
            if len(terms) == 1:
                (v, c), = terms.items()
                if rel == "eq":
                    if (-const) % c != 0:
                        return False
                    val = (-const) // c
                    if _tighten(bounds, v, val, val):
                        changed = True
                else:
                    if c > 0:
                        if _tighten(bounds, v, None, _floor_div(-const, c)):
                            changed = True
                    else:
                        if _tighten(bounds, v, _ceil_div(-const, c), None):
                            changed = True
                lo, hi = bounds.get(v, (None, None))
                if lo is not None and hi is not None and lo > hi:
                    return False
                changed = True
                continue
            g = 0
            for c in terms.values():
                g = math.gcd(g, c)
            if g > 1:
                if rel == "eq":
                    if const % g != 0:
                        return False
                    terms = {v: c // g for v, c in terms.items()}
                    const //= g
                else:
                    rhs = _floor_div(-const, g)
                    terms = {v: c // g for v, c in terms.items()}
                    const = -rhs
                changed = True
            kept.append((terms, const, rel))
        atoms[:] = kept

        # bound propagation through every row
        for terms, const, rel in atoms:
            got = _fbbt_row(terms, const, bounds)
            if got is None:
                return False
            changed |= got
            if rel == "eq":
                got = _fbbt_row({v: -c for v, c in terms.items()}, -const, bounds)
                if got is None:
                    return False
                changed |= got

        got = _aggregate_rows(atoms, bounds)
        if got is None:
            return False
        changed |= got

        # substitute fixed variables
        fixed: Dict[str, int] = {}
        for v, (lo, hi) in bounds.items():
            if lo is not None and lo == hi:
                fixed[v] = lo
        if fixed:
            for i, (terms, const, rel) in enumerate(atoms):
                hit = [v for v in terms if v in fixed]
                if hit:
                    terms = dict(terms)
                    for v in hit:
                        const += terms.pop(v) * fixed[v]
                    atoms[i] = (terms, const, rel)
                    changed = True

        # eliminate one unit-coefficient equality per round
        for i, (terms, const, rel) in enumerate(atoms):
            if rel != "eq":
                continue
            pick = None
            for v in sorted(terms):
                # aggregate variables stay: substituting one away would
                # restore the very row _aggregate_rows split apart
                if v.startswith("$agg"):
                    continue
                if abs(terms[v]) == 1 and v not in protected and v not in fixed:
                    pick = v
                    break
            if pick is None:
                continue
            c = terms[pick]
            rest = {v: (-cc if c > 0 else cc) for v, cc in terms.items() if v != pick}
            rconst = -const if c > 0 else const
            # pick = rest . x + rconst
            subs.append((pick, rest, rconst))
            del atoms[i]
            lo, hi = bounds.pop(pick, (None, None))
            if hi is not None:
                atoms.append((dict(rest), rconst - hi, "le"))
            if lo is not None:
                atoms.append(({v: -cc for v, cc in rest.items()}, lo - rconst, "le"))
            for j, (t2, c2, r2) in enumerate(atoms):
                if pick in t2:
                    t2 = dict(t2)
                    f = t2.pop(pick)
                    for v, cc in rest.items():
                        t2[v] = t2.get(v, 0) + f * cc
                    t2 = {v: cc for v, cc in t2.items() if cc}
                    atoms[j] = (t2, c2 + f * rconst, r2)
            changed = True
            break

        # resolve products with a fixed operand
        keep_products: List[L.Product] = []
        for pr in products:
            fx = fixed.get(pr.x)
            fy = fixed.get(pr.y)
            if fx is not None and fy is not None:
                atoms.append(({pr.p: 1}, -fx * fy, "eq"))
                changed = True
            elif fx is not None:
                t = {pr.p: 1}
                t[pr.y] = t.get(pr.y, 0) - fx
                atoms.append(({v: c for v, c in t.items() if c}, 0, "eq"))
                changed = True
            elif fy is not None:
                t = {pr.p: 1}
                t[pr.x] = t.get(pr.x, 0) - fy
                atoms.append(({v: c for v, c in t.items() if c}, 0, "eq"))
                changed = True
            else:
                keep_products.append(pr)
        products[:] = keep_products

        if not changed:
            break
    return True


def _difference_products(
    products: List[L.Product],
    atoms: List[MutableAtom],
    bounds: Dict[str, Interval],
    fresh: L._Fresh,
) -> None:
    """For product pairs sharing an operand, assert the factored form:
    a*c - b*c = (a-b)*c.  The envelope of the difference operand carries
    sign information the two separate envelopes lose; twin-thread offset
    equalities (a*c = b*c with a != b, c >= 1) become linearly refutable.

    Only pairs whose product variables co-occur in some atom get the
    treatment: that is the shape an offset equality takes, and it keeps
    the extra rows out of queries that merely happen to reuse a factor."""
    if len(products) > 8:
        return
    pvars = {p.p for p in products}
    linked: Set[frozenset] = set()
    for terms, _const, _rel in atoms:
        present = [v for v in terms if v in pvars]
        for i in range(len(present)):
            for j in range(i + 1, len(present)):
                linked.add(frozenset((present[i], present[j])))
    if not linked:
        return
    base = list(products)
    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            p1, p2 = base[i], base[j]
            if frozenset((p1.p, p2.p)) not in linked:
                continue
            shared = {p1.x, p1.y} & {p2.x, p2.y}
            if len(shared) != 1:
                continue
            c = shared.pop()
            a = p1.y if p1.x == c else p1.x
            b = p2.y if p2.x == c else p2.x
            u = fresh.sym("dd", E.I64).name
            q = fresh.sym("dp", E.I64).name
            alo, ahi = bounds.get(a, (None, None))
            blo, bhi = bounds.get(b, (None, None))
            ul = None if alo is None or bhi is None else alo - bhi
            uh = None if ahi is None or blo is None else ahi - blo
            bounds[u] = (ul, uh)
            clo, chi = bounds.get(c, (None, None))
            if None in (ul, uh, clo, chi):
                bounds[q] = (None, None)
            else:
                corners = [ul * clo, ul * chi, uh * clo, uh * chi]
                bounds[q] = (min(corners), max(corners))
            atoms.append(({u: 1, a: -1, b: 1}, 0, "eq"))
            atoms.append(({p1.p: 1, p2.p: -1, q: -1}, 0, "eq"))
            x, y = (u, c) if u <= c else (c, u)
            products.append(L.Product(x, y, q))


def _mccormick(products: Sequence[L.Product], bounds: Mapping[str, Interval]) -> List[MutableAtom]:
    rows: List[MutableAtom] = []

    def acc(pairs: Sequence[Tuple[str, int]], const: int) -> MutableAtom:
        terms: Dict[str, int] = {}
        for v, c in pairs:
            terms[v] = terms.get(v, 0) + c
        return ({v: c for v, c in terms.items() if c}, const, "le")

    for pr in products:
        xl, xu = _mag_filter(bounds.get(pr.x, (None, None)))
        yl, yu = _mag_filter(bounds.get(pr.y, (None, None)))
        if xl is not None and yl is not None:
            rows.append(acc([(pr.y, xl), (pr.x, yl), (pr.p, -1)], -xl * yl))
        if xu is not None and yu is not None:
            rows.append(acc([(pr.y, xu), (pr.x, yu), (pr.p, -1)], -xu * yu))
        if xu is not None and yl is not None:
            rows.append(acc([(pr.p, 1), (pr.y, -xu), (pr.x, -yl)], xu * yl))
        if xl is not None and yu is not None:
            rows.append(acc([(pr.p, 1), (pr.y, -xl), (pr.x, -yu)], xl * yu))
    return rows


def _clamp_zero(iv: Interval) -> int:
    lo, hi = iv
    v = 0
    if lo is not None and v < lo:
        v = lo
    if hi is not None and v > hi:
        v = hi
    return v


def _apply_subs(model: Dict[str, int], subs: Sequence[Subst]) -> None:
    for var, terms, const in reversed(subs):
        model[var] = sum(model.get(v, 0) * c for v, c in terms.items()) + const


def _atoms_hold(atoms: Sequence[MutableAtom], model: Mapping[str, int]) -> bool:
    for terms, const, rel in atoms:
        s = sum(model.get(v, 0) * c for v, c in terms.items()) + const
        if rel == "eq":
            if s != 0:
                return False
        elif s > 0:
            return False
    return True


def _bnb(
    atoms0: List[MutableAtom],
    bounds0: Dict[str, Interval],
    budget: _Budget,
    protected: Set[str],
) -> Tuple[str, Optional[Dict[str, int]], List[Subst]]:
    """Exact ILP feasibility over the given rows.

    Returns (status, model, substitutions-to-apply).  The model covers
    every variable of the presolved system; eliminated variables are in
    the substitution list.
    """
    stack: List[Tuple[List[MutableAtom], Dict[str, Interval], List[Subst]]] = [
        (atoms0, bounds0, [])
    ]
    while stack:
        budget.tick()
        atoms, bounds, subs = stack.pop()
        if not _presolve(atoms, [], bounds, subs, protected):
            continue
        names = sorted({v for t, _, _ in atoms for v in t})
        if not names:
            model = {v: _clamp_zero(iv) for v, iv in bounds.items()}
            return "sat", model, subs
        rows: List[L.Row] = []
        for terms, const, rel in atoms:
            rows.append((dict(terms), "le" if rel == "le" else "eq", -const))
        for v in names:
            lo, hi = _mag_filter(bounds.get(v, (None, None)))
            if hi is not None:
                rows.append(({v: 1}, "le", hi))
            if lo is not None:
                rows.append(({v: -1}, "le", -lo))
        try:
            m = feasible(rows, names, budget.deadline)
        except SimplexTimeout:
            raise _OutOfBudget("solver timeout")
        if m is None:
            continue
        # branch the fractional variable with the tightest range first;
        # wide variables (block indices) are usually pinned by equality
        # rows once the narrow ones are integral
        frac = None
        frac_rank: Tuple[int, int, str] | None = None
        for v in names:
            if m[v].denominator != 1:
                lo, hi = bounds.get(v, (None, None))
                span = (0, hi - lo) if lo is not None and hi is not None else (1, 0)
                rank = (span[0], span[1], v)
                if frac_rank is None or rank < frac_rank:
                    frac_rank = rank
                    frac = v
        model = {v: _clamp_zero(bounds.get(v, (None, None))) for v in bounds}
        if frac is None:
            for v in names:
                model[v] = int(m[v])
            return "sat", model, subs
        # rounding probe: nearest integers often satisfy the rows
        probe = dict(model)
        for v in names:
            val = m[v]
            r = (val.numerator + val.denominator // 2) // val.denominator
            lo, hi = bounds.get(v, (None, None))
            if lo is not None and r < lo:
                r = lo
            if hi is not None and r > hi:
                r = hi
            probe[v] = r
        if _atoms_hold(atoms, probe):
            return "sat", probe, subs
        fl = m[frac].numerator // m[frac].denominator
        lo, hi = bounds.get(frac, (None, None))
        up_b = dict(bounds)
        up_b[frac] = (max(fl + 1, lo) if lo is not None else fl + 1, hi)
        dn_b = dict(bounds)
        dn_b[frac] = (lo, min(fl, hi) if hi is not None else fl)
        stack.append(([(dict(t), c, r) for t, c, r in atoms], up_b, list(subs)))
        stack.append(([(dict(t), c, r) for t, c, r in atoms], dn_b, list(subs)))
    return "unsat", None, []


def _solve(
    atoms: List[MutableAtom],
    products: List[L.Product],
    bounds: Dict[str, Interval],
    budget: _Budget,
    depth: int,
) -> Tuple[str, Optional[Dict[str, int]], Optional[str]]:
    """Returns (status, model, unknown-reason)."""
    subs: List[Subst] = []
    protected = {x for pr in products for x in (pr.x, pr.y, pr.p)}
    if not _presolve(atoms, products, bounds, subs, protected):
        return "unsat", None, None
    protected = {x for pr in products for x in (pr.x, pr.y, pr.p)}

    if not products:
        st, model, s2 = _bnb(atoms, bounds, budget, protected)
        if st == "sat":
            assert model is not None
            # restore eliminated variables newest-first: bnb-internal
            # substitutions happened after the presolve ones
            _apply_subs(model, subs + s2)
            return "sat", model, None
        return st, None, None

    relax = atoms + _mccormick(products, bounds)
    st, model, s2 = _bnb(relax, dict(bounds), budget, protected)
    if st == "unsat":
        return "unsat", None, None
    assert model is not None
    _apply_subs(model, s2)
    bad = None
    for pr in products:
        if model.get(pr.x, 0) * model.get(pr.y, 0) != model.get(pr.p, 0):
            bad = pr
            break
    if bad is None:
        _apply_subs(model, subs)
        return "sat", model, None

    if depth <= 0:
        return "unknown", None, "product refinement depth exhausted"

    def narrowed(var: str, lo: int, hi: int) -> Tuple[str, Optional[Dict[str, int]], Optional[str]]:
        a2 = [(dict(t), c, r) for t, c, r in atoms]
        b2 = dict(bounds)
        ol, oh = b2.get(var, (None, None))
        nl = lo if ol is None else max(ol, lo)
        nh = hi if oh is None else min(oh, hi)
        b2[var] = (nl, nh)
        st3, m3, r3 = _solve(a2, list(products), b2, budget, depth - 1)
        if st3 == "sat":
            assert m3 is not None
            _apply_subs(m3, subs)
        return st3, m3, r3

    # enumeration when an operand range is small
    for var in (bad.x, bad.y):
        lo, hi = bounds.get(var, (None, None))
        if lo is None or hi is None or hi - lo + 1 > _ENUM_LIMIT:
            continue
        probe_val = min(max(model.get(var, lo), lo), hi)
        order = [probe_val] + [v for v in range(lo, hi + 1) if v != probe_val]
        saw_unknown = None
        for val in order:
            st2, m2, r2 = narrowed(var, val, val)
            if st2 == "sat":
                return "sat", m2, None
            if st2 == "unknown":
                saw_unknown = r2
        if saw_unknown is None:
            return "unsat", None, None
        return "unknown", None, saw_unknown

    # Salient point probes before any bisection: fixing an operand
    # collapses the product in presolve, so each probe is one cheap
    # sub-solve, and models sitting at a range end (a low block index
    # against an unbounded tensor dimension, typically) surface without
    # a thirty-level dive.  A miss proves nothing: probed values are a
    # sliver of the domain.
    seen: Set[Tuple[str, int]] = set()
    for var in (bad.x, bad.y):
        lo, hi = bounds.get(var, (None, None))
        vals = [model.get(var), lo, None if lo is None else lo + 1,
                0, 1, hi, None if hi is None else hi - 1]
        for val in vals:
            if val is None or (var, val) in seen:
                continue
            if (lo is not None and val < lo) or (hi is not None and val > hi):
                continue
            seen.add((var, val))
            st2, m2, _ = narrowed(var, val, val)
            if st2 == "sat":
                return "sat", m2, None

    # bisection on the wider finite operand
    cand = []
    for var in (bad.x, bad.y):
        lo, hi = bounds.get(var, (None, None))
        if lo is not None and hi is not None:
            cand.append((hi - lo, var, lo, hi))
    if not cand:
        return "unknown", None, "product of unbounded symbols"
    cand.sort(reverse=True)
    _, var, lo, hi = cand[0]
    mid = (lo + hi) // 2
    st1, m1, r1 = narrowed(var, lo, mid)
    if st1 == "sat":
        return "sat", m1, None
    st2, m2, r2 = narrowed(var, mid + 1, hi)
    if st2 == "sat":
        return "sat", m2, None
    if st1 == "unsat" and st2 == "unsat":
        return "unsat", None, None
    return "unknown", None, r1 or r2 or "product refinement inconclusive"


_FLIP = {"lt": "gt", "le": "ge", "gt": "lt", "ge": "le", "eq": "eq"}


def _entailed_bounds(
    assertions: Sequence[E.Expr],
    bounds: Mapping[str, Interval] | None,
) -> Dict[str, Interval]:
    """Collect symbol intervals stated outright by top-level atoms
    (``blockDim.x == 256``, ``n >= 1``) and intersect them with the
    caller's bounds.  The div/mod rewriter consults intervals to decide
    how many sign cases a symbolic divisor needs; without this pass a
    divisor pinned by an equality still fans out into every case."""
    out: Dict[str, Interval] = dict(bounds or {})

    def tighten(name: str, lo: Optional[int], hi: Optional[int]) -> None:
        blo, bhi = out.get(name, (None, None))
        if lo is not None:
            blo = lo if blo is None else max(blo, lo)
        if hi is not None:
            bhi = hi if bhi is None else min(bhi, hi)
        out[name] = (blo, bhi)

    stack = list(assertions)
    while stack:
        e = stack.pop()
        if isinstance(e, E.BoolOp) and e.op == "and":
            stack.extend(e.args)
            continue
        if not isinstance(e, E.Cmp):
            continue
        lhs, rhs, op = e.lhs, e.rhs, e.op
        if isinstance(lhs, E.Const) and isinstance(rhs, E.Sym):
            lhs, rhs, op = rhs, lhs, _FLIP.get(op, op)
        if not (isinstance(lhs, E.Sym) and isinstance(rhs, E.Const)):
            continue
        if lhs.width.is_float or not isinstance(rhs.value, int):
            continue
        v = rhs.value
        if op == "eq":
            tighten(lhs.name, v, v)
        elif op == "le":
            tighten(lhs.name, None, v)
        elif op == "lt":
            tighten(lhs.name, None, v - 1)
        elif op == "ge":
            tighten(lhs.name, v, None)
        elif op == "gt":
            tighten(lhs.name, v + 1, None)
    return out


def check_assertions(
    assertions: Sequence[E.Expr],
    bounds: Mapping[str, Interval] | None = None,
    *,
    max_paths: int = 512,
    node_budget: int = 20000,
    refine_depth: int = 40,
    deadline: Optional[float] = None,
) -> Verdict:
    """Decide satisfiability of the conjunction of ``assertions``.

    ``bounds`` may carry symbol ranges that are already entailed by the
    assertions; they sharpen presolve and product refinement but must
    never add information, or unsat answers would be wrong.

    The conjunction is split into symbol-connected components solved
    independently.  Components share no symbols, so their models merge
    into a model of the whole and any unsatisfiable component refutes
    it; the payoff is that an irrelevant cluster (say the batch-size
    law while the question is about an unconstrained tensor dimension)
    can no longer drag product refinement into its own search space.
    """
    assertions = [E.simplify(a) for a in assertions]
    query_syms: Dict[str, E.Sym] = {}
    for a in assertions:
        query_syms.update(E.symbols_of(a))
    bounds = _entailed_bounds(assertions, bounds)
    budget = _Budget(node_budget, deadline)

    model: Dict[str, int] = {}
    merged: Dict[str, Interval] = dict(bounds or {})
    pending_reason: Optional[str] = None
    for comp in _components(assertions):
        st, m, aux, reason = _check_component(
            comp, bounds, max_paths, budget, refine_depth
        )
        if st == "unsat":
            return Verdict.unsat()
        if st == "unknown":
            pending_reason = pending_reason or reason
            continue
        assert m is not None
        model.update(m)
        merged.update(aux)
    if pending_reason is not None:
        return Verdict.unknown(pending_reason)

    full: Dict[str, int] = {}
    for name, sym in query_syms.items():
        if name in model:
            full[name] = model[name]
        else:
            wlo, whi = sym.width.bounds() if not sym.width.is_float else (0, 0)
            blo, bhi = merged.get(name, (None, None))
            lo = wlo if blo is None else max(wlo, blo)
            hi = whi if bhi is None else min(whi, bhi)
            full[name] = _clamp_zero((lo, hi))
    if validate_model(assertions, full):
        return Verdict.sat(full)
    return Verdict.unknown("internal: model failed validation")


def _components(assertions: Sequence[E.Expr]) -> List[List[E.Expr]]:
    """Group assertions transitively sharing a symbol.  Symbol-free
    assertions (literal truths, mostly) travel with the first group."""
    parent: Dict[int, int] = {i: i for i in range(len(assertions))}

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: Dict[str, int] = {}
    for i, a in enumerate(assertions):
        for name in E.symbols_of(a):
            if name in owner:
                parent[find(i)] = find(owner[name])
            else:
                owner[name] = i
    groups: Dict[int, List[E.Expr]] = {}
    order: List[int] = []
    for i, a in enumerate(assertions):
        r = find(i)
        if r not in groups:
            groups[r] = []
            order.append(r)
        groups[r].append(a)
    return [groups[r] for r in order]


def _check_component(
    assertions: List[E.Expr],
    bounds: Mapping[str, Interval],
    max_paths: int,
    budget: _Budget,
    refine_depth: int,
) -> Tuple[str, Optional[Dict[str, int]], Dict[str, Interval], Optional[str]]:
    """Decide one connected component; returns (status, model,
    auxiliary bounds, unknown-reason)."""
    try:
        rewritten, aux_bounds = L.rewrite_divs(assertions, bounds or {})
        paths = L.boolean_paths(rewritten, max_paths)
    except L.Unsupported as u:
        return "unknown", None, {}, f"unsupported: {u}"
    except L.CapExceeded as c:
        return "unknown", None, {}, str(c)

    merged: Dict[str, Interval] = {**(bounds or {}), **aux_bounds}
    pending_reason: Optional[str] = None
    for path in paths:
        fresh = L._Fresh()
        try:
            system = L.linearize_path(path, merged, fresh)
        except L.Unsupported as u:
            pending_reason = f"unsupported: {u}"
            continue
        atoms: List[MutableAtom] = [
            (dict(a.terms), a.const, a.rel) for a in system.atoms
        ]
        products = list(system.products)
        sys_bounds = dict(system.bounds)
        _difference_products(products, atoms, sys_bounds, fresh)
        try:
            st, model, reason = _solve(
                atoms, products, sys_bounds, budget, refine_depth
            )
        except _OutOfBudget as ob:
            return "unknown", None, {}, ob.reason
        if st == "unsat":
            continue
        if st == "unknown":
            pending_reason = reason or "inconclusive"
            continue
        assert model is not None
        return "sat", model, merged, None
    if pending_reason is not None:
        return "unknown", None, {}, pending_reason
    return "unsat", None, {}, None
