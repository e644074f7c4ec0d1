"""Normalization of expression queries into integer-linear systems.

The pipeline is:

1. ``rewrite_divs``: every div / mod / emod / shr node is replaced by a
   fresh quotient or remainder symbol plus side constraints.  Side
   constraints are ordinary boolean expressions (they contain ``or``
   when a sign case split is needed), so step 2 handles all the
   branching uniformly.  Division-by-zero models are excluded by
   construction, matching the evaluator (which raises on them).
2. ``boolean_paths``: the assertion conjunction is expanded into a
   disjunction of paths, each a list of comparison atoms.  ``or``,
   ``not``, ``ne`` and ``Ite`` all fork; the number of paths is capped.
3. ``linearize_path``: each path becomes a :class:`System` of integer
   linear atoms.  Products of two non-constant subterms become fresh
   product variables with recorded (x, y, p) relations; the builtin
   solver resolves those by substitution, enumeration and bisection.

Only integer expressions are supported; a query touching floats raises
:class:`Unsupported` (the engine never emits such queries).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..sym import expr as E

Interval = Tuple[Optional[int], Optional[int]]


class Unsupported(Exception):
    """Query outside the decidable fragment of the builtin solver."""


class CapExceeded(Exception):
    """Path or case-split explosion beyond the configured cap."""


@dataclass(frozen=True)
class Atom:
    """terms . vars + const REL 0 with REL in {le, eq}; integer data."""

    terms: Tuple[Tuple[str, int], ...]
    const: int
    rel: str


@dataclass(frozen=True)
class Product:
    x: str
    y: str
    p: str


@dataclass
class System:
    atoms: List[Atom]
    products: List[Product]
    bounds: Dict[str, Interval]
    var_names: List[str]


def _neg_cmp(op: str) -> str:
    return {"eq": "ne", "ne": "eq", "lt": "ge", "le": "gt", "gt": "le", "ge": "lt"}[op]


def _negate(e: E.Expr) -> E.Expr:
    if isinstance(e, E.Const):
        return E.Const(0 if e.value else 1, E.BOOL)
    if isinstance(e, E.Cmp):
        return E.Cmp(_neg_cmp(e.op), e.lhs, e.rhs)
    if isinstance(e, E.BoolOp):
        if e.op == "not":
            return e.args[0]
        flipped = "or" if e.op == "and" else "and"
        return E.BoolOp(flipped, tuple(_negate(a) for a in e.args))
    if isinstance(e, E.Ite):
        return E.Ite(e.cond, _negate(e.then), _negate(e.other), E.BOOL)
    if isinstance(e, E.Sym) and e.width == E.BOOL:
        return E.Cmp("eq", e, E.Const(0, E.BOOL))
    raise Unsupported(f"cannot negate {type(e).__name__}")


def _replace_all(e: E.Expr, old: E.Expr, new: E.Expr) -> E.Expr:
    if e == old:
        return new
    kids = E.children(e)
    if not kids:
        return e
    repl = tuple(_replace_all(c, old, new) for c in kids)
    if all(a is b for a, b in zip(repl, kids)):
        return e
    return E.rebuild(e, repl)


def _find_int_ite(e: E.Expr) -> Optional[E.Ite]:
    if isinstance(e, E.Ite) and e.width != E.BOOL:
        return e
    for c in E.children(e):
        got = _find_int_ite(c)
        if got is not None:
            return got
    return None


# ---------------------------------------------------------------------------
# step 1: division elimination


class _Fresh:
    def __init__(self) -> None:
        self.n = 0

    def sym(self, prefix: str, width: E.Width) -> E.Sym:
        s = E.Sym(f"${prefix}{self.n}", width)
        self.n += 1
        return s


def _cmp(op: str, a: E.Expr, b: E.Expr) -> E.Expr:
    return E.Cmp(op, a, b)


def _c(v: int, w: E.Width) -> E.Const:
    return E.Const(v, w)


def rewrite_divs(
    assertions: Sequence[E.Expr],
    bounds: Mapping[str, Interval],
) -> Tuple[List[E.Expr], Dict[str, Interval]]:
    """Eliminate div/mod/emod/shr nodes; returns rewritten assertions
    plus interval bounds for the fresh symbols."""
    fresh = _Fresh()
    aux_bounds: Dict[str, Interval] = {}
    sides: List[E.Expr] = []
    bmap: Dict[str, Interval] = dict(bounds)

    def iv(e: E.Expr) -> Interval:
        return E.interval(e, bmap)

    def record(sym: E.Sym, lo: Optional[int], hi: Optional[int]) -> None:
        aux_bounds[sym.name] = (lo, hi)
        bmap[sym.name] = (lo, hi)

    def div_by_const(x: E.Expr, c: int, w: E.Width) -> E.Expr:
        if c == 0:
            raise Unsupported("division by constant zero")
        if c < 0:
            inner = div_by_const(x, -c, w)
            return E.BinOp("sub", _c(0, w), inner, w)
        q = fresh.sym("q", w)
        xlo, xhi = iv(x)
        record(
            q,
            None if xlo is None else E._trunc_div(xlo, c) - 1,
            None if xhi is None else E._trunc_div(xhi, c) + 1,
        )
        r = E.BinOp("sub", x, E.BinOp("mul", q, _c(c, w), w), w)
        nonneg = E.BoolOp(
            "and", (_cmp("ge", r, _c(0, w)), _cmp("le", r, _c(c - 1, w)))
        )
        nonpos = E.BoolOp(
            "and", (_cmp("le", r, _c(0, w)), _cmp("ge", r, _c(1 - c, w)))
        )
        if xlo is not None and xlo >= 0:
            sides.append(nonneg)
        elif xhi is not None and xhi <= 0:
            sides.append(nonpos)
        else:
            sides.append(
                E.BoolOp(
                    "or",
                    (
                        E.BoolOp("and", (_cmp("ge", x, _c(0, w)), nonneg)),
                        E.BoolOp("and", (_cmp("le", x, _c(0, w)), nonpos)),
                    ),
                )
            )
        return q

    def div_by_sym(x: E.Expr, d: E.Expr, w: E.Width) -> E.Expr:
        q = fresh.sym("q", w)
        record(q, *E.I64.bounds())
        r = E.BinOp("sub", x, E.BinOp("mul", d, q, w), w)
        dlo, dhi = iv(d)
        xlo, xhi = iv(x)
        d_cases = []
        if dhi is None or dhi >= 1:
            d_cases.append(("pos", _cmp("ge", d, _c(1, w)), E.BinOp("sub", d, _c(1, w), w)))
        if dlo is None or dlo <= -1:
            nd = E.BinOp("sub", _c(0, w), d, w)
            d_cases.append(("neg", _cmp("le", d, _c(-1, w)), E.BinOp("sub", nd, _c(1, w), w)))
        if not d_cases:
            raise Unsupported("divisor has empty sign range")
        x_cases = []
        if xhi is None or xhi >= 0:
            x_cases.append(("nn", _cmp("ge", x, _c(0, w)), "nonneg"))
        if xlo is None or xlo < 0:
            x_cases.append(("np", _cmp("le", x, _c(0, w)), "nonpos"))
        alts: List[E.Expr] = []
        for _, dcond, dm1 in d_cases:
            for _, xcond, kind in x_cases:
                if kind == "nonneg":
                    body = E.BoolOp(
                        "and", (_cmp("ge", r, _c(0, w)), _cmp("le", r, dm1))
                    )
                else:
                    neg_dm1 = E.BinOp("sub", _c(0, w), dm1, w)
                    body = E.BoolOp(
                        "and", (_cmp("le", r, _c(0, w)), _cmp("ge", r, neg_dm1))
                    )
                alts.append(E.BoolOp("and", (dcond, xcond, body)))
        sides.append(alts[0] if len(alts) == 1 else E.BoolOp("or", tuple(alts)))
        return q

    def emod(x: E.Expr, d: E.Expr, w: E.Width) -> E.Expr:
        r = fresh.sym("r", w)
        k = fresh.sym("k", w)
        record(k, *E.I64.bounds())
        prod = E.BinOp("mul", d, k, w) if not isinstance(d, E.Const) else E.BinOp("mul", k, d, w)
        sides.append(_cmp("eq", E.BinOp("sub", x, r, w), prod))
        sides.append(_cmp("ge", r, _c(0, w)))
        if isinstance(d, E.Const):
            if d.value == 0:
                raise Unsupported("emod by constant zero")
            record(r, 0, abs(d.value) - 1)
            sides.append(_cmp("le", r, _c(abs(d.value) - 1, w)))
        else:
            record(r, 0, None)
            dlo, dhi = iv(d)
            alts = []
            if dhi is None or dhi >= 1:
                alts.append(
                    E.BoolOp(
                        "and",
                        (
                            _cmp("ge", d, _c(1, w)),
                            _cmp("le", r, E.BinOp("sub", d, _c(1, w), w)),
                        ),
                    )
                )
            if dlo is None or dlo <= -1:
                nd = E.BinOp("sub", _c(0, w), d, w)
                alts.append(
                    E.BoolOp(
                        "and",
                        (
                            _cmp("le", d, _c(-1, w)),
                            _cmp("le", r, E.BinOp("sub", nd, _c(1, w), w)),
                        ),
                    )
                )
            if not alts:
                raise Unsupported("emod divisor has empty sign range")
            sides.append(alts[0] if len(alts) == 1 else E.BoolOp("or", tuple(alts)))
        return r

    def go(e: E.Expr) -> E.Expr:
        kids = E.children(e)
        if kids:
            new = tuple(go(c) for c in kids)
            if not all(a is b for a, b in zip(new, kids)):
                e = E.rebuild(e, new)
        if not isinstance(e, E.BinOp):
            return e
        w = e.width
        if e.op == "div":
            if isinstance(e.rhs, E.Const):
                return div_by_const(e.lhs, e.rhs.value, w)
            return div_by_sym(e.lhs, e.rhs, w)
        if e.op == "mod":
            if isinstance(e.rhs, E.Const):
                q = div_by_const(e.lhs, e.rhs.value, w)
                return E.BinOp(
                    "sub", e.lhs, E.BinOp("mul", q, _c(e.rhs.value, w), w), w
                )
            q = div_by_sym(e.lhs, e.rhs, w)
            return E.BinOp("sub", e.lhs, E.BinOp("mul", e.rhs, q, w), w)
        if e.op == "emod":
            return emod(e.lhs, e.rhs, w)
        if e.op == "shr":
            if not isinstance(e.rhs, E.Const) or not (0 <= e.rhs.value <= 256):
                raise Unsupported("shift amount must be a small constant")
            return div_by_floor_pow2(e.lhs, e.rhs.value, w)
        return e

    def div_by_floor_pow2(x: E.Expr, c: int, w: E.Width) -> E.Expr:
        m = 1 << c
        q = fresh.sym("q", w)
        xlo, xhi = iv(x)
        record(
            q,
            None if xlo is None else xlo >> c,
            None if xhi is None else xhi >> c,
        )
        r = E.BinOp("sub", x, E.BinOp("mul", q, _c(m, w), w), w)
        sides.append(_cmp("ge", r, _c(0, w)))
        sides.append(_cmp("le", r, _c(m - 1, w)))
        return q

    out = [go(a) for a in assertions]
    out.extend(sides)
    return out, aux_bounds


# ---------------------------------------------------------------------------
# step 2: boolean path expansion


def boolean_paths(assertions: Sequence[E.Expr], cap: int) -> List[List[E.Expr]]:
    """Expand to a list of paths; each path is a list of positive Cmp
    atoms whose conjunction, disjoined over all paths, is equivalent to
    the input conjunction."""
    done: List[List[E.Expr]] = []
    work: List[Tuple[List[E.Expr], List[E.Expr]]] = [(list(assertions), [])]
    while work:
        if len(work) + len(done) > cap:
            raise CapExceeded(f"more than {cap} case splits")
        pending, atoms = work.pop()
        while pending:
            e = E.simplify(pending.pop(0))
            if isinstance(e, E.Const):
                if e.width != E.BOOL:
                    raise Unsupported("non-boolean assertion")
                if e.value:
                    continue
                atoms = None  # type: ignore[assignment]
                break
            if isinstance(e, E.BoolOp):
                if e.op == "and":
                    pending = list(e.args) + pending
                    continue
                if e.op == "not":
                    pending.insert(0, _negate(e.args[0]))
                    continue
                for arm in reversed(e.args):
                    work.append(([arm] + pending, list(atoms)))
                atoms = None  # type: ignore[assignment]
                break
            if isinstance(e, E.Ite):
                work.append(([_negate(e.cond), e.other] + pending, list(atoms)))
                work.append(([e.cond, e.then] + pending, list(atoms)))
                atoms = None  # type: ignore[assignment]
                break
            if isinstance(e, E.Sym):
                if e.width != E.BOOL:
                    raise Unsupported("non-boolean assertion")
                atoms.append(E.Cmp("eq", e, E.Const(1, E.BOOL)))
                continue
            if isinstance(e, E.Cmp):
                ite = _find_int_ite(e)
                if ite is not None:
                    then_atom = _replace_all(e, ite, ite.then)
                    else_atom = _replace_all(e, ite, ite.other)
                    work.append(([_negate(ite.cond), else_atom] + pending, list(atoms)))
                    work.append(([ite.cond, then_atom] + pending, list(atoms)))
                    atoms = None  # type: ignore[assignment]
                    break
                if e.op == "ne":
                    work.append(([E.Cmp("gt", e.lhs, e.rhs)] + pending, list(atoms)))
                    work.append(([E.Cmp("lt", e.lhs, e.rhs)] + pending, list(atoms)))
                    atoms = None  # type: ignore[assignment]
                    break
                atoms.append(e)
                continue
            raise Unsupported(f"cannot assert a {type(e).__name__}")
        if atoms is not None:
            done.append(atoms)
    return done


# ---------------------------------------------------------------------------
# step 3: linearization


class _PathState:
    def __init__(self, bounds: Mapping[str, Interval], fresh: _Fresh) -> None:
        self.atoms: List[Atom] = []
        self.products: List[Product] = []
        self._prod_by_operands: Dict[Tuple[str, str], str] = {}
        self._mat_cache: Dict[Tuple[Tuple[Tuple[str, int], ...], int], str] = {}
        self.bounds: Dict[str, Interval] = dict(bounds)
        self.widths: Dict[str, E.Width] = {}
        self.fresh = fresh

    def see_sym(self, s: E.Sym) -> None:
        if s.width.is_float:
            raise Unsupported(f"float symbol {s.name} in arithmetic query")
        old = self.widths.get(s.name)
        if old is not None and old != s.width:
            raise Unsupported(f"symbol {s.name} used at two widths")
        self.widths[s.name] = s.width
        if s.name not in self.bounds:
            self.bounds[s.name] = s.width.bounds()
        else:
            wl, wh = s.width.bounds()
            lo, hi = self.bounds[s.name]
            lo = wl if lo is None else max(lo, wl)
            hi = wh if hi is None else min(hi, wh)
            self.bounds[s.name] = (lo, hi)

    def linterm_interval(self, terms: Dict[str, int], const: int) -> Interval:
        lo: Optional[int] = const
        hi: Optional[int] = const
        for v, c in terms.items():
            vlo, vhi = self.bounds.get(v, (None, None))
            if c >= 0:
                lo = None if (lo is None or vlo is None) else lo + c * vlo
                hi = None if (hi is None or vhi is None) else hi + c * vhi
            else:
                lo = None if (lo is None or vhi is None) else lo + c * vhi
                hi = None if (hi is None or vlo is None) else hi + c * vlo
        return (lo, hi)

    def materialize(self, terms: Dict[str, int], const: int) -> str:
        if const == 0 and len(terms) == 1:
            (v, c), = terms.items()
            if c == 1:
                return v
        key = (tuple(sorted(terms.items())), const)
        got = self._mat_cache.get(key)
        if got is not None:
            return got
        d = self.fresh.sym("v", E.I64)
        self.bounds[d.name] = self.linterm_interval(terms, const)
        self.widths[d.name] = E.I64
        eq = dict(terms)
        eq[d.name] = eq.get(d.name, 0) - 1
        self.atoms.append(Atom(tuple(sorted(eq.items())), const, "eq"))
        self._mat_cache[key] = d.name
        return d.name

    def product(self, a: str, b: str) -> str:
        key = (a, b) if a <= b else (b, a)
        got = self._prod_by_operands.get(key)
        if got is not None:
            return got
        p = self.fresh.sym("p", E.I64)
        alo, ahi = self.bounds.get(key[0], (None, None))
        blo, bhi = self.bounds.get(key[1], (None, None))
        cands = []
        finite = True
        for x in (alo, ahi):
            for y in (blo, bhi):
                if x is None or y is None:
                    finite = False
                else:
                    cands.append(x * y)
        self.bounds[p.name] = (min(cands), max(cands)) if finite and cands else (None, None)
        self.widths[p.name] = E.I64
        self._prod_by_operands[key] = p.name
        self.products.append(Product(key[0], key[1], p.name))
        return p.name


def _lin(e: E.Expr, st: _PathState) -> Tuple[Dict[str, int], int]:
    if isinstance(e, E.Const):
        if e.width.is_float or not isinstance(e.value, int):
            raise Unsupported("float constant in arithmetic query")
        return {}, e.value
    if isinstance(e, E.Sym):
        st.see_sym(e)
        return {e.name: 1}, 0
    if isinstance(e, E.Cast):
        if e.width.is_float or e.arg.width.is_float:
            raise Unsupported("float cast in arithmetic query")
        return _lin(e.arg, st)
    if isinstance(e, E.BinOp):
        if e.op in ("div", "mod", "emod", "shr"):
            raise AssertionError("division not eliminated before linearize")
        lt, lc = _lin(e.lhs, st)
        if e.op == "shl":
            if not isinstance(e.rhs, E.Const) or not (0 <= e.rhs.value <= 256):
                raise Unsupported("shift amount must be a small constant")
            f = 1 << e.rhs.value
            return {v: c * f for v, c in lt.items()}, lc * f
        rt, rc = _lin(e.rhs, st)
        if e.op == "add":
            out = dict(lt)
            for v, c in rt.items():
                out[v] = out.get(v, 0) + c
            return {v: c for v, c in out.items() if c}, lc + rc
        if e.op == "sub":
            out = dict(lt)
            for v, c in rt.items():
                out[v] = out.get(v, 0) - c
            return {v: c for v, c in out.items() if c}, lc - rc
        if e.op == "mul":
            if not lt:
                return {v: c * lc for v, c in rt.items()}, rc * lc
            if not rt:
                return {v: c * rc for v, c in lt.items()}, lc * rc
            a = st.materialize(lt, lc)
            b = st.materialize(rt, rc)
            p = st.product(a, b)
            return {p: 1}, 0
        raise AssertionError(e.op)
    raise Unsupported(f"{type(e).__name__} in arithmetic position")


def linearize_path(
    atoms: Sequence[E.Expr],
    bounds: Mapping[str, Interval],
    fresh: _Fresh,
) -> System:
    st = _PathState(bounds, fresh)
    for a in atoms:
        if not isinstance(a, E.Cmp):
            raise Unsupported(f"non-comparison atom {type(a).__name__}")
        lt, lc = _lin(a.lhs, st)
        rt, rc = _lin(a.rhs, st)
        terms = dict(lt)
        for v, c in rt.items():
            terms[v] = terms.get(v, 0) - c
        terms = {v: c for v, c in terms.items() if c}
        const = lc - rc
        if a.op == "eq":
            st.atoms.append(Atom(tuple(sorted(terms.items())), const, "eq"))
        elif a.op == "le":
            st.atoms.append(Atom(tuple(sorted(terms.items())), const, "le"))
        elif a.op == "lt":
            st.atoms.append(Atom(tuple(sorted(terms.items())), const + 1, "le"))
        elif a.op == "ge":
            neg = {v: -c for v, c in terms.items()}
            st.atoms.append(Atom(tuple(sorted(neg.items())), -const, "le"))
        elif a.op == "gt":
            neg = {v: -c for v, c in terms.items()}
            st.atoms.append(Atom(tuple(sorted(neg.items())), -const + 1, "le"))
        else:
            raise AssertionError(a.op)
    names = set(st.bounds) & (
        {v for at in st.atoms for v, _ in at.terms}
        | {x for p in st.products for x in (p.x, p.y, p.p)}
    )
    return System(
        atoms=st.atoms,
        products=st.products,
        bounds={v: st.bounds[v] for v in names},
        var_names=sorted(names),
    )
