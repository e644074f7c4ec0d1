"""Deterministic SMT-LIB2 encoding of expression queries.

Integer symbols become Int constants with explicit width-range side
assertions.  Truncating division and remainder are expressed through
helper define-funs (SMT-LIB's own div/mod are Euclidean); every
division site also contributes an explicit divisor-nonzero side
assertion.  The emitted text is canonical: symbol declarations are
sorted, assertions keep query order, and no random or time-dependent
content appears, so scripts can be golden-tested byte for byte.
"""

from __future__ import annotations

import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..sym import expr as E
from .linear import Unsupported

_HELPERS = """\
(define-fun tdiv ((a Int) (b Int)) Int
  (ite (>= (* a b) 0) (div (abs a) (abs b)) (- (div (abs a) (abs b)))))
(define-fun tmod ((a Int) (b Int)) Int (- a (* b (tdiv a b))))
(define-fun temod ((a Int) (b Int)) Int (mod a (abs b)))
"""


def _num(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


_SIMPLE = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*\Z")


def _sym(name: str) -> str:
    """Quote names that are not SMT-LIB simple symbols (twin primes,
    bracketed dims).  Pipes and backslashes cannot be quoted at all."""
    if _SIMPLE.match(name):
        return name
    if "|" in name or "\\" in name:
        raise Unsupported(f"symbol name not encodable: {name!r}")
    return f"|{name}|"


class _Encoder:
    def __init__(self) -> None:
        self.syms: Dict[str, E.Sym] = {}
        self.sides: List[str] = []

    def int_term(self, e: E.Expr) -> str:
        if isinstance(e, E.Const):
            if e.width.is_float or not isinstance(e.value, int):
                raise Unsupported("float constant in query")
            return _num(e.value)
        if isinstance(e, E.Sym):
            if e.width.is_float:
                raise Unsupported(f"float symbol {e.name} in query")
            old = self.syms.get(e.name)
            if old is not None and old.width != e.width:
                raise Unsupported(f"symbol {e.name} used at two widths")
            self.syms[e.name] = e
            return _sym(e.name)
        if isinstance(e, E.Cast):
            if e.width.is_float or e.arg.width.is_float:
                raise Unsupported("float cast in query")
            return self.int_term(e.arg)
        if isinstance(e, E.Ite):
            return f"(ite {self.bool_term(e.cond)} {self.int_term(e.then)} {self.int_term(e.other)})"
        if isinstance(e, E.BinOp):
            a = self.int_term(e.lhs)
            if e.op == "shl" or e.op == "shr":
                if not isinstance(e.rhs, E.Const) or not (0 <= e.rhs.value <= 256):
                    raise Unsupported("shift amount must be a small constant")
                f = _num(1 << e.rhs.value)
                return f"(* {a} {f})" if e.op == "shl" else f"(div {a} {f})"
            b = self.int_term(e.rhs)
            if e.op in ("div", "mod", "emod"):
                self.sides.append(f"(assert (distinct {b} 0))")
                fn = {"div": "tdiv", "mod": "tmod", "emod": "temod"}[e.op]
                return f"({fn} {a} {b})"
            fn = {"add": "+", "sub": "-", "mul": "*"}[e.op]
            return f"({fn} {a} {b})"
        raise Unsupported(f"{type(e).__name__} in arithmetic position")

    def bool_term(self, e: E.Expr) -> str:
        if isinstance(e, E.Const):
            if e.width != E.BOOL:
                raise Unsupported("non-boolean assertion")
            return "true" if e.value else "false"
        if isinstance(e, E.Sym) and e.width == E.BOOL:
            self.syms[e.name] = e
            return f"(= {_sym(e.name)} 1)"
        if isinstance(e, E.Cmp):
            a, b = self.int_term(e.lhs), self.int_term(e.rhs)
            if e.op == "eq":
                return f"(= {a} {b})"
            if e.op == "ne":
                return f"(distinct {a} {b})"
            op = {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}[e.op]
            return f"({op} {a} {b})"
        if isinstance(e, E.BoolOp):
            if e.op == "not":
                return f"(not {self.bool_term(e.args[0])})"
            inner = " ".join(self.bool_term(a) for a in e.args)
            return f"({e.op} {inner})"
        if isinstance(e, E.Ite):
            return (
                f"(ite {self.bool_term(e.cond)} "
                f"{self.bool_term(e.then)} {self.bool_term(e.other)})"
            )
        raise Unsupported(f"cannot assert a {type(e).__name__}")


def encode(
    assertions: Sequence[E.Expr],
    bounds: Mapping[str, Tuple[Optional[int], Optional[int]]] | None = None,
) -> Tuple[str, List[str]]:
    """Encode a conjunction; returns (script, declared symbol names).

    The script ends with (check-sat) and (get-model).  ``bounds`` adds
    optional extra range assertions on top of the automatic width side
    conditions.
    """
    enc = _Encoder()
    body = [f"(assert {enc.bool_term(a)})" for a in assertions]
    lines = ["(set-logic ALL)", _HELPERS.rstrip("\n")]
    names = sorted(enc.syms)
    for name in names:
        lines.append(f"(declare-const {_sym(name)} Int)")
    for name in names:
        lo, hi = enc.syms[name].width.bounds()
        if bounds and name in bounds:
            blo, bhi = bounds[name]
            if blo is not None:
                lo = max(lo, blo)
            if bhi is not None:
                hi = min(hi, bhi)
        s = _sym(name)
        lines.append(f"(assert (and (<= {_num(lo)} {s}) (<= {s} {_num(hi)})))")
    lines.extend(body)
    lines.extend(sorted(set(enc.sides)))
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n", names


# ---------------------------------------------------------------------------
# model text parsing


def parse_model(text: str) -> Dict[str, int]:
    """Parse the s-expression output of (get-model) into name -> int."""
    toks = _tokenize(text)
    pos = 0
    forms = []
    while pos < len(toks):
        form, pos = _read(toks, pos)
        forms.append(form)
    out: Dict[str, int] = {}

    def walk(form: object) -> None:
        if isinstance(form, list):
            if (
                len(form) >= 5
                and form[0] == "define-fun"
                and isinstance(form[1], str)
                and form[2] == []
                and form[3] == "Int"
            ):
                name = form[1]
                if len(name) >= 2 and name[0] == "|" and name[-1] == "|":
                    name = name[1:-1]
                out[name] = _as_int(form[4])
                return
            for f in form:
                walk(f)

    for f in forms:
        walk(f)
    return out


def _as_int(form: object) -> int:
    if isinstance(form, str):
        return int(form)
    if isinstance(form, list) and len(form) == 2 and form[0] == "-":
        return -_as_int(form[1])
    raise ValueError(f"not an integer model value: {form!r}")


def _tokenize(text: str) -> List[str]:
    out: List[str] = []
    cur = []
    quoted = False
    for ch in text:
        if quoted:
            cur.append(ch)
            if ch == "|":
                out.append("".join(cur))
                cur = []
                quoted = False
        elif ch == "|":
            if cur:
                out.append("".join(cur))
                cur = []
            cur.append(ch)
            quoted = True
        elif ch in "()":
            if cur:
                out.append("".join(cur))
                cur = []
            out.append(ch)
        elif ch.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return out


def _read(toks: List[str], pos: int):
    t = toks[pos]
    if t == "(":
        items = []
        pos += 1
        while pos < len(toks) and toks[pos] != ")":
            item, pos = _read(toks, pos)
            items.append(item)
        return items, pos + 1
    return t, pos + 1
