"""Symbolic expression trees with machine-integer widths.

Every expression node carries a :class:`Width`.  Two evaluation modes are
supported and the distinction matters a great deal to the rest of the
system:

* ``wrapping`` applies two's-complement wraparound at every node, i.e. it
  computes exactly what the modelled machine would compute;
* ``mathematical`` evaluates over unbounded integers and treats
  integer-to-integer casts as the identity.

The overflow detector asks whether the two disagree; all address
arithmetic and path constraints are interpreted mathematically.

Expressions are immutable and compare structurally, so they can be used
as dict keys and set members.  ``simplify`` performs only rewrites that
preserve *both* evaluation modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Tuple, Union

Number = Union[int, Fraction]


class EvalError(ValueError):
    """Raised when an expression cannot be evaluated under a binding."""


@dataclass(frozen=True, slots=True)
class Width:
    """A scalar machine type: bit count, signedness, float flag.

    ``bits`` is 1 (booleans), 16, 32 or 64.  Floats reuse the bit count
    for naming only; their values are carried as exact rationals and no
    rounding is modelled.
    """

    bits: int
    signed: bool
    is_float: bool = False

    def __post_init__(self) -> None:
        if self.bits not in (1, 16, 32, 64):
            raise ValueError(f"unsupported width: {self.bits}")

    @property
    def name(self) -> str:
        if self.bits == 1:
            return "bool"
        prefix = "f" if self.is_float else ("i" if self.signed else "u")
        return f"{prefix}{self.bits}"

    def bounds(self) -> Tuple[int, int]:
        """Inclusive (min, max) of representable integers."""
        if self.is_float:
            raise ValueError("float widths have no integer bounds")
        if self.bits == 1:
            return (0, 1)
        if self.signed:
            half = 1 << (self.bits - 1)
            return (-half, half - 1)
        return (0, (1 << self.bits) - 1)

    def __repr__(self) -> str:  # keeps solver logs readable
        return f"Width({self.name})"


BOOL = Width(1, False)
I16 = Width(16, True)
U16 = Width(16, False)
I32 = Width(32, True)
U32 = Width(32, False)
I64 = Width(64, True)
U64 = Width(64, False)
F16 = Width(16, True, True)
F32 = Width(32, True, True)
F64 = Width(64, True, True)

WIDTH_BY_NAME = {
    w.name: w for w in (BOOL, I16, U16, I32, U32, I64, U64, F16, F32, F64)
}

ARITH_OPS = frozenset({"add", "sub", "mul", "div", "mod", "emod", "shl", "shr"})
CMP_OPS = frozenset({"eq", "ne", "lt", "le", "gt", "ge"})
BOOL_OPS = frozenset({"and", "or", "not"})

# ring homomorphisms mod 2^n: safe to fold through wraparound
_WRAP_HOM_OPS = frozenset({"add", "sub", "mul"})


def wrap(value: int, width: Width) -> int:
    """Reduce an unbounded integer into ``width`` (two's complement)."""
    if width.is_float:
        return value
    mask = (1 << width.bits) - 1
    value &= mask
    if width.signed and value >= (1 << (width.bits - 1)):
        value -= 1 << width.bits
    return value


class Expr:
    """Base class; concrete nodes are the frozen dataclasses below."""

    __slots__ = ()
    width: Width

    # convenience constructors keep engine code short
    def __add__(self, other: "Expr") -> "Expr":
        return BinOp("add", self, other, self.width)

    def __sub__(self, other: "Expr") -> "Expr":
        return BinOp("sub", self, other, self.width)

    def __mul__(self, other: "Expr") -> "Expr":
        return BinOp("mul", self, other, self.width)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    """Literal value.  ``value`` is an exact int (or Fraction for floats).

    The stored integer may lie outside the width's range (simplification
    can produce such constants); wrapping-mode evaluation reduces it,
    mathematical mode returns it untouched.
    """

    value: Number
    width: Width

    def __post_init__(self) -> None:
        if self.width.is_float:
            if not isinstance(self.value, (int, Fraction)):
                raise TypeError("float constants must be int or Fraction")
            if isinstance(self.value, int):
                object.__setattr__(self, "value", Fraction(self.value))
        elif not isinstance(self.value, int):
            raise TypeError("integer constants must be int")


@dataclass(frozen=True, slots=True)
class Sym(Expr):
    """Free symbol, identified by name.  Names are globally unique."""

    name: str
    width: Width


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    width: Width

    def __post_init__(self) -> None:
        if self.op not in ARITH_OPS:
            raise ValueError(f"bad arithmetic op: {self.op}")


@dataclass(frozen=True, slots=True)
class Cast(Expr):
    """Width conversion.  Wrapping mode truncates; mathematical mode is
    the identity on integer-to-integer casts."""

    arg: Expr
    width: Width


@dataclass(frozen=True, slots=True)
class Cmp(Expr):
    op: str
    lhs: Expr
    rhs: Expr

    def __post_init__(self) -> None:
        if self.op not in CMP_OPS:
            raise ValueError(f"bad comparison op: {self.op}")

    @property
    def width(self) -> Width:  # type: ignore[override]
        return BOOL


@dataclass(frozen=True, slots=True)
class BoolOp(Expr):
    op: str
    args: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.op not in BOOL_OPS:
            raise ValueError(f"bad boolean op: {self.op}")
        if self.op == "not" and len(self.args) != 1:
            raise ValueError("'not' takes exactly one argument")
        object.__setattr__(self, "args", tuple(self.args))

    @property
    def width(self) -> Width:  # type: ignore[override]
        return BOOL


@dataclass(frozen=True, slots=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr
    width: Width


def true() -> Const:
    return Const(1, BOOL)


def false() -> Const:
    return Const(0, BOOL)


def and_(*args: Expr) -> Expr:
    flat = [
        a
        for a in args
        if not (isinstance(a, Const) and a.width == BOOL and a.value == 1)
    ]
    if not flat:
        return true()
    if len(flat) == 1:
        return flat[0]
    return BoolOp("and", tuple(flat))


def not_(arg: Expr) -> Expr:
    return BoolOp("not", (arg,))


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, (Const, Sym)):
        return ()
    if isinstance(e, (BinOp, Cmp)):
        return (e.lhs, e.rhs)
    if isinstance(e, Cast):
        return (e.arg,)
    if isinstance(e, BoolOp):
        return e.args
    if isinstance(e, Ite):
        return (e.cond, e.then, e.other)
    raise TypeError(f"not an expression: {e!r}")


def rebuild(e: Expr, kids: Tuple[Expr, ...]) -> Expr:
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, kids[0], kids[1], e.width)
    if isinstance(e, Cmp):
        return Cmp(e.op, kids[0], kids[1])
    if isinstance(e, Cast):
        return Cast(kids[0], e.width)
    if isinstance(e, BoolOp):
        return BoolOp(e.op, kids)
    if isinstance(e, Ite):
        return Ite(kids[0], kids[1], kids[2], e.width)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def _trunc_div(a: Number, b: Number) -> Number:
    if b == 0:
        raise EvalError("division by zero")
    if isinstance(a, Fraction) or isinstance(b, Fraction):
        return Fraction(a) / Fraction(b)
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _trunc_mod(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("remainder by zero")
    return a - _trunc_div(a, b) * b


def _euclid_mod(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("remainder by zero")
    return a % abs(b)


def _shift_amount(b: Number) -> int:
    if not isinstance(b, int) or b < 0:
        raise EvalError(f"bad shift amount: {b}")
    if b > (1 << 20):
        raise EvalError(f"shift amount too large: {b}")
    return b


def _apply_binop(op: str, a: Number, b: Number) -> Number:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return _trunc_div(a, b)
    if op == "mod":
        return _trunc_mod(a, b)
    if op == "emod":
        return _euclid_mod(a, b)
    if op == "shl":
        return a * (1 << _shift_amount(b))
    if op == "shr":
        return a >> _shift_amount(b)
    raise AssertionError(op)


_CMP_FUNCS: Mapping[str, Callable[[Number, Number], bool]] = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}


def evaluate(e: Expr, binding: Mapping[str, Number], mode: str = "mathematical") -> Number:
    """Evaluate ``e`` under ``binding`` (symbol name -> value).

    ``mode`` is "wrapping" or "mathematical".  Raises :class:`EvalError`
    on missing bindings, division by zero and malformed shifts.
    """
    if mode not in ("wrapping", "mathematical"):
        raise ValueError(f"bad mode: {mode}")
    wrapping = mode == "wrapping"

    def go(e: Expr) -> Number:
        if isinstance(e, Const):
            return wrap(e.value, e.width) if wrapping and not e.width.is_float else e.value
        if isinstance(e, Sym):
            try:
                v = binding[e.name]
            except KeyError:
                raise EvalError(f"no binding for symbol {e.name}") from None
            return wrap(v, e.width) if wrapping and not e.width.is_float else v
        if isinstance(e, BinOp):
            r = _apply_binop(e.op, go(e.lhs), go(e.rhs))
            if wrapping and not e.width.is_float:
                return wrap(r, e.width)
            return r
        if isinstance(e, Cast):
            v = go(e.arg)
            src_float = e.arg.width.is_float
            if e.width.is_float:
                return Fraction(v)
            if src_float:
                q = int(v)  # trunc toward zero (Fraction.__int__ truncates)
                return wrap(q, e.width) if wrapping else q
            return wrap(v, e.width) if wrapping else v
        if isinstance(e, Cmp):
            return 1 if _CMP_FUNCS[e.op](go(e.lhs), go(e.rhs)) else 0
        if isinstance(e, BoolOp):
            if e.op == "not":
                return 0 if go(e.args[0]) else 1
            if e.op == "and":
                for a in e.args:
                    if not go(a):
                        return 0
                return 1
            for a in e.args:
                if go(a):
                    return 1
            return 0
        if isinstance(e, Ite):
            return go(e.then) if go(e.cond) else go(e.other)
        raise TypeError(f"not an expression: {e!r}")

    return go(e)


# ---------------------------------------------------------------------------
# traversal utilities


def symbols_of(e: Expr) -> dict[str, Sym]:
    """All symbols in ``e``, keyed by name, in first-occurrence order."""
    out: dict[str, Sym] = {}

    def go(e: Expr) -> None:
        if isinstance(e, Sym):
            out.setdefault(e.name, e)
            return
        for c in children(e):
            go(c)

    go(e)
    return out


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace symbols by name.  Replacement widths must match."""
    if not mapping:
        return e

    def go(e: Expr) -> Expr:
        if isinstance(e, Sym):
            repl = mapping.get(e.name)
            if repl is None:
                return e
            if repl.width != e.width:
                raise ValueError(
                    f"substitution changes width of {e.name}: "
                    f"{e.width.name} -> {repl.width.name}"
                )
            return repl
        kids = children(e)
        if not kids:
            return e
        new = tuple(go(c) for c in kids)
        if all(a is b for a, b in zip(new, kids)):
            return e
        return rebuild(e, new)

    return go(e)


def contains(e: Expr, needle: Expr) -> bool:
    """Structural subterm test."""
    if e == needle:
        return True
    return any(contains(c, needle) for c in children(e))


# ---------------------------------------------------------------------------
# simplification


def _fits(v: Number, w: Width) -> bool:
    if w.is_float:
        return True
    if not isinstance(v, int):
        return False
    lo, hi = w.bounds()
    return lo <= v <= hi


def _const_binop(e: BinOp, a: Const, b: Const) -> Optional[Expr]:
    if e.width.is_float:
        if e.op in ("mod", "emod", "shl", "shr"):
            return None
        if e.op == "div" and b.value == 0:
            return None
        return Const(_apply_binop(e.op, a.value, b.value), e.width)
    if e.op in _WRAP_HOM_OPS:
        return Const(_apply_binop(e.op, a.value, b.value), e.width)
    # non-homomorphic ops: only fold when the operands denote themselves
    # in wrapping mode as well
    if not (_fits(a.value, a.width) and _fits(b.value, b.width)):
        return None
    try:
        r = _apply_binop(e.op, a.value, b.value)
    except EvalError:
        return None
    return Const(r, e.width)


def _simplify_node(e: Expr) -> Expr:
    """One-level rewrite; assumes children are already simplified.

    Every rule preserves both evaluation modes (see module docstring);
    the equivalence is property-tested.
    """
    if isinstance(e, BinOp):
        a, b = e.lhs, e.rhs
        ca = a if isinstance(a, Const) else None
        cb = b if isinstance(b, Const) else None
        if ca is not None and cb is not None:
            folded = _const_binop(e, ca, cb)
            if folded is not None:
                return folded
        zero = 0 if not e.width.is_float else Fraction(0)
        if e.op == "add":
            if ca is not None and ca.value == 0:
                return b
            if cb is not None and cb.value == 0:
                return a
            # (x + c1) + c2 -> x + (c1 + c2)   (mod-2^n homomorphism)
            if cb is not None and isinstance(a, BinOp) and a.op == "add" \
                    and isinstance(a.rhs, Const) and a.width == e.width:
                return BinOp("add", a.lhs, Const(a.rhs.value + cb.value, e.width), e.width)
        elif e.op == "sub":
            if cb is not None and cb.value == 0:
                return a
            if a == b and not e.width.is_float:
                return Const(0, e.width)
        elif e.op == "mul":
            if ca is not None:
                if ca.value == 1:
                    return b
                if ca.value == 0:
                    return Const(zero, e.width)
            if cb is not None:
                if cb.value == 1:
                    return a
                if cb.value == 0:
                    return Const(zero, e.width)
                if isinstance(a, BinOp) and a.op == "mul" \
                        and isinstance(a.rhs, Const) and a.width == e.width:
                    return BinOp("mul", a.lhs, Const(a.rhs.value * cb.value, e.width), e.width)
        elif e.op == "div":
            if cb is not None and cb.value == 1:
                return a
        elif e.op in ("shl", "shr"):
            if cb is not None and cb.value == 0:
                return a
        return e
    if isinstance(e, Cast):
        if e.arg.width == e.width:
            return e.arg
        if isinstance(e.arg, Const):
            v = e.arg.value
            if e.width.is_float:
                return Const(Fraction(v), e.width)
            if e.arg.width.is_float:
                # fold only when truncation stays representable
                q = int(v)
                return Const(q, e.width) if _fits(q, e.width) else e
            # int -> int cast of a constant folds unconditionally: both
            # modes agree with the retagged constant
            return Const(v, e.width)
        return e
    if isinstance(e, Cmp):
        if isinstance(e.lhs, Const) and isinstance(e.rhs, Const):
            if e.lhs.width.is_float or (
                _fits(e.lhs.value, e.lhs.width) and _fits(e.rhs.value, e.rhs.width)
            ):
                return Const(1 if _CMP_FUNCS[e.op](e.lhs.value, e.rhs.value) else 0, BOOL)
        return e
    if isinstance(e, BoolOp):
        if e.op == "not":
            (a,) = e.args
            if isinstance(a, Const):
                return Const(0 if a.value else 1, BOOL)
            if isinstance(a, BoolOp) and a.op == "not":
                return a.args[0]
            return e
        flat: list[Expr] = []
        absorb = 0 if e.op == "and" else 1
        unit = 1 - absorb
        for a in e.args:
            if isinstance(a, Const):
                if a.value == absorb:
                    return Const(absorb, BOOL)
                continue  # drop units
            if isinstance(a, BoolOp) and a.op == e.op:
                flat.extend(a.args)
            else:
                flat.append(a)
        if not flat:
            return Const(unit, BOOL)
        if len(flat) == 1:
            return flat[0]
        return BoolOp(e.op, tuple(flat))
    if isinstance(e, Ite):
        if isinstance(e.cond, Const):
            return e.then if e.cond.value else e.other
        if e.then == e.other:
            return e.then
        return e
    return e


def simplify(e: Expr) -> Expr:
    """Bottom-up simplification preserving both evaluation modes."""
    kids = children(e)
    if kids:
        new = tuple(simplify(c) for c in kids)
        if not all(a is b for a, b in zip(new, kids)):
            e = rebuild(e, new)
    return _simplify_node(e)


# ---------------------------------------------------------------------------
# rendering


def _render_fraction(v: Fraction) -> str:
    if v.denominator == 1:
        return f"{v.numerator}.0"
    # exact decimal when the denominator is 2^a * 5^b, else keep p/q
    d = v.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d != 1:
        return f"{v.numerator}/{v.denominator}"
    num, den = v.numerator, v.denominator
    e = 0
    while num % den:
        num *= 10
        e += 1
    num //= den
    sign = "-" if num < 0 else ""
    digits = str(abs(num)).rjust(e + 1, "0")
    return f"{sign}{digits[:-e]}.{digits[-e:]}"


def render(e: Expr) -> str:
    """Canonical prefix text.  Stable across runs; golden-tested.

    Integer constants carry a ``:width`` suffix except for the default
    i32; symbols print bare.
    """
    if isinstance(e, Const):
        if e.width == BOOL:
            return "true" if e.value else "false"
        if e.width.is_float:
            return f"{_render_fraction(Fraction(e.value))}:{e.width.name}"
        if e.width == I32:
            return str(e.value)
        return f"{e.value}:{e.width.name}"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, BinOp):
        return f"({e.op}.{e.width.name} {render(e.lhs)} {render(e.rhs)})"
    if isinstance(e, Cast):
        return f"(cast.{e.width.name} {render(e.arg)})"
    if isinstance(e, Cmp):
        return f"({e.op}.{e.lhs.width.name} {render(e.lhs)} {render(e.rhs)})"
    if isinstance(e, BoolOp):
        return f"({e.op} {' '.join(render(a) for a in e.args)})"
    if isinstance(e, Ite):
        return f"(ite.{e.width.name} {render(e.cond)} {render(e.then)} {render(e.other)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# interval analysis (mathematical semantics)

Bound = Optional[int]
Interval = Tuple[Bound, Bound]

FULL: Interval = (None, None)


def _ilt(a: Bound, b: Bound) -> bool:
    # is a < b with None meaning the corresponding infinity
    if a is None or b is None:
        return False
    return a < b


def _add_b(a: Bound, b: Bound) -> Bound:
    return None if a is None or b is None else a + b


def _neg_b(a: Bound) -> Bound:
    return None if a is None else -a


def _mul_candidates(x: Interval, y: Interval) -> Interval:
    cands = []
    for a in x:
        for b in y:
            if a is None or b is None:
                return FULL
            cands.append(a * b)
    return (min(cands), max(cands))


def interval(e: Expr, bounds: Mapping[str, Interval] | None = None) -> Interval:
    """Conservative (lo, hi) range of the *mathematical* value of ``e``.

    ``bounds`` maps symbol names to known ranges; symbols without an
    entry default to their width range (the engine constrains every
    symbol it mints at least that tightly).  ``None`` means unbounded on
    that side.  Float expressions give ``(None, None)``.
    """
    bounds = bounds or {}

    def go(e: Expr) -> Interval:
        if e.width.is_float and not isinstance(e, (Cmp, BoolOp)):
            return FULL
        if isinstance(e, Const):
            return (e.value, e.value) if isinstance(e.value, int) else FULL
        if isinstance(e, Sym):
            got = bounds.get(e.name)
            if got is not None:
                return got
            return e.width.bounds()
        if isinstance(e, (Cmp, BoolOp)):
            return (0, 1)
        if isinstance(e, Cast):
            if e.width.is_float or e.arg.width.is_float:
                return FULL
            return go(e.arg)
        if isinstance(e, Ite):
            lt, lo_ = go(e.then), go(e.other)
            lo = None if lt[0] is None or lo_[0] is None else min(lt[0], lo_[0])
            hi = None if lt[1] is None or lo_[1] is None else max(lt[1], lo_[1])
            return (lo, hi)
        if isinstance(e, BinOp):
            x = go(e.lhs)
            y = go(e.rhs)
            if e.op == "add":
                return (_add_b(x[0], y[0]), _add_b(x[1], y[1]))
            if e.op == "sub":
                return (_add_b(x[0], _neg_b(y[1])), _add_b(x[1], _neg_b(y[0])))
            if e.op == "mul":
                return _mul_candidates(x, y)
            if e.op == "div":
                if y[0] is not None and y[0] >= 1 or y[1] is not None and y[1] <= -1:
                    cands = []
                    for a in x:
                        for b in y:
                            if a is None or b is None:
                                return FULL
                            cands.append(_trunc_div(a, b))
                    return (min(cands), max(cands))
                return FULL
            if e.op == "mod":
                if isinstance(e.rhs, Const) and e.rhs.value != 0:
                    m = abs(e.rhs.value) - 1
                    lo = 0 if (x[0] is not None and x[0] >= 0) else -m
                    hi = 0 if (x[1] is not None and x[1] <= 0) else m
                    return (lo, hi)
                return FULL
            if e.op == "emod":
                if isinstance(e.rhs, Const) and e.rhs.value != 0:
                    return (0, abs(e.rhs.value) - 1)
                return (0, None)
            if e.op == "shl":
                if isinstance(e.rhs, Const) and 0 <= e.rhs.value <= 256:
                    f = 1 << e.rhs.value
                    return _mul_candidates(x, (f, f))
                return FULL
            if e.op == "shr":
                if isinstance(e.rhs, Const) and 0 <= e.rhs.value <= 256:
                    f = 1 << e.rhs.value
                    lo = None if x[0] is None else x[0] >> e.rhs.value
                    hi = None if x[1] is None else x[1] >> e.rhs.value
                    return (lo, hi)
                return FULL
            raise AssertionError(e.op)
        raise TypeError(f"not an expression: {e!r}")

    return go(e)
