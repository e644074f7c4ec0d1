"""Analysis contexts and their inference from invocation logs.

A context is a per-kernel constraint set over argument features (tensor
dims, numel, itemsize, integer content bounds, scalar values) tied to
the global count symbols BS, SL, TC.  Inference classifies every
feature from a multi-run observation log: constant values become
Invariant, exact integer affine laws over TC/SL/BS become Linear,
anything else keeps only an observed bound; features with identical
value vectors are linked by Equal classes.  Serialization is canonical
so equal contexts are byte-identical files (docs/context-schema.md).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .sym import expr as E

CONTEXT_VERSION = 1

BS_MAX_DEFAULT = 1000
SL_MAX_DEFAULT = 1_000_000

Number = Union[int, float]


class ContextError(Exception):
    """Malformed log or context, or unmet inference preconditions."""


# ---------------------------------------------------------------------------
# observation log


@dataclass(frozen=True)
class ArgObservation:
    position: int
    kind: str  # "tensor" | "scalar"
    shape: Tuple[int, ...] = ()
    itemsize: int = 0
    dtype: str = ""
    int_min: Optional[int] = None
    int_max: Optional[int] = None
    value: Optional[Number] = None


@dataclass(frozen=True)
class Call:
    kernel: str
    args: Tuple[ArgObservation, ...]


@dataclass(frozen=True)
class Run:
    batch_size: int
    seq_len: int
    calls: Tuple[Call, ...]

    @property
    def token_count(self) -> int:
        return self.batch_size * self.seq_len


@dataclass(frozen=True)
class ObservationLog:
    runs: Tuple[Run, ...]


def parse_log(text: str, source_name: str = "<log>") -> ObservationLog:
    """Parse newline-delimited JSON records into an ObservationLog.

    A ``run`` record opens a run; ``call`` records attach to the most
    recent run.  Blank lines are skipped.
    """
    runs: List[Tuple[int, int, List[Call]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as err:
            raise ContextError(f"{source_name}:{lineno}: not JSON: {err}") from None
        if not isinstance(record, dict) or "record" not in record:
            raise ContextError(f"{source_name}:{lineno}: missing 'record' field")
        if record["record"] == "run":
            bs = record.get("batch_size")
            sl = record.get("seq_len")
            if not (isinstance(bs, int) and bs >= 1 and isinstance(sl, int) and sl >= 1):
                raise ContextError(
                    f"{source_name}:{lineno}: run header needs positive "
                    f"batch_size and seq_len")
            runs.append((bs, sl, []))
        elif record["record"] == "call":
            if not runs:
                raise ContextError(
                    f"{source_name}:{lineno}: call record before any run header")
            runs[-1][2].append(_parse_call(record, source_name, lineno))
        else:
            raise ContextError(
                f"{source_name}:{lineno}: unknown record kind {record['record']!r}")
    log = ObservationLog(tuple(
        Run(bs, sl, tuple(calls)) for bs, sl, calls in runs
    ))
    _check_arity(log)
    return log


def _parse_call(record: dict, source_name: str, lineno: int) -> Call:
    kernel = record.get("kernel")
    if not isinstance(kernel, str) or not kernel:
        raise ContextError(f"{source_name}:{lineno}: call needs a kernel name")
    raw_args = record.get("args")
    if not isinstance(raw_args, list):
        raise ContextError(f"{source_name}:{lineno}: call needs an args array")
    args: List[ArgObservation] = []
    for i, raw in enumerate(raw_args):
        where = f"{source_name}:{lineno}: arg {i}"
        if not isinstance(raw, dict):
            raise ContextError(f"{where}: not an object")
        kind = raw.get("kind")
        if kind == "tensor":
            shape = raw.get("shape")
            itemsize = raw.get("itemsize")
            dtype = raw.get("dtype", "")
            if not (isinstance(shape, list) and shape
                    and all(isinstance(d, int) and d >= 1 for d in shape)):
                raise ContextError(f"{where}: tensor shape must be positive ints")
            if not (isinstance(itemsize, int) and itemsize in (1, 2, 4, 8)):
                raise ContextError(f"{where}: bad itemsize")
            int_min = raw.get("int_min")
            int_max = raw.get("int_max")
            if (int_min is None) != (int_max is None):
                raise ContextError(f"{where}: int_min and int_max come together")
            if int_min is not None:
                if not (isinstance(int_min, int) and isinstance(int_max, int)
                        and int_min <= int_max):
                    raise ContextError(f"{where}: need int_min <= int_max")
            args.append(ArgObservation(
                position=i, kind="tensor", shape=tuple(shape),
                itemsize=itemsize, dtype=str(dtype),
                int_min=int_min, int_max=int_max))
        elif kind == "scalar":
            value = raw.get("value")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ContextError(f"{where}: scalar value must be a number")
            args.append(ArgObservation(position=i, kind="scalar", value=value))
        else:
            raise ContextError(f"{where}: kind must be 'tensor' or 'scalar'")
    return Call(kernel=kernel, args=tuple(args))


def _check_arity(log: ObservationLog) -> None:
    seen: Dict[str, Tuple[Tuple[str, int], ...]] = {}
    for run in log.runs:
        for call in run.calls:
            sig = tuple(
                (a.kind, len(a.shape) if a.kind == "tensor" else -1)
                for a in call.args
            )
            if call.kernel in seen and seen[call.kernel] != sig:
                raise ContextError(
                    f"inconsistent arity for kernel {call.kernel!r} across calls")
            seen.setdefault(call.kernel, sig)


# ---------------------------------------------------------------------------
# contexts


@dataclass(frozen=True)
class Constraint:
    feature: str  # "dim0", "numel", "itemsize", "int_min", "int_max", "value"
    law: str  # "invariant" | "linear" | "upper_bound" | "lower_bound"
    value: Optional[Number] = None  # invariant
    basis: Optional[str] = None  # linear: "TC" | "SL" | "BS"
    coeff: Optional[int] = None
    offset: Optional[int] = None
    bound: Optional[Number] = None  # upper_bound / lower_bound


@dataclass(frozen=True)
class ArgContext:
    position: int
    kind: str  # "tensor" | "scalar"
    dtype: str = ""
    constraints: Tuple[Constraint, ...] = ()


@dataclass(frozen=True)
class AnalysisContext:
    kernel: str
    args: Tuple[ArgContext, ...] = ()
    equal: Tuple[Tuple[str, ...], ...] = ()
    batch_size_max: Optional[int] = None
    seq_len_max: Optional[int] = None

    def arg(self, position: int) -> Optional[ArgContext]:
        for a in self.args:
            if a.position == position:
                return a
        return None


def empty_context(kernel: str) -> AnalysisContext:
    return AnalysisContext(kernel=kernel)


# ---------------------------------------------------------------------------
# serialization (canonical, byte-stable)


def context_to_json(ctx: AnalysisContext) -> str:
    doc: Dict[str, object] = {
        "version": CONTEXT_VERSION,
        "kernel": ctx.kernel,
        "args": [_arg_to_obj(a) for a in ctx.args],
        "equal": [list(cls) for cls in ctx.equal],
    }
    globals_obj: Dict[str, int] = {}
    if ctx.batch_size_max is not None:
        globals_obj["batch_size_max"] = ctx.batch_size_max
    if ctx.seq_len_max is not None:
        globals_obj["seq_len_max"] = ctx.seq_len_max
    if globals_obj:
        doc["globals"] = globals_obj
    return json.dumps(doc, indent=2) + "\n"


def _arg_to_obj(a: ArgContext) -> Dict[str, object]:
    obj: Dict[str, object] = {"position": a.position, "kind": a.kind}
    if a.kind == "tensor" and a.dtype:
        obj["dtype"] = a.dtype
    obj["constraints"] = [_constraint_to_obj(c) for c in a.constraints]
    return obj


def _constraint_to_obj(c: Constraint) -> Dict[str, object]:
    obj: Dict[str, object] = {"feature": c.feature, "law": c.law}
    if c.law == "invariant":
        obj["value"] = c.value
    elif c.law == "linear":
        obj["basis"] = c.basis
        obj["coeff"] = c.coeff
        obj["offset"] = c.offset
    elif c.law == "upper_bound":
        obj["max"] = c.bound
    elif c.law == "lower_bound":
        obj["min"] = c.bound
    else:
        raise ContextError(f"unknown law {c.law!r}")
    return obj


def context_from_json(text: str, source_name: str = "<context>") -> AnalysisContext:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ContextError(f"{source_name}: not JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ContextError(f"{source_name}: context must be a JSON object")
    if doc.get("version") != CONTEXT_VERSION:
        raise ContextError(f"{source_name}: unsupported context version "
                           f"{doc.get('version')!r}")
    kernel = doc.get("kernel")
    if not isinstance(kernel, str) or not kernel:
        raise ContextError(f"{source_name}: missing kernel name")
    args: List[ArgContext] = []
    for raw in doc.get("args", []):
        constraints = []
        for c in raw.get("constraints", []):
            law = c.get("law")
            if law == "invariant":
                constraints.append(Constraint(c["feature"], law, value=c["value"]))
            elif law == "linear":
                if c.get("basis") not in ("TC", "SL", "BS"):
                    raise ContextError(f"{source_name}: bad linear basis")
                constraints.append(Constraint(
                    c["feature"], law, basis=c["basis"],
                    coeff=int(c["coeff"]), offset=int(c["offset"])))
            elif law == "upper_bound":
                constraints.append(Constraint(c["feature"], law, bound=c["max"]))
            elif law == "lower_bound":
                constraints.append(Constraint(c["feature"], law, bound=c["min"]))
            else:
                raise ContextError(f"{source_name}: unknown law {law!r}")
        if raw.get("kind") not in ("tensor", "scalar"):
            raise ContextError(f"{source_name}: arg kind must be tensor/scalar")
        args.append(ArgContext(
            position=int(raw["position"]), kind=raw["kind"],
            dtype=str(raw.get("dtype", "")), constraints=tuple(constraints)))
    equal = tuple(tuple(str(f) for f in cls) for cls in doc.get("equal", []))
    for cls in equal:
        if len(cls) < 2:
            raise ContextError(f"{source_name}: equal classes need two members")
    globals_obj = doc.get("globals", {})
    return AnalysisContext(
        kernel=kernel, args=tuple(args), equal=equal,
        batch_size_max=globals_obj.get("batch_size_max"),
        seq_len_max=globals_obj.get("seq_len_max"))


def context_digest(ctx: AnalysisContext) -> str:
    return hashlib.sha256(context_to_json(ctx).encode()).hexdigest()


# ---------------------------------------------------------------------------
# inference


def infer_context(log: ObservationLog, kernel: str) -> AnalysisContext:
    """Classify every observed feature of ``kernel`` across the log.

    Preconditions: at least four runs containing the kernel, with at
    least two distinct batch sizes and two distinct sequence lengths.
    """
    rows: List[Tuple[int, int, Call]] = []
    for run in log.runs:
        for call in run.calls:
            if call.kernel == kernel:
                rows.append((run.batch_size, run.seq_len, call))
    if not rows:
        raise ContextError(f"kernel {kernel!r} does not appear in the log")
    runs_with = [run for run in log.runs
                 if any(c.kernel == kernel for c in run.calls)]
    if len(runs_with) < 4:
        raise ContextError(
            f"insufficient variation: kernel {kernel!r} appears in "
            f"{len(runs_with)} run(s); need at least 4")
    if len({r.batch_size for r in runs_with}) < 2 \
            or len({r.seq_len for r in runs_with}) < 2:
        raise ContextError(
            "insufficient variation: need at least two distinct batch "
            "sizes and two distinct sequence lengths")

    nargs = len(rows[0][2].args)
    feature_values: Dict[str, List[Number]] = {}
    feature_order: List[str] = []
    arg_meta: List[Tuple[int, str, str]] = []  # position, kind, dtype

    for pos in range(nargs):
        first = rows[0][2].args[pos]
        dtype = first.dtype
        for _, _, call in rows:
            obs = call.args[pos]
            if obs.kind == "tensor" and obs.dtype != dtype:
                raise ContextError(
                    f"inconsistent dtype for arg {pos} of {kernel!r}")
        arg_meta.append((pos, first.kind, dtype))
        for fname in _feature_names(first):
            key = f"arg{pos}.{fname}"
            feature_order.append(key)
            feature_values[key] = [
                _feature_value(call.args[pos], fname) for _, _, call in rows
            ]

    bases = {
        "TC": [bs * sl for bs, sl, _ in rows],
        "SL": [sl for _, sl, _ in rows],
        "BS": [bs for bs, _, _ in rows],
    }

    classified: Dict[str, Constraint] = {}
    for key in feature_order:
        values = feature_values[key]
        feature = key.split(".", 1)[1]
        classified[key] = _classify(feature, values, bases)

    # Equal classes: identical value vectors, keyed for exact match
    groups: Dict[Tuple, List[str]] = {}
    for key in feature_order:
        vec = tuple((isinstance(v, int), v) for v in feature_values[key])
        groups.setdefault(vec, []).append(key)
    equal = tuple(
        tuple(members)
        for members in (groups[vec] for vec in sorted(
            groups, key=lambda v: feature_order.index(groups[v][0])))
        if len(members) >= 2
    )

    args: List[ArgContext] = []
    for pos, kind, dtype in arg_meta:
        prefix = f"arg{pos}."
        constraints = tuple(
            classified[key] for key in feature_order if key.startswith(prefix)
        )
        args.append(ArgContext(position=pos, kind=kind, dtype=dtype,
                               constraints=constraints))
    ctx = AnalysisContext(kernel=kernel, args=tuple(args), equal=equal)
    _check_soundness(ctx, rows)
    return ctx


def _feature_names(obs: ArgObservation) -> List[str]:
    if obs.kind == "scalar":
        return ["value"]
    names = [f"dim{i}" for i in range(len(obs.shape))]
    names += ["numel", "itemsize"]
    if obs.int_min is not None:
        names += ["int_min", "int_max"]
    return names


def _feature_value(obs: ArgObservation, feature: str) -> Number:
    if feature == "value":
        return obs.value  # type: ignore[return-value]
    if feature == "numel":
        n = 1
        for d in obs.shape:
            n *= d
        return n
    if feature == "itemsize":
        return obs.itemsize
    if feature == "int_min":
        return obs.int_min  # type: ignore[return-value]
    if feature == "int_max":
        return obs.int_max  # type: ignore[return-value]
    if feature.startswith("dim"):
        return obs.shape[int(feature[3:])]
    raise ContextError(f"unknown feature {feature!r}")


def _classify(feature: str, values: List[Number],
              bases: Dict[str, List[int]]) -> Constraint:
    if all(v == values[0] for v in values):
        return Constraint(feature, "invariant", value=values[0])
    if all(isinstance(v, int) for v in values):
        for basis in ("TC", "SL", "BS"):
            law = _affine_fit(values, bases[basis])
            if law is not None:
                a, b = law
                return Constraint(feature, "linear", basis=basis,
                                  coeff=a, offset=b)
    if feature == "int_min":
        return Constraint(feature, "lower_bound", bound=min(values))
    return Constraint(feature, "upper_bound", bound=max(values))


def _affine_fit(values: List[Number], xs: List[int]) -> Optional[Tuple[int, int]]:
    """Exact integer law v = a*x + b with a != 0, or None."""
    pair = None
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if xs[i] != xs[j]:
                pair = (i, j)
                break
        if pair:
            break
    if pair is None:
        return None
    i, j = pair
    dv = values[j] - values[i]
    dx = xs[j] - xs[i]
    if dv % dx != 0:
        return None
    a = dv // dx
    if a == 0:
        return None
    b = values[i] - a * xs[i]
    if all(values[k] == a * xs[k] + b for k in range(len(xs))):
        return (a, b)
    return None


def _check_soundness(ctx: AnalysisContext,
                     rows: List[Tuple[int, int, Call]]) -> None:
    """Every emitted constraint must hold on every observation."""
    for arg in ctx.args:
        for c in arg.constraints:
            for bs, sl, call in rows:
                v = _feature_value(call.args[arg.position], c.feature)
                basis = {"TC": bs * sl, "SL": sl, "BS": bs}
                if c.law == "invariant" and v != c.value:
                    raise ContextError(f"unsound invariant for {c.feature}")
                if c.law == "linear" and v != c.coeff * basis[c.basis] + c.offset:
                    raise ContextError(f"unsound linear law for {c.feature}")
                if c.law == "upper_bound" and v > c.bound:
                    raise ContextError(f"unsound upper bound for {c.feature}")
                if c.law == "lower_bound" and v < c.bound:
                    raise ContextError(f"unsound lower bound for {c.feature}")
    values: Dict[str, List[Number]] = {}
    for arg in ctx.args:
        for c in arg.constraints:
            values[f"arg{arg.position}.{c.feature}"] = [
                _feature_value(call.args[arg.position], c.feature)
                for _, _, call in rows
            ]
    for cls in ctx.equal:
        base = values[cls[0]]
        for member in cls[1:]:
            if values[member] != base:
                raise ContextError(f"unsound equality class {cls}")


# ---------------------------------------------------------------------------
# engine interface


BS_SYM = E.Sym("BS", E.I64)
SL_SYM = E.Sym("SL", E.I64)
TC_SYM = E.Sym("TC", E.I64)


def initial_constraints(ctx: Optional[AnalysisContext] = None) -> List[E.Expr]:
    """1 <= BS <= cap, 1 <= SL <= cap, TC = BS*SL; context globals tighten."""
    bs_max = BS_MAX_DEFAULT
    sl_max = SL_MAX_DEFAULT
    if ctx is not None:
        if ctx.batch_size_max is not None:
            bs_max = min(bs_max, ctx.batch_size_max)
        if ctx.seq_len_max is not None:
            sl_max = min(sl_max, ctx.seq_len_max)
    one = E.Const(1, E.I64)
    return [
        E.Cmp("ge", BS_SYM, one),
        E.Cmp("le", BS_SYM, E.Const(bs_max, E.I64)),
        E.Cmp("ge", SL_SYM, one),
        E.Cmp("le", SL_SYM, E.Const(sl_max, E.I64)),
        E.Cmp("eq", TC_SYM, E.BinOp("mul", BS_SYM, SL_SYM, E.I64)),
    ]


@dataclass
class ArgFacts:
    """Context facts for one kernel argument, ready for declaration."""

    position: int
    kind: str
    dtype: str = ""
    dims: Dict[int, E.Expr] = field(default_factory=dict)
    numel: Optional[E.Expr] = None
    itemsize: Optional[int] = None
    value: Optional[E.Expr] = None  # scalar args
    int_lo: Optional[E.Expr] = None  # content bounds for integer tensors
    int_hi: Optional[E.Expr] = None
    extra: List[E.Expr] = field(default_factory=list)  # bound constraints


def to_engine_facts(ctx: AnalysisContext) -> Tuple[List[ArgFacts], List[E.Expr]]:
    """Turn a context into declaration facts plus global constraints.

    Equal classes collapse to one shared expression per class; bound
    laws introduce a fresh symbol constrained by the bound (and >= 1 for
    shape features).  The second result starts with the BS/SL/TC ranges.
    """
    constraints = initial_constraints(ctx)
    class_of: Dict[str, Tuple[str, ...]] = {}
    for cls in ctx.equal:
        for member in cls:
            class_of[member] = cls
    exprs: Dict[str, E.Expr] = {}

    def feature_expr(key: str, c: Constraint) -> E.Expr:
        cls = class_of.get(key)
        canonical = cls[0] if cls else key
        cached = exprs.get(canonical)
        if cached is not None:
            # A second bound on an already-materialized feature symbol
            # (say a lower bound after an upper bound) still constrains it.
            if isinstance(cached, E.Sym) and c.law in ("upper_bound",
                                                       "lower_bound"):
                _bound_constraint(cached, c, constraints)
            return cached
        e = _law_expr(canonical, c, constraints)
        exprs[canonical] = e
        return e

    out: List[ArgFacts] = []
    for arg in ctx.args:
        facts = ArgFacts(position=arg.position, kind=arg.kind, dtype=arg.dtype)
        for c in arg.constraints:
            key = f"arg{arg.position}.{c.feature}"
            e = feature_expr(key, c)
            if c.feature.startswith("dim"):
                facts.dims[int(c.feature[3:])] = e
            elif c.feature == "numel":
                facts.numel = e
            elif c.feature == "itemsize":
                if c.law == "invariant" and isinstance(c.value, int):
                    facts.itemsize = c.value
            elif c.feature == "value":
                facts.value = e
            elif c.feature == "int_min":
                facts.int_lo = e
            elif c.feature == "int_max":
                facts.int_hi = e
        out.append(facts)
    return out, constraints


def _law_expr(key: str, c: Constraint, constraints: List[E.Expr]) -> E.Expr:
    if c.law == "invariant":
        if isinstance(c.value, int):
            return E.Const(c.value, E.I64)
        return E.Const(Fraction(c.value), E.F64)
    if c.law == "linear":
        basis = {"TC": TC_SYM, "SL": SL_SYM, "BS": BS_SYM}[c.basis]
        e: E.Expr = basis
        if c.coeff != 1:
            e = E.BinOp("mul", E.Const(c.coeff, E.I64), e, E.I64)
        if c.offset:
            e = E.BinOp("add", e, E.Const(c.offset, E.I64), E.I64)
        return E.simplify(e)
    sym = E.Sym(key, E.I64)
    if c.law in ("upper_bound", "lower_bound"):
        _bound_constraint(sym, c, constraints)
        return sym
    raise ContextError(f"unknown law {c.law!r}")


def _bound_constraint(sym: E.Sym, c: Constraint,
                      constraints: List[E.Expr]) -> None:
    if c.law == "upper_bound":
        if isinstance(c.bound, int):
            constraints.append(E.Cmp("le", sym, E.Const(c.bound, E.I64)))
        if _is_shape_feature(sym.name):
            constraints.append(E.Cmp("ge", sym, E.Const(1, E.I64)))
    elif c.law == "lower_bound":
        if isinstance(c.bound, int):
            constraints.append(E.Cmp("ge", sym, E.Const(c.bound, E.I64)))
    else:
        raise ContextError(f"unknown law {c.law!r}")


def _is_shape_feature(key: str) -> bool:
    feature = key.split(".", 1)[1]
    return feature.startswith("dim") or feature in ("numel", "itemsize")
