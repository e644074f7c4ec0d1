"""Path exploration: wrapper evaluation, launch binding, kernel DFS.

The wrapper runs once, concretely over symbolic values: lets bind
expressions, asserts become path constraints (after a satisfiability
screen), and the launch statement creates the thread context and binds
kernel parameters.  The kernel body is then explored depth first,
then-branch first.  Branch conditions are screened against the solver;
unsatisfiable branches are dropped, unknown ones are kept but taint the
state so findings on them report as unknown.

Loops come in two flavors.  A loop whose init depends on the thread
identity, with an invariant bound and a provably positive invariant
step, is summarized: one fork skips it, the other runs the body once at
a fresh index constrained to the reachable iteration lattice, then
havocs what the body assigned and assumes the exit condition.  Every
other loop is iterated with guard forks up to the unroll cap, then cut
the same way.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..context import (AnalysisContext, ArgFacts, context_digest,
                       empty_context, to_engine_facts)
from ..lang import ast, pretty_expr
from ..sym import expr as E
from ..solver.interface import Solver, SolverOptions
from ..tensor import (Address, Region, TensorDescriptor, apply_method,
                      resolve, declare_tensor, unknown_address)
from .detectors import DetectorOptions, Detectors
from .loops import (LoopShape, assigned_names, contains_origins, is_invariant,
                    loop_shape, provably_positive)
from .report import ReportSet, merge_findings
from .state import (AXES, ORIGIN_CONTEXT, ORIGIN_HAVOC, ORIGIN_LOOP,
                    ORIGIN_SCALAR, ORIGIN_TENSOR, ORIGIN_THREAD, Budget,
                    ExecState, LoopSummary, RunClock, SymbolTable,
                    ThreadContext, Value)

I32_MAX = E.I32.bounds()[1]

_WIDTHS = {
    "bool": E.BOOL, "i16": E.I16, "i32": E.I32, "i64": E.I64,
    "u16": E.U16, "u32": E.U32, "u64": E.U64,
    "f16": E.F16, "f32": E.F32, "f64": E.F64,
}

_ARITH = {"+": "add", "-": "sub", "*": "mul", "/": "div", "%": "mod",
          "<<": "shl", ">>": "shr"}
_CMP = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}


class EngineError(Exception):
    """Analysis cannot proceed (context/unit mismatch, bad wrapper)."""


def width_of(t: ast.ScalarType) -> E.Width:
    return _WIDTHS[t.name]


@dataclass
class TensorBinding:
    """Wrapper-side value of a tensor parameter or derived tensor."""

    desc: TensorDescriptor
    region: Region


WValue = Union[E.Expr, Address, TensorBinding, None]


# work items interleaved with AST statements on the continuation


@dataclass
class PartitionExit:
    shape: LoopShape
    init_e: E.Expr
    bound_e: E.Expr
    step_e: E.Expr
    width: E.Width
    havoc_names: Tuple[str, ...]
    line: int


@dataclass
class IterateLoop:
    stmt: ast.For
    shape: Optional[LoopShape]
    iteration: int


class Executor:
    def __init__(
        self,
        unit: ast.SourceUnit,
        wrapper: ast.WrapperDecl,
        ctx: AnalysisContext,
        budget: Budget,
        detector_options: Optional[DetectorOptions] = None,
        solver_options: Optional[SolverOptions] = None,
    ) -> None:
        self.unit = unit
        self.wrapper = wrapper
        self.kernel = unit.kernel(wrapper.launch.kernel_name)
        self.ctx = ctx
        self.budget = budget
        self.clock = RunClock(budget)
        opts = solver_options or SolverOptions()
        opts.timeout_s = budget.query_timeout_s
        opts.deadline = self.clock.started + budget.wall_s
        self.solver = Solver(opts)
        self.table = SymbolTable()
        self.detectors = Detectors(self.solver, self.table, self.kernel.name,
                                   detector_options or DetectorOptions())
        self.wenv: Dict[str, WValue] = {}
        self.base_path: List[E.Expr] = []
        self.regions: Dict[str, Region] = {}
        self.content_bounds: Dict[str, Tuple[Optional[E.Expr], Optional[E.Expr]]] = {}
        self.diagnostics: List[str] = []
        self.tensors: Dict[str, TensorDescriptor] = {}
        self.thread: Optional[ThreadContext] = None
        self.dyn_shared: Optional[E.Expr] = None
        self._fresh_n = 0
        self._coverage = "complete"

    # -- shared plumbing ----------------------------------------------------

    def _register_constraint_syms(self, cs: Sequence[E.Expr],
                                  default: str) -> None:
        for c in cs:
            for name, sym in E.symbols_of(c).items():
                if name in self.table.origins:
                    continue
                if name in ("BS", "SL", "TC") or name.startswith("arg"):
                    self.table.named(name, sym.width, ORIGIN_CONTEXT)
                else:
                    self.table.named(name, sym.width, default)

    def _assume_base(self, cs: Sequence[E.Expr]) -> None:
        self._register_constraint_syms(cs, ORIGIN_TENSOR)
        for c in cs:
            c = E.simplify(c)
            if isinstance(c, E.Const) and c.value == 1:
                continue
            self.base_path.append(c)

    # -- wrapper ------------------------------------------------------------

    def bind_params(self) -> None:
        facts, globals_ = to_engine_facts(self.ctx)
        if facts and len(facts) != len(self.wrapper.params):
            raise EngineError(
                f"context describes {len(facts)} arguments but wrapper "
                f"{self.wrapper.name!r} takes {len(self.wrapper.params)}")
        rename = self._context_renames(facts)
        if rename:
            globals_ = [E.substitute(c, rename) for c in globals_]
            for f in facts:
                f.dims = {k: E.substitute(v, rename) for k, v in f.dims.items()}
                for attr in ("numel", "value", "int_lo", "int_hi"):
                    v = getattr(f, attr)
                    if v is not None:
                        setattr(f, attr, E.substitute(v, rename))
        self._assume_base(globals_)
        by_pos = {f.position: f for f in facts}
        for i, p in enumerate(self.wrapper.params):
            f = by_pos.get(i)
            if isinstance(p.type, ast.TensorType):
                if f is not None and f.kind != "tensor":
                    raise EngineError(
                        f"context argument {i} is a scalar but wrapper "
                        f"parameter {p.name!r} is a tensor")
                dims = dict(f.dims) if f else None
                desc, region, cs = declare_tensor(
                    p.name,
                    ndims=len(dims) if dims else None,
                    dims=dims,
                    itemsize=f.itemsize if f else None,
                    numel=f.numel if f else None,
                    taken=self.tensors,
                )
                self._assume_base(cs)
                if f is not None:
                    self._assume_base(f.extra)
                    if f.int_lo is not None or f.int_hi is not None:
                        self.content_bounds[region.rid] = (f.int_lo, f.int_hi)
                self.regions[region.rid] = region
                self.wenv[p.name] = TensorBinding(desc, region)
            else:
                if f is not None and f.kind == "scalar" and f.value is not None:
                    self._register_constraint_syms([f.value], ORIGIN_CONTEXT)
                    self._assume_base(f.extra)
                    self.wenv[p.name] = f.value
                else:
                    sym = self.table.named(p.name, width_of(p.type),
                                           ORIGIN_SCALAR)
                    self.wenv[p.name] = sym

    def _context_renames(self, facts: Sequence[ArgFacts]) -> Dict[str, E.Expr]:
        """Context bound-law symbols carry positional names (arg1.value);
        rebind them to the wrapper's parameter names so witnesses and
        reports read in source terms."""
        rename: Dict[str, E.Expr] = {}

        def claim(old: E.Expr, new_name: str, origin: str) -> None:
            if not isinstance(old, E.Sym) or not old.name.startswith("arg"):
                return
            if old.name in rename:
                return
            rename[old.name] = self.table.named(new_name, old.width, origin)

        for f in facts:
            if f.position >= len(self.wrapper.params):
                continue
            pname = self.wrapper.params[f.position].name
            if f.value is not None:
                claim(f.value, pname, ORIGIN_SCALAR)
            for k, v in f.dims.items():
                claim(v, f"{pname}.dim{k}", ORIGIN_TENSOR)
            if f.numel is not None:
                claim(f.numel, f"{pname}.numel", ORIGIN_TENSOR)
            if f.int_lo is not None:
                claim(f.int_lo, f"{pname}.int_min", ORIGIN_TENSOR)
            if f.int_hi is not None:
                claim(f.int_hi, f"{pname}.int_max", ORIGIN_TENSOR)
        return rename

    def _fresh_tensor_name(self, base: str) -> str:
        self._fresh_n += 1
        return f"{base}.t{self._fresh_n}"

    def weval(self, e: ast.Expr) -> WValue:
        if isinstance(e, ast.IntLit):
            return E.Const(e.value, width_of(e.ty))
        if isinstance(e, ast.FloatLit):
            return E.Const(Fraction(e.value), width_of(e.ty))
        if isinstance(e, ast.BoolLit):
            return E.true() if e.value else E.false()
        if isinstance(e, ast.Name):
            return self.wenv[e.ident]
        if isinstance(e, ast.Un):
            v = self.weval(e.operand)
            if e.op == "!":
                return E.not_(v)
            w = width_of(e.ty)
            zero = E.Const(Fraction(0) if w.is_float else 0, w)
            return E.BinOp("sub", zero, v, w)
        if isinstance(e, ast.Bin):
            l = self.weval(e.lhs)
            r = self.weval(e.rhs)
            if e.op in ("&&", "||"):
                return E.BoolOp("and" if e.op == "&&" else "or", (l, r))
            if e.op in _CMP:
                return E.Cmp(_CMP[e.op], l, r)
            return E.BinOp(_ARITH[e.op], l, r, width_of(e.ty))
        if isinstance(e, ast.CastExpr):
            return E.Cast(self.weval(e.operand), width_of(e.target))
        if isinstance(e, ast.MethodCall):
            return self._wmethod(e)
        raise EngineError(f"unsupported wrapper expression at line {e.line}")

    def _wmethod(self, e: ast.MethodCall) -> WValue:
        recv = self.weval(e.recv)
        if not isinstance(recv, TensorBinding):
            raise EngineError(
                f"method .{e.method}() on a non-tensor at line {e.line}")
        args: List[object] = []
        for a in e.args:
            if isinstance(a, ast.IntLit):
                args.append(a.value)
            else:
                v = self.weval(a)
                args.append(v.desc if isinstance(v, TensorBinding) else v)
        result, region, cs = apply_method(
            recv.desc, recv.region, e.method, args,
            fresh_name=self._fresh_tensor_name(recv.desc.name))
        self._assume_base(cs)
        kind, payload = result
        if kind == "scalar":
            return payload
        if kind == "tensor":
            self.regions[region.rid] = region
            if recv.region.rid in self.content_bounds:
                self.content_bounds[region.rid] = \
                    self.content_bounds[recv.region.rid]
            return TensorBinding(payload, region)
        if kind == "address":
            return payload
        # unit-kind calls (shape checks, logging) put their meaning into
        # the constraints just assumed; as a value they are simply "held"
        return E.true()

    def exec_wrapper(self) -> bool:
        """Run lets/asserts; False when an assert can never hold."""
        for s in self.wrapper.body:
            if isinstance(s, ast.WLet):
                self.wenv[s.name] = self.weval(s.value)
            elif isinstance(s, ast.WAssert):
                cond = self.weval(s.cond)
                verdict = self.solver.check(self.base_path + [cond])
                if verdict.is_unsat:
                    self.diagnostics.append(
                        f"wrapper assertion at line {s.line} can never hold "
                        f"under the analysis context; nothing to explore")
                    return False
                self._assume_base([cond])
            elif isinstance(s, ast.WExprStmt):
                v = self.weval(s.value)
                if isinstance(v, E.Expr) and v.width == E.BOOL:
                    # bare shape checks throw on failure host-side, so
                    # passing them is part of the path
                    self._assume_base([v])
        return True

    # -- launch -------------------------------------------------------------

    def launch(self) -> ExecState:
        spec = self.wrapper.launch
        thread = ThreadContext.create(self.table)
        self.thread = thread
        state = ExecState(env={}, path=list(self.base_path),
                          regions=dict(self.regions), thread=thread)
        for c in thread.range_constraints():
            state.assume(c)
        for dims, exprs in ((thread.grid_dim, spec.grid),
                            (thread.block_dim, spec.block)):
            for i, a in enumerate(AXES):
                sym = dims[a]
                given = self.weval(exprs[i]) if i < len(exprs) \
                    else E.Const(1, E.I32)
                state.assume(E.Cmp("eq", sym, given))
                state.assume(E.Cmp("le", sym, E.Const(I32_MAX, E.I32)))
        if spec.dyn_shared is not None:
            self.dyn_shared = self.weval(spec.dyn_shared)
        for p, a in zip(self.kernel.params, spec.args):
            v = self.weval(a)
            if isinstance(p.type, ast.HandleType):
                if not isinstance(v, Address):
                    raise EngineError(
                        f"kernel parameter {p.name!r} needs a data_ptr() "
                        f"argument")
                desc = v.provenance.descriptor if v.provenance else None
                if desc is not None:
                    state.assume(E.Cmp(
                        "eq", desc.itemsize,
                        E.Const(p.type.elem.sizeof, E.I64)))
                state.env[p.name] = v
            else:
                state.env[p.name] = v
        return state

    # -- kernel expression evaluation ----------------------------------------

    def _access_bytes(self, ty: object) -> int:
        if isinstance(ty, ast.HandleType):
            return ty.access_bytes
        raise EngineError("indexing a non-handle value")

    def _binop_value(self, state: ExecState, op: str, l: Value, r: Value,
                     ty: object, line: int, col: int, text: str) -> Value:
        if op in ("&&", "||"):
            return E.BoolOp("and" if op == "&&" else "or", (l, r))
        if op in _CMP:
            return E.Cmp(_CMP[op], l, r)
        if isinstance(l, Address) or isinstance(r, Address):
            addr, idx = (l, r) if isinstance(l, Address) else (r, l)
            ab = self._access_bytes(ty)
            delta: E.Expr = E.BinOp("mul", idx, E.Const(ab, E.I64), E.I64)
            if op == "-":
                delta = E.BinOp("sub", E.Const(0, E.I64), delta, E.I64)
            return addr.shifted(delta)
        node = E.BinOp(_ARITH[op], l, r, width_of(ty))
        self.detectors.arithmetic_site(state, node, line, col, text)
        return node

    def keval(self, state: ExecState, e: ast.Expr) -> Value:
        if isinstance(e, ast.IntLit):
            return E.Const(e.value, width_of(e.ty))
        if isinstance(e, ast.FloatLit):
            return E.Const(Fraction(e.value), width_of(e.ty))
        if isinstance(e, ast.BoolLit):
            return E.true() if e.value else E.false()
        if isinstance(e, ast.Name):
            return state.env[e.ident]
        if isinstance(e, ast.Builtin):
            return self.thread.builtin(e.name)
        if isinstance(e, ast.Un):
            v = self.keval(state, e.operand)
            if e.op == "!":
                return E.not_(v)
            w = width_of(e.ty)
            zero = E.Const(Fraction(0) if w.is_float else 0, w)
            return E.BinOp("sub", zero, v, w)
        if isinstance(e, ast.Bin):
            l = self.keval(state, e.lhs)
            r = self.keval(state, e.rhs)
            return self._binop_value(state, e.op, l, r, e.ty, e.line, e.col,
                                     pretty_expr(e))
        if isinstance(e, ast.CastExpr):
            v = self.keval(state, e.operand)
            if isinstance(v, Address):
                return v
            node = E.Cast(v, width_of(e.target))
            self.detectors.narrowing_site(state, node, e.line, e.col,
                                          pretty_expr(e))
            return node
        if isinstance(e, ast.HandleCast):
            v = self.keval(state, e.operand)
            if isinstance(v, Address):
                return v
            return unknown_address()
        if isinstance(e, ast.Index):
            return self._load(state, e)
        raise EngineError(f"unsupported kernel expression at line {e.line}")

    def _element_address(self, state: ExecState,
                         e: ast.Index) -> Tuple[Address, int]:
        base = resolve(self.keval(state, e.base))
        idx = self.keval(state, e.index)
        ab = self._access_bytes(e.base.ty)
        if not base.known:
            return base, ab
        return base.shifted(E.BinOp("mul", idx, E.Const(ab, E.I64), E.I64)), ab

    def _load(self, state: ExecState, e: ast.Index) -> Value:
        addr, ab = self._element_address(state, e)
        text = pretty_expr(e)
        if not addr.known:
            self.detectors.deref_site(state, addr, e.line, e.col, text)
        else:
            self.detectors.access_site(state, addr, ab, e.line, e.col, text)
        w = width_of(e.ty) if isinstance(e.ty, ast.ScalarType) else E.I64
        h = self.table.fresh("ld", w, ORIGIN_HAVOC)
        if addr.known and not w.is_float:
            lo, hi = self.content_bounds.get(addr.provenance.rid,
                                             (None, None))
            if lo is not None:
                state.assume(E.Cmp("ge", h, lo))
            if hi is not None:
                state.assume(E.Cmp("le", h, hi))
        return h

    # -- kernel statements ---------------------------------------------------

    def _havoc_value(self, old: Value, name: str) -> Value:
        if isinstance(old, Address):
            return unknown_address()
        return self.table.fresh(name, old.width, ORIGIN_HAVOC)

    def _guard_expr(self, cmp: str, index: E.Expr, bound: E.Expr) -> E.Expr:
        return E.Cmp(cmp, index, bound)

    def _exec_store(self, state: ExecState, s: ast.Assign) -> None:
        target: ast.Index = s.target
        text = f"{pretty_expr(target)} {s.op} {pretty_expr(s.value)}"
        rhs = self.keval(state, s.value)
        if s.op != "=":
            # compound store reads the cell, combines, writes back; the
            # combining node is an overflow site like any other
            loaded = self._load(state, target)
            rhs = self._binop_value(state, s.op[0], loaded, rhs, target.ty,
                                    s.line, s.col, text)
        addr, ab = self._element_address(state, target)
        if not addr.known:
            self.detectors.deref_site(state, addr, s.line, s.col, text)
            return
        self.detectors.access_site(state, addr, ab, s.line, s.col, text)
        self.detectors.store_site(state, addr.provenance, addr, ab,
                                  s.line, s.col, text)

    def _exec_shared(self, state: ExecState, s: ast.SharedDecl) -> None:
        if s.extern:
            size = self.dyn_shared if self.dyn_shared is not None \
                else E.Const(0, E.I64)
        else:
            extent = E.simplify(self.keval(state, s.extent))
            if not isinstance(extent, E.Const):
                raise EngineError(
                    f"shared array {s.name!r} needs a constant extent")
            size = E.Const(extent.value * s.elem_type.sizeof, E.I64)
        region = Region(rid=f"shared:{s.name}", kind="shared",
                        size_bytes=size)
        state.regions[region.rid] = region
        state.env[s.name] = Address(region, E.Const(0, E.I64))

    def _screen(self, state: ExecState, cond: E.Expr) -> str:
        """sat | unsat | unknown for path + cond."""
        verdict = self.solver.check(state.path + [cond])
        return verdict.status

    # returns follow-up stack entries (pushed), new (state, items) to continue,
    # or None when the current path is done
    def run(self) -> ReportSet:
        self.bind_params()
        wrapper_ok = self.exec_wrapper()
        if wrapper_ok:
            init = self.launch()
            self._explore(init)
        findings = merge_findings(self.detectors.findings)
        digest = context_digest(self.ctx)
        report = ReportSet(
            unit=self.unit.source_name,
            wrapper=self.wrapper.name,
            kernel=self.kernel.name,
            context_digest=digest,
            coverage=self._coverage,
            findings=findings,
            diagnostics=self.diagnostics + [
                d for d in (self.clock.exhausted_reason,) if d],
            elapsed_s=self.clock.elapsed(),
            states=self.clock.states_created,
            queries=self.solver.stats.queries,
        )
        return report

    def _explore(self, init: ExecState) -> None:
        stack: List[Tuple[ExecState, List[object]]] = \
            [(init, list(self.kernel.body))]
        while stack:
            if self.clock.out_of_time():
                self.clock.exhausted_reason = "wall-clock budget exhausted"
                self._coverage = "budget-exhausted"
                return
            state, items = stack.pop()
            while items:
                item = items[0]
                rest = items[1:]
                nxt = self._step(state, item, rest, stack)
                if nxt is None:
                    break
                state, items = nxt

    def _fork(self, state: ExecState) -> Optional[ExecState]:
        if not self.clock.charge_state():
            self.clock.exhausted_reason = "state budget exhausted"
            self._coverage = "budget-exhausted"
            return None
        return state.clone()

    def _step(self, state: ExecState, item: object, rest: List[object],
              stack: List[Tuple[ExecState, List[object]]]):
        if isinstance(item, ast.LocalDecl):
            if item.init is not None:
                state.env[item.name] = self.keval(state, item.init)
            else:
                state.env[item.name] = self.table.fresh(
                    item.name, width_of(item.decl_type), ORIGIN_HAVOC)
            return state, rest
        if isinstance(item, ast.HandleDecl):
            state.env[item.name] = self.keval(state, item.init)
            return state, rest
        if isinstance(item, ast.SharedDecl):
            self._exec_shared(state, item)
            return state, rest
        if isinstance(item, ast.Assign):
            if isinstance(item.target, ast.Index):
                self._exec_store(state, item)
                return state, rest
            name = item.target.ident
            if item.op == "=":
                state.env[name] = self.keval(state, item.value)
            else:
                cur = state.env[name]
                rhs = self.keval(state, item.value)
                text = f"{name} {item.op} {pretty_expr(item.value)}"
                state.env[name] = self._binop_value(
                    state, item.op[0], cur, rhs, item.target.ty,
                    item.line, item.col, text)
            return state, rest
        if isinstance(item, ast.If):
            return self._exec_if(state, item, rest, stack)
        if isinstance(item, ast.For):
            return self._enter_loop(state, item, rest, stack)
        if isinstance(item, ast.Barrier):
            state.barrier_epoch += 1
            return state, rest
        if isinstance(item, ast.Return):
            return None
        if isinstance(item, IterateLoop):
            return self._iterate_loop(state, item, rest, stack)
        if isinstance(item, PartitionExit):
            return self._partition_exit(state, item), rest
        raise EngineError(f"unsupported statement {type(item).__name__}")

    def _exec_if(self, state, stmt: ast.If, rest, stack):
        cond = E.simplify(self.keval(state, stmt.cond))
        then_items = list(stmt.then_body) + rest
        else_items = list(stmt.else_body) + rest
        if isinstance(cond, E.Const):
            return (state, then_items if cond.value else else_items)
        s_then = self._screen(state, cond)
        s_else = self._screen(state, E.not_(cond))
        take_then = s_then != "unsat"
        take_else = s_else != "unsat"
        if take_then and take_else:
            twin = self._fork(state)
            if twin is not None:
                twin.assume(E.not_(cond))
                if s_else == "unknown":
                    twin.unknown_path = True
                stack.append((twin, else_items))
            state.assume(cond)
            if s_then == "unknown":
                state.unknown_path = True
            return state, then_items
        if take_then:
            state.assume(cond)
            if s_then == "unknown":
                state.unknown_path = True
            return state, then_items
        if take_else:
            state.assume(E.not_(cond))
            if s_else == "unknown":
                state.unknown_path = True
            return state, else_items
        return None  # both sides contradict the path

    # -- loops ---------------------------------------------------------------

    def _enter_loop(self, state, stmt: ast.For, rest, stack):
        shape = loop_shape(stmt)
        if shape is not None and self._partitionable(state, stmt, shape):
            return self._summarize(state, stmt, shape, rest, stack)
        # run the init statement, then iterate with guard forks
        nxt = self._step(state, stmt.init, [], stack)
        state, _ = nxt
        return state, [IterateLoop(stmt, shape, 0)] + rest

    def _partitionable(self, state, stmt: ast.For,
                       shape: LoopShape) -> bool:
        assigned = assigned_names(stmt.body)
        if shape.index in assigned:
            return False
        if not (is_invariant(shape.bound, shape.index, assigned)
                and is_invariant(shape.step, shape.index, assigned)):
            return False
        self.detectors.enabled = False
        try:
            init_e = self.keval(state.clone(), shape.init)
            step_e = self.keval(state.clone(), shape.step)
        except (KeyError, EngineError):
            return False
        finally:
            self.detectors.enabled = True
        if not isinstance(init_e, E.Expr) or not isinstance(step_e, E.Expr):
            return False
        if not contains_origins(init_e, self.table,
                                frozenset({ORIGIN_THREAD})):
            return False
        return provably_positive(step_e, self.table)

    def _summarize(self, state, stmt: ast.For, shape: LoopShape,
                   rest, stack):
        init_e = self.keval(state, shape.init)
        bound_e = self.keval(state, shape.bound)
        step_e = self.keval(state, shape.step)
        width = init_e.width
        enter_guard = self._guard_expr(shape.cmp, init_e, bound_e)
        s_enter = self._screen(state, enter_guard)
        s_skip = self._screen(state, E.not_(enter_guard))
        havoc = tuple(sorted(assigned_names(stmt.body)))

        if s_skip != "unsat":
            skip = self._fork(state)
            if skip is not None:
                skip.assume(E.not_(enter_guard))
                if s_skip == "unknown":
                    skip.unknown_path = True
                stack.append((skip, list(rest)))
        if s_enter == "unsat":
            return None  # only the skip fork (if feasible) survives
        index_sym = self.table.fresh(shape.index, width, ORIGIN_LOOP)
        state.env[shape.index] = index_sym
        state.loop_index_names.add(index_sym.name)
        state.assume(E.Cmp("ge", index_sym, init_e))
        state.assume(self._guard_expr(shape.cmp, index_sym, bound_e))
        state.assume(E.Cmp("eq",
                           E.BinOp("emod",
                                   E.BinOp("sub", index_sym, init_e, E.I64),
                                   step_e, E.I64),
                           E.Const(0, E.I64)))
        if s_enter == "unknown":
            state.unknown_path = True
        exit_item = PartitionExit(shape=shape, init_e=init_e, bound_e=bound_e,
                                  step_e=step_e, width=width,
                                  havoc_names=havoc, line=stmt.line)
        state.loop_log.append(LoopSummary(
            loop_line=stmt.line, index_name=shape.index, index_sym=index_sym,
            exit_sym=None, init=init_e, step=step_e, havocked=list(havoc)))
        return state, list(stmt.body) + [exit_item] + rest

    def _partition_exit(self, state, item: PartitionExit) -> ExecState:
        for name in item.havoc_names:
            if name in state.env:
                state.env[name] = self._havoc_value(state.env[name], name)
        exit_sym = self.table.fresh(item.shape.index + ".exit", item.width,
                                    ORIGIN_LOOP)
        state.env[item.shape.index] = exit_sym
        state.loop_index_names.add(exit_sym.name)
        state.assume(E.Cmp("ge", exit_sym, item.init_e))
        state.assume(E.not_(self._guard_expr(item.shape.cmp, exit_sym,
                                             item.bound_e)))
        state.assume(E.Cmp("eq",
                           E.BinOp("emod",
                                   E.BinOp("sub", exit_sym, item.init_e,
                                           E.I64),
                                   item.step_e, E.I64),
                           E.Const(0, E.I64)))
        return state

    def _iterate_loop(self, state, item: IterateLoop, rest, stack):
        stmt = item.stmt
        if item.iteration >= self.budget.unroll_cap:
            return self._cut_loop(state, stmt, item.shape), rest
        guard = E.simplify(self.keval(state, stmt.guard))
        again = IterateLoop(stmt, item.shape, item.iteration + 1)
        body_items = list(stmt.body) + [stmt.step, again]
        if isinstance(guard, E.Const):
            if guard.value:
                return state, body_items + rest
            return state, rest
        s_enter = self._screen(state, guard)
        s_exit = self._screen(state, E.not_(guard))
        take_enter = s_enter != "unsat"
        take_exit = s_exit != "unsat"
        if take_enter and take_exit:
            twin = self._fork(state)
            if twin is not None:
                twin.assume(E.not_(guard))
                if s_exit == "unknown":
                    twin.unknown_path = True
                stack.append((twin, list(rest)))
            state.assume(guard)
            if s_enter == "unknown":
                state.unknown_path = True
            return state, body_items + rest
        if take_enter:
            state.assume(guard)
            if s_enter == "unknown":
                state.unknown_path = True
            return state, body_items + rest
        if take_exit:
            state.assume(E.not_(guard))
            if s_exit == "unknown":
                state.unknown_path = True
            return state, rest
        return None

    def _cut_loop(self, state, stmt: ast.For,
                  shape: Optional[LoopShape]) -> ExecState:
        """Unroll cap hit: havoc what the loop touches, assume the exit."""
        index_name = None
        if shape is not None:
            index_name = shape.index
        elif isinstance(stmt.step, ast.Assign) \
                and isinstance(stmt.step.target, ast.Name):
            index_name = stmt.step.target.ident
        for name in sorted(assigned_names(stmt.body)):
            if name in state.env and name != index_name:
                state.env[name] = self._havoc_value(state.env[name], name)
        if index_name is not None and index_name in state.env:
            old = state.env[index_name]
            w = old.width if isinstance(old, E.Expr) else E.I64
            sym = self.table.fresh(index_name, w, ORIGIN_LOOP)
            state.env[index_name] = sym
            state.loop_index_names.add(sym.name)
        guard = self.keval(state, stmt.guard)
        if isinstance(guard, E.Expr):
            state.assume(E.not_(guard))
        state.diagnostics.append(
            f"loop at line {stmt.line} cut at the unroll cap")
        return state


def analyze(
    unit: ast.SourceUnit,
    wrapper_name: Optional[str] = None,
    ctx: Optional[AnalysisContext] = None,
    budget: Optional[Budget] = None,
    detector_options: Optional[DetectorOptions] = None,
    solver_options: Optional[SolverOptions] = None,
) -> ReportSet:
    """Analyze one wrapper/kernel pair of a typechecked unit."""
    if wrapper_name is None:
        if len(unit.wrappers) != 1:
            raise EngineError("unit has several wrappers; name one")
        wrapper = unit.wrappers[0]
    else:
        wrapper = unit.wrapper(wrapper_name)
    if ctx is None:
        ctx = empty_context(wrapper.launch.kernel_name)
    ex = Executor(unit, wrapper, ctx, budget or Budget(),
                  detector_options, solver_options)
    try:
        return ex.run()
    finally:
        ex.solver.close()
