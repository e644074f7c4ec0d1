"""The four checks: IntegerOverflow, OutOfBounds, DataRace, InvalidDeref.

Everything in the environment is mathematical, so an i32 product node
*is* the unbounded value; overflow asks whether the path lets it escape
the width's range.  Downstream consequences of a flagged overflow are
handled in two grades:

* overflow-on-overflow: purely structural.  If an operand already
  carries a flagged node, the outer site is not checked at all.
* bounds-under-overflow: an implication test.  The out-of-bounds query
  additionally pins every overflow-eligible node of the offset inside
  its width range; if that makes the query unsatisfiable, the bounds
  violation can only be an artifact of overflowing arithmetic and
  merges into the overflow finding, otherwise it is real on its own and
  the witness produced is overflow-free.

Races are checked store-against-store at the same instruction by
renaming every thread-private symbol (thread ids, loop indices, havoc
values) to a primed twin, asserting both paths, equal byte offsets, and
distinct identities.  Shared-memory regions equate the block index
first so only intra-block pairs count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..sym import expr as E
from ..solver.interface import Solver
from ..tensor import Address, Region, in_bounds
from .report import Finding, canonicalize_witness
from .state import (AXES, THREAD_PRIVATE, ExecState, SymbolTable,
                    ThreadContext)

I32_MIN, I32_MAX = E.I32.bounds()


@dataclass
class DetectorOptions:
    check_overflow: bool = True
    check_narrowing: bool = True
    check_unsigned_wrap: bool = False


@dataclass
class Detectors:
    solver: Solver
    table: SymbolTable
    kernel: str
    options: DetectorOptions = field(default_factory=DetectorOptions)
    findings: List[Finding] = field(default_factory=list)
    # the executor silences checks while it probes loop headers
    enabled: bool = True
    # (kind, line, col) -> a finding at this site was already proven;
    # later paths skip the query but keep the suppression bookkeeping
    _memo: Dict[Tuple[str, int, int], bool] = field(default_factory=dict)

    def _proven(self, state: ExecState, key: Tuple[str, int, int]) -> str:
        """Findings on a path the solver could not screen are honest
        unknowns; only clean proofs populate the per-site skip memo."""
        if state.unknown_path:
            return "unknown"
        self._memo[key] = True
        return "sat"

    # -- IntegerOverflow ---------------------------------------------------

    def arithmetic_site(self, state: ExecState, node: E.Expr,
                        line: int, col: int, text: str) -> None:
        """Called after an add/mul/shl node is built from kernel code."""
        if not (self.enabled and self.options.check_overflow):
            return
        if not isinstance(node, E.BinOp) or node.op not in ("add", "mul", "shl"):
            return
        if node.width == E.I32:
            lo, hi = I32_MIN, I32_MAX
        elif node.width == E.U32 and self.options.check_unsigned_wrap:
            lo, hi = E.U32.bounds()
        else:
            return
        self._overflow_check(state, node, node, lo, hi, line, col, text)

    def narrowing_site(self, state: ExecState, node: E.Cast,
                       line: int, col: int, text: str) -> None:
        """Called for explicit casts that drop integer bits."""
        if not (self.enabled and self.options.check_overflow
                and self.options.check_narrowing):
            return
        if node.width.is_float or node.arg.width.is_float:
            return
        if node.width.bits >= node.arg.width.bits:
            return
        lo, hi = node.width.bounds()
        self._overflow_check(state, node, node.arg, lo, hi, line, col, text)

    def _overflow_check(self, state: ExecState, blamed: E.Expr,
                        value: E.Expr, lo: int, hi: int,
                        line: int, col: int, text: str) -> None:
        for prior in state.flagged_io:
            if any(E.contains(k, prior) for k in E.children(blamed)):
                return  # cascade of an already flagged overflow
        key = ("IntegerOverflow", line, col)
        if self._memo.get(key):
            state.flagged_io.append(blamed)
            return
        itv = E.interval(value)
        if itv[0] is not None and itv[1] is not None \
                and lo <= itv[0] and itv[1] <= hi:
            return
        cond = E.BoolOp("or", (
            E.Cmp("gt", value, E.Const(hi, E.I64)),
            E.Cmp("lt", value, E.Const(lo, E.I64)),
        ))
        assertions = state.path + [cond]
        verdict = self.solver.check(assertions)
        if verdict.is_sat:
            witness = canonicalize_witness(self.solver, assertions, verdict,
                                           self.table)
            status = self._proven(state, key)
            state.flagged_io.append(blamed)
            self.findings.append(Finding(
                kind="IntegerOverflow", kernel=self.kernel, line=line,
                column=col, blamed_text=text, blamed_expr=blamed,
                status=status, witness=witness))
        elif verdict.is_unknown:
            self.findings.append(Finding(
                kind="IntegerOverflow", kernel=self.kernel, line=line,
                column=col, blamed_text=text, blamed_expr=blamed,
                status="unknown"))

    # -- OutOfBounds -------------------------------------------------------

    def access_site(self, state: ExecState, addr: Address, nbytes: int,
                    line: int, col: int, text: str) -> None:
        if not self.enabled:
            return
        if not addr.known:
            return  # unknown provenance is the deref check's business
        key = ("OutOfBounds", line, col)
        if self._memo.get(key):
            return
        oob = E.not_(in_bounds(addr, nbytes))
        assertions = state.path + [oob]
        for node in self._io_candidates(addr.offset_bytes):
            assertions.append(self._range_pin(node))
        verdict = self.solver.check(assertions)
        if verdict.is_sat:
            witness = canonicalize_witness(self.solver, assertions, verdict,
                                           self.table)
            self.findings.append(Finding(
                kind="OutOfBounds", kernel=self.kernel, line=line, column=col,
                blamed_text=text, blamed_expr=addr.offset_bytes,
                status=self._proven(state, key),
                witness=witness, region=addr.provenance.rid,
                offset_expr=addr.offset_bytes))
        elif verdict.is_unknown:
            self.findings.append(Finding(
                kind="OutOfBounds", kernel=self.kernel, line=line, column=col,
                blamed_text=text, blamed_expr=addr.offset_bytes,
                status="unknown", region=addr.provenance.rid,
                offset_expr=addr.offset_bytes))
        # unsat with flagged nodes pinned: the violation only exists when
        # an overflow fires, so it stays merged into that finding

    def _io_candidates(self, root: E.Expr) -> List[E.Expr]:
        """Every node of ``root`` the overflow checks would look at.
        The bounds merge pins these rather than the flagged list so the
        implication test stays the same whether the overflow at a site
        was proven, undecided, or suppressed as a cascade."""
        if not self.options.check_overflow:
            return []
        out: List[E.Expr] = []
        stack = [root]
        while stack:
            e = stack.pop()
            stack.extend(E.children(e))
            if isinstance(e, E.BinOp) and e.op in ("add", "mul", "shl"):
                if e.width == E.I32 or (e.width == E.U32
                                        and self.options.check_unsigned_wrap):
                    out.append(e)
            elif (isinstance(e, E.Cast) and self.options.check_narrowing
                  and not e.width.is_float and not e.arg.width.is_float
                  and e.width.bits < e.arg.width.bits):
                out.append(e)
        return out

    @staticmethod
    def _range_pin(node: E.Expr) -> E.Expr:
        """Constrain a flagged node to behave as if it never overflowed."""
        if isinstance(node, E.Cast):
            lo, hi = node.width.bounds()
            value: E.Expr = node.arg
        else:
            lo, hi = node.width.bounds()
            value = node
        return E.and_(
            E.Cmp("ge", value, E.Const(lo, E.I64)),
            E.Cmp("le", value, E.Const(hi, E.I64)),
        )

    # -- DataRace ----------------------------------------------------------

    def store_site(self, state: ExecState, region: Region, addr: Address,
                   nbytes: int, line: int, col: int, text: str) -> None:
        if not self.enabled or state.thread is None:
            return
        key = ("DataRace", line, col)
        if self._memo.get(key):
            return
        offset = addr.offset_bytes
        rename = self._twin_renaming(state, offset)
        twin_path = [E.substitute(p, rename) for p in state.path]
        twin_offset = E.substitute(offset, rename)
        assertions = state.path + twin_path
        assertions.append(E.Cmp("eq", offset, twin_offset))
        assertions.append(self._distinctness(state.thread, rename,
                                             shared=region.kind == "shared"))
        verdict = self.solver.check(assertions)
        if verdict.is_sat:
            witness = canonicalize_witness(self.solver, assertions, verdict,
                                           self.table)
            self.findings.append(Finding(
                kind="DataRace", kernel=self.kernel, line=line, column=col,
                blamed_text=text, blamed_expr=offset,
                status=self._proven(state, key),
                witness=witness, region=region.rid, offset_expr=offset))
        elif verdict.is_unknown:
            self.findings.append(Finding(
                kind="DataRace", kernel=self.kernel, line=line, column=col,
                blamed_text=text, blamed_expr=offset, status="unknown",
                region=region.rid, offset_expr=offset))

    def _twin_renaming(self, state: ExecState,
                       offset: E.Expr) -> Dict[str, E.Expr]:
        """Prime every thread-private symbol of the path and the offset.
        Launch dimensions, context counts, and tensor fields stay shared:
        both threads live in the same launch."""
        pool: Dict[str, E.Sym] = {}
        for p in state.path:
            pool.update(E.symbols_of(p))
        pool.update(E.symbols_of(offset))
        rename: Dict[str, E.Expr] = {}
        for name, sym in pool.items():
            if self.table.origin_of(name) in THREAD_PRIVATE:
                rename[name] = E.Sym(name + "'", sym.width)
        return rename

    @staticmethod
    def _distinctness(thread: ThreadContext, rename: Dict[str, E.Expr],
                      shared: bool) -> E.Expr:
        def twin(sym: E.Sym) -> E.Expr:
            return rename.get(sym.name, sym)

        equalities = []
        block_pairs = []
        for a in AXES:
            b = thread.block_idx[a]
            block_pairs.append(E.Cmp("eq", b, twin(b)))
        thread_pairs = []
        for a in AXES:
            t = thread.thread_idx[a]
            thread_pairs.append(E.Cmp("eq", t, twin(t)))
        if shared:
            # only threads of one block see the same shared region
            equalities.extend(block_pairs)
            same = E.and_(*thread_pairs)
        else:
            same = E.and_(*(block_pairs + thread_pairs))
        distinct = E.not_(same)
        if equalities:
            return E.and_(*(equalities + [distinct]))
        return distinct

    # -- InvalidDeref ------------------------------------------------------

    def deref_site(self, state: ExecState, addr: Address,
                   line: int, col: int, text: str) -> None:
        if not self.enabled or addr.known:
            return
        key = ("InvalidDeref", line, col)
        if self._memo.get(key):
            return
        verdict = self.solver.check(state.path)
        if verdict.is_sat:
            witness = canonicalize_witness(self.solver, state.path, verdict,
                                           self.table)
            self.findings.append(Finding(
                kind="InvalidDeref", kernel=self.kernel, line=line,
                column=col, blamed_text=text,
                blamed_expr=addr.offset_bytes,
                status=self._proven(state, key),
                witness=witness))
        elif verdict.is_unknown:
            self.findings.append(Finding(
                kind="InvalidDeref", kernel=self.kernel, line=line,
                column=col, blamed_text=text,
                blamed_expr=addr.offset_bytes, status="unknown"))
