"""Findings, report assembly, and witness canonicalization.

Witnesses are made deterministic by lexicographic optimization over the
model symbols: context counts first (minimized), then scalar arguments
(minimized, name order), then thread identities (maximized — the
interesting thread is the furthest one), then loop indices and every
remaining symbol (minimized, name order).  Each optimized symbol is
pinned by an equality before the next is touched, so reruns produce the
same witness bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..sym import expr as E
from ..solver.interface import Solver, maximize, minimize
from ..solver.query import Verdict
from .state import AXES, ORIGIN_LOOP, ORIGIN_SCALAR, SymbolTable

REPORT_VERSION = 1

KIND_ORDER = ("IntegerOverflow", "OutOfBounds", "DataRace", "InvalidDeref")


@dataclass
class Finding:
    kind: str
    kernel: str
    line: int
    column: int
    blamed_text: str
    blamed_expr: E.Expr
    status: str  # "sat" | "unknown"
    witness: Dict[str, int] = field(default_factory=dict)
    region: Optional[str] = None
    offset_expr: Optional[E.Expr] = None  # OOB/race: the byte offset

    def to_json_obj(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "kernel": self.kernel,
            "line": self.line,
            "column": self.column,
            "blamed": self.blamed_text,
            "status": self.status,
            "witness": {k: self.witness[k] for k in sorted(self.witness)},
            "region": self.region,
        }


@dataclass
class ReportSet:
    unit: str
    wrapper: str
    kernel: str
    context_digest: str
    coverage: str  # "complete" | "budget-exhausted"
    findings: List[Finding]
    diagnostics: List[str] = field(default_factory=list)
    elapsed_s: float = 0.0
    states: int = 0
    queries: int = 0

    def to_json(self) -> str:
        doc = {
            "version": REPORT_VERSION,
            "unit": self.unit,
            "wrapper": self.wrapper,
            "kernel": self.kernel,
            "context_digest": self.context_digest,
            "coverage": self.coverage,
            "budget": {
                "elapsed_s": round(self.elapsed_s, 3),
                "states": self.states,
                "queries": self.queries,
            },
            "findings": [f.to_json_obj() for f in self.findings],
            "diagnostics": list(self.diagnostics),
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [
            f"unit {self.unit}, wrapper {self.wrapper} -> kernel {self.kernel}",
            f"coverage: {self.coverage}  "
            f"(states {self.states}, queries {self.queries}, "
            f"{self.elapsed_s:.1f}s)",
        ]
        if not self.findings:
            lines.append("no findings")
        for f in self.findings:
            lines.append(
                f"{f.kind} at {f.kernel}:{f.line}:{f.column}  {f.blamed_text}")
            if f.status == "unknown":
                lines.append("  status: unknown (solver gave up)")
            elif f.witness:
                pairs = ", ".join(f"{k}={v}" for k, v in sorted(f.witness.items()))
                lines.append(f"  witness: {pairs}")
            if f.region:
                lines.append(f"  region: {f.region}")
        for d in self.diagnostics:
            lines.append(f"note: {d}")
        return "\n".join(lines) + "\n"


def merge_findings(findings: Sequence[Finding]) -> List[Finding]:
    """Deduplicate per (kind, kernel, line) and apply the counting rule.

    A sat OutOfBounds already passed the detector's implication test
    (its witness keeps every overflow-eligible node in range), so it
    counts on its own.  An *undecided* OutOfBounds whose offset contains
    the blamed node of a reported IntegerOverflow (or shares its line)
    is most likely that overflow's shadow and folds into it."""
    deduped: Dict[Tuple[str, str, int], Finding] = {}
    for f in findings:
        key = (f.kind, f.kernel, f.line)
        if key not in deduped:
            deduped[key] = f
    overflows = [f for f in deduped.values() if f.kind == "IntegerOverflow"]

    def dominated(f: Finding) -> bool:
        if f.kind != "OutOfBounds" or f.status != "unknown":
            return False
        for io in overflows:
            if io.kernel != f.kernel:
                continue
            if io.line == f.line:
                return True
            probe = f.offset_expr if f.offset_expr is not None else f.blamed_expr
            if E.contains(probe, io.blamed_expr):
                return True
        return False

    kept = [f for f in deduped.values() if not dominated(f)]
    kept.sort(key=lambda f: (f.kernel, f.line, KIND_ORDER.index(f.kind),
                             f.column))
    return kept


# ---------------------------------------------------------------------------
# witness canonicalization


def canonicalize_witness(
    solver: Solver,
    assertions: Sequence[E.Expr],
    base: Verdict,
    table: SymbolTable,
) -> Dict[str, int]:
    """Pin every model symbol by lexicographic optimization (see module
    docstring for the order).  Falls back to the base model for symbols
    whose optimization hits unknowns."""
    if not base.is_sat or base.model is None:
        return {}
    syms: Dict[str, E.Sym] = {}
    for a in assertions:
        syms.update(E.symbols_of(a))
    model = dict(base.model)
    pinned = list(assertions)
    verdict = base

    for name, direction in _optimization_order(syms, table):
        sym = syms[name]
        fn = maximize if direction == "max" else minimize
        verdict, _ = fn(solver, pinned, sym, base=verdict)
        if not verdict.is_sat or verdict.model is None:
            verdict = Verdict.sat(model)
            continue
        model = dict(verdict.model)
        pinned = pinned + [E.Cmp("eq", sym, E.Const(model[name], sym.width))]
    return {name: model[name] for name in sorted(syms) if name in model}


def _optimization_order(syms: Dict[str, E.Sym],
                        table: SymbolTable) -> List[Tuple[str, str]]:
    present = set(syms)
    order: List[Tuple[str, str]] = []
    taken = set()

    def take(name: str, direction: str) -> None:
        if name in present and name not in taken:
            order.append((name, direction))
            taken.add(name)

    for name in ("BS", "SL", "TC"):
        take(name, "min")
    scalars = sorted(n for n in present
                     if table.origin_of(n) == ORIGIN_SCALAR)
    for name in scalars:
        take(name, "min")
    for stem in ("blockIdx", "threadIdx"):
        for prime in ("", "'"):
            for a in AXES:
                take(f"{stem}.{a}{prime}", "max")
    loops = sorted(n for n in present if table.origin_of(n) == ORIGIN_LOOP)
    for name in loops:
        take(name, "min")
    for name in sorted(present - taken):
        take(name, "min")
    return order
