"""Structural analysis of `for` loops.

Three execution strategies, chosen in this order:

* thread-partitioned: the init expression depends on a thread identity,
  the step is loop-invariant and provably positive, and the bound is
  loop-invariant.  One symbolic pass over the body stands in for the
  whole iteration space (grid-stride idiom).
* concrete: init, guard, and step fold to constants and the trip count
  stays under the unroll cap; the loop is executed iteration by
  iteration.
* general: unrolled up to the cap, then the index and every variable the
  body assigns are havocked and the exit condition is assumed.

This module only classifies; the executor applies the strategy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Set

from ..lang import ast
from ..sym import expr as E
from .state import ORIGIN_LAUNCH, SymbolTable


@dataclass
class LoopShape:
    """Canonical `for (i = init; i < bound; i += step)` decomposition."""

    index: str
    declares: bool
    decl_type: Optional[ast.ScalarType]
    init: ast.Expr
    cmp: str  # "lt" | "le"
    bound: ast.Expr
    step: ast.Expr


def loop_shape(stmt: ast.For) -> Optional[LoopShape]:
    init = stmt.init
    if isinstance(init, ast.LocalDecl) and init.init is not None \
            and isinstance(init.decl_type, ast.ScalarType) \
            and not init.decl_type.is_float:
        index, declares, decl_type, init_expr = \
            init.name, True, init.decl_type, init.init
    elif isinstance(init, ast.Assign) and init.op == "=" \
            and isinstance(init.target, ast.Name):
        index, declares, decl_type, init_expr = \
            init.target.ident, False, None, init.value
    else:
        return None

    guard = stmt.guard
    if not (isinstance(guard, ast.Bin) and guard.op in ("<", "<=")
            and isinstance(guard.lhs, ast.Name) and guard.lhs.ident == index):
        return None
    cmp = "lt" if guard.op == "<" else "le"

    step = stmt.step
    if not (isinstance(step, ast.Assign) and isinstance(step.target, ast.Name)
            and step.target.ident == index):
        return None
    if step.op == "+=":
        step_expr = step.value
    elif step.op == "=" and isinstance(step.value, ast.Bin) \
            and step.value.op == "+":
        b = step.value
        if isinstance(b.lhs, ast.Name) and b.lhs.ident == index:
            step_expr = b.rhs
        elif isinstance(b.rhs, ast.Name) and b.rhs.ident == index:
            step_expr = b.lhs
        else:
            return None
    else:
        return None

    return LoopShape(index=index, declares=declares, decl_type=decl_type,
                     init=init_expr, cmp=cmp, bound=stmt.guard.rhs,
                     step=step_expr)


def assigned_names(body) -> Set[str]:
    """Environment names the statements write: assignments to plain
    names, local declarations, and nested loop variables.  Stores through
    handles do not touch the environment."""
    out: Set[str] = set()
    for s in ast.walk_stmts(body):
        if isinstance(s, ast.Assign) and isinstance(s.target, ast.Name):
            out.add(s.target.ident)
        elif isinstance(s, (ast.LocalDecl, ast.HandleDecl)):
            out.add(s.name)
    return out


def mentioned_names(e: ast.Expr) -> Set[str]:
    return {n.ident for n in ast.walk_exprs(e) if isinstance(n, ast.Name)}


def is_invariant(e: ast.Expr, index: str, assigned: Set[str]) -> bool:
    names = mentioned_names(e)
    return index not in names and not (names & assigned)


def provably_positive(e: E.Expr, table: SymbolTable) -> bool:
    """Conservative positivity: constants, launch-dimension symbols
    (always at least 1), and sums/products of those."""
    e = E.simplify(e)
    if isinstance(e, E.Const):
        return not e.width.is_float and e.value > 0
    if isinstance(e, E.Sym):
        return table.origin_of(e.name) == ORIGIN_LAUNCH
    if isinstance(e, E.Cast) and not e.width.is_float:
        return provably_positive(e.arg, table)
    if isinstance(e, E.BinOp) and e.op in ("add", "mul"):
        return provably_positive(e.lhs, table) \
            and provably_positive(e.rhs, table)
    return False


def contains_origins(e: E.Expr, table: SymbolTable,
                     origins: frozenset) -> bool:
    return any(table.origin_of(name) in origins
               for name in E.symbols_of(e))
