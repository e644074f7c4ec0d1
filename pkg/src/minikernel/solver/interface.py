"""Solver facade: external backend when configured, builtin fallback,
verdict caching, optional SMT-LIB script dumps."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..sym import expr as E
from . import builtin
from .external import ExternalSolver
from .linear import Unsupported
from .query import SolverStats, Verdict
from .smtlib import encode

Interval = Tuple[Optional[int], Optional[int]]


@dataclass
class SolverOptions:
    timeout_s: float = 30.0
    deadline: Optional[float] = None  # absolute time.monotonic() stamp
    external_cmd: Optional[Sequence[str]] = None
    dump_dir: Optional[str] = None
    max_paths: int = 512
    node_budget: int = 20000


class Solver:
    """One instance per analysis; caches verdicts by canonical text."""

    def __init__(self, options: Optional[SolverOptions] = None) -> None:
        self.options = options or SolverOptions()
        self.stats = SolverStats()
        self._cache: Dict[object, Verdict] = {}
        self._external: Optional[ExternalSolver] = None
        if self.options.external_cmd:
            self._external = ExternalSolver(
                self.options.external_cmd, self.options.timeout_s
            )
        self._dump_n = 0

    def close(self) -> None:
        if self._external is not None:
            self._external.close()

    def check(
        self,
        assertions: Sequence[E.Expr],
        bounds: Mapping[str, Interval] | None = None,
    ) -> Verdict:
        key = (
            tuple(E.render(a) for a in assertions),
            tuple(sorted((bounds or {}).items())),
        )
        got = self._cache.get(key)
        if got is not None:
            return got
        t0 = time.monotonic()
        self.stats.queries += 1
        deadline = t0 + self.timeout_for_now()
        self._dump(assertions, bounds)
        verdict: Optional[Verdict] = None
        if self._external is not None:
            self.stats.external_queries += 1
            verdict = self._external.check(assertions, bounds, deadline)
            if verdict.is_unknown:
                verdict = None
        if verdict is None:
            verdict = builtin.check_assertions(
                assertions,
                bounds,
                max_paths=self.options.max_paths,
                node_budget=self.options.node_budget,
                deadline=deadline,
            )
        self.stats.time_s += time.monotonic() - t0
        setattr(
            self.stats,
            verdict.status,
            getattr(self.stats, verdict.status) + 1,
        )
        self._cache[key] = verdict
        return verdict

    def timeout_for_now(self) -> float:
        budget = self.options.timeout_s
        if self.options.deadline is not None:
            budget = min(budget, self.options.deadline - time.monotonic())
        return max(budget, 0.05)

    def _dump(self, assertions: Sequence[E.Expr], bounds) -> None:
        if not self.options.dump_dir:
            return
        try:
            script, _ = encode(assertions, bounds)
        except Unsupported:
            return
        os.makedirs(self.options.dump_dir, exist_ok=True)
        path = os.path.join(self.options.dump_dir, f"query_{self._dump_n:05d}.smt2")
        self._dump_n += 1
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(script)


def _probe(op: str, sym: E.Sym, bound: int) -> E.Expr:
    return E.Cmp(op, sym, E.Const(bound, sym.width))


def minimize(
    solver: Solver,
    assertions: Sequence[E.Expr],
    sym: E.Sym,
    bounds: Mapping[str, Interval] | None = None,
    base: Optional[Verdict] = None,
    max_iter: int = 96,
) -> Tuple[Verdict, bool]:
    """Drive the model value of ``sym`` to its minimum by bisection.

    Returns (verdict, exact).  ``exact`` is False when an unknown probe
    or the iteration cap kept the search from converging; the verdict
    is then still sat, just not provably minimal.
    """
    v = base if base is not None else solver.check(assertions, bounds)
    if not v.is_sat:
        return v, True
    lo = sym.width.bounds()[0]
    if bounds and sym.name in bounds and bounds[sym.name][0] is not None:
        lo = max(lo, bounds[sym.name][0])  # type: ignore[arg-type]
    exact = True
    cur = v.model[sym.name]  # type: ignore[index]
    it = 0
    while lo < cur:
        it += 1
        if it > max_iter:
            exact = False
            break
        mid = (lo + cur) // 2
        probe = list(assertions) + [_probe("le", sym, mid)]
        r = solver.check(probe, bounds)
        if r.is_sat:
            v = r
            cur = r.model[sym.name]  # type: ignore[index]
        elif r.is_unsat:
            lo = mid + 1
        else:
            exact = False
            lo = mid + 1
    return Verdict.sat(v.model), exact  # strip probe bookkeeping


def maximize(
    solver: Solver,
    assertions: Sequence[E.Expr],
    sym: E.Sym,
    bounds: Mapping[str, Interval] | None = None,
    base: Optional[Verdict] = None,
    max_iter: int = 96,
) -> Tuple[Verdict, bool]:
    v = base if base is not None else solver.check(assertions, bounds)
    if not v.is_sat:
        return v, True
    hi = sym.width.bounds()[1]
    if bounds and sym.name in bounds and bounds[sym.name][1] is not None:
        hi = min(hi, bounds[sym.name][1])  # type: ignore[arg-type]
    exact = True
    cur = v.model[sym.name]  # type: ignore[index]
    it = 0
    while cur < hi:
        it += 1
        if it > max_iter:
            exact = False
            break
        mid = -((-(cur + hi)) // 2)  # ceil
        probe = list(assertions) + [_probe("ge", sym, mid)]
        r = solver.check(probe, bounds)
        if r.is_sat:
            v = r
            cur = r.model[sym.name]  # type: ignore[index]
        elif r.is_unsat:
            hi = mid - 1
        else:
            exact = False
            hi = mid - 1
    return Verdict.sat(v.model), exact
