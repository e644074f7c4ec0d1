"""Query and verdict types shared by all solver backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

from ..sym import expr as E


@dataclass(frozen=True)
class Verdict:
    """Sat carries a model for every symbol of the query; Unknown
    carries a reason string.  ``model`` values are plain ints."""

    status: str
    model: Optional[Dict[str, int]] = None
    reason: Optional[str] = None

    @classmethod
    def sat(cls, model: Dict[str, int]) -> "Verdict":
        return cls("sat", model=dict(model))

    @classmethod
    def unsat(cls) -> "Verdict":
        return cls("unsat")

    @classmethod
    def unknown(cls, reason: str) -> "Verdict":
        return cls("unknown", reason=reason)

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"

    @property
    def is_unknown(self) -> bool:
        return self.status == "unknown"


def validate_model(assertions: Sequence[E.Expr], model: Mapping[str, int]) -> bool:
    """Round-trip check: every assertion must evaluate truthy under the
    model in mathematical mode, and every bound symbol's value must lie
    inside its declared width.  Missing bindings or evaluation errors
    (division by zero) count as failure."""
    syms: Dict[str, E.Sym] = {}
    for a in assertions:
        syms.update(E.symbols_of(a))
    for name, sym in syms.items():
        if sym.width.is_float or name not in model:
            continue
        lo, hi = sym.width.bounds()
        if not lo <= model[name] <= hi:
            return False
    try:
        return all(E.evaluate(a, model, "mathematical") for a in assertions)
    except E.EvalError:
        return False


@dataclass
class SolverStats:
    queries: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    time_s: float = 0.0
    external_queries: int = 0

    def as_dict(self) -> Dict[str, object]:
        return {
            "queries": self.queries,
            "sat": self.sat,
            "unsat": self.unsat,
            "unknown": self.unknown,
            "time_s": round(self.time_s, 3),
            "external_queries": self.external_queries,
        }
