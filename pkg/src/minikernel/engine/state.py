"""Execution state for the path explorer.

A state is one partially explored path: variable environment, path
condition, region table, the twelve thread-identity symbols, loop
summaries, and detector bookkeeping.  Forking clones the state; the
containers are copied shallowly (expressions are immutable).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Union

from ..sym import expr as E
from ..tensor import Address, Region

Value = Union[E.Expr, Address]

AXES = ("x", "y", "z")

# symbol origin classes; thread-private origins are renamed for the twin
ORIGIN_THREAD = "thread-id"
ORIGIN_LAUNCH = "launch"
ORIGIN_LOOP = "loop-index"
ORIGIN_HAVOC = "havoc"
ORIGIN_CONTEXT = "context"
ORIGIN_SCALAR = "scalar-arg"
ORIGIN_TENSOR = "tensor-field"

THREAD_PRIVATE = frozenset({ORIGIN_THREAD, ORIGIN_LOOP, ORIGIN_HAVOC})


@dataclass
class Budget:
    wall_s: float = 3600.0
    query_timeout_s: float = 30.0
    max_states: int = 4096
    unroll_cap: int = 64

    def __post_init__(self) -> None:
        if self.wall_s <= 0 or self.query_timeout_s <= 0 \
                or self.max_states <= 0 or self.unroll_cap <= 0:
            raise ValueError("budget fields must be positive")


class SymbolTable:
    """Allocates globally unique symbols and remembers their origins."""

    def __init__(self) -> None:
        self.origins: Dict[str, str] = {}
        self._counter = itertools.count()

    def fresh(self, stem: str, width: E.Width, origin: str) -> E.Sym:
        name = f"{stem}${next(self._counter)}"
        self.origins[name] = origin
        return E.Sym(name, width)

    def named(self, name: str, width: E.Width, origin: str) -> E.Sym:
        prior = self.origins.get(name)
        if prior is not None and prior != origin:
            raise ValueError(f"symbol {name!r} reused with origin {origin!r}, "
                             f"was {prior!r}")
        self.origins[name] = origin
        return E.Sym(name, width)

    def origin_of(self, name: str) -> str:
        # twin primes share the origin of the symbol they shadow
        return self.origins.get(name.rstrip("'"), "unknown")


@dataclass
class ThreadContext:
    """The twelve per-launch symbols; created once per kernel launch."""

    block_idx: Dict[str, E.Sym]
    thread_idx: Dict[str, E.Sym]
    grid_dim: Dict[str, E.Sym]
    block_dim: Dict[str, E.Sym]

    @classmethod
    def create(cls, table: SymbolTable) -> "ThreadContext":
        return cls(
            block_idx={a: table.named(f"blockIdx.{a}", E.I32, ORIGIN_THREAD)
                       for a in AXES},
            thread_idx={a: table.named(f"threadIdx.{a}", E.I32, ORIGIN_THREAD)
                        for a in AXES},
            grid_dim={a: table.named(f"gridDim.{a}", E.I32, ORIGIN_LAUNCH)
                      for a in AXES},
            block_dim={a: table.named(f"blockDim.{a}", E.I32, ORIGIN_LAUNCH)
                       for a in AXES},
        )

    def builtin(self, name: str) -> E.Sym:
        base, axis = name.split(".")
        return {
            "blockIdx": self.block_idx,
            "threadIdx": self.thread_idx,
            "gridDim": self.grid_dim,
            "blockDim": self.block_dim,
        }[base][axis]

    def id_pairs(self) -> List[E.Sym]:
        """The six identity symbols, blockIdx first, x/y/z order."""
        return [self.block_idx[a] for a in AXES] + \
               [self.thread_idx[a] for a in AXES]

    def range_constraints(self) -> List[E.Expr]:
        out: List[E.Expr] = []
        zero = E.Const(0, E.I32)
        one = E.Const(1, E.I32)
        for a in AXES:
            out.append(E.Cmp("ge", self.grid_dim[a], one))
            out.append(E.Cmp("ge", self.block_dim[a], one))
            out.append(E.Cmp("ge", self.block_idx[a], zero))
            out.append(E.Cmp("lt", self.block_idx[a], self.grid_dim[a]))
            out.append(E.Cmp("ge", self.thread_idx[a], zero))
            out.append(E.Cmp("lt", self.thread_idx[a], self.block_dim[a]))
        return out


@dataclass
class LoopSummary:
    loop_line: int
    index_name: str
    index_sym: E.Sym
    exit_sym: Optional[E.Sym]
    init: E.Expr
    step: E.Expr
    havocked: List[str]


@dataclass
class ExecState:
    env: Dict[str, Value]
    path: List[E.Expr]
    regions: Dict[str, Region]
    thread: Optional[ThreadContext] = None
    loop_log: List[LoopSummary] = field(default_factory=list)
    flagged_io: List[E.Expr] = field(default_factory=list)
    barrier_epoch: int = 0
    unknown_path: bool = False
    diagnostics: List[str] = field(default_factory=list)
    # loop indices live in the path condition after the loop is gone;
    # the race twin renames every one of them
    loop_index_names: Set[str] = field(default_factory=set)

    def clone(self) -> "ExecState":
        return ExecState(
            env=dict(self.env),
            path=list(self.path),
            regions=dict(self.regions),
            thread=self.thread,
            loop_log=list(self.loop_log),
            flagged_io=list(self.flagged_io),
            barrier_epoch=self.barrier_epoch,
            unknown_path=self.unknown_path,
            diagnostics=list(self.diagnostics),
            loop_index_names=set(self.loop_index_names),
        )

    def assume(self, cond: E.Expr) -> None:
        cond = E.simplify(cond)
        if isinstance(cond, E.Const) and cond.width == E.BOOL and cond.value == 1:
            return
        self.path.append(cond)

    def lookup(self, name: str) -> Value:
        return self.env[name]


@dataclass
class RunClock:
    """Wall-clock budget bookkeeping shared across all states of a run."""

    budget: Budget
    started: float = field(default_factory=time.monotonic)
    states_created: int = 1
    exhausted_reason: Optional[str] = None

    def out_of_time(self) -> bool:
        return time.monotonic() - self.started > self.budget.wall_s

    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def charge_state(self) -> bool:
        """Count a newly created state; False when over budget."""
        self.states_created += 1
        return self.states_created <= self.budget.max_states
