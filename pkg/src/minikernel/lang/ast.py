"""AST node definitions.

Every node carries the (line, col) of its introducing token.  Types are
filled in by the checker: expression nodes gain a ``ty`` field (a
TypeRef) and implicit widenings become explicit CastExpr nodes, so
downstream passes never reason about coercions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

# ---------------------------------------------------------------------------
# types

SCALAR_NAMES = ("i16", "i32", "i64", "u16", "u32", "u64", "f16", "f32", "f64", "bool")


@dataclass(frozen=True)
class ScalarType:
    name: str  # one of SCALAR_NAMES

    def __str__(self) -> str:
        return self.name

    @property
    def is_float(self) -> bool:
        return self.name.startswith("f")

    @property
    def is_signed(self) -> bool:
        return self.name.startswith("i") or self.is_float

    @property
    def bits(self) -> int:
        return 1 if self.name == "bool" else int(self.name[1:])

    @property
    def sizeof(self) -> int:
        return max(1, self.bits // 8)


@dataclass(frozen=True)
class TensorType:
    def __str__(self) -> str:
        return "tensor"


@dataclass(frozen=True)
class HandleType:
    elem: ScalarType
    group: int = 1  # elements touched per index step

    def __str__(self) -> str:
        if self.group != 1:
            return f"handle<{self.elem}, {self.group}>"
        return f"handle<{self.elem}>"

    @property
    def access_bytes(self) -> int:
        return self.elem.sizeof * self.group


TypeRef = Union[ScalarType, TensorType, HandleType]

BOOL_T = ScalarType("bool")
I32_T = ScalarType("i32")
I64_T = ScalarType("i64")
U32_T = ScalarType("u32")
U64_T = ScalarType("u64")
F64_T = ScalarType("f64")


# ---------------------------------------------------------------------------
# expressions


@dataclass
class Expr:
    line: int = field(default=0, kw_only=True, compare=False)
    col: int = field(default=0, kw_only=True, compare=False)
    ty: Optional[TypeRef] = field(default=None, kw_only=True, compare=False)


@dataclass
class IntLit(Expr):
    value: int = 0
    suffix: str = ""  # "", "l", "u", "ul"


@dataclass
class FloatLit(Expr):
    value: float = 0.0
    suffix: str = ""  # "", "f"


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class Name(Expr):
    ident: str = ""


@dataclass
class Builtin(Expr):
    """Thread-identity builtins: threadIdx.x and friends."""

    name: str = ""  # e.g. "threadIdx.x"


@dataclass
class Bin(Expr):
    op: str = ""  # + - * / % << >> < <= > >= == != && ||
    lhs: Expr = None  # type: ignore[assignment]
    rhs: Expr = None  # type: ignore[assignment]


@dataclass
class Un(Expr):
    op: str = ""  # - !
    operand: Expr = None  # type: ignore[assignment]


@dataclass
class CastExpr(Expr):
    target: ScalarType = None  # type: ignore[assignment]
    operand: Expr = None  # type: ignore[assignment]
    implicit: bool = False  # inserted by the checker (widening at assignment)


@dataclass
class HandleCast(Expr):
    """handle<T>(int-expr): reinterpret an integer as an address."""

    target: HandleType = None  # type: ignore[assignment]
    operand: Expr = None  # type: ignore[assignment]


@dataclass
class Index(Expr):
    base: Expr = None  # type: ignore[assignment]
    index: Expr = None  # type: ignore[assignment]


@dataclass
class MethodCall(Expr):
    """Wrapper-side tensor method: input.numel(), weight.size(0), ..."""

    recv: Expr = None  # type: ignore[assignment]
    method: str = ""
    args: List[Expr] = field(default_factory=list)


BUILTIN_BASES = frozenset({"threadIdx", "blockIdx", "blockDim", "gridDim"})
BUILTIN_AXES = ("x", "y", "z")


# ---------------------------------------------------------------------------
# statements


@dataclass
class Stmt:
    line: int = field(default=0, kw_only=True, compare=False)
    col: int = field(default=0, kw_only=True, compare=False)


@dataclass
class LocalDecl(Stmt):
    decl_type: ScalarType = None  # type: ignore[assignment]
    name: str = ""
    init: Optional[Expr] = None


@dataclass
class HandleDecl(Stmt):
    decl_type: HandleType = None  # type: ignore[assignment]
    name: str = ""
    init: Expr = None  # type: ignore[assignment]


@dataclass
class SharedDecl(Stmt):
    elem_type: ScalarType = None  # type: ignore[assignment]
    name: str = ""
    extent: Optional[Expr] = None  # None for extern shared
    extern: bool = False


@dataclass
class Assign(Stmt):
    target: Expr = None  # Name or Index  # type: ignore[assignment]
    op: str = "="  # = += -= *=
    value: Expr = None  # type: ignore[assignment]


@dataclass
class If(Stmt):
    cond: Expr = None  # type: ignore[assignment]
    then_body: List[Stmt] = field(default_factory=list)
    else_body: List[Stmt] = field(default_factory=list)


@dataclass
class For(Stmt):
    init: Stmt = None  # LocalDecl or Assign  # type: ignore[assignment]
    guard: Expr = None  # type: ignore[assignment]
    step: Assign = None  # type: ignore[assignment]
    body: List[Stmt] = field(default_factory=list)


@dataclass
class Barrier(Stmt):
    pass


@dataclass
class Return(Stmt):
    pass


# ---------------------------------------------------------------------------
# wrapper statements


@dataclass
class WLet(Stmt):
    name: str = ""
    decl_type: Optional[ScalarType] = None  # None when bound to a tensor-producing method
    value: Expr = None  # type: ignore[assignment]


@dataclass
class WAssert(Stmt):
    cond: Expr = None  # type: ignore[assignment]


@dataclass
class WExprStmt(Stmt):
    value: Expr = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# declarations


@dataclass
class Param:
    name: str
    type: TypeRef
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass
class LaunchSpec(Stmt):
    kernel_name: str = ""
    grid: List[Expr] = field(default_factory=list)  # 1..3 entries
    block: List[Expr] = field(default_factory=list)
    dyn_shared: Optional[Expr] = None
    args: List[Expr] = field(default_factory=list)


@dataclass
class WrapperDecl:
    name: str
    params: List[Param]
    body: List[Stmt]  # WLet / WAssert / WExprStmt
    launch: LaunchSpec
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass
class KernelDecl:
    name: str
    params: List[Param]
    body: List[Stmt]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass
class SourceUnit:
    wrappers: List[WrapperDecl]
    kernels: List[KernelDecl]
    source_name: str = "<input>"

    def kernel(self, name: str) -> KernelDecl:
        for k in self.kernels:
            if k.name == name:
                return k
        raise KeyError(name)

    def wrapper(self, name: str) -> WrapperDecl:
        for w in self.wrappers:
            if w.name == name:
                return w
        raise KeyError(name)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


class SourceError(Exception):
    """Raised by parse/typecheck entry points that collect diagnostics."""

    def __init__(self, diagnostics: List[Diagnostic]) -> None:
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def walk_exprs(e: Expr):
    """Yield e and every sub-expression, pre-order."""
    yield e
    if isinstance(e, Bin):
        yield from walk_exprs(e.lhs)
        yield from walk_exprs(e.rhs)
    elif isinstance(e, Un):
        yield from walk_exprs(e.operand)
    elif isinstance(e, (CastExpr, HandleCast)):
        yield from walk_exprs(e.operand)
    elif isinstance(e, Index):
        yield from walk_exprs(e.base)
        yield from walk_exprs(e.index)
    elif isinstance(e, MethodCall):
        yield from walk_exprs(e.recv)
        for a in e.args:
            yield from walk_exprs(a)


def walk_stmts(stmts: List[Stmt]):
    """Yield every statement, pre-order, descending into blocks."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_stmts(s.then_body)
            yield from walk_stmts(s.else_body)
        elif isinstance(s, For):
            yield s.init
            yield s.step
            yield from walk_stmts(s.body)
