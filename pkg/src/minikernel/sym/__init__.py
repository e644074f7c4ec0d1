from .expr import (
    BOOL,
    F16,
    F32,
    F64,
    I16,
    I32,
    I64,
    U16,
    U32,
    U64,
    ARITH_OPS,
    BOOL_OPS,
    CMP_OPS,
    BinOp,
    BoolOp,
    Cast,
    Cmp,
    Const,
    EvalError,
    Expr,
    Ite,
    Sym,
    Width,
    contains,
    evaluate,
    interval,
    render,
    simplify,
    substitute,
    symbols_of,
    wrap,
)

__all__ = [
    "ARITH_OPS",
    "BOOL",
    "BOOL_OPS",
    "BinOp",
    "BoolOp",
    "CMP_OPS",
    "Cast",
    "Cmp",
    "Const",
    "EvalError",
    "Expr",
    "F16",
    "F32",
    "F64",
    "I16",
    "I32",
    "I64",
    "Ite",
    "Sym",
    "U16",
    "U32",
    "U64",
    "Width",
    "contains",
    "evaluate",
    "interval",
    "render",
    "simplify",
    "substitute",
    "symbols_of",
    "wrap",
]
