"""Pretty printer.

Emits canonical surface syntax that re-parses to a structurally equal
unit (positions aside).  Parentheses are inserted from operator
precedence, so the output is minimal but unambiguous.
"""

from __future__ import annotations

from typing import List

from . import ast as A

_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "<<": 5, ">>": 5,
    "+": 6, "-": 6,
    "*": 7, "/": 7, "%": 7,
}
_UNARY_PREC = 8


def pretty_unit(unit: A.SourceUnit) -> str:
    parts: List[str] = []
    for w in unit.wrappers:
        parts.append(_wrapper(w))
    for k in unit.kernels:
        parts.append(_kernel(k))
    return "\n".join(parts)


def pretty_expr(e: A.Expr) -> str:
    return _expr(e, 0)


def _wrapper(w: A.WrapperDecl) -> str:
    params = ", ".join(f"{p.name}: {p.type}" for p in w.params)
    lines = [f"wrapper {w.name}({params}) {{"]
    for stmt in w.body:
        lines.append("  " + _wstmt(stmt))
    lines.append("  " + _launch(w.launch))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _kernel(k: A.KernelDecl) -> str:
    params = ", ".join(f"{p.name}: {p.type}" for p in k.params)
    lines = [f"kernel {k.name}({params}) {{"]
    lines.extend(_stmts(k.body, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _wstmt(stmt: A.Stmt) -> str:
    if isinstance(stmt, A.WLet):
        if stmt.decl_type is not None:
            return f"let {stmt.name}: {stmt.decl_type} = {_expr(stmt.value, 0)};"
        return f"let {stmt.name} = {_expr(stmt.value, 0)};"
    if isinstance(stmt, A.WAssert):
        return f"assert({_expr(stmt.cond, 0)});"
    if isinstance(stmt, A.WExprStmt):
        return f"{_expr(stmt.value, 0)};"
    raise TypeError(f"unexpected wrapper statement {type(stmt).__name__}")


def _launch(launch: A.LaunchSpec) -> str:
    grid = ", ".join(_expr(d, 0) for d in launch.grid)
    block = ", ".join(_expr(d, 0) for d in launch.block)
    config = f"{grid}; {block}"
    if launch.dyn_shared is not None:
        config += f"; {_expr(launch.dyn_shared, 0)}"
    args = ", ".join(_expr(a, 0) for a in launch.args)
    return f"launch {launch.kernel_name}<<<{config}>>>({args});"


def _stmts(body: List[A.Stmt], depth: int) -> List[str]:
    out: List[str] = []
    pad = "  " * depth
    for stmt in body:
        out.extend(pad + line for line in _stmt(stmt, depth))
    return out


def _stmt(stmt: A.Stmt, depth: int) -> List[str]:
    if isinstance(stmt, A.LocalDecl):
        if stmt.init is None:
            return [f"{stmt.decl_type} {stmt.name};"]
        return [f"{stmt.decl_type} {stmt.name} = {_expr(stmt.init, 0)};"]
    if isinstance(stmt, A.HandleDecl):
        return [f"{stmt.decl_type} {stmt.name} = {_expr(stmt.init, 0)};"]
    if isinstance(stmt, A.SharedDecl):
        if stmt.extern:
            return [f"extern shared {stmt.elem_type} {stmt.name}[];"]
        return [f"shared {stmt.elem_type} {stmt.name}[{_expr(stmt.extent, 0)}];"]
    if isinstance(stmt, A.Assign):
        return [_assign(stmt) + ";"]
    if isinstance(stmt, A.If):
        lines = [f"if ({_expr(stmt.cond, 0)}) {{"]
        lines.extend("  " + l for l in _block_lines(stmt.then_body, depth))
        if stmt.else_body:
            if len(stmt.else_body) == 1 and isinstance(stmt.else_body[0], A.If):
                nested = _stmt(stmt.else_body[0], depth)
                lines.append("} else " + nested[0])
                lines.extend(nested[1:])
                return lines
            lines.append("} else {")
            lines.extend("  " + l for l in _block_lines(stmt.else_body, depth))
        lines.append("}")
        return lines
    if isinstance(stmt, A.For):
        init = _stmt(stmt.init, depth)[0].rstrip(";")
        step = _assign(stmt.step)
        lines = [f"for ({init}; {_expr(stmt.guard, 0)}; {step}) {{"]
        lines.extend("  " + l for l in _block_lines(stmt.body, depth))
        lines.append("}")
        return lines
    if isinstance(stmt, A.Barrier):
        return ["barrier;"]
    if isinstance(stmt, A.Return):
        return ["return;"]
    raise TypeError(f"unexpected statement {type(stmt).__name__}")


def _block_lines(body: List[A.Stmt], depth: int) -> List[str]:
    out: List[str] = []
    for stmt in body:
        out.extend(_stmt(stmt, depth + 1))
    return out


def _assign(stmt: A.Assign) -> str:
    return f"{_expr(stmt.target, 0)} {stmt.op} {_expr(stmt.value, 0)}"


def _expr(e: A.Expr, parent_prec: int) -> str:
    if isinstance(e, A.IntLit):
        return f"{e.value}{e.suffix.upper()}"
    if isinstance(e, A.FloatLit):
        text = repr(e.value)
        if "." not in text and "e" not in text and "E" not in text:
            text += ".0"
        return text + e.suffix
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.Name):
        return e.ident
    if isinstance(e, A.Builtin):
        return e.name
    if isinstance(e, A.Un):
        inner = _expr(e.operand, _UNARY_PREC)
        return f"{e.op}{inner}"
    if isinstance(e, A.Bin):
        prec = _PREC[e.op]
        lhs = _expr(e.lhs, prec)
        rhs = _expr(e.rhs, prec + 1)  # left associative
        text = f"{lhs} {e.op} {rhs}"
        if prec < parent_prec:
            return f"({text})"
        return text
    if isinstance(e, A.CastExpr):
        return f"{e.target}({_expr(e.operand, 0)})"
    if isinstance(e, A.HandleCast):
        return f"{e.target}({_expr(e.operand, 0)})"
    if isinstance(e, A.Index):
        return f"{_expr(e.base, _UNARY_PREC + 1)}[{_expr(e.index, 0)}]"
    if isinstance(e, A.MethodCall):
        args = ", ".join(_expr(a, 0) for a in e.args)
        return f"{_expr(e.recv, _UNARY_PREC + 1)}.{e.method}({args})"
    raise TypeError(f"unexpected expression {type(e).__name__}")
